from .config import ExperimentConfig, load_config_file, parse_config_text
from .sweep import ResultRow, coord_csv, run_coord_check, run_lr_sweep, sweep_csv
from .tasks import TaskData, gen_teacher_student, load_text_corpus
from .plots import emit_plot, render_svg

__all__ = [
    "ExperimentConfig", "load_config_file", "parse_config_text",
    "ResultRow", "coord_csv", "run_coord_check", "run_lr_sweep", "sweep_csv",
    "TaskData", "gen_teacher_student", "load_text_corpus",
    "emit_plot", "render_svg",
]
