"""Self-contained SVG plots for sweep and coordinate-check results.

The SVG is built by plain string assembly with fixed-precision coordinates,
so identical input rows always produce byte-identical files.
"""

import math
from pathlib import Path

PLOT_KINDS = ("loss_vs_lr_by_width", "coord_check_by_width")

_W, _H = 640, 420
_ML, _MR, _MT, _MB = 70, 150, 30, 50
_PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
            "#8c564b", "#17becf", "#7f7f7f"]

_REQUIRED = {
    "loss_vs_lr_by_width": ("width", "lr", "val_loss"),
    "coord_check_by_width": ("width", "step", "layer", "rel_to_first"),
}


def _series(rows, kind):
    """Group rows into {width: [(x, y), ...]} for the requested plot kind."""
    need = _REQUIRED[kind]
    for r in rows:
        missing = [k for k in need if k not in r]
        if missing:
            raise ValueError(f"row missing keys {missing} for kind {kind}")
    series: dict[int, dict[float, list[float]]] = {}
    if kind == "loss_vs_lr_by_width":
        for r in rows:
            lr, y = float(r["lr"]), float(r["val_loss"])
            if lr <= 0 or not math.isfinite(y):
                continue
            series.setdefault(int(r["width"]), {}).setdefault(math.log10(lr), []).append(y)
        agg = {w: sorted((x, sum(v) / len(v)) for x, v in pts.items()) for w, pts in series.items()}
    else:
        for r in rows:
            y = float(r["rel_to_first"])
            if not math.isfinite(y):
                continue
            series.setdefault(int(r["width"]), {}).setdefault(float(int(r["step"])), []).append(y)
        # several layers per step: keep the worst (largest) one
        agg = {w: sorted((x, max(v)) for x, v in pts.items()) for w, pts in series.items()}
    agg = {w: pts for w, pts in agg.items() if pts}
    if not agg:
        raise ValueError("no plottable points after filtering non-finite values")
    return dict(sorted(agg.items()))


def _ticks(lo, hi, n=5):
    if hi == lo:
        return [lo]
    return [lo + (hi - lo) * i / (n - 1) for i in range(n)]


def render_svg(rows, kind: str) -> str:
    """Render rows (sequence of mappings) as a standalone SVG 1.1 document."""
    if kind not in PLOT_KINDS:
        raise ValueError(f"unknown plot kind {kind!r}; choose from {PLOT_KINDS}")
    rows = list(rows)
    if not rows:
        raise ValueError("no rows to plot")
    series = _series(rows, kind)
    xs = [x for pts in series.values() for x, _ in pts]
    ys = [y for pts in series.values() for _, y in pts]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    if x_hi == x_lo:
        x_lo, x_hi = x_lo - 0.5, x_hi + 0.5
    if y_hi == y_lo:
        y_lo, y_hi = y_lo - 0.5, y_hi + 0.5
    px = lambda x: _ML + (x - x_lo) / (x_hi - x_lo) * (_W - _ML - _MR)
    py = lambda y: _H - _MB - (y - y_lo) / (y_hi - y_lo) * (_H - _MT - _MB)

    x_label = "log10(learning rate)" if kind == "loss_vs_lr_by_width" else "step"
    y_label = "mean validation loss" if kind == "loss_vs_lr_by_width" else "max rel feature scale"
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}" font-family="monospace" font-size="11">',
        f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="white"/>',
        f'<line x1="{_ML}" y1="{_H - _MB}" x2="{_W - _MR}" y2="{_H - _MB}" stroke="black"/>',
        f'<line x1="{_ML}" y1="{_MT}" x2="{_ML}" y2="{_H - _MB}" stroke="black"/>',
        f'<text x="{(_ML + _W - _MR) // 2}" y="{_H - 12}" text-anchor="middle">{x_label}</text>',
        f'<text x="16" y="{(_MT + _H - _MB) // 2}" text-anchor="middle" '
        f'transform="rotate(-90 16 {(_MT + _H - _MB) // 2})">{y_label}</text>',
    ]
    for tx in _ticks(x_lo, x_hi):
        out.append(f'<line x1="{px(tx):.2f}" y1="{_H - _MB}" x2="{px(tx):.2f}" y2="{_H - _MB + 4}" stroke="black"/>')
        out.append(f'<text x="{px(tx):.2f}" y="{_H - _MB + 16}" text-anchor="middle">{tx:.3g}</text>')
    for ty in _ticks(y_lo, y_hi):
        out.append(f'<line x1="{_ML - 4}" y1="{py(ty):.2f}" x2="{_ML}" y2="{py(ty):.2f}" stroke="black"/>')
        out.append(f'<text x="{_ML - 8}" y="{py(ty):.2f}" text-anchor="end" dominant-baseline="middle">{ty:.3g}</text>')
    for i, (width, pts) in enumerate(series.items()):
        color = _PALETTE[i % len(_PALETTE)]
        coords = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in pts)
        out.append(f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        for x, y in pts:
            out.append(f'<circle cx="{px(x):.2f}" cy="{py(y):.2f}" r="2.5" fill="{color}"/>')
        ly = _MT + 16 * i
        out.append(f'<line x1="{_W - _MR + 12}" y1="{ly}" x2="{_W - _MR + 36}" y2="{ly}" '
                   f'stroke="{color}" stroke-width="1.5"/>')
        out.append(f'<text x="{_W - _MR + 42}" y="{ly + 4}">width {width}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_plot(rows, kind: str, out_path) -> None:
    svg = render_svg(rows, kind)
    Path(out_path).write_bytes(svg.encode("utf-8"))
