"""Desk-scale training tasks: a synthetic teacher-student regression and a
byte-level next-character task over a text file."""

from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass
class TaskData:
    train_x: np.ndarray   # input_dim x n_train
    train_y: np.ndarray   # output_dim x n_train (regression) or (n_train,) class ids
    val_x: np.ndarray
    val_y: np.ndarray
    input_dim: int
    output_dim: int


def _sample_teacher(rng, input_dim: int, output_dim: int, teacher_width: int):
    w1 = rng.standard_normal((teacher_width, input_dim)) / np.sqrt(input_dim)
    w2 = rng.standard_normal((output_dim, teacher_width)) / np.sqrt(teacher_width)
    return w1, w2


def teacher_weights(seed: int, input_dim: int, output_dim: int, teacher_width: int):
    """The fixed two-layer tanh teacher used by gen_teacher_student."""
    return _sample_teacher(np.random.default_rng(seed), input_dim, output_dim, teacher_width)


def teacher_forward(w1: np.ndarray, w2: np.ndarray, x: np.ndarray) -> np.ndarray:
    return w2 @ np.tanh(w1 @ x)


def gen_teacher_student(seed: int, input_dim: int, output_dim: int,
                        n_train: int, n_val: int, teacher_width: int) -> TaskData:
    """Gaussian inputs labeled by a fixed random two-layer tanh teacher.

    One input stream is drawn and split, so train and validation rows are
    disjoint; everything is deterministic for a fixed seed.
    """
    if min(input_dim, output_dim, teacher_width, n_train, n_val) < 1:
        raise ValueError("all dimensions and sample counts must be >= 1")
    rng = np.random.default_rng(seed)
    w1, w2 = _sample_teacher(rng, input_dim, output_dim, teacher_width)
    x = rng.standard_normal((input_dim, n_train + n_val))
    train_x = x[:, :n_train].copy()
    val_x = x[:, n_train:].copy()
    return TaskData(
        train_x=train_x, train_y=teacher_forward(w1, w2, train_x),
        val_x=val_x, val_y=teacher_forward(w1, w2, val_x),
        input_dim=input_dim, output_dim=output_dim,
    )


def load_text_corpus(path, context_len: int, val_fraction: float) -> TaskData:
    """Byte-level next-character task: summed one-hot context -> next byte class.

    The vocabulary is the set of distinct bytes present; the contiguous tail
    of the example stream becomes the validation split.
    """
    if context_len < 1:
        raise ValueError("context_len must be >= 1")
    if not (0.0 < val_fraction < 1.0):
        raise ValueError("val_fraction must lie in (0, 1)")
    p = Path(path)
    try:
        data = p.read_bytes()
    except OSError as exc:
        raise ValueError(f"cannot read corpus {p}: {exc}") from exc
    if len(data) < context_len + 2:
        raise ValueError(f"corpus {p} too short: {len(data)} bytes <= context_len + 1")
    vocab = sorted(set(data))
    index = {b: i for i, b in enumerate(vocab)}
    dim = len(vocab)
    ids = np.array([index[b] for b in data], dtype=np.int64)
    n_examples = len(data) - context_len
    x = np.zeros((dim, n_examples))
    for offset in range(context_len):
        np.add.at(x, (ids[offset:offset + n_examples], np.arange(n_examples)), 1.0)
    y = ids[context_len:]
    n_val = int(n_examples * val_fraction)
    n_val = min(max(n_val, 1), n_examples - 1)
    n_train = n_examples - n_val
    return TaskData(
        train_x=x[:, :n_train], train_y=y[:n_train],
        val_x=x[:, n_train:], val_y=y[n_train:],
        input_dim=dim, output_dim=dim,
    )
