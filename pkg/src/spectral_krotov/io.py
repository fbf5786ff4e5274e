"""CSV emission and ingestion for run outputs.

All files carry a one-line header and full double precision (17
significant digits); writes go through a temp-file-then-rename so a
crashed run never leaves a truncated file behind.  Formatting is fully
deterministic: identical arrays produce identical bytes.
"""

from __future__ import annotations

import os
import tempfile
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import InvalidInputError

__all__ = [
    "write_csv",
    "read_csv",
    "write_pulse",
    "read_pulse",
    "write_spectrum",
    "write_populations",
    "write_convergence",
    "write_summary",
]

_FMT = "%.17g"


def _atomic_write(path: Path, text: str):
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: str | Path, header: Sequence[str], columns: Sequence[np.ndarray]):
    """Write named columns as CSV. Integer columns are written as integers."""
    path = Path(path)
    if len(header) != len(columns):
        raise InvalidInputError(
            f"{len(header)} header names but {len(columns)} columns"
        )
    columns = [np.asarray(c) for c in columns]
    n = columns[0].shape[0]
    for name, c in zip(header, columns):
        if c.shape != (n,):
            raise InvalidInputError(
                f"column {name!r} has shape {c.shape}, expected ({n},)"
            )
    lines = [",".join(header)]
    for k in range(n):
        cells = []
        for c in columns:
            value = c[k]
            if np.issubdtype(c.dtype, np.integer):
                cells.append(str(int(value)))
            else:
                cells.append(_FMT % value)
        lines.append(",".join(cells))
    _atomic_write(path, "\n".join(lines) + "\n")


def read_csv(path: str | Path) -> tuple[list[str], np.ndarray]:
    """Read a CSV written by :func:`write_csv`.

    Returns (header, data) with data shaped (rows, columns).  Malformed
    rows raise with the 1-based line number.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InvalidInputError(f"cannot read {path}: {exc}") from exc
    lines = text.splitlines()
    if not lines:
        raise InvalidInputError(f"{path}: file is empty")
    header = lines[0].split(",")
    n_cols = len(header)
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.split(",")
        if len(cells) != n_cols:
            raise InvalidInputError(
                f"{path} line {lineno}: expected {n_cols} fields, got {len(cells)}"
            )
        try:
            rows.append([float(cell) for cell in cells])
        except ValueError as exc:
            raise InvalidInputError(f"{path} line {lineno}: {exc}") from exc
    if not rows:
        raise InvalidInputError(f"{path}: no data rows")
    return header, np.array(rows)


def write_pulse(path: str | Path, times: np.ndarray, eps: np.ndarray):
    write_csv(path, ["t", "eps"], [times, eps])


def read_pulse(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """Read a pulse file, checking the header and grid uniformity."""
    header, data = read_csv(path)
    if header != ["t", "eps"]:
        raise InvalidInputError(
            f"{path}: expected header 't,eps', got {','.join(header)!r}"
        )
    t = data[:, 0]
    if t.shape[0] < 2:
        raise InvalidInputError(f"{path}: a pulse needs at least 2 samples")
    dt = np.diff(t)
    if dt.min() <= 0 or not np.allclose(dt, dt[0], rtol=1e-9, atol=0.0):
        raise InvalidInputError(f"{path}: time samples must be uniformly increasing")
    return t, data[:, 1]


def write_spectrum(path: str | Path, omega: np.ndarray, amplitudes: np.ndarray):
    write_csv(
        path,
        ["omega", "re", "im", "abs2"],
        [omega, amplitudes.real, amplitudes.imag, np.abs(amplitudes) ** 2],
    )


def write_populations(
    path: str | Path, times: np.ndarray, pops: np.ndarray, labels: Sequence[str]
):
    columns = [times] + [pops[:, k] for k in range(pops.shape[1])]
    write_csv(path, ["t", *labels], columns)


def write_convergence(path: str | Path, entries):
    """One row per iteration from a sequence of IterationEntry objects."""
    write_csv(
        path,
        ["iter", "J_T", "J_a", "J", "delta_J", "monotone_flag"],
        [
            np.array([e.index for e in entries], dtype=int),
            np.array([e.j_target for e in entries]),
            np.array([e.j_constraint for e in entries]),
            np.array([e.j_total for e in entries]),
            np.array([e.delta_j for e in entries]),
            np.array([int(e.monotone) for e in entries], dtype=int),
        ],
    )


def write_summary(path: str | Path, fields: dict):
    """Key-value run summary, one 'key: value' line per entry."""
    lines = [f"{key}: {value}" for key, value in fields.items()]
    _atomic_write(Path(path), "\n".join(lines) + "\n")
