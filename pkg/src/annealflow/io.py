"""Sample CSV files: header ``dim_1,...,dim_d``, one row per sample, 17 significant digits."""

from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

from .errors import ValidationError


def format_float(v: float) -> str:
    # 17 significant digits always round-trips a binary64
    return format(float(v), ".17g")


def samples_to_csv(X, dim: int | None = None) -> str:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(0, dim) if X.size == 0 and dim else X[:, None]
    if X.ndim != 2:
        raise ValidationError("samples must be an (n, d) array")
    d = X.shape[1] if dim is None else dim
    if X.shape[1] != d:
        raise ValidationError(f"samples have {X.shape[1]} columns, expected {d}")
    lines = [",".join(f"dim_{i}" for i in range(1, d + 1))]
    lines += [",".join(format_float(v) for v in row) for row in X]
    return "\n".join(lines) + "\n"


def write_samples(path, X, dim: int | None = None) -> Path:
    path = Path(path)
    path.write_text(samples_to_csv(X, dim))
    return path


def parse_samples(text: str, source: str = "<string>") -> np.ndarray:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ValidationError(f"{source}: empty sample file (missing header)") from None
    d = len(header)
    if [h.strip() for h in header] != [f"dim_{i}" for i in range(1, d + 1)]:
        raise ValidationError(f"{source}: line 1: header must be dim_1,...,dim_d")
    rows = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != d:
            raise ValidationError(f"{source}: line {lineno}: expected {d} fields, got {len(row)}")
        try:
            rows.append([float(v) for v in row])
        except ValueError:
            raise ValidationError(f"{source}: line {lineno}: non-numeric field") from None
    return np.asarray(rows, dtype=np.float64).reshape(len(rows), d)


def read_samples(path) -> np.ndarray:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ValidationError(f"cannot read {path}: {e.strerror}") from None
    return parse_samples(text, str(path))
