"""Matrix and report file formats.

Binary matrices (``.rspm``): magic ``b"RSPM"``, little-endian ``u32`` rows,
``u32`` cols, then ``rows * cols`` little-endian ``f64`` in row-major order.
CSV matrices have one row per line and no header unless ``skip_header``.
"""

from __future__ import annotations

import csv
import json
import math
import struct
from pathlib import Path

import numpy as np

from robpca.errors import ValidationError

MAGIC = b"RSPM"
_HEADER = struct.Struct("<4sII")


def write_rspm(path, matrix) -> None:
    a = np.ascontiguousarray(np.atleast_2d(np.asarray(matrix, dtype="<f8")))
    rows, cols = a.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, rows, cols))
        fh.write(a.tobytes(order="C"))


def read_rspm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ValidationError(f"{path}: truncated RSPM header")
    magic, rows, cols = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ValidationError(f"{path}: bad magic {magic!r}")
    expected = _HEADER.size + 8 * rows * cols
    if len(data) != expected:
        raise ValidationError(f"{path}: expected {expected} bytes, found {len(data)}")
    return np.frombuffer(data, dtype="<f8", offset=_HEADER.size).reshape(rows, cols).copy()


def read_csv_matrix(path, skip_header: bool = False) -> np.ndarray:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        if skip_header:
            next(reader, None)
        for line in reader:
            if not line or all(not c.strip() for c in line):
                continue
            try:
                rows.append([float(c) for c in line])
            except ValueError as exc:
                raise ValidationError(f"{path}: non-numeric entry ({exc})") from exc
    if not rows:
        raise ValidationError(f"{path}: no data rows")
    if len({len(r) for r in rows}) != 1:
        raise ValidationError(f"{path}: ragged rows")
    return np.array(rows)


def read_matrix(path, skip_header: bool = False) -> np.ndarray:
    """Read a CSV or RSPM matrix, detected by magic bytes."""
    try:
        with open(path, "rb") as fh:
            head = fh.read(4)
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from exc
    if head == MAGIC:
        return read_rspm(path)
    return read_csv_matrix(path, skip_header)


def write_csv_matrix(path, matrix, header: list[str] | None = None) -> None:
    a = np.atleast_2d(np.asarray(matrix, dtype=float))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if header:
            w.writerow(header)
        for row in a:
            w.writerow([repr(float(v)) for v in row])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        # JSON has no infinity; encode it as a string
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return None
        return v
    return obj


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True)


def write_json(path, obj) -> None:
    Path(path).write_text(dumps(obj) + "\n")


def write_rows_csv(path, rows: list[dict]) -> None:
    if not rows:
        Path(path).write_text("")
        return
    keys = list(rows[0])
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=keys)
        w.writeheader()
        for row in rows:
            w.writerow({k: _jsonable(row.get(k)) for k in keys})
