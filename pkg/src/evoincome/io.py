"""CSV/JSON readers and writers.

Floats in CSV files are written with 17 significant digits, so a file read
back and written again is byte-identical.  All writes go to a temporary
file in the target directory that is then renamed over the target.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile

import numpy as np

from .errors import ConfigError
from .estimation import EmpiricalDistribution


def fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def atomic_write(path, text):
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path, header, columns):
    """Write equal-length ``columns`` under ``header``."""
    cols = [np.asarray(c) for c in columns]
    if len(cols) != len(header):
        raise ValueError("one column per header field")
    n = len(cols[0]) if cols else 0
    if any(len(c) != n for c in cols):
        raise ValueError("columns differ in length")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for i in range(n):
        w.writerow([fmt(c[i]) for c in cols])
    atomic_write(path, buf.getvalue())


def _is_number(text):
    try:
        float(text)
    except ValueError:
        return False
    return True


def read_csv(path):
    """Return ``(header, data)``; ``header`` is ``None`` when the file has none."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    header = None
    if rows and not all(_is_number(v) for v in rows[0]):
        header, rows = rows[0], rows[1:]
    try:
        data = np.array([[float(v) for v in r] for r in rows], dtype=float)
    except ValueError as exc:
        raise ConfigError(f"{path}: non-numeric value ({exc})") from None
    width = len(header) if header else (data.shape[1] if data.size else 1)
    return header, data.reshape(-1, width)


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    return obj


def write_json(path, obj):
    """Write ``obj`` as JSON; non-finite floats become ``null``."""
    atomic_write(path, json.dumps(_clean(obj), indent=2, allow_nan=False) + "\n")


def read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None


def read_income_sample(path):
    header, data = read_csv(path)
    if header is not None and header != ["income"]:
        raise ConfigError(f"{path}: expected a single 'income' column, got {header}")
    if data.shape[1] != 1:
        raise ConfigError(f"{path}: expected a single column")
    x = data[:, 0]
    if np.any(~(x > 0)):
        raise ConfigError(f"{path}: incomes must be positive")
    return x


def read_histogram(path):
    header, data = read_csv(path)
    if header != ["bin_left", "bin_right", "density"]:
        raise ConfigError(f"{path}: expected columns bin_left, bin_right, density")
    try:
        return EmpiricalDistribution.from_bins(data[:, 0], data[:, 1], data[:, 2])
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def write_histogram(path, dist):
    write_csv(path, ["bin_left", "bin_right", "density"],
              [dist.bin_left, dist.bin_right, dist.density])


def read_income_data(path):
    """Histogram CSV or income sample CSV, detected from the header."""
    with open(path, newline="") as fh:
        first = fh.readline()
    if first.strip().startswith("bin_left"):
        return read_histogram(path)
    return EmpiricalDistribution(sample=read_income_sample(path))


def write_table(path_stem, header, columns, fmt_name="csv"):
    """Write a table as ``<stem>.csv`` or as column-keyed ``<stem>.json``."""
    if fmt_name == "csv":
        path = f"{path_stem}.csv"
        write_csv(path, header, columns)
    else:
        path = f"{path_stem}.json"
        write_json(path, {h: np.asarray(c).tolist() for h, c in zip(header, columns)})
    return path
