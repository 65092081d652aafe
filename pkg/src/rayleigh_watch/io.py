"""On-disk formats: CSV time series and binary field snapshots.

A snapshot is a pair ``NNNN.json`` / ``NNNN.f64``. The binary file holds
64-bit little-endian floats in row-major order (last axis fastest, i.e. y
for channel fields); the JSON sidecar records shape, time, field name and
the sup-norm scale.
"""

import json
import math
import os

import numpy as np

SNAPSHOT_DTYPE = "<f8"


def format_value(x):
    """17 significant digits for floats, 1/0 for booleans, ``na`` for missing."""
    if x is None:
        return "na"
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    return format(x, ".17g")


class CsvSeries:
    """Append-only CSV writer that flushes after every row."""

    def __init__(self, path, columns):
        self.path = path
        self.columns = tuple(columns)
        self._fh = open(path, "w", newline="", encoding="ascii")
        self._fh.write(",".join(self.columns) + "\n")
        self._fh.flush()
        self.rows = 0

    def write(self, values):
        if len(values) != len(self.columns):
            raise ValueError(f"row has {len(values)} values for {len(self.columns)} columns")
        self._fh.write(",".join(format_value(v) for v in values) + "\n")
        self._fh.flush()
        self.rows += 1

    def close(self):
        if not self._fh.closed:
            self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_csv(path):
    """Header and rows (as strings) of a series file."""
    with open(path, encoding="ascii") as fh:
        lines = fh.read().splitlines()
    header = lines[0].split(",")
    return header, [ln.split(",") for ln in lines[1:]]


def write_snapshot(directory, index, values, field, t, **meta):
    """Write ``NNNN.json`` and ``NNNN.f64``; returns the two paths."""
    os.makedirs(directory, exist_ok=True)
    arr = np.ascontiguousarray(values, dtype=SNAPSHOT_DTYPE)
    stem = os.path.join(directory, f"{index:04d}")
    arr.tofile(stem + ".f64")
    side = {
        "index": int(index),
        "t": float(t),
        "field": field,
        "shape": list(arr.shape),
        "dtype": "float64-le",
        "order": "row-major, last axis fastest",
        "scale": float(np.max(np.abs(arr))) if arr.size else 0.0,
        "data": os.path.basename(stem + ".f64"),
    }
    side.update(meta)
    with open(stem + ".json", "w", encoding="utf-8") as fh:
        json.dump(side, fh, indent=1, sort_keys=True)
    return stem + ".json", stem + ".f64"


def read_snapshot(json_path):
    with open(json_path, encoding="utf-8") as fh:
        meta = json.load(fh)
    data_path = os.path.join(os.path.dirname(json_path), meta["data"])
    arr = np.fromfile(data_path, dtype=SNAPSHOT_DTYPE)
    return meta, arr.reshape(meta["shape"])


def write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.bool_,)):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if hasattr(o, "value"):
        return o.value
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def sanitize(obj):
    """Replace non-finite floats by strings so the output is strict JSON."""
    if isinstance(obj, dict):
        return {str(k): sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [sanitize(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj
