"""CSV and manifest emission.

One flat CSV dialect for every output: comma-separated, UTF-8, LF line
endings, a single header row naming the columns, and full-precision
scientific notation (17 significant digits, round-trip safe for binary64).
The run manifest is JSON with sorted keys; re-running a command from its
manifest reproduces the CSV outputs byte for byte.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np

from .errors import ConfigError


def format_number(v) -> str:
    """Full-precision text for one scalar (ints stay integral)."""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.17g}"


def write_csv(path, columns: dict) -> Path:
    """Write named 1-D columns (broadcast to a common length) as CSV."""
    if not columns:
        raise ConfigError("write_csv needs at least one column")
    arrays = {}
    n = 1
    for name, vals in columns.items():
        arr = np.atleast_1d(np.asarray(vals))
        if arr.ndim != 1:
            raise ConfigError(f"column {name!r} is not one-dimensional")
        arrays[name] = arr
        n = max(n, arr.size)
    for name, arr in arrays.items():
        if arr.size not in (1, n):
            raise ConfigError(
                f"column {name!r} has length {arr.size}, expected 1 or {n}"
            )
        if arr.size == 1:
            arrays[name] = np.broadcast_to(arr, (n,))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = list(arrays)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(names) + "\n")
        cols = [arrays[name] for name in names]
        for row in range(n):
            fh.write(",".join(format_number(c[row]) for c in cols) + "\n")
    return path


def write_grid_csv(path, outer_name, outer_vals, inner_name, inner_vals,
                   fields: dict) -> Path:
    """Long-format CSV over a (outer x inner) grid.

    Each field is a 2-D array of shape (len(outer), len(inner)); rows are
    emitted outer-major with the two coordinates repeated per row.
    """
    outer = np.atleast_1d(np.asarray(outer_vals, dtype=float))
    inner = np.atleast_1d(np.asarray(inner_vals, dtype=float))
    no, ni = outer.size, inner.size
    flat = {
        outer_name: np.repeat(outer, ni),
        inner_name: np.tile(inner, no),
    }
    for name, vals in fields.items():
        arr = np.asarray(vals)
        if arr.shape != (no, ni):
            raise ConfigError(
                f"field {name!r} has shape {arr.shape}, expected {(no, ni)}"
            )
        flat[name] = arr.reshape(-1)
    return write_csv(path, flat)


def read_csv(path) -> dict:
    """Read one of our CSVs back into named float arrays."""
    path = Path(path)
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header:
            raise ConfigError(f"{path} has no header row")
        names = header.split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    if any(len(r) != len(names) for r in rows):
        raise ConfigError(f"{path} has ragged rows")
    data = np.array(rows, dtype=float) if rows else np.empty((0, len(names)))
    return {name: data[:, i].copy() for i, name in enumerate(names)}


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def write_manifest(path, payload: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    return path


def read_manifest(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def default_output_dir() -> Path:
    """Default CSV destination; overridable by one environment variable."""
    env = os.environ.get("VMSEKIT_OUT_DIR")
    return Path(env) if env else Path("vmsekit-out")
