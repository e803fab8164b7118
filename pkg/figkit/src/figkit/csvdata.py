"""Reading and reshaping the flat CSV dialect the simulation tools emit.

All inputs are comma-separated, LF-terminated, UTF-8, with one header row
naming the columns. Grid-valued data comes in long form: two axis columns
(the first block-repeated, the second tiled) plus one column per field.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .errors import RecipeError


def read_columns(path: Path) -> dict[str, np.ndarray]:
    """Read a CSV into {column name: float array}. Raises RecipeError for
    a missing file, a missing header, or an empty body."""
    path = Path(path)
    if not path.is_file():
        raise RecipeError(f"input file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise RecipeError(f"{path} is empty") from None
        rows = [row for row in reader if row]
    if not rows:
        raise RecipeError(f"{path} has a header but no data rows")
    data = np.empty((len(rows), len(header)))
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise RecipeError(
                f"{path} row {i + 2} has {len(row)} fields, "
                f"header has {len(header)}"
            )
        try:
            data[i] = [float(v) for v in row]
        except ValueError as exc:
            raise RecipeError(f"{path} row {i + 2}: {exc}") from None
    return {name: data[:, j] for j, name in enumerate(header)}


def require_columns(cols: dict, names, path: Path) -> None:
    missing = [n for n in names if n not in cols]
    if missing:
        raise RecipeError(
            f"{path} has no column {', '.join(repr(n) for n in missing)}; "
            f"available: {', '.join(cols)}"
        )


def _unique_ordered(values: np.ndarray) -> np.ndarray:
    uniq, first = np.unique(values, return_index=True)
    return uniq[np.argsort(first)]


def select_rows(cols: dict, select: dict, path: Path) -> dict:
    """Filter rows by axis value. Each entry is column -> target, where the
    target is a number (the nearest distinct value of that column is kept)
    or the string 'first'/'last' (smallest/largest distinct value)."""
    if not select:
        return cols
    keep = np.ones(next(iter(cols.values())).size, dtype=bool)
    for name, target in select.items():
        require_columns(cols, [name], path)
        levels = np.unique(cols[name])
        if isinstance(target, str):
            if target not in ("first", "last"):
                raise RecipeError(
                    f"select.{name}: expected a number, 'first', or 'last', "
                    f"got {target!r}"
                )
            value = levels[0] if target == "first" else levels[-1]
        else:
            value = levels[np.argmin(np.abs(levels - float(target)))]
        keep &= cols[name] == value
    if not np.any(keep):
        raise RecipeError(f"{path}: selection {select} matches no rows")
    return {n: v[keep] for n, v in cols.items()}


def pivot_grid(cols: dict, x: str, y: str, value: str, path: Path):
    """Reshape long-form grid data to (x_axis, y_axis, V[ix, iy]).

    Accepts either axis ordering (x block-repeated and y tiled, or the
    transpose) and rejects anything that is not a complete rectangular
    grid.
    """
    require_columns(cols, [x, y, value], path)
    ax, ay, av = cols[x], cols[y], cols[value]
    ux, uy = _unique_ordered(ax), _unique_ordered(ay)
    if ux.size * uy.size != av.size:
        raise RecipeError(
            f"{path}: columns {x!r} x {y!r} do not form a grid "
            f"({ux.size} x {uy.size} levels, {av.size} rows)"
        )
    if np.array_equal(ax, np.repeat(ux, uy.size)) and np.array_equal(
        ay, np.tile(uy, ux.size)
    ):
        return ux, uy, av.reshape(ux.size, uy.size)
    if np.array_equal(ay, np.repeat(uy, ux.size)) and np.array_equal(
        ax, np.tile(ux, uy.size)
    ):
        return ux, uy, av.reshape(uy.size, ux.size).T
    raise RecipeError(f"{path}: rows are not in grid order over {x!r}, {y!r}")
