"""Figure recipe files: schema, parsing, validation.

A recipe is a TOML or JSON file (the same structured-text dialect the
simulation CLI uses for experiment configs) describing one figure:

    kind = "ErrorDecay"            # Contour | ProfileOverlay |
    output = "decay.png"           #   ErrorDecay | Heatmap

    [style]
    title = "error decay"
    reference_slope = 2            # ErrorDecay: guide line, 1 or 2

    [[series]]                     # ProfileOverlay / ErrorDecay curves
    path = "errors.csv"
    x = "eps"
    y = "err_rho"
    label = "density"

    [input]                        # Contour / Heatmap gridded field
    path = "phase.csv"
    x = "x"
    y = "k"
    value = "W"

Relative ``path``/``output`` entries resolve against the recipe file's
directory. A ``select`` table on a series or input filters long-form rows
by axis value before plotting (value, or 'first'/'last').
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib as _toml
except ModuleNotFoundError:  # pragma: no cover - Python 3.10
    import tomli as _toml

from .errors import RecipeError

KINDS = ("Contour", "ProfileOverlay", "ErrorDecay", "Heatmap")
_LINESTYLES = ("solid", "dashed", "dotted", "dashdot")
_OUTPUT_SUFFIXES = (".png", ".svg")


@dataclass(frozen=True)
class SeriesSpec:
    """One curve of a ProfileOverlay or ErrorDecay figure."""

    path: Path
    x: str
    y: str
    label: str
    select: dict = field(default_factory=dict)
    linestyle: str = "solid"


@dataclass(frozen=True)
class FieldSpec:
    """The gridded scalar field of a Contour or Heatmap figure."""

    path: Path
    x: str
    y: str
    value: str
    select: dict = field(default_factory=dict)


@dataclass(frozen=True)
class StyleSpec:
    title: str | None = None
    xlabel: str | None = None
    ylabel: str | None = None
    width: float = 6.4
    height: float = 4.8
    dpi: int = 110
    levels: int = 12
    colormap: str = "viridis"
    grid: bool = True
    reference_slope: int | None = None


@dataclass(frozen=True)
class FigureRecipe:
    kind: str
    output: Path
    style: StyleSpec = StyleSpec()
    series: tuple = ()
    input: FieldSpec | None = None


def _require_keys(table: dict, allowed, context: str) -> None:
    unknown = [k for k in table if k not in allowed]
    if unknown:
        raise RecipeError(
            f"unknown {context} key(s): {', '.join(sorted(unknown))}; "
            f"allowed: {', '.join(sorted(allowed))}"
        )


def _string(table: dict, key: str, context: str, default=None):
    if key not in table:
        if default is not None:
            return default
        raise RecipeError(f"{context} is missing required key {key!r}")
    val = table[key]
    if not isinstance(val, str) or not val:
        raise RecipeError(f"{context}.{key} must be a non-empty string")
    return val


def _select(table: dict, context: str) -> dict:
    sel = table.get("select", {})
    if not isinstance(sel, dict):
        raise RecipeError(f"{context}.select must be a table")
    for key, val in sel.items():
        if not isinstance(val, (int, float, str)):
            raise RecipeError(
                f"{context}.select.{key} must be a number, 'first', or 'last'"
            )
    return dict(sel)


def _series(entry, base: Path, idx: int, default_x: str | None) -> SeriesSpec:
    ctx = f"series[{idx}]"
    if not isinstance(entry, dict):
        raise RecipeError(f"{ctx} must be a table")
    _require_keys(entry, ("path", "x", "y", "label", "select", "linestyle"),
                  ctx)
    x = _string(entry, "x", ctx, default=default_x)
    y = _string(entry, "y", ctx)
    ls = _string(entry, "linestyle", ctx, default="solid")
    if ls not in _LINESTYLES:
        raise RecipeError(
            f"{ctx}.linestyle must be one of {', '.join(_LINESTYLES)}"
        )
    return SeriesSpec(
        path=(base / _string(entry, "path", ctx)).resolve(),
        x=x,
        y=y,
        label=_string(entry, "label", ctx, default=y),
        select=_select(entry, ctx),
        linestyle=ls,
    )


def _field(entry, base: Path) -> FieldSpec:
    ctx = "input"
    if not isinstance(entry, dict):
        raise RecipeError(f"{ctx} must be a table")
    _require_keys(entry, ("path", "x", "y", "value", "select"), ctx)
    return FieldSpec(
        path=(base / _string(entry, "path", ctx)).resolve(),
        x=_string(entry, "x", ctx),
        y=_string(entry, "y", ctx),
        value=_string(entry, "value", ctx),
        select=_select(entry, ctx),
    )


def _style(table: dict, kind: str) -> StyleSpec:
    if not isinstance(table, dict):
        raise RecipeError("style must be a table")
    allowed = ("title", "xlabel", "ylabel", "width", "height", "dpi",
               "levels", "colormap", "grid", "reference_slope")
    _require_keys(table, allowed, "style")
    kwargs = {}
    for key in ("title", "xlabel", "ylabel", "colormap"):
        if key in table:
            kwargs[key] = _string(table, key, "style")
    for key, typ in (("width", float), ("height", float), ("dpi", int),
                     ("levels", int)):
        if key in table:
            val = table[key]
            if isinstance(val, bool) or not isinstance(val, (int, float)):
                raise RecipeError(f"style.{key} must be a number")
            kwargs[key] = typ(val)
            if kwargs[key] <= 0:
                raise RecipeError(f"style.{key} must be positive")
    if "grid" in table:
        if not isinstance(table["grid"], bool):
            raise RecipeError("style.grid must be true or false")
        kwargs["grid"] = table["grid"]
    if "reference_slope" in table:
        val = table["reference_slope"]
        if isinstance(val, bool) or val not in (1, 2):
            raise RecipeError("style.reference_slope must be 1 or 2")
        kwargs["reference_slope"] = int(val)
    if kind == "ErrorDecay" and "reference_slope" not in kwargs:
        raise RecipeError(
            "ErrorDecay recipes must name the reference slope to draw "
            "(style.reference_slope = 1 or 2)"
        )
    return StyleSpec(**kwargs)


def recipe_from_dict(raw: dict, base_dir: Path) -> FigureRecipe:
    """Validate a parsed recipe dictionary into a FigureRecipe. Relative
    paths resolve against base_dir."""
    if not isinstance(raw, dict):
        raise RecipeError("recipe must be a table of keys")
    _require_keys(raw, ("kind", "output", "style", "series", "input"),
                  "recipe")
    kind = _string(raw, "kind", "recipe")
    if kind not in KINDS:
        raise RecipeError(
            f"unknown figure kind {kind!r}; expected one of {', '.join(KINDS)}"
        )
    out = base_dir / _string(raw, "output", "recipe")
    if out.suffix not in _OUTPUT_SUFFIXES:
        raise RecipeError(
            f"output must end in {' or '.join(_OUTPUT_SUFFIXES)}, got "
            f"{out.name!r}"
        )
    style = _style(raw.get("style", {}), kind)
    if kind in ("Contour", "Heatmap"):
        if "series" in raw:
            raise RecipeError(f"{kind} recipes take [input], not [[series]]")
        if "input" not in raw:
            raise RecipeError(f"{kind} recipes require an [input] table")
        return FigureRecipe(kind=kind, output=out.resolve(), style=style,
                            input=_field(raw["input"], base_dir))
    if "input" in raw:
        raise RecipeError(f"{kind} recipes take [[series]], not [input]")
    entries = raw.get("series", [])
    if not isinstance(entries, list) or not entries:
        raise RecipeError(f"{kind} recipes require at least one [[series]]")
    default_x = "eps" if kind == "ErrorDecay" else None
    series = tuple(
        _series(e, base_dir, i, default_x) for i, e in enumerate(entries)
    )
    return FigureRecipe(kind=kind, output=out.resolve(), style=style,
                        series=series)


def parse_recipe(path) -> FigureRecipe:
    """Load a TOML (default) or JSON (by suffix) recipe file."""
    path = Path(path)
    if not path.is_file():
        raise RecipeError(f"recipe file not found: {path}")
    text = path.read_bytes()
    try:
        if path.suffix == ".json":
            raw = json.loads(text.decode("utf-8"))
        else:
            raw = _toml.loads(text.decode("utf-8"))
    except (ValueError, _toml.TOMLDecodeError) as exc:
        raise RecipeError(f"could not parse {path}: {exc}") from None
    return recipe_from_dict(raw, path.parent)
