"""Render figures from validated recipes.

Rendering is deterministic: the Agg backend, a fixed style, no timestamps
or environment-dependent metadata — identical recipe plus identical input
bytes give identical image bytes. Inputs are only ever read.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

from .csvdata import pivot_grid, read_columns, require_columns, select_rows
from .errors import RecipeError, RenderError
from .recipes import FigureRecipe  # noqa: F401  (public API surface)

# Fixed cycling colors (matplotlib's default cycle, hard-coded so a style
# file on the host cannot change the output).
_COLORS = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")

_RC = {
    "font.family": "DejaVu Sans",
    "font.size": 10.0,
    "axes.titlesize": 11.0,
    "svg.hashsalt": "figkit",
    "figure.max_open_warning": 0,
}


@dataclass(frozen=True)
class RenderResult:
    """Where the image went, plus the numbers drawn onto it."""

    path: Path
    slopes: dict  # ErrorDecay only: {label: fitted slope}; else empty


def fit_slope(x: np.ndarray, y: np.ndarray) -> float:
    """Least-squares slope of log y against log x (the same fit the
    simulation tools report for error decay)."""
    if x.size < 2:
        raise RecipeError("slope fit needs at least two data points")
    if np.any(x <= 0) or np.any(y <= 0):
        raise RecipeError("slope fit needs positive data on both axes")
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def _load_series(spec):
    cols = read_columns(spec.path)
    require_columns(cols, [spec.x, spec.y], spec.path)
    cols = select_rows(cols, spec.select, spec.path)
    return cols[spec.x], cols[spec.y]


def _save(fig, out: Path):
    out.parent.mkdir(parents=True, exist_ok=True)
    try:
        if out.suffix == ".png":
            # Drop the library's Software tag: byte output then depends
            # only on the figure contents.
            fig.savefig(out, format="png", metadata={"Software": None})
        else:
            fig.savefig(out, format="svg",
                        metadata={"Date": None, "Creator": None})
    except OSError as exc:
        raise RenderError(f"could not write {out}: {exc}") from None
    finally:
        plt.close(fig)


def _new_figure(style):
    fig, ax = plt.subplots(figsize=(style.width, style.height),
                           dpi=style.dpi)
    if style.title:
        ax.set_title(style.title)
    if style.xlabel:
        ax.set_xlabel(style.xlabel)
    if style.ylabel:
        ax.set_ylabel(style.ylabel)
    return fig, ax


def _render_overlay(recipe) -> dict:
    fig, ax = _new_figure(recipe.style)
    for i, spec in enumerate(recipe.series):
        x, y = _load_series(spec)
        order = np.argsort(x, kind="stable")
        ax.plot(x[order], y[order], label=spec.label,
                linestyle=spec.linestyle, color=_COLORS[i % len(_COLORS)])
    if recipe.style.grid:
        ax.grid(True, alpha=0.3)
    ax.legend(frameon=False)
    _save(fig, recipe.output)
    return {}


def _render_error_decay(recipe) -> dict:
    fig, ax = _new_figure(recipe.style)
    slopes = {}
    anchor = None
    for i, spec in enumerate(recipe.series):
        x, y = _load_series(spec)
        order = np.argsort(x, kind="stable")
        x, y = x[order], y[order]
        slopes[spec.label] = fit_slope(x, y)
        ax.loglog(x, y, marker="o", linestyle=spec.linestyle,
                  color=_COLORS[i % len(_COLORS)],
                  label=f"{spec.label} (slope {slopes[spec.label]:.2f})")
        if anchor is None:
            anchor = (x, y)
    s = recipe.style.reference_slope
    xa, ya = anchor
    guide = 0.6 * ya[-1] * (xa / xa[-1]) ** s
    ax.loglog(xa, guide, linestyle="dashed", color="#555555",
              label=f"slope {s} reference")
    if recipe.style.grid:
        ax.grid(True, which="both", alpha=0.3)
    ax.legend(frameon=False)
    _save(fig, recipe.output)
    return slopes


def _load_field(recipe):
    spec = recipe.input
    cols = read_columns(spec.path)
    cols = select_rows(cols, spec.select, spec.path)
    return pivot_grid(cols, spec.x, spec.y, spec.value, spec.path)


def _render_contour(recipe) -> dict:
    ux, uy, V = _load_field(recipe)
    fig, ax = _new_figure(recipe.style)
    filled = ax.contourf(ux, uy, V.T, levels=recipe.style.levels,
                         cmap=recipe.style.colormap)
    ax.contour(ux, uy, V.T, levels=recipe.style.levels,
               colors="black", linewidths=0.4)
    fig.colorbar(filled, ax=ax)
    _save(fig, recipe.output)
    return {}


def _render_heatmap(recipe) -> dict:
    ux, uy, V = _load_field(recipe)
    fig, ax = _new_figure(recipe.style)
    mesh = ax.pcolormesh(ux, uy, V.T, cmap=recipe.style.colormap,
                         shading="nearest")
    fig.colorbar(mesh, ax=ax)
    _save(fig, recipe.output)
    return {}


_RENDERERS = {
    "Contour": _render_contour,
    "ProfileOverlay": _render_overlay,
    "ErrorDecay": _render_error_decay,
    "Heatmap": _render_heatmap,
}


def render(recipe: FigureRecipe) -> RenderResult:
    """Produce the recipe's image file; returns its path and, for
    ErrorDecay, the annotated slopes."""
    with plt.rc_context(_RC):
        slopes = _RENDERERS[recipe.kind](recipe)
    return RenderResult(path=recipe.output, slopes=slopes)
