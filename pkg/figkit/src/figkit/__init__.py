"""figkit — paper-style figures from the simulation CSV contract.

Four figure kinds, one CLI:

* ``Contour`` — filled contours of a gridded scalar (phase-space densities).
* ``ProfileOverlay`` — curves from one or more CSVs on shared axes
  (ensemble means across scales against a reference profile).
* ``ErrorDecay`` — log-log error decay with the fitted slope annotated and
  a named reference-slope guide line.
* ``Heatmap`` — matrix view of a gridded scalar (covariances, std fields).

The component boundary is the CSV file format: figkit never imports the
simulation package.
"""

from .errors import FigkitError, RecipeError, RenderError
from .recipes import FigureRecipe, SeriesSpec, FieldSpec, StyleSpec, parse_recipe
from .render import RenderResult, fit_slope, render

__all__ = [
    "FigkitError",
    "RecipeError",
    "RenderError",
    "FigureRecipe",
    "SeriesSpec",
    "FieldSpec",
    "StyleSpec",
    "parse_recipe",
    "RenderResult",
    "fit_slope",
    "render",
]

__version__ = "0.1.0"
