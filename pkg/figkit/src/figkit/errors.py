"""Error taxonomy of the figure kit."""


class FigkitError(Exception):
    """Base class for all figure-kit failures."""


class RecipeError(FigkitError):
    """The recipe file or its referenced data is unusable: unknown kind,
    missing or mistyped fields, missing input files or columns, empty or
    non-grid data."""


class RenderError(FigkitError):
    """The recipe was valid but producing the image failed."""
