"""Exception types shared across the solver modules."""


class VmsekitError(Exception):
    """Base class for all package-specific failures."""


class ConfigError(VmsekitError):
    """Invalid or unknown configuration input."""


class EllipticityError(VmsekitError):
    """A composed mass coefficient lost uniform ellipticity."""


class CflError(VmsekitError):
    """A transport step was requested beyond its stability bound."""


class ConvergenceError(VmsekitError):
    """An iterative solve failed to reach its tolerance."""


class CampaignError(VmsekitError):
    """Too many ensemble samples failed to complete."""
