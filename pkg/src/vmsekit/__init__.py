"""Semiclassical varying-mass Schrodinger dynamics and its kinetic limits.

The package simulates the scaled Schrodinger equation with a spatially and
temporally varying mass coefficient, its Liouville (small-parameter) limit,
and the radiative-transfer limit that arises when the mass carries a small
random perturbation. It ships the pieces needed to reproduce the full
pipeline: spectral Crank-Nicolson wave propagation, Wigner-transform
diagnostics, characteristic tracing of the limiting Liouville dynamics, a
WENO5 kinetic solver with a Lorentzian-correlated scattering kernel,
Karhunen-Loeve sampling of the random mass, ensemble statistics, and a CLI
that writes CSV observables plus a re-runnable manifest.
"""

from .errors import (
    CflError,
    ConfigError,
    ConvergenceError,
    EllipticityError,
    VmsekitError,
)

__version__ = "0.1.0"

__all__ = [
    "VmsekitError",
    "ConfigError",
    "EllipticityError",
    "CflError",
    "ConvergenceError",
    "__version__",
]
