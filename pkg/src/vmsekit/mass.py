"""Mass coefficients and external potentials for the wave and kinetic solvers.

Three deterministic mass families are supported:

- ``oscillatory_product``: m0(t,x) = (1 + ax*sin(2*pi*x/Lx)) * (1 + at*cos(2*pi*t/Lt)),
  the smooth periodic benchmark coefficient.
- ``diode_bumps``: m0 dips smoothly inside a set of compactly supported
  windows, paired with a compactly supported potential barrier of unit-order
  height in the same windows. Inside a window (l, r) the bump profile is
  exp(c * (4/(r-l)^2 - 1/((r-x)(x-l)))), a C-infinity function that equals 1
  at the window midpoint and vanishes with all derivatives at the endpoints.
- ``constant``: m0 = const, the homogeneous background used for the random
  ensemble runs.

``gamma`` is the amplitude exponent used when a random perturbation is
composed on top of m0 (perturbation enters as eps**gamma * field).
All models must be uniformly elliptic; parameter combinations that allow
m0 <= 0 are rejected at construction time.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, EllipticityError

MASS_KINDS = ("oscillatory_product", "diode_bumps", "constant")
POTENTIAL_KINDS = ("zero", "diode_bumps")

#: floor applied to a composed mass when clamping is requested
ELLIPTICITY_FLOOR = 1e-6


@dataclass(frozen=True)
class MassModel:
    """A deterministic mass coefficient plus optional potential.

    Attributes
    ----------
    kind : one of MASS_KINDS.
    potential_kind : one of POTENTIAL_KINDS.
    gamma : exponent of the random-perturbation amplitude eps**gamma.
    amp_x, amp_t, period_x, period_t : oscillatory_product parameters.
    windows : tuple of (l, r) bump windows (diode_bumps).
    depth : mass dip depth inside the windows (diode_bumps).
    barrier_height : potential height at window midpoints (diode_bumps).
    sharpness : bump exponent scale c (diode_bumps).
    value : the constant mass level (constant).
    x_shift : offset added to x before evaluating the coefficient formulas.
        A solver grid whose nodes start at 0 then addresses the window
        [x_shift, x_shift + L) of the coefficient's natural axis, which lets
        a periodic solver box be enlarged and recentred around a moving wave
        packet without touching the coefficient definition itself.
    """

    kind: str = "constant"
    potential_kind: str = "zero"
    gamma: float = 0.5
    amp_x: float = 0.2
    amp_t: float = 0.2
    period_x: float = 1.0
    period_t: float = 1.0
    windows: tuple = ((0.5, 0.75), (1.0, 1.25))
    depth: float = 0.5
    barrier_height: float = 1.0
    sharpness: float = 2.0**-6
    value: float = 1.0
    x_shift: float = 0.0

    def __post_init__(self):
        if self.kind not in MASS_KINDS:
            raise ConfigError(f"unknown mass kind {self.kind!r}")
        if self.potential_kind not in POTENTIAL_KINDS:
            raise ConfigError(f"unknown potential kind {self.potential_kind!r}")
        if not 0.0 < self.gamma <= 1.5:
            raise ConfigError(f"gamma must lie in (0, 1.5], got {self.gamma}")
        if self.kind == "oscillatory_product":
            if abs(self.amp_x) >= 1.0 or abs(self.amp_t) >= 1.0:
                raise EllipticityError(
                    "oscillatory amplitudes must satisfy |a| < 1 for m0 > 0"
                )
            if self.period_x <= 0 or self.period_t <= 0:
                raise ConfigError("oscillation periods must be positive")
        elif self.kind == "diode_bumps":
            if not 0.0 <= self.depth < 1.0:
                raise EllipticityError(
                    f"bump depth must lie in [0, 1) for m0 > 0, got {self.depth}"
                )
            if self.sharpness <= 0:
                raise ConfigError("bump sharpness must be positive")
            for (l, r) in self.windows:
                if not l < r:
                    raise ConfigError(f"degenerate bump window ({l}, {r})")
            spans = sorted(self.windows)
            for (a, b) in zip(spans, spans[1:]):
                if b[0] < a[1]:
                    raise ConfigError("bump windows must not overlap")
        elif self.kind == "constant":
            if self.value <= 0:
                raise EllipticityError(
                    f"constant mass must be positive, got {self.value}"
                )

    @property
    def is_time_dependent(self) -> bool:
        return self.kind == "oscillatory_product" and self.amp_t != 0.0

    @property
    def is_space_dependent(self) -> bool:
        if self.kind == "oscillatory_product":
            return self.amp_x != 0.0
        return self.kind == "diode_bumps"


def _bump_profile(model: MassModel, x: np.ndarray):
    """exp(g) and exp(g)*g' summed over bump windows; zero outside."""
    x = np.asarray(x, dtype=float)
    prof = np.zeros_like(x)
    dprof = np.zeros_like(x)
    c = model.sharpness
    for (l, r) in model.windows:
        inside = (x > l) & (x < r)
        if not np.any(inside):
            continue
        xi = x[inside]
        s = (r - xi) * (xi - l)
        g = c * (4.0 / (r - l) ** 2 - 1.0 / s)
        e = np.exp(g)
        prof[inside] += e
        dprof[inside] += e * c * (l + r - 2.0 * xi) / (s * s)
    return prof, dprof


def eval_mass(model: MassModel, t, x) -> np.ndarray:
    """m0(t, x), broadcast over t and x."""
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float) + model.x_shift
    if model.kind == "constant":
        return np.broadcast_to(
            np.float64(model.value), np.broadcast_shapes(t.shape, x.shape)
        ).copy()
    if model.kind == "oscillatory_product":
        sx = 1.0 + model.amp_x * np.sin(2.0 * np.pi * x / model.period_x)
        st = 1.0 + model.amp_t * np.cos(2.0 * np.pi * t / model.period_t)
        return sx * st
    prof, _ = _bump_profile(model, x)
    out = 1.0 - model.depth * prof
    return np.broadcast_to(out, np.broadcast_shapes(t.shape, x.shape)).copy()


def eval_mass_gradient(model: MassModel, t, x) -> np.ndarray:
    """Analytic spatial derivative dm0/dx, broadcast over t and x."""
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float) + model.x_shift
    shape = np.broadcast_shapes(t.shape, x.shape)
    if model.kind == "constant":
        return np.zeros(shape)
    if model.kind == "oscillatory_product":
        wx = 2.0 * np.pi / model.period_x
        sx = model.amp_x * wx * np.cos(wx * x)
        st = 1.0 + model.amp_t * np.cos(2.0 * np.pi * t / model.period_t)
        return np.broadcast_to(sx * st, shape).copy()
    _, dprof = _bump_profile(model, x)
    return np.broadcast_to(-model.depth * dprof, shape).copy()


def eval_potential(model: MassModel, t, x) -> np.ndarray:
    """External potential V(t, x); zero unless a barrier kind is configured."""
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float) + model.x_shift
    shape = np.broadcast_shapes(t.shape, x.shape)
    if model.potential_kind == "zero":
        return np.zeros(shape)
    prof, _ = _bump_profile(model, x)
    return np.broadcast_to(model.barrier_height * prof, shape).copy()


def eval_potential_gradient(model: MassModel, t, x) -> np.ndarray:
    """Analytic spatial derivative dV/dx."""
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float) + model.x_shift
    shape = np.broadcast_shapes(t.shape, x.shape)
    if model.potential_kind == "zero":
        return np.zeros(shape)
    _, dprof = _bump_profile(model, x)
    return np.broadcast_to(model.barrier_height * dprof, shape).copy()


def compose_mass(
    model: MassModel,
    eps: float,
    field_values,
    t,
    x,
    clamp: bool = False,
):
    """m0(t,x) + eps**gamma * field_values.

    With clamp=False the composed coefficient must stay positive and an
    EllipticityError is raised otherwise. With clamp=True values below
    ELLIPTICITY_FLOOR are raised to the floor and the count of clamped
    points is returned alongside the array.
    """
    if eps <= 0:
        raise ConfigError(f"eps must be positive, got {eps}")
    m = eval_mass(model, t, x)
    if field_values is not None:
        m = m + float(eps) ** model.gamma * np.asarray(field_values, dtype=float)
    if clamp:
        low = m < ELLIPTICITY_FLOOR
        n = int(np.count_nonzero(low))
        if n:
            m = np.where(low, ELLIPTICITY_FLOOR, m)
        return m, n
    if np.any(m <= 0.0):
        raise EllipticityError(
            "composed mass lost ellipticity "
            f"(min {float(np.min(m)):.3e} at eps={eps}, gamma={model.gamma})"
        )
    return m
