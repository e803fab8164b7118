"""Periodic space-time grids, velocity grids, and spectral derivatives.

Space is the periodic interval [0, L) sampled at M equispaced nodes; all
Fourier work uses the FFT's native frequency layout (0, 1, ..., M/2-1,
-M/2, ..., -1, scaled by 2*pi/L). ``math_order`` converts to the ascending
mathematical ordering -M/2 ... M/2-1 when a human-readable spectrum is
needed. Discrete L2 pairing: sum |u_j|^2 * dx equals (dx/M) * sum |u_hat|^2
for numpy's unnormalized FFT.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True, eq=False)
class GridSpec:
    """Uniform periodic grid on [0, L) x [0, T].

    Attributes
    ----------
    L, T : domain length and final time.
    M : number of spatial nodes (even).
    dt : nominal time step; the final step of a run is shortened so the
        step sequence lands on T exactly.
    x : node coordinates, x_j = j * dx.
    wavenumbers : 2*pi*l/L in the FFT's native ordering.
    """

    L: float
    M: int
    T: float
    dt: float
    x: np.ndarray = field(init=False, repr=False)
    wavenumbers: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not self.L > 0 or not np.isfinite(self.L):
            raise ConfigError(f"domain length must be positive, got {self.L}")
        if self.M % 2 != 0 or self.M < 4:
            raise ConfigError(f"node count must be even and >= 4, got {self.M}")
        if not self.T > 0 or not np.isfinite(self.T):
            raise ConfigError(f"final time must be positive, got {self.T}")
        if not 0 < self.dt <= self.T:
            raise ConfigError(f"time step must lie in (0, T], got {self.dt}")
        object.__setattr__(self, "x", np.arange(self.M) * (self.L / self.M))
        object.__setattr__(
            self,
            "wavenumbers",
            2.0 * np.pi * np.fft.fftfreq(self.M, d=1.0 / self.M) / self.L,
        )

    @property
    def dx(self) -> float:
        return self.L / self.M

    def math_order(self, values: np.ndarray | None = None) -> np.ndarray:
        """Permute a native-ordered spectrum (default: the wavenumbers) to
        the ascending ordering l = -M/2 ... M/2-1."""
        if values is None:
            values = self.wavenumbers
        return np.fft.fftshift(np.asarray(values), axes=-1)

    def time_steps(self) -> np.ndarray:
        """Step sizes summing to T; all equal to dt except a shortened tail."""
        n_full = int(np.floor(self.T / self.dt + 1e-12))
        rem = self.T - n_full * self.dt
        if rem > 1e-12 * self.T:
            return np.concatenate([np.full(n_full, self.dt), [rem]])
        return np.full(max(n_full, 1), self.T / max(n_full, 1))


def make_grid(L: float, M: int, T: float, dt: float) -> GridSpec:
    """Validated construction of a GridSpec."""
    return GridSpec(L=float(L), M=int(M), T=float(T), dt=float(dt))


@dataclass(frozen=True, eq=False)
class VelocityGrid:
    """Uniform velocity grid on [k_min, k_max], endpoints included.

    ``weights`` are trapezoid quadrature weights, so sum(W * weights) is the
    k-integral of a nodal function W.
    """

    k_min: float
    k_max: float
    nk: int
    k: np.ndarray = field(init=False, repr=False)
    weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not self.k_min < self.k_max:
            raise ConfigError(
                f"velocity window is empty: [{self.k_min}, {self.k_max}]"
            )
        if self.nk < 8:
            raise ConfigError(f"velocity grid needs >= 8 nodes, got {self.nk}")
        k = np.linspace(self.k_min, self.k_max, self.nk)
        w = np.full(self.nk, self.dk)
        w[0] *= 0.5
        w[-1] *= 0.5
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "weights", w)

    @property
    def dk(self) -> float:
        return (self.k_max - self.k_min) / (self.nk - 1)


def make_velocity_grid(k_min: float, k_max: float, nk: int) -> VelocityGrid:
    return VelocityGrid(k_min=float(k_min), k_max=float(k_max), nk=int(nk))


def spectral_derivative(
    values: np.ndarray, grid: GridSpec, order: int = 1, axis: int = -1
) -> np.ndarray:
    """Differentiate a periodic nodal field by Fourier multiplication.

    Odd orders zero the unpaired Nyquist mode so real fields stay real;
    even orders keep it. Complex input stays complex.
    """
    values = np.asarray(values)
    if values.shape[axis] != grid.M:
        raise ConfigError(
            f"axis length {values.shape[axis]} does not match grid M={grid.M}"
        )
    if order < 1:
        raise ConfigError(f"derivative order must be >= 1, got {order}")
    mu = grid.wavenumbers.copy()
    if order % 2 == 1:
        mu[grid.M // 2] = 0.0
    mult = (1j * mu) ** order
    shape = [1] * values.ndim
    shape[axis] = grid.M
    out = np.fft.ifft(np.fft.fft(values, axis=axis) * mult.reshape(shape), axis=axis)
    if np.isrealobj(values):
        return out.real
    return out
