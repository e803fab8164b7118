"""Discrete Wigner transform and phase-space residual diagnostics.

The transform of a periodic wave u at scale eps is

    W(x, k) = (1/2pi) Integral e^{i k y} u(x - eps y/2) conj(u(x + eps y/2)) dy,

discretized on the y grid y_m = m * (2 dx / eps), m = -M/2 .. M/2-1, so the
two sample points x -/+ eps y_m / 2 land exactly on grid nodes (periodic
wrap). The induced k grid has spacing dk = pi * eps / L; summing W over it
reproduces |u|^2 at every node up to roundoff, and the first k-moment
weighted by the mass reproduces the flux observable.

The residual evaluator checks how well a transformed wave triple satisfies
the phase-space evolution identity

    dW/dt + (1/eps) Q1 W + Q2 W - eps Q3 W = 0,

where, with m_hat_l the Fourier coefficients of the mass m0(t, .) and
shifts W_-/+ = W(x, k -/+ eps mu_l / 2),

    Q1 = (|k|^2/2) sum_l m_hat_l e^{i mu_l x} i (W_- - W_+),
    Q2 = (k/2)     sum_l m_hat_l e^{i mu_l x} (dx W_- + dx W_+),
    Q3 = (1/8)     sum_l m_hat_l e^{i mu_l x} i (dxx W_- - dxx W_+)
       + (1/8)     sum_l m_hat_l e^{i mu_l x} i mu_l^2 (W_- - W_+).

On the transform's own k grid every shift eps*mu_l/2 is an integer number
of k cells, so the shifts are exact (zero fill at the window edges); on
other uniform k grids a zero-padded spectral interpolation is used.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .grids import GridSpec, spectral_derivative
from .mass import MassModel, eval_mass


@dataclass(frozen=True, eq=False)
class PhaseDensity:
    """A phase-space density sampled on a tensor grid (x ascending, k ascending)."""

    x: np.ndarray
    k: np.ndarray
    W: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        if self.W.shape != (self.x.size, self.k.size):
            raise ConfigError("phase density shape does not match its grids")

    @property
    def dx(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def dk(self) -> float:
        return float(self.k[1] - self.k[0])

    def k_marginal(self) -> np.ndarray:
        """Riemann k-sum, the position density."""
        return self.W.sum(axis=1) * self.dk

    def k_moment(self, weight=None) -> np.ndarray:
        """First k-moment (optionally weighted by an x-array), the flux."""
        mom = (self.W * self.k[None, :]).sum(axis=1) * self.dk
        if weight is not None:
            mom = mom * np.asarray(weight)
        return mom


def discrete_wigner(u: np.ndarray, grid: GridSpec, eps: float, t: float = 0.0) -> PhaseDensity:
    """Transform a periodic wave into its discrete Wigner density.

    Exact identities on the induced grid: the k-marginal equals |u|^2
    nodewise, and the transform is invariant under a global phase of u.
    """
    u = np.asarray(u)
    if u.shape != (grid.M,):
        raise ConfigError("wave length does not match grid")
    if eps <= 0:
        raise ConfigError(f"eps must be positive, got {eps}")
    M = grid.M
    dy = 2.0 * grid.dx / eps
    m_vals = (np.fft.fftfreq(M) * M).astype(np.int64)  # 0..M/2-1, -M/2..-1
    jj = np.arange(M)[:, None]
    a = u[(jj - m_vals[None, :]) % M]
    b = u[(jj + m_vals[None, :]) % M]
    # a * conj(b) via explicit real products: commutative-addition form, so a
    # global phase of u whose rotation is exactly representable (+-1, +-1j)
    # cancels bitwise instead of up to the rounding of a fused multiply.
    f = np.empty(a.shape, dtype=complex)
    f.real = a.real * b.real + a.imag * b.imag
    f.imag = a.imag * b.real - a.real * b.imag
    w = (dy / (2.0 * np.pi)) * M * np.fft.ifft(f, axis=1)
    k_native = 2.0 * np.pi * np.fft.fftfreq(M, d=dy)
    order = np.argsort(k_native)
    return PhaseDensity(x=grid.x.copy(), k=k_native[order], W=w.real[:, order], t=t)


def _shift_k(W: np.ndarray, cells: float) -> np.ndarray:
    """Sample W at k - cells*dk along axis 1: integer shifts by zero-filled
    index moves (exact), fractional shifts by zero-padded spectral phase."""
    n = W.shape[1]
    r = round(cells)
    if abs(cells - r) < 1e-9:
        r = int(r)
        out = np.zeros_like(W)
        if r == 0:
            out[:] = W
        elif r > 0:
            if r < n:
                out[:, r:] = W[:, :-r]
        else:
            if -r < n:
                out[:, :r] = W[:, -r:]
        return out
    pad = np.concatenate([W, np.zeros_like(W)], axis=1)
    freqs = np.fft.fftfreq(2 * n)
    shifted = np.fft.ifft(
        np.fft.fft(pad, axis=1) * np.exp(-2j * np.pi * freqs * cells)[None, :],
        axis=1,
    )
    return shifted[:, :n].real if np.isrealobj(W) else shifted[:, :n]


def wigner_operators(
    pd: PhaseDensity, model: MassModel, grid: GridSpec, eps: float, t: float | None = None
):
    """Apply the three transport operators to a phase density.

    Returns (Q1, Q2, Q3) as real arrays of the density's shape. The x grid
    must coincide with the periodic grid's nodes.
    """
    if pd.x.size != grid.M or not np.allclose(pd.x, grid.x, atol=1e-12):
        raise ConfigError("phase density x grid must match the periodic grid")
    if t is None:
        t = pd.t
    M = grid.M
    m0 = eval_mass(model, t, grid.x)
    coeffs = np.fft.fft(m0) / M  # c_l for e^{i mu_l x}, native order
    mu = grid.wavenumbers
    keep = np.abs(coeffs) > 1e-14 * max(np.abs(coeffs).max(), 1.0)

    W = pd.W
    dxW = spectral_derivative(W, grid, order=1, axis=0)
    dxxW = spectral_derivative(W, grid, order=2, axis=0)
    kk = pd.k[None, :]
    q1 = np.zeros(W.shape, dtype=complex)
    q2 = np.zeros(W.shape, dtype=complex)
    q3 = np.zeros(W.shape, dtype=complex)
    for l in np.nonzero(keep)[0]:
        c = coeffs[l]
        phase = np.exp(1j * mu[l] * grid.x)[:, None]
        cells = 0.5 * eps * mu[l] / pd.dk
        wm, wp = _shift_k(W, cells), _shift_k(W, -cells)
        q1 += c * phase * 1j * (wm - wp)
        q2 += c * phase * (_shift_k(dxW, cells) + _shift_k(dxW, -cells))
        q3 += c * phase * 1j * (
            (_shift_k(dxxW, cells) - _shift_k(dxxW, -cells))
            + mu[l] ** 2 * (wm - wp)
        )
    Q1 = (0.5 * kk**2 * q1).real
    Q2 = (0.5 * kk * q2).real
    Q3 = (q3 / 8.0).real
    return Q1, Q2, Q3


def wigner_residual(
    times: np.ndarray,
    waves: np.ndarray,
    model: MassModel,
    grid: GridSpec,
    eps: float,
) -> dict:
    """Residual of the phase-space identity on a triple of wave snapshots.

    ``times``/``waves`` hold three consecutive equal-spaced snapshots. The
    middle one supplies the operator terms; the outer two give the centered
    time derivative. Returns norms and the relative residual
    ||R||_2 / ||dW/dt||_2 (the reported normalization).
    """
    times = np.asarray(times, dtype=float)
    if times.shape != (3,) or len(waves) != 3:
        raise ConfigError("residual evaluation needs exactly 3 snapshots")
    h1, h2 = times[1] - times[0], times[2] - times[1]
    if not np.isclose(h1, h2, rtol=1e-10):
        raise ConfigError("residual snapshots must be equally spaced in time")
    pds = [discrete_wigner(np.asarray(w), grid, eps, t=tt) for w, tt in zip(waves, times)]
    dtW = (pds[2].W - pds[0].W) / (times[2] - times[0])
    Q1, Q2, Q3 = wigner_operators(pds[1], model, grid, eps, t=times[1])
    resid = dtW + Q1 / eps + Q2 - eps * Q3
    res_norm = float(np.linalg.norm(resid))
    dt_norm = float(np.linalg.norm(dtW))
    return {
        "residual_norm": res_norm,
        "dt_norm": dt_norm,
        "relative_residual": res_norm / dt_norm if dt_norm > 0 else np.inf,
        "density": pds[1],
    }
