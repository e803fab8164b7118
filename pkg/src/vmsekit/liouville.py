"""Characteristic tracing of the limiting phase-space transport equation.

The limit density W0 obeys

    dW0/dt + m0(t,x) k dW0/dx - ( (k^2/2) dm0/dx + dV/dx ) dW0/dk = 0,

the Liouville equation of the Hamiltonian H = m0(t,x) k^2 / 2 + V(t,x).
Solutions are constant along characteristics, which allows dual evaluation
routes for wave-packet initial data.

The packet exp(-A(x-x0)^2 + i p0 x / eps) carries the phase-space profile

    W_I(x,k) = exp(-2A(x-x0)^2) * N(k; p0, A eps^2),

a Gaussian momentum distribution of standard deviation eps*sqrt(A) around
p0 (its x-marginal is exactly |u_I|^2). Transporting this profile is what
reproduces the packet's dispersive spreading; collapsing it to
delta(k - p0) is the eps -> 0 idealization. Both are supported:

- ``packet`` mode (packet_moments) slices the profile over launch
  positions y; within each slice the momentum Gaussian is transported
  along its k0 grid and every monotone branch of the pushforward map
  k0 -> x(T; y, k0) contributes G(k0)/|dx/dk0| to rho0 (and m0 * k times
  that to the flux J0). Fold points (caustics) separate branches and
  their contributions accumulate. No smoothing kernel is involved.
- ``delta`` mode (delta_moments) is the single-fiber k = p0 case, with
  the branch split running along y instead.
- ``regularized`` mode traces every node of an (x, k) grid backward to
  t = 0 and evaluates W_I there, with the momentum profile either the
  physical one (``sigma_k``) or a unit-mass Gaussian of width
  ``delta_width_cells`` k-cells; moments come from trapezoid sums over
  the k grid.

Every supported coefficient family is globally defined on the x axis
(the oscillatory product by periodicity, the diode bumps by compact
support), so trajectories are traced on the whole line with the analytic
formulas. Forward-mode moments fold the periodic images of the
transported density onto the evaluation window, matching a periodic wave
solve on a box large enough to contain the packet.

Backward tracing solves, in the reversed time s = T - t from s = 0 to T,

    dx/ds = -k m0(T-s, x),
    dk/ds = +(k^2/2) dm0/dx(T-s, x) + dV/dx(T-s, x).

All tracing uses a vectorized embedded Dormand-Prince RK5(4) integrator
with per-trajectory scaled max-norm error control (the whole batch shares
a step size governed by its worst member).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ConvergenceError
from .grids import VelocityGrid
from .mass import (
    MassModel,
    eval_mass,
    eval_mass_gradient,
    eval_potential,
    eval_potential_gradient,
)
from .schrodinger import PacketSpec
from .wigner import PhaseDensity

# Dormand-Prince RK5(4)7M tableau
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_E = _DP_B5 - np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)


def _dopri_batch(f, y0: np.ndarray, t_end: float, tol: float, max_steps: int = 200_000):
    """Integrate y' = f(t, y) from t=0 to t_end for a batch of states.

    y has shape (n, d). Error control: scaled max norm over the whole batch
    with atol = rtol = tol, so every trajectory individually meets the
    tolerance. Uses the FSAL property of the Dormand-Prince pair.
    """
    if tol <= 0 or tol > 1e-6:
        raise ConfigError(f"trace tolerance must lie in (0, 1e-6], got {tol}")
    y = np.array(y0, dtype=float)
    t = 0.0
    h = min(t_end / 64.0, 0.05)
    k1 = f(t, y)
    stages = [None] * 7
    for _ in range(max_steps):
        if t >= t_end:
            return y
        h = min(h, t_end - t)
        stages[0] = k1
        for s in range(1, 7):
            acc = stages[0] * _DP_A[s][0]
            for m in range(1, s):
                if _DP_A[s][m] != 0.0:
                    acc = acc + stages[m] * _DP_A[s][m]
            stages[s] = f(t + _DP_C[s] * h, y + h * acc)
        y5 = y + h * sum(b * st for b, st in zip(_DP_B5, stages) if b != 0.0)
        err_vec = h * sum(e * st for e, st in zip(_DP_E, stages) if e != 0.0)
        scale = tol + tol * np.abs(y5)
        err = float(np.max(np.abs(err_vec) / scale))
        if err <= 1.0:
            t += h
            y = y5
            k1 = stages[6]  # FSAL
            h *= min(5.0, max(0.2, 0.9 * (err + 1e-300) ** -0.2))
        else:
            h *= max(0.2, 0.9 * err**-0.2)
            if h < 1e-14 * max(t_end, 1.0):
                raise ConvergenceError("trace step size underflow")
    raise ConvergenceError(f"trace exceeded {max_steps} steps")


def _forward_rhs(model: MassModel):
    def rhs(t, y):
        x, k = y[:, 0], y[:, 1]
        m = eval_mass(model, t, x)
        dm = eval_mass_gradient(model, t, x)
        dv = eval_potential_gradient(model, t, x)
        return np.stack([m * k, -0.5 * k * k * dm - dv], axis=1)

    return rhs


def _backward_rhs(model: MassModel, T: float):
    def rhs(s, y):
        x, k = y[:, 0], y[:, 1]
        t = T - s
        m = eval_mass(model, t, x)
        dm = eval_mass_gradient(model, t, x)
        dv = eval_potential_gradient(model, t, x)
        return np.stack([-k * m, 0.5 * k * k * dm + dv], axis=1)

    return rhs


def trace_back(y, p, model: MassModel, T: float, tol: float = 1e-8):
    """Trace phase points (y, p) at time T back to their t = 0 origins.

    Accepts scalars or arrays; returns (x0, k0) of matching shape.
    """
    y_arr = np.atleast_1d(np.asarray(y, dtype=float))
    p_arr = np.atleast_1d(np.asarray(p, dtype=float))
    y_b, p_b = np.broadcast_arrays(y_arr, p_arr)
    state = np.stack([y_b.ravel(), p_b.ravel()], axis=1)
    out = _dopri_batch(_backward_rhs(model, T), state, T, tol)
    x0 = out[:, 0].reshape(y_b.shape)
    k0 = out[:, 1].reshape(y_b.shape)
    if np.isscalar(y) and np.isscalar(p):
        return float(x0.ravel()[0]), float(k0.ravel()[0])
    return x0, k0


def trace_forward(y, p, model: MassModel, T: float, tol: float = 1e-8):
    """Transport phase points (y, p) at t = 0 forward to time T."""
    y_arr = np.atleast_1d(np.asarray(y, dtype=float))
    p_arr = np.atleast_1d(np.asarray(p, dtype=float))
    y_b, p_b = np.broadcast_arrays(y_arr, p_arr)
    state = np.stack([y_b.ravel(), p_b.ravel()], axis=1)
    out = _dopri_batch(_forward_rhs(model), state, T, tol)
    return out[:, 0].reshape(y_b.shape), out[:, 1].reshape(y_b.shape)


def hamiltonian(model: MassModel, t, x, k):
    """H = m0 k^2 / 2 + V, conserved along characteristics when m0, V are static."""
    return 0.5 * eval_mass(model, t, x) * np.asarray(k) ** 2 + eval_potential(
        model, t, x
    )


def _accumulate_fiber(X, K, y, w, m_out, x_eval, L, rho0, J0):
    """Add one transported fiber's pushforward moments onto (rho0, J0).

    The fiber is split into monotone branches of the map y -> X at fold
    nodes; each branch contributes w/|dX/dy| by linear interpolation at
    every periodic image of x_eval inside its range.
    """
    ny = y.size
    dX = np.gradient(X, y)
    good = np.abs(dX) > 1e-10
    sign = np.where(dX >= 0, 1, -1)
    cut = np.nonzero((sign[1:] != sign[:-1]) | ~good[1:] | ~good[:-1])[0] + 1
    starts = np.concatenate([[0], cut])
    ends = np.concatenate([cut, [ny]])
    for i0, i1 in zip(starts, ends):
        idx = np.arange(i0, i1)
        idx = idx[good[idx]]
        if idx.size < 2:
            continue
        xs = X[idx]
        dens = w[idx] / np.abs(dX[idx])
        flux = m_out[idx] * K[idx] * dens
        if xs[0] > xs[-1]:
            xs, dens, flux = xs[::-1], dens[::-1], flux[::-1]
        lo, hi = xs[0], xs[-1]
        for shift in range(int(np.floor((lo - x_eval[-1]) / L)),
                           int(np.ceil((hi - x_eval[0]) / L)) + 1):
            pts = x_eval + shift * L
            inside = (pts >= lo) & (pts <= hi)
            if not np.any(inside):
                continue
            rho0[inside] += np.interp(pts[inside], xs, dens)
            J0[inside] += np.interp(pts[inside], xs, flux)


def packet_moments(
    model: MassModel,
    packet: PacketSpec,
    eps: float,
    x_eval: np.ndarray,
    L: float,
    T: float,
    tol: float = 1e-8,
    ny: int = 257,
    nk: int = 513,
    k_span: float = 6.0,
):
    """Limit moments transporting the packet's full phase-space profile.

    The profile exp(-2A(x-x0)^2) N(k; p0, A eps^2) is pushed forward by
    slicing over launch positions y: within each slice the momentum
    Gaussian is transported along the k axis (branch-split at folds of
    k0 -> x(T; y, k0), density G(k0)/|dx/dk0|) and the slices accumulate
    by trapezoid in y. This orientation keeps per-node resolution
    requirements independent of eps. The result is the reference the wave
    observables approach at O(eps^2): it carries the packet's dispersive
    spreading, which a zero-width momentum fiber suppresses.
    """
    if ny < 16 or nk < 16:
        raise ConfigError(f"slice grids need >= 16 nodes, got ny={ny} nk={nk}")
    if eps <= 0:
        raise ConfigError(f"eps must be positive, got {eps}")
    x_eval = np.asarray(x_eval, dtype=float)
    sig_k = float(eps) * np.sqrt(packet.A)
    k0 = packet.p0 + np.linspace(-k_span * sig_k, k_span * sig_k, nk)
    gk = np.exp(-((k0 - packet.p0) ** 2) / (2.0 * sig_k * sig_k))
    gk /= np.sqrt(2.0 * np.pi) * sig_k
    r = np.sqrt(-np.log(1e-16) / (2.0 * packet.A))
    y = np.linspace(packet.x0 - r, packet.x0 + r, ny)
    wy = packet.density(y) * (y[1] - y[0])
    wy[0] *= 0.5
    wy[-1] *= 0.5

    Y = np.repeat(y, nk)
    K0 = np.tile(k0, ny)
    X, K = trace_forward(Y, K0, model, T, tol)
    X = X.reshape(ny, nk)
    K = K.reshape(ny, nk)
    M_out = eval_mass(model, T, X)

    rho0 = np.zeros_like(x_eval)
    J0 = np.zeros_like(x_eval)
    for j in range(ny):
        _accumulate_fiber(
            X[j], K[j], k0, wy[j] * gk, M_out[j], x_eval, L, rho0, J0
        )
    return rho0, J0


def delta_moments(
    model: MassModel,
    packet: PacketSpec,
    x_eval: np.ndarray,
    L: float,
    T: float,
    tol: float = 1e-8,
    ny: int = 4097,
):
    """Single-fiber (zero momentum width) limit moments on x targets.

    The initial fiber {(y, p0)} is sampled where the packet weight exceeds
    1e-16; branch contributions are interpolated onto ``x_eval`` (with
    periodic images) and accumulated. Returns (rho0, J0).
    """
    if ny < 64:
        raise ConfigError(f"fiber needs >= 64 samples, got {ny}")
    x_eval = np.asarray(x_eval, dtype=float)
    r = np.sqrt(-np.log(1e-16) / (2.0 * packet.A))
    y = np.linspace(packet.x0 - r, packet.x0 + r, ny)
    X, K = trace_forward(y, np.full(ny, packet.p0), model, T, tol)
    w = packet.density(y)
    m_out = eval_mass(model, T, X)
    rho0 = np.zeros_like(x_eval)
    J0 = np.zeros_like(x_eval)
    _accumulate_fiber(X, K, y, w, m_out, x_eval, L, rho0, J0)
    return rho0, J0


def regularized_phase_density(
    model: MassModel,
    packet: PacketSpec,
    x_nodes: np.ndarray,
    vgrid: VelocityGrid,
    T: float,
    tol: float = 1e-8,
    delta_width_cells: float = 2.0,
    sigma_k: float | None = None,
) -> PhaseDensity:
    """Backward-traced limit density on a full (x, k) grid.

    The momentum profile is a unit-mass Gaussian of standard deviation
    ``sigma_k`` when given (the physical packet width is eps*sqrt(A)),
    otherwise the mesh-tied width ``delta_width_cells * dk`` (a pure
    numerical regularization of the zero-width limit).
    """
    x_nodes = np.asarray(x_nodes, dtype=float)
    if not vgrid.k_min < packet.p0 < vgrid.k_max:
        raise ConfigError(
            f"initial momentum {packet.p0} lies outside the velocity window"
        )
    XX, KK = np.meshgrid(x_nodes, vgrid.k, indexing="ij")
    X0, K0 = trace_back(XX.ravel(), KK.ravel(), model, T, tol)
    sig = float(sigma_k) if sigma_k is not None else delta_width_cells * vgrid.dk
    if sig <= 0:
        raise ConfigError(f"momentum width must be positive, got {sig}")
    W = packet.density(X0) * np.exp(-((K0 - packet.p0) ** 2) / (2.0 * sig * sig))
    W /= np.sqrt(2.0 * np.pi) * sig
    return PhaseDensity(
        x=x_nodes, k=vgrid.k.copy(), W=W.reshape(x_nodes.size, vgrid.nk), t=T
    )


def phase_moments(pd: PhaseDensity, model: MassModel, weights: np.ndarray | None = None):
    """(rho0, J0) from a phase density by trapezoid k-sums; J weights by m0."""
    if weights is None:
        w = np.full(pd.k.size, pd.dk)
        w[0] *= 0.5
        w[-1] *= 0.5
    else:
        w = np.asarray(weights)
    rho0 = pd.W @ w
    m0 = eval_mass(model, pd.t, pd.x)
    J0 = m0 * (pd.W @ (w * pd.k))
    return rho0, J0


def evaluate_liouville(
    model: MassModel,
    packet: PacketSpec,
    x_nodes: np.ndarray,
    T: float,
    L: float,
    mode: str = "packet",
    eps: float | None = None,
    vgrid: VelocityGrid | None = None,
    tol: float = 1e-8,
    ny: int | None = None,
    nk: int = 513,
    delta_width_cells: float = 2.0,
    sigma_k: float | None = None,
):
    """Limit moments (and, in regularized mode, the phase density).

    Returns a dict with keys rho0, J0, and (regularized mode) density.
    ``packet`` mode needs eps to size the momentum profile; ``delta``
    is the zero-width fiber; ``regularized`` needs a velocity grid.
    """
    if mode == "packet":
        if eps is None:
            raise ConfigError("packet mode needs eps for the momentum width")
        rho0, J0 = packet_moments(
            model, packet, float(eps), x_nodes, L, T,
            tol=tol, ny=ny or 257, nk=nk,
        )
        return {"rho0": rho0, "J0": J0}
    if mode == "delta":
        rho0, J0 = delta_moments(
            model, packet, x_nodes, L, T, tol=tol, ny=ny or 4097
        )
        return {"rho0": rho0, "J0": J0}
    if mode == "regularized":
        if vgrid is None:
            raise ConfigError("regularized mode needs a velocity grid")
        pd = regularized_phase_density(
            model, packet, x_nodes, vgrid, T, tol=tol,
            delta_width_cells=delta_width_cells, sigma_k=sigma_k,
        )
        rho0, J0 = phase_moments(pd, model, weights=vgrid.weights)
        return {"rho0": rho0, "J0": J0, "density": pd}
    raise ConfigError(f"unknown mode {mode!r}")
