"""Crank-Nicolson spectral solver for the scaled varying-mass wave equation.

The propagated equation is

    i*eps u_t = -(eps^2/2) d/dx ( m(t,x) du/dx ) + V(t,x) u,   x in [0, L),

with periodic boundary conditions. One step freezes the coefficients at the
half-step time t + dt/2 and applies the Cayley form

    (I - i S) u_next = (I + i S) u,
    S = (eps*dt/4) * D(m D .) - (dt/(2 eps)) * V,

where D is the spectral derivative. S is self-adjoint in the discrete L2
inner product, so the step is exactly unitary up to the tolerance of the
linear solve. The system is solved matrix-free in Fourier space: the
constant-coefficient part of S (mean m, mean V) is inverted exactly by
diagonal division and the remainder is iterated to a relative residual of
``tol`` (default 1e-12), with a GMRES fallback for stiff perturbations.

Initial data is the semiclassical wave packet
u(0,x) = exp(-A (x-x0)^2 + i p0 x / eps), and the recorded observables are
the position density rho = |u|^2 and the mass flux
J = eps * Im( m_out * conj(u) * du/dx ), with m_out the full (composed)
mass at the output time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ConvergenceError
from .grids import GridSpec, make_grid, spectral_derivative
from .mass import MassModel, compose_mass, eval_potential

RESOLUTION_RULES = ("packet", "barrier")


@dataclass(frozen=True, eq=False)
class WaveField:
    """A wave state at one instant on a periodic grid."""

    grid: GridSpec
    eps: float
    t: float
    u: np.ndarray

    def __post_init__(self):
        if self.u.shape != (self.grid.M,):
            raise ConfigError("wave array does not match its grid")
        if self.eps <= 0:
            raise ConfigError(f"eps must be positive, got {self.eps}")

    def norm_sq(self) -> float:
        """Discrete L2 norm squared, sum |u|^2 dx."""
        return float(np.sum(np.abs(self.u) ** 2) * self.grid.dx)


@dataclass(frozen=True)
class PacketSpec:
    """Gaussian wave-packet initial data parameters."""

    A: float = 2.0**7
    x0: float = 0.25
    p0: float = 1.0

    def __post_init__(self):
        if self.A <= 0:
            raise ConfigError(f"packet width parameter A must be positive: {self.A}")

    def density(self, x) -> np.ndarray:
        """|u_I|^2 = exp(-2 A (x - x0)^2)."""
        x = np.asarray(x, dtype=float)
        return np.exp(-2.0 * self.A * (x - self.x0) ** 2)


def initial_wave(grid: GridSpec, eps: float, packet: PacketSpec) -> WaveField:
    """Sample the Gaussian packet exp(-A(x-x0)^2 + i p0 x / eps) on the grid."""
    phase = packet.p0 * grid.x / eps
    u = np.exp(-packet.A * (grid.x - packet.x0) ** 2) * np.exp(1j * phase)
    return WaveField(grid=grid, eps=float(eps), t=0.0, u=u)


def resolution_for(eps: float, L: float, T: float, rule: str = "packet") -> GridSpec:
    """Grid resolution tied to eps: dx = 2^(-n-2) with n = log2(1/eps).

    The time step is 2^(-1.2 n - 3) for the smooth ("packet") runs and the
    steeper 2^(-1.5 n - 3) for barrier ("barrier") runs.
    """
    if rule not in RESOLUTION_RULES:
        raise ConfigError(f"unknown resolution rule {rule!r}")
    if eps <= 0 or eps >= 1:
        raise ConfigError(f"resolution rule expects 0 < eps < 1, got {eps}")
    n = -math.log2(eps)
    dx = 2.0 ** (-n - 2.0)
    m_nodes = L / dx
    if abs(m_nodes - round(m_nodes)) > 1e-9 or round(m_nodes) % 2:
        raise ConfigError(
            f"domain length {L} is not an even multiple of dx={dx:g}"
        )
    dt = 2.0 ** (-(1.5 if rule == "barrier" else 1.2) * n - 3.0)
    return make_grid(L, int(round(m_nodes)), T, dt)


@dataclass(frozen=True, eq=False)
class ObservableTrace:
    """Observables recorded by one wave run.

    rho and J have shape (len(times), M). ``norm_drift`` is the largest
    relative deviation of the discrete L2 norm over all steps. ``triple``
    optionally holds three consecutive wave snapshots (times, 3 x M array)
    for phase-space residual diagnostics.
    """

    grid: GridSpec
    eps: float
    times: np.ndarray
    rho: np.ndarray
    J: np.ndarray
    norm_drift: float
    n_clamped: int
    solver_iterations: float
    waves: dict = field(default_factory=dict)
    triple: tuple | None = None


class _CnWorkspace:
    """Per-grid spectral workspace for the Cayley step."""

    def __init__(self, grid: GridSpec, eps: float, tol: float, maxit: int):
        self.grid = grid
        self.eps = eps
        self.tol = tol
        self.maxit = maxit
        mu = grid.wavenumbers.copy()
        mu[grid.M // 2] = 0.0  # unpaired mode carries no derivative
        self.imu = 1j * mu
        self.mu2 = mu * mu

    def step(self, u_hat, m_half, v_half, dt):
        """One Cayley step in Fourier space; returns (u_hat_next, iters, rel_res)."""
        eps = self.eps
        alpha = 0.25 * eps * dt
        beta = 0.5 * dt / eps
        m_bar = float(np.mean(m_half))
        dm = m_half - m_bar
        if v_half is None:
            v_bar, dv = 0.0, None
        else:
            v_bar = float(np.mean(v_half))
            dv = v_half - v_bar
        # A_hat = 1 + i alpha m_bar mu^2 + i beta v_bar (diagonal part of I - iS)
        a_hat = 1.0 + 1j * (alpha * m_bar * self.mu2 + beta * v_bar)
        flat = dv is None and not np.any(dm)

        def pert_hat(w_hat):
            # (A - A_hat) w in Fourier space: -i alpha D(dm D w) + i beta dv w
            if flat:
                return 0.0
            dw = np.fft.ifft(self.imu * w_hat)
            out = -1j * alpha * self.imu * np.fft.fft(dm * dw)
            if dv is not None:
                w = np.fft.ifft(w_hat)
                out = out + 1j * beta * np.fft.fft(dv * w)
            return out

        # b = (2I - A) u  =>  b_hat = (2 - a_hat) u_hat - pert(u_hat)
        p_u = pert_hat(u_hat)
        b_hat = (2.0 - a_hat) * u_hat - p_u
        b_norm = float(np.linalg.norm(b_hat))
        if b_norm == 0.0:
            return np.zeros_like(u_hat), 0, 0.0
        w_hat = b_hat / a_hat
        rel = np.inf
        for it in range(1, self.maxit + 1):
            r_hat = b_hat - a_hat * w_hat - pert_hat(w_hat)
            rel = float(np.linalg.norm(r_hat)) / b_norm
            if rel <= self.tol:
                return w_hat, it, rel
            w_hat = w_hat + r_hat / a_hat
        # stiff perturbation: finish with preconditioned GMRES
        from scipy.sparse.linalg import LinearOperator, gmres

        M = self.grid.M

        def matvec(v):
            return a_hat * v + pert_hat(v)

        op = LinearOperator((M, M), matvec=matvec, dtype=complex)
        pre = LinearOperator((M, M), matvec=lambda v: v / a_hat, dtype=complex)
        w_hat, info = gmres(
            op, b_hat, x0=w_hat, rtol=self.tol, atol=0.0, M=pre, maxiter=M
        )
        if info != 0:
            raise ConvergenceError(
                f"implicit step failed to reach tol={self.tol} "
                f"(fixed-point residual {rel:.2e}, gmres info {info})"
            )
        return w_hat, self.maxit, self.tol


def cn_step(
    state: WaveField,
    model: MassModel,
    field_half=None,
    v_half=None,
    dt: float = None,
    tol: float = 1e-12,
    maxit: int = 200,
):
    """Advance one Crank-Nicolson step with half-step-frozen coefficients.

    field_half: raw perturbation values at t + dt/2 on the grid (or None);
    they are composed as m0 + eps**gamma * field with clamping. v_half:
    potential values at t + dt/2, or None to evaluate from the model.
    Returns (next_state, info dict with iterations/residual/n_clamped).
    """
    if dt is None or dt <= 0:
        raise ConfigError(f"step size must be positive, got {dt}")
    grid = state.grid
    t_half = state.t + 0.5 * dt
    m_half, n_clamped = compose_mass(
        model, state.eps, field_half, t_half, grid.x, clamp=True
    )
    if v_half is None:
        if model.potential_kind != "zero":
            v_half = eval_potential(model, t_half, grid.x)
    ws = _CnWorkspace(grid, state.eps, tol, maxit)
    u_hat, iters, rel = ws.step(np.fft.fft(state.u), m_half, v_half, dt)
    nxt = WaveField(grid=grid, eps=state.eps, t=state.t + dt, u=np.fft.ifft(u_hat))
    return nxt, {"iterations": iters, "residual": rel, "n_clamped": n_clamped}


@dataclass(frozen=True)
class SchrodingerRun:
    """Full specification of one wave propagation."""

    grid: GridSpec
    eps: float
    model: MassModel
    packet: PacketSpec
    output_times: tuple = ()
    snapshot_times: tuple = ()
    triple_time: float | None = None
    tol: float = 1e-12
    maxit: int = 200


def _observables(u, grid, eps, m_out):
    rho = np.abs(u) ** 2
    du = spectral_derivative(u, grid)
    J = eps * np.imag(m_out * np.conj(u) * du)
    return rho, J


def solve_vmse(run: SchrodingerRun, field=None) -> ObservableTrace:
    """Propagate the packet to T, recording observables at requested times.

    ``field`` is an object with ``at_time(t) -> array`` (a realization
    evaluator) or None for the deterministic coefficient. Requested times
    are snapped to the nearest step boundary; T itself is always exact
    because the final step is shortened to land on it.
    """
    grid, eps, model = run.grid, run.eps, run.model
    steps = grid.time_steps()
    t_nodes = np.concatenate([[0.0], np.cumsum(steps)])
    t_nodes[-1] = grid.T

    wanted = list(run.output_times) if run.output_times else [grid.T]
    out_idx = sorted({int(np.argmin(np.abs(t_nodes - t))) for t in wanted})
    snap_idx = sorted({int(np.argmin(np.abs(t_nodes - t))) for t in run.snapshot_times})
    triple_at = ()
    if run.triple_time is not None:
        if len(steps) < 3:
            raise ConfigError("residual triple needs at least 3 steps")
        s = int(np.argmin(np.abs(t_nodes - run.triple_time)))
        # steps s-1 and s must be equal-length; stay clear of the shortened tail
        s = max(1, min(s, len(steps) - 2))
        while s > 1 and abs(steps[s] - steps[s - 1]) > 1e-15 * steps[0]:
            s -= 1
        triple_at = (s - 1, s, s + 1)

    ws = _CnWorkspace(grid, eps, run.tol, run.maxit)
    ev = (lambda t: field.at_time(t)) if field is not None else (lambda t: None)

    state = initial_wave(grid, eps, run.packet)
    u_hat = np.fft.fft(state.u)
    parseval = grid.dx / grid.M
    norm0 = parseval * float(np.sum(np.abs(u_hat) ** 2))
    norm_drift = 0.0
    n_clamped = 0
    iter_sum = 0
    waves = {}
    triple_t, triple_u = [], []
    out_times, out_rho, out_J = [], [], []

    def record(idx, t, u_hat_now):
        if idx not in out_idx and idx not in snap_idx and idx not in triple_at:
            return
        u = np.fft.ifft(u_hat_now)
        if idx in out_idx:
            m_out, _ = compose_mass(model, eps, ev(t), t, grid.x, clamp=True)
            rho, J = _observables(u, grid, eps, m_out)
            out_times.append(t)
            out_rho.append(rho)
            out_J.append(J)
        if idx in snap_idx:
            waves[t] = u.copy()
        if idx in triple_at:
            triple_t.append(t)
            triple_u.append(u.copy())

    record(0, 0.0, u_hat)
    t = 0.0
    for n, dt in enumerate(steps):
        t_half = t + 0.5 * dt
        m_half, nc = compose_mass(model, eps, ev(t_half), t_half, grid.x, clamp=True)
        n_clamped += nc
        v_half = None
        if model.potential_kind != "zero":
            v_half = eval_potential(model, t_half, grid.x)
        u_hat, iters, _ = ws.step(u_hat, m_half, v_half, dt)
        iter_sum += iters
        t = float(t_nodes[n + 1])
        norm = parseval * float(np.sum(np.abs(u_hat) ** 2))
        norm_drift = max(norm_drift, abs(norm - norm0) / norm0)
        record(n + 1, t, u_hat)

    return ObservableTrace(
        grid=grid,
        eps=eps,
        times=np.asarray(out_times),
        rho=np.asarray(out_rho),
        J=np.asarray(out_J),
        norm_drift=norm_drift,
        n_clamped=n_clamped,
        solver_iterations=iter_sum / max(len(steps), 1),
        waves=waves,
        triple=(np.asarray(triple_t), np.asarray(triple_u)) if triple_at else None,
    )
