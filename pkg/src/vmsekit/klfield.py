"""Karhunen-Loeve sampling of the random mass perturbation.

The perturbation field is stationary in time and space with separable
exponential correlation D^2 exp(-|dt|/(a*eps) - |dx|/(b*eps)) on the
physical domain [0, T] x [0, L] (the field oscillates on the fast scale,
so its correlation lengths shrink linearly with eps). Each exponential
factor has a classical explicit KL decomposition on an interval: the
eigenfrequencies solve, with c = a*eps and halfspan H = T/2,

    odd index  (cos branch):  1 - c*w*tan(w*H) = 0,
    even index (sin branch):  c*w + tan(w*H) = 0,

one root per branch per pole interval of tan, interlacing to an ascending
sequence. Eigenvalues are lambda = 2c / (1 + c^2 w^2). The 2-d modes are
tensor products; they are ordered by descending eigenvalue product and the
basis stores the leading ``n_terms`` modes, where ``n_terms`` is the index
of the first mode whose relative amplitude sqrt(prod / lead) drops below
the truncation threshold.

Bisection runs on pole-free forms of the branch equations
(cos(wH) - c w sin(wH) and sin(wH) + c w cos(wH)), so brackets never touch
a singularity of tan.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

#: default relative-amplitude cutoff for basis truncation
DEFAULT_TRUNCATION = 2.0**-9


@dataclass(frozen=True)
class CorrelationSpec:
    """Separable exponential space-time correlation of the perturbation.

    R(dt, dx) = D^2 * exp(-|dt|/a - |dx|/b) in the fast variables; the
    associated power spectrum (used by the kinetic collision kernel) is
    R_hat(omega, p) = 4*a*b*D^2 / ((1 + a^2 omega^2)(1 + b^2 p^2)).
    """

    D: float = 1.5
    a: float = 100.0
    b: float = 100.0

    def __post_init__(self):
        if self.D < 0:
            raise ConfigError(f"correlation amplitude D must be >= 0, got {self.D}")
        if self.a <= 0 or self.b <= 0:
            raise ConfigError("correlation scales a, b must be positive")


def spectral_density(corr: CorrelationSpec, omega, p) -> np.ndarray:
    """Power spectrum of the correlation, nonnegative and even in both args."""
    omega = np.asarray(omega, dtype=float)
    p = np.asarray(p, dtype=float)
    return (4.0 * corr.a * corr.b * corr.D**2) / (
        (1.0 + (corr.a * omega) ** 2) * (1.0 + (corr.b * p) ** 2)
    )


def solve_frequencies(c: float, halfspan: float, count: int) -> np.ndarray:
    """First `count` positive eigenfrequencies, ascending.

    Roots interlace strictly: the odd-branch root of pole interval q lies in
    (q*pi/H, (2q+1)*pi/(2H)) and the even-branch root in
    ((2q-1)*pi/(2H), q*pi/H), so brackets are known a priori and bisection
    cannot escape them. 110 halvings take every bracket to the floating
    point resolution limit of the root.
    """
    if c <= 0 or halfspan <= 0:
        raise ConfigError("correlation scale and halfspan must be positive")
    if count < 1:
        raise ConfigError(f"root count must be >= 1, got {count}")
    H = float(halfspan)
    out = np.empty(count)

    def bisect(lo, hi, f):
        flo = f(lo)
        for _ in range(110):
            mid = 0.5 * (lo + hi)
            fm = f(mid)
            same = np.sign(fm) == np.sign(flo)
            lo = np.where(same, mid, lo)
            flo = np.where(same, fm, flo)
            hi = np.where(same, hi, mid)
        return 0.5 * (lo + hi)

    n_odd = (count + 1) // 2
    q = np.arange(n_odd, dtype=float)
    out[0::2] = bisect(
        q * np.pi / H + 1e-30,
        (2.0 * q + 1.0) * np.pi / (2.0 * H),
        lambda w: np.cos(w * H) - c * w * np.sin(w * H),
    )
    n_even = count // 2
    if n_even:
        q = np.arange(1, n_even + 1, dtype=float)
        out[1::2] = bisect(
            (2.0 * q - 1.0) * np.pi / (2.0 * H) + 1e-30,
            q * np.pi / H,
            lambda w: np.sin(w * H) + c * w * np.cos(w * H),
        )
    if not np.all(np.diff(out) > 0):
        raise ConfigError("frequency interlacing failed; brackets inconsistent")
    return out


def _eigenvalues(c: float, w: np.ndarray) -> np.ndarray:
    return 2.0 * c / (1.0 + (c * w) ** 2)


def _eigenfunction_values(w, index_1based, halfspan, t):
    """Normalized interval eigenfunctions; even index -> sin branch."""
    w = np.asarray(w, dtype=float)
    idx = np.asarray(index_1based)
    t = np.asarray(t, dtype=float)
    arg = t - halfspan
    s2 = np.sin(2.0 * w * halfspan) / (2.0 * w)
    even = idx % 2 == 0
    norm = np.sqrt(np.where(even, halfspan - s2, halfspan + s2))
    vals = np.where(even, np.sin(w * arg), np.cos(w * arg))
    return vals / norm


@dataclass(frozen=True, eq=False)
class KLBasis:
    """Truncated tensor-product KL basis for one (eps, T, L) combination.

    Pair arrays are sorted by descending eigenvalue product; ``pair_time``
    and ``pair_space`` are 1-based indices into the per-axis arrays, and
    ``pair_amps`` holds sqrt(lambda_i * sigma_j). ``n_terms`` equals the
    stored pair count.
    """

    eps: float
    T: float
    L: float
    threshold: float
    time_freqs: np.ndarray
    time_eigs: np.ndarray
    space_freqs: np.ndarray
    space_eigs: np.ndarray
    pair_time: np.ndarray
    pair_space: np.ndarray
    pair_amps: np.ndarray

    @property
    def n_terms(self) -> int:
        return int(self.pair_amps.size)

    def eigenfunction_time(self, i, t):
        """psi_i(t) for 1-based index i (scalar or array i, broadcast t)."""
        i = np.asarray(i)
        if np.any(i < 1) or np.any(i > self.time_freqs.size):
            raise ConfigError("time eigenfunction index out of range")
        return _eigenfunction_values(
            self.time_freqs[i - 1], i, self.T / 2.0, t
        )

    def eigenfunction_space(self, j, x):
        """phi_j(x) for 1-based index j."""
        j = np.asarray(j)
        if np.any(j < 1) or np.any(j > self.space_freqs.size):
            raise ConfigError("space eigenfunction index out of range")
        return _eigenfunction_values(
            self.space_freqs[j - 1], j, self.L / 2.0, x
        )


def build_basis(
    corr: CorrelationSpec,
    eps: float,
    T: float,
    L: float,
    threshold: float = DEFAULT_TRUNCATION,
) -> KLBasis:
    """Enumerate, sort, and truncate the tensor-product KL modes.

    Per-axis sequences are extended until the weakest per-axis eigenvalue,
    paired with the other axis's strongest, falls below threshold^2 times
    the leading product; every retained 2-d mode is then contained in the
    candidate rectangle.
    """
    if eps <= 0:
        raise ConfigError(f"eps must be positive, got {eps}")
    if not 0 < threshold < 1:
        raise ConfigError(f"truncation threshold must lie in (0,1), got {threshold}")
    ca, cb = corr.a * eps, corr.b * eps
    lim_sq = threshold * threshold

    def axis_eigs(c, halfspan):
        n = 64
        while True:
            w = solve_frequencies(c, halfspan, n)
            lam = _eigenvalues(c, w)
            if lam[-1] < lim_sq * lam[0]:
                keep = int(np.searchsorted(-lam, -lim_sq * lam[0], side="right"))
                return w[:keep], lam[:keep]
            n *= 2

    wt, lam = axis_eigs(ca, T / 2.0)
    wx, sig = axis_eigs(cb, L / 2.0)
    prods = np.outer(lam, sig).ravel()
    order = np.argsort(-prods, kind="stable")
    sorted_prods = prods[order]
    lead = sorted_prods[0]
    below = np.nonzero(sorted_prods < lim_sq * lead)[0]
    # keep everything above threshold plus the first sub-threshold mode
    n_terms = int(below[0]) + 1 if below.size else sorted_prods.size
    sel = order[:n_terms]
    i_idx = sel // sig.size + 1
    j_idx = sel % sig.size + 1
    return KLBasis(
        eps=float(eps),
        T=float(T),
        L=float(L),
        threshold=float(threshold),
        time_freqs=wt,
        time_eigs=lam,
        space_freqs=wx,
        space_eigs=sig,
        pair_time=i_idx.astype(np.int64),
        pair_space=j_idx.astype(np.int64),
        pair_amps=np.sqrt(sorted_prods[:n_terms]),
    )


@dataclass(frozen=True, eq=False)
class FieldRealization:
    """One draw of the KL coefficients."""

    xi: np.ndarray
    distribution: str
    seed: int


def sample_realization(
    basis: KLBasis, seed: int, distribution: str = "gaussian"
) -> FieldRealization:
    """Draw i.i.d. unit-variance coefficients for every retained mode."""
    rng = np.random.default_rng(seed)
    if distribution == "gaussian":
        xi = rng.standard_normal(basis.n_terms)
    elif distribution == "uniform":
        r = np.sqrt(3.0)
        xi = rng.uniform(-r, r, basis.n_terms)
    else:
        raise ConfigError(f"unknown coefficient distribution {distribution!r}")
    return FieldRealization(xi=xi, distribution=distribution, seed=int(seed))


class FieldEvaluator:
    """Fast repeated evaluation of one realization on a fixed x grid.

    The spatial eigenfunctions are precomputed as a (len(x), #distinct j)
    matrix; each time evaluation reduces the per-mode coefficients to a
    per-j vector and applies one matrix-vector product.
    """

    def __init__(self, basis, corr, realization, x_nodes):
        if realization.xi.size != basis.n_terms:
            raise ConfigError("realization size does not match basis truncation")
        x_nodes = np.asarray(x_nodes, dtype=float)
        self._basis = basis
        j_unique, j_inv = np.unique(basis.pair_space, return_inverse=True)
        i_unique, i_inv = np.unique(basis.pair_time, return_inverse=True)
        self._phi = basis.eigenfunction_space(
            j_unique[None, :], x_nodes[:, None]
        )
        self._i_unique = i_unique
        self._i_inv = i_inv
        self._j_inv = j_inv
        self._nj = j_unique.size
        self._coef = corr.D * basis.pair_amps * realization.xi

    def at_time(self, t: float) -> np.ndarray:
        """Field values sampled at (t, x_nodes)."""
        psi = self._basis.eigenfunction_time(self._i_unique, float(t))
        per_pair = self._coef * psi[self._i_inv]
        cj = np.bincount(self._j_inv, weights=per_pair, minlength=self._nj)
        return self._phi @ cj


def sample_field(basis, corr, realization, t, x_nodes) -> np.ndarray:
    """One-shot field evaluation at (t, x_nodes)."""
    return FieldEvaluator(basis, corr, realization, x_nodes).at_time(t)


def kl_covariance(basis, corr, t1, x1, t2, x2) -> float:
    """Covariance of the truncated expansion between two space-time points."""
    psi1 = basis.eigenfunction_time(basis.pair_time, float(t1))
    psi2 = basis.eigenfunction_time(basis.pair_time, float(t2))
    phi1 = basis.eigenfunction_space(basis.pair_space, float(x1))
    phi2 = basis.eigenfunction_space(basis.pair_space, float(x2))
    return float(
        corr.D**2 * np.sum(basis.pair_amps**2 * psi1 * psi2 * phi1 * phi2)
    )
