"""Finite discrete exponential families.

A family on atoms ``0..m-1`` is given by ``n`` sufficient statistics, stored as
the rows of an ``n x m`` matrix ``stats``. Densities use the negative-exponent
convention

    rho_beta(w) = exp(-beta . X(w) - psi(beta)),   psi(beta) = ln sum_w exp(-beta . X(w))

so that ``d psi / d beta = -eta`` (with ``eta = E[X]``), the Hessian of ``psi``
is the Fisher metric and the third derivative is the skewness tensor.
All expectations are exact finite sums.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._tensors import sym_fill
from .errors import (
    DimensionMismatch,
    InvalidProbability,
    NewtonDivergence,
    NonFinite,
    RankDeficient,
    SingularMetric,
)

PROB_SUM_TOL = 1e-12
MAX_CONDITION = 1e12


@dataclass(frozen=True)
class ExponentialFamily:
    stats: np.ndarray = field(repr=False)

    def __post_init__(self):
        stats = np.array(self.stats, dtype=float, copy=True)
        if stats.ndim == 1:
            stats = stats[None, :]
        if stats.ndim != 2:
            raise DimensionMismatch(f"stats must be a matrix, got shape {stats.shape}")
        n, m = stats.shape
        if m < 2:
            raise DimensionMismatch("sample space needs at least 2 atoms")
        if n < 1:
            raise DimensionMismatch("need at least one sufficient statistic")
        if not np.all(np.isfinite(stats)):
            raise NonFinite("stats contain non-finite entries")
        if n > m - 1:
            raise RankDeficient(f"{n} statistics on {m} atoms cannot be minimal")
        aug = np.vstack([np.ones(m), stats])
        if np.linalg.matrix_rank(aug) < n + 1:
            raise RankDeficient("statistics together with the constant are linearly dependent")
        stats.setflags(write=False)
        object.__setattr__(self, "stats", stats)

    @property
    def n(self) -> int:
        return self.stats.shape[0]

    @property
    def omega_size(self) -> int:
        return self.stats.shape[1]

    def __eq__(self, other):
        return isinstance(other, ExponentialFamily) and np.array_equal(self.stats, other.stats)

    def __hash__(self):
        return hash(self.stats.tobytes())


def build_family(omega_size: int, stats) -> ExponentialFamily:
    """Validate and wrap a statistics matrix with ``omega_size`` columns."""
    if int(omega_size) != omega_size or omega_size < 2:
        raise DimensionMismatch(f"omega_size must be an integer >= 2, got {omega_size!r}")
    arr = np.asarray(stats, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != omega_size:
        raise DimensionMismatch(f"stats shape {arr.shape} does not have {omega_size} columns")
    return ExponentialFamily(arr)


def bernoulli() -> ExponentialFamily:
    return ExponentialFamily(np.array([[0.0, 1.0]]))


def categorical(m: int) -> ExponentialFamily:
    """Indicator statistics of atoms 1..m-1; atom 0 is the reference."""
    return ExponentialFamily(np.eye(m)[1:])


def random_family(rng: np.random.Generator, max_omega: int = 6, max_n: int = 3,
                  low: float = -1.0, high: float = 1.0) -> ExponentialFamily:
    """Draw a random family: m in [2, max_omega], n in [1, min(max_n, m-1)], uniform stats.

    Statistics are resampled until the rank condition holds.
    """
    m = int(rng.integers(2, max_omega + 1))
    n = int(rng.integers(1, min(max_n, m - 1) + 1))
    while True:
        stats = rng.uniform(low, high, size=(n, m))
        try:
            return ExponentialFamily(stats)
        except RankDeficient:
            continue


def as_beta(family: ExponentialFamily, beta) -> np.ndarray:
    b = np.atleast_1d(np.asarray(beta, dtype=float))
    if b.shape != (family.n,):
        raise DimensionMismatch(f"beta has shape {b.shape}, family has n={family.n}")
    if not np.all(np.isfinite(b)):
        raise NonFinite("beta contains non-finite entries")
    return b


def _exponent(family, beta):
    a = -(beta @ family.stats)
    if not np.all(np.isfinite(a)):
        raise NonFinite("beta . X overflows")
    return a


def log_partition(family: ExponentialFamily, beta) -> float:
    b = as_beta(family, beta)
    a = _exponent(family, b)
    top = a.max()
    psi = top + np.log(np.sum(np.exp(a - top)))
    if not np.isfinite(psi):
        raise NonFinite("log-partition is not finite")
    return float(psi)


def density(family: ExponentialFamily, beta) -> np.ndarray:
    b = as_beta(family, beta)
    a = _exponent(family, b)
    top = a.max()
    shifted = a - top
    psi_shift = np.log(np.sum(np.exp(shifted)))
    rho = np.exp(shifted - psi_shift)
    if np.any(rho <= 0.0):
        raise NonFinite("density underflows to zero on some atom")
    return rho


def expectation_params(family: ExponentialFamily, beta) -> np.ndarray:
    """eta = E[X] = -grad psi."""
    return family.stats @ density(family, beta)


def score_matrix(family: ExponentialFamily, beta) -> np.ndarray:
    """Row i holds d_i ell(w) = -X_i(w) + E[X_i]; every row is centred under rho."""
    rho = density(family, beta)
    eta = family.stats @ rho
    return eta[:, None] - family.stats


def _moment_tensor(scores, rho, order):
    n = scores.shape[0]

    def value(idx):
        prod = rho.copy()
        for i in idx:
            prod = prod * scores[i]
        return float(np.sum(prod))

    return sym_fill(n, order, value)


def score_moment(family: ExponentialFamily, beta, order: int) -> np.ndarray:
    """E[d_i1 ell ... d_ik ell] as an exactly symmetric order-k tensor."""
    rho = density(family, beta)
    scores = (family.stats @ rho)[:, None] - family.stats
    return _moment_tensor(scores, rho, order)


@dataclass(frozen=True)
class MetricTensor:
    g: np.ndarray
    g_inv: np.ndarray

    @property
    def n(self) -> int:
        return self.g.shape[0]

    @classmethod
    def from_matrix(cls, g) -> "MetricTensor":
        g = np.array(g, dtype=float)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise DimensionMismatch(f"metric must be square, got {g.shape}")
        g = 0.5 * (g + g.T)
        eig = np.linalg.eigvalsh(g)
        if eig[0] <= 0.0 or eig[-1] / eig[0] > MAX_CONDITION:
            raise SingularMetric(f"metric eigenvalues {eig} are degenerate")
        g_inv = np.linalg.inv(g)
        return cls(g, 0.5 * (g_inv + g_inv.T))


def fisher_metric(family: ExponentialFamily, beta) -> MetricTensor:
    """g_ij = E[d_i ell d_j ell], the covariance matrix of the statistics."""
    return MetricTensor.from_matrix(score_moment(family, beta, 2))


def skewness_tensor(family: ExponentialFamily, beta) -> np.ndarray:
    """t_ijk = E[d_i ell d_j ell d_k ell] = third derivative of psi."""
    return score_moment(family, beta, 3)


def dual_basis(family: ExponentialFamily, beta) -> np.ndarray:
    """Row i is a^i = g^{ij} d_j ell, so that E[a^i d_j ell] = delta^i_j."""
    return fisher_metric(family, beta).g_inv @ score_matrix(family, beta)


def dual_potential(family: ExponentialFamily, beta) -> float:
    """Legendre dual phi(eta) = -beta . eta - psi(beta), the negative entropy of rho."""
    b = as_beta(family, beta)
    return float(-b @ expectation_params(family, b) - log_partition(family, b))


def check_probability(rho, name: str = "rho") -> np.ndarray:
    p = np.asarray(rho, dtype=float)
    if p.ndim != 1 or p.size < 2:
        raise DimensionMismatch(f"{name} must be a vector with at least two entries")
    if not np.all(np.isfinite(p)):
        raise InvalidProbability(f"{name} has non-finite entries")
    if np.any(p <= 0.0):
        raise InvalidProbability(f"{name} must be strictly positive")
    if abs(p.sum() - 1.0) > PROB_SUM_TOL:
        raise InvalidProbability(f"{name} sums to {p.sum()!r}, not 1")
    return p


def _kl_terms(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    # p * (r - 1 - ln r) with r = q/p; series near r = 1 avoids cancellation
    eps = (q - p) / p
    out = np.empty_like(eps)
    small = np.abs(eps) < 1e-3
    xs = eps[small]
    series = np.zeros_like(xs)
    for k in range(9, 1, -1):
        series = series * (-xs) + 1.0 / k
    out[small] = xs * xs * series
    r = q[~small] / p[~small]
    out[~small] = (r - 1.0) - np.log(r)
    return p * out


def kl_divergence(rho_p, rho_q) -> float:
    """K(p, q) = sum_w p(w) ln(p(w)/q(w)).

    Evaluated as sum_w p(w) (r - 1 - ln r) with r = q/p, which equals the usual
    form for normalised inputs, is non-negative term by term, and keeps full
    relative accuracy when p and q are close.
    """
    p = check_probability(rho_p, "rho_p")
    q = check_probability(rho_q, "rho_q")
    if p.shape != q.shape:
        raise DimensionMismatch(f"length {p.size} vs {q.size}")
    return float(np.sum(_kl_terms(p, q)))


def bregman_divergence(family: ExponentialFamily, beta1, beta2) -> float:
    """D_psi(beta1, beta2) = psi(b1) - psi(b2) - grad psi(b2) . (b1 - b2).

    Equals ``kl_divergence(density(b2), density(b1))``: the second argument of
    the Bregman divergence becomes the first argument of K.
    """
    b1 = as_beta(family, beta1)
    b2 = as_beta(family, beta2)
    eta2 = expectation_params(family, b2)
    return log_partition(family, b1) - log_partition(family, b2) + float(eta2 @ (b1 - b2))


def natural_from_expectation(family: ExponentialFamily, eta, beta0=None,
                             tol: float = 1e-13, max_iter: int = 100) -> np.ndarray:
    """Invert eta(beta) by damped Newton on the convex function psi(beta) + beta . eta."""
    target = np.asarray(eta, dtype=float)
    if target.shape != (family.n,):
        raise DimensionMismatch(f"eta has shape {target.shape}, family has n={family.n}")
    beta = np.zeros(family.n) if beta0 is None else as_beta(family, beta0).copy()

    def objective(b):
        return log_partition(family, b) + float(b @ target)

    try:
        for _ in range(max_iter):
            grad = target - expectation_params(family, beta)
            if np.max(np.abs(grad)) <= tol:
                return beta
            g = fisher_metric(family, beta).g
            step = -np.linalg.solve(g, grad)
            if np.max(np.abs(grad)) < 1e-6:
                beta = beta + step
                continue
            f0 = objective(beta)
            slope = float(grad @ step)
            lam = 1.0
            while lam > 1e-12:
                cand = beta + lam * step
                try:
                    if objective(cand) <= f0 + 1e-4 * lam * slope:
                        break
                except NonFinite:
                    pass
                lam *= 0.5
            else:
                raise NewtonDivergence("line search failed while inverting eta")
            beta = beta + lam * step
    except (SingularMetric, NonFinite) as exc:
        raise NewtonDivergence(f"eta inversion left the interior: {exc}") from exc
    grad = target - expectation_params(family, beta)
    if np.max(np.abs(grad)) <= max(tol, 1e-10):
        return beta
    raise NewtonDivergence(f"no convergence after {max_iter} iterations (gap {np.max(np.abs(grad)):.3e})")


def saturate(family: ExponentialFamily) -> ExponentialFamily:
    """Extend the statistics to m-1 rows so the family covers the whole open simplex.

    The original statistics stay as the leading rows, so the family is the
    coordinate subspace ``beta[n:] == 0`` of the saturated chart.
    """
    n, m = family.stats.shape
    if n == m - 1:
        return family
    aug = np.vstack([np.ones(m), family.stats])
    _, _, vt = np.linalg.svd(aug)
    complement = vt[n + 1:]
    return ExponentialFamily(np.vstack([family.stats, complement]))


def natural_from_density(family: ExponentialFamily, rho) -> np.ndarray:
    """Natural parameters of ``rho`` in a saturated family (exact linear solve)."""
    n, m = family.stats.shape
    if n != m - 1:
        raise DimensionMismatch("natural_from_density needs a saturated family")
    p = check_probability(rho)
    if p.size != m:
        raise DimensionMismatch(f"rho has {p.size} entries, family has {m} atoms")
    system = np.hstack([family.stats.T, np.ones((m, 1))])
    sol = np.linalg.solve(system, -np.log(p))
    return sol[:n]
