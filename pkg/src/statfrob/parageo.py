"""Paracomplex numbers, geodesics, curve projection/intersection and KL learning.

The learning picture: a run starting at ``beta_init`` ends at ``beta_final``.
gamma_plus is the e-geodesic between the two (the learner's straight path in
the natural chart, lying in E+ = the family's coordinate subspace). gamma_minus
is the m-geodesic from the target density to its moment-matching point
beta_hat, traced in the saturated chart; its g-orthogonal projection into E+
is compared with gamma_plus. The two meet exactly when the learner reaches
beta_hat.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatch,
    GridMismatch,
    InvalidProbability,
    NonFinite,
    SingularMetric,
    TargetOutsideSimplexInterior,
)
from .expfam import (
    ExponentialFamily,
    as_beta,
    check_probability,
    density,
    expectation_params,
    fisher_metric,
    kl_divergence,
    natural_from_density,
    natural_from_expectation,
    saturate,
)
from .frobenius import christoffels


# -- paracomplex algebra ------------------------------------------------------

@dataclass(frozen=True)
class ParacomplexNumber:
    """re + im * eps with eps^2 = +1."""

    re: float
    im: float = 0.0

    def __mul__(self, other):
        return pc_mul(self, _pc(other))

    __rmul__ = __mul__

    def __add__(self, other):
        other = _pc(other)
        return ParacomplexNumber(self.re + other.re, self.im + other.im)

    __radd__ = __add__

    def __sub__(self, other):
        other = _pc(other)
        return ParacomplexNumber(self.re - other.re, self.im - other.im)


def _pc(x):
    return x if isinstance(x, ParacomplexNumber) else ParacomplexNumber(float(x), 0.0)


EPS = ParacomplexNumber(0.0, 1.0)
ONE = ParacomplexNumber(1.0, 0.0)
E_PLUS = ParacomplexNumber(0.5, 0.5)
E_MINUS = ParacomplexNumber(0.5, -0.5)


def pc_mul(a: ParacomplexNumber, b: ParacomplexNumber) -> ParacomplexNumber:
    return ParacomplexNumber(a.re * b.re + a.im * b.im, a.re * b.im + a.im * b.re)


@dataclass(frozen=True)
class ParaSplit:
    """Coordinates in the idempotent basis: x = plus * e_+ + minus * e_-."""

    plus: float
    minus: float

    def __mul__(self, other: "ParaSplit") -> "ParaSplit":
        return ParaSplit(self.plus * other.plus, self.minus * other.minus)


def split(x: ParacomplexNumber) -> ParaSplit:
    return ParaSplit(x.re + x.im, x.re - x.im)


def unsplit(s: ParaSplit) -> ParacomplexNumber:
    return ParacomplexNumber(0.5 * (s.plus + s.minus), 0.5 * (s.plus - s.minus))


# -- curves ------------------------------------------------------------------

@dataclass(frozen=True)
class Curve:
    s: np.ndarray
    points: np.ndarray = field(repr=False)  # shape (len(s), dim)

    def __post_init__(self):
        s = np.asarray(self.s, dtype=float)
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if s.ndim != 1 or len(s) < 2:
            raise DimensionMismatch("a curve needs at least two samples")
        if pts.shape[0] != len(s):
            raise DimensionMismatch(f"{len(s)} parameters but {pts.shape[0]} points")
        if s[0] != 0.0 or s[-1] != 1.0 or np.any(np.diff(s) <= 0):
            raise ValueError("curve parameters must increase strictly from 0 to 1")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "points", pts)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self):
        return len(self.s)


@dataclass(frozen=True)
class SplitCurve:
    gamma_plus: Curve
    gamma_minus: Curve


def _grid(steps: int) -> np.ndarray:
    if steps < 2:
        raise ValueError("steps must be >= 2")
    s = np.linspace(0.0, 1.0, steps)
    s[-1] = 1.0
    return s


def e_geodesic(family: ExponentialFamily, beta0, beta1, steps: int = 101) -> Curve:
    """Straight line in natural coordinates (the alpha = -1 geodesic)."""
    b0 = as_beta(family, beta0)
    b1 = as_beta(family, beta1)
    s = _grid(steps)
    return Curve(s, (1.0 - s)[:, None] * b0 + s[:, None] * b1)


def m_geodesic(family: ExponentialFamily, beta0, beta1, steps: int = 101) -> Curve:
    """Straight line in expectation coordinates, mapped back to beta (the alpha = +1 geodesic)."""
    b0 = as_beta(family, beta0)
    b1 = as_beta(family, beta1)
    eta0 = expectation_params(family, b0)
    eta1 = expectation_params(family, b1)
    s = _grid(steps)
    pts = np.empty((len(s), family.n))
    pts[0] = b0
    pts[-1] = b1
    warm = b0
    for idx in range(1, len(s) - 1):
        eta = (1.0 - s[idx]) * eta0 + s[idx] * eta1
        warm = natural_from_expectation(family, eta, beta0=warm)
        pts[idx] = warm
    return Curve(s, pts)


def geodesic_residual(family: ExponentialFamily, curve: Curve, alpha: float) -> float:
    """max over interior samples of |gamma'' + Gamma(gamma', gamma')| (three-point differences)."""
    if len(curve) < 3:
        raise ValueError("geodesic residual needs at least three samples")
    if curve.dim != family.n:
        raise DimensionMismatch(f"curve dimension {curve.dim} vs family n={family.n}")
    s, x = curve.s, curve.points
    worst = 0.0
    for i in range(1, len(s) - 1):
        h0 = s[i] - s[i - 1]
        h1 = s[i + 1] - s[i]
        vel = (-h1 / (h0 * (h0 + h1))) * x[i - 1] + ((h1 - h0) / (h0 * h1)) * x[i] \
            + (h0 / (h1 * (h0 + h1))) * x[i + 1]
        acc = 2.0 * (x[i - 1] / (h0 * (h0 + h1)) - x[i] / (h0 * h1) + x[i + 1] / (h1 * (h0 + h1)))
        gamma = christoffels(family, x[i], alpha).gamma
        resid = acc + np.einsum("kij,i,j->k", gamma, vel, vel)
        worst = max(worst, float(np.max(np.abs(resid))))
    return worst


def fiber_split(curve_a: Curve, curve_b: Curve) -> SplitCurve:
    """Samplewise idempotent split of a + eps * b: plus = a + b, minus = a - b."""
    if curve_a.points.shape != curve_b.points.shape or not np.array_equal(curve_a.s, curve_b.s):
        raise GridMismatch("curves must share the sample grid and dimension")
    a, b = curve_a.points, curve_b.points
    return SplitCurve(Curve(curve_a.s, a + b), Curve(curve_a.s, a - b))


def fiber_unsplit(sc: SplitCurve) -> tuple[Curve, Curve]:
    p, m = sc.gamma_plus.points, sc.gamma_minus.points
    s = sc.gamma_plus.s
    return Curve(s, 0.5 * (p + m)), Curve(s, 0.5 * (p - m))


# -- projection ----------------------------------------------------------------

def g_orthogonal_projector(g, axes) -> np.ndarray:
    """Matrix of the g-orthogonal projection onto span{e_a : a in axes}."""
    g = np.asarray(g, dtype=float)
    dim = g.shape[0]
    axes = list(axes)
    basis = np.eye(dim)[:, axes]
    gram = basis.T @ g @ basis
    return basis @ np.linalg.solve(gram, basis.T @ g)


def project_curve(curve: Curve, family: ExponentialFamily, p_ref, axes=None) -> Curve:
    """Project every sample onto the coordinate subspace spanned by ``axes``.

    Orthogonality is measured by the Fisher metric of ``family`` at ``p_ref``.
    By default ``axes`` is the whole chart (identity map).
    """
    if curve.dim != family.n:
        raise DimensionMismatch(f"curve dimension {curve.dim} vs family n={family.n}")
    axes = range(family.n) if axes is None else axes
    proj = g_orthogonal_projector(fisher_metric(family, p_ref).g, axes)
    return Curve(curve.s, curve.points @ proj.T)


# -- intersections ---------------------------------------------------------------

def _segment_distance(p0, p1, q0, q1):
    """Closest distance between segments [p0, p1] and [q0, q1] in any dimension.

    Returns (distance, parameter on first segment, parameter on second).
    """
    d1 = p1 - p0
    d2 = q1 - q0
    r = p0 - q0
    a = float(d1 @ d1)
    e = float(d2 @ d2)
    f = float(d2 @ r)
    tiny = 1e-300
    if a <= tiny and e <= tiny:
        return float(np.linalg.norm(r)), 0.0, 0.0
    if a <= tiny:
        s, t = 0.0, min(max(f / e, 0.0), 1.0)
    else:
        c = float(d1 @ r)
        if e <= tiny:
            s, t = min(max(-c / a, 0.0), 1.0), 0.0
        else:
            b = float(d1 @ d2)
            denom = a * e - b * b
            s = min(max((b * f - c * e) / denom, 0.0), 1.0) if denom > 1e-15 * a * e else 0.0
            t = (b * s + f) / e
            if t < 0.0:
                t, s = 0.0, min(max(-c / a, 0.0), 1.0)
            elif t > 1.0:
                t, s = 1.0, min(max((b - c) / a, 0.0), 1.0)
    gap = (p0 + s * d1) - (q0 + t * d2)
    return float(np.linalg.norm(gap)), s, t


def _overlap_length(p0, p1, q0, q1, tol):
    # length of the stretch of [q0, q1] lying within tol of the line through p0, p1
    d1 = p1 - p0
    a = float(d1 @ d1)
    d2 = q1 - q0
    if a == 0.0 or float(d2 @ d2) == 0.0:
        return 0.0
    u = d1 / np.sqrt(a)
    off0 = (q0 - p0) - ((q0 - p0) @ u) * u
    off1 = (q1 - p0) - ((q1 - p0) @ u) * u
    if np.linalg.norm(off0) >= tol or np.linalg.norm(off1) >= tol:
        return 0.0
    lo = max(0.0, min((q0 - p0) @ u, (q1 - p0) @ u))
    hi = min(np.sqrt(a), max((q0 - p0) @ u, (q1 - p0) @ u))
    return max(0.0, hi - lo)


@dataclass(frozen=True)
class IntersectionReport:
    count: int
    coincident: bool
    locations: tuple  # one point per merged intersection


def find_intersections(curve_a: Curve, curve_b: Curve, tol: float) -> IntersectionReport:
    """Segment pairs closer than ``tol``, with linked neighbouring hits merged into one intersection.

    A merged cluster is flagged coincident when the curves run along each other
    for longer than ``tol`` instead of crossing.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if curve_a.dim != curve_b.dim:
        raise DimensionMismatch(f"dimensions {curve_a.dim} vs {curve_b.dim}")
    pa, pb = curve_a.points, curve_b.points
    hits = {}
    for i in range(len(pa) - 1):
        for j in range(len(pb) - 1):
            dist, s, _ = _segment_distance(pa[i], pa[i + 1], pb[j], pb[j + 1])
            if dist < tol:
                hits[(i, j)] = pa[i] + s * (pa[i + 1] - pa[i])
    def near(point, segments, other):
        return any(_segment_distance(point, point, other[k], other[k + 1])[0] < tol for k in segments)

    def linked(h1, h2):
        # neighbouring hits are one intersection when the curves stay within
        # tol at the vertex joining them (a crossing through a vertex, a
        # tangential graze or an overlap), not when they separate in between
        (i1, j1), (i2, j2) = h1, h2
        if i1 != i2 and near(pa[max(i1, i2)], {j1, j2}, pb):
            return True
        return j1 != j2 and near(pb[max(j1, j2)], {i1, i2}, pa)

    seen = set()
    locations = []
    coincident = False
    for start in sorted(hits):
        if start in seen:
            continue
        stack = [start]
        seen.add(start)
        cluster = []
        while stack:
            i, j = stack.pop()
            cluster.append((i, j))
            for di in (-1, 0, 1):
                for dj in (-1, 0, 1):
                    nb = (i + di, j + dj)
                    if nb in hits and nb not in seen and linked((i, j), nb):
                        seen.add(nb)
                        stack.append(nb)
        cluster.sort()
        locations.append(hits[cluster[0]])
        for i, j in cluster:
            if _overlap_length(pa[i], pa[i + 1], pb[j], pb[j + 1], tol) > tol:
                coincident = True
                break
    return IntersectionReport(len(locations), coincident, tuple(locations))


def intersection_count(curve_a: Curve, curve_b: Curve, tol: float) -> int:
    return find_intersections(curve_a, curve_b, tol).count


# -- learning -------------------------------------------------------------------

@dataclass
class LearningTrace:
    iterates: list  # (beta, kl_value) pairs; entry 0 is the starting point
    converged: bool
    intersections: int
    stop_reason: str
    method: str
    beta_hat: np.ndarray | None = None
    gamma_plus: Curve | None = None
    gamma_minus_projected: Curve | None = None
    coincident: bool = False
    fiber_gap: float = float("nan")

    @property
    def beta_final(self) -> np.ndarray:
        return self.iterates[-1][0]

    @property
    def kl_final(self) -> float:
        return self.iterates[-1][1]

    @property
    def n_iter(self) -> int:
        return len(self.iterates) - 1


def _kl_to(family, target, beta):
    return kl_divergence(target, density(family, beta))


def _kl_change(family, eta_star, beta, cand):
    """K(target, rho_cand) - K(target, rho_beta) without subtracting two K values.

    The difference is psi(cand) - psi(beta) + (cand - beta) . eta*. With the
    exponent centred at eta(beta) the psi increment is log E_beta[exp(z)],
    z = -(cand - beta) . (X - eta), taken through expm1/log1p when z is small
    so that changes far below the rounding level of K itself keep their sign.
    """
    delta = cand - beta
    rho = density(family, beta)
    eta = family.stats @ rho
    z = -(delta @ (family.stats - eta[:, None]))
    if np.max(np.abs(z)) < 1.0:
        inc = np.log1p(float(rho @ np.expm1(z)))
    else:
        top = float(np.max(z))
        inc = top + np.log(float(rho @ np.exp(z - top)))
    change = inc + float(delta @ (eta_star - eta))
    return change if np.isfinite(change) else np.inf


def learn(family: ExponentialFamily, target, beta_init=None, method: str = "newton",
          step: float = 1.0, tol: float = 1e-12, max_iter: int = 50,
          grad_tol: float = 1e-12, intersection_tol: float = 1e-6,
          diagnostic_steps: int = 21) -> LearningTrace:
    """Minimise K(target, rho_beta) over beta.

    The gradient of K in beta is eta* - eta(beta) and its Hessian is the Fisher
    metric, so the natural-gradient step is step * g^{-1} (eta - eta*); Newton
    is the same direction with unit step, halved while K would increase. The
    increase test uses the exact change in K, so Newton keeps converging when a
    target outside the family leaves K at a floor where single steps move it by
    less than its own rounding. If a directly computed K then rounds above
    its predecessor, the predecessor plus the exact change is recorded instead.
    Iteration stops when the moment gap falls below ``grad_tol``; the run is
    ``converged`` iff the final K is below ``tol``.
    """
    try:
        p = check_probability(target, "target")
    except InvalidProbability as exc:
        raise TargetOutsideSimplexInterior(str(exc)) from exc
    if p.size != family.omega_size:
        raise DimensionMismatch(f"target has {p.size} atoms, family has {family.omega_size}")
    if method in ("ngrad", "natural-gradient"):
        method = "natural_gradient"
    if method not in ("newton", "natural_gradient"):
        raise ValueError(f"unknown method {method!r}")
    if tol <= 0:
        raise ValueError("tol must be positive")

    beta = np.zeros(family.n) if beta_init is None else as_beta(family, beta_init).copy()
    eta_star = family.stats @ p
    kl = _kl_to(family, p, beta)
    iterates = [(beta.copy(), kl)]
    stop = "max_iter"
    for _ in range(max_iter):
        gap = expectation_params(family, beta) - eta_star
        if np.max(np.abs(gap)) <= grad_tol or kl == 0.0:
            stop = "stationary"
            break
        try:
            direction = np.linalg.solve(fisher_metric(family, beta).g, gap)
        except SingularMetric:
            stop = "singular_metric"
            break
        if method == "natural_gradient":
            cand = beta + step * direction
            try:
                cand_kl = _kl_to(family, p, cand)
            except NonFinite:
                stop = "overflow"
                break
        else:
            lam = 1.0
            while lam >= 1e-12:
                cand = beta + lam * direction
                if _kl_change(family, eta_star, beta, cand) <= 0.0:
                    break
                lam *= 0.5
            else:
                stop = "stalled"
                break
            try:
                cand_kl = _kl_to(family, p, cand)
            except NonFinite:
                stop = "overflow"
                break
            if cand_kl > kl:
                # rounding in K itself; the verified change is the better estimate
                cand_kl = kl + min(_kl_change(family, eta_star, beta, cand), 0.0)
        beta, kl = cand, cand_kl
        iterates.append((beta.copy(), kl))
    else:
        gap = expectation_params(family, beta) - eta_star
        if np.max(np.abs(gap)) <= grad_tol:
            stop = "stationary"

    trace = LearningTrace(iterates, kl < tol, 0, stop, method)
    _attach_intersections(trace, family, p, iterates[0][0], intersection_tol, diagnostic_steps)
    return trace


def _attach_intersections(trace, family, target, beta_init, tol, steps):
    beta_final = trace.beta_final
    beta_hat = natural_from_expectation(family, family.stats @ target, beta0=beta_final)
    gamma_plus = e_geodesic(family, beta_init, beta_final, steps)

    # m-geodesic from the target to rho(beta_hat), in the saturated chart
    sat = saturate(family)
    rho_hat = density(family, beta_hat)
    s = _grid(steps)
    mix = [(1.0 - si) * target + si * rho_hat for si in s]
    sat_pts = np.array([natural_from_density(sat, r / r.sum()) for r in mix])
    sat_hat = np.concatenate([beta_hat, np.zeros(sat.n - family.n)])
    projected = project_curve(Curve(s, sat_pts), sat, sat_hat, axes=range(family.n))
    gamma_minus = Curve(s, projected.points[:, :family.n])

    report = find_intersections(gamma_plus, gamma_minus, tol)
    trace.beta_hat = beta_hat
    trace.gamma_plus = gamma_plus
    trace.gamma_minus_projected = gamma_minus
    trace.intersections = report.count
    trace.coincident = report.coincident
    trace.fiber_gap = float(np.linalg.norm(fiber_split(gamma_plus, gamma_minus).gamma_minus.points[-1]))
