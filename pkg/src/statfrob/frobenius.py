"""Mixed tensor, circle product, alpha-connections, curvature and the Frobenius checks.

Everything is evaluated in natural coordinates beta. There the Fisher metric is
the Hessian of the log-partition, so d_k g_ij = t_ijk and d_l t_ijk is the
fourth cumulant tensor. This gives every connection and curvature coefficient in
closed form from exact moments; finite differences are only used as oracles.

Pencil convention: Gamma^(alpha) = Gamma^(0) + (alpha/2) tbar with
Gamma^(0) = tbar / 2, so the natural coordinates are affine for alpha = -1 and
the expectation coordinates for alpha = +1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._tensors import fd_derivative_tensor, sym_fill
from .errors import DimensionMismatch
from .expfam import (
    ExponentialFamily,
    MetricTensor,
    as_beta,
    fisher_metric,
    log_partition,
    score_moment,
    skewness_tensor,
)


def _as_metric(metric) -> MetricTensor:
    if isinstance(metric, MetricTensor):
        return metric
    return MetricTensor.from_matrix(metric)


def mixed_tensor(metric, t) -> np.ndarray:
    """tbar[k, i, j] = g^{km} t_{ijm}."""
    metric = _as_metric(metric)
    t = np.asarray(t, dtype=float)
    n = metric.n
    if t.shape != (n, n, n):
        raise DimensionMismatch(f"t has shape {t.shape}, metric has n={n}")
    return np.einsum("km,ijm->kij", metric.g_inv, t)


def circle_product(u, v, tbar) -> np.ndarray:
    """(u o v)^k = tbar^k_ij u^i v^j."""
    tbar = np.asarray(tbar, dtype=float)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    n = tbar.shape[0]
    if u.shape != (n,) or v.shape != (n,):
        raise DimensionMismatch(f"vectors {u.shape}, {v.shape} vs n={n}")
    return np.einsum("kij,i,j->k", tbar, u, v)


def _invariance_sides(metric, tbar):
    g = _as_metric(metric).g
    tbar = np.asarray(tbar, dtype=float)
    if tbar.shape != (g.shape[0],) * 3:
        raise DimensionMismatch(f"tbar has shape {tbar.shape}, metric has n={g.shape[0]}")
    # left[i,j,l] = g(e_i o e_j, e_l); right[i,j,l] = g(e_i, e_j o e_l)
    left = np.einsum("kij,kl->ijl", tbar, g)
    right = np.einsum("ik,kjl->ijl", g, tbar)
    return left, right


def associativity_residual(metric, tbar) -> float:
    """max over basis triples of |g(e_i o e_j, e_l) - g(e_i, e_j o e_l)|."""
    left, right = _invariance_sides(metric, tbar)
    return float(np.max(np.abs(left - right)))


def lowering_residual(metric, tbar, t) -> float:
    """How far both sides of the invariance identity are from t_ijl."""
    left, right = _invariance_sides(metric, tbar)
    t = np.asarray(t, dtype=float)
    return float(max(np.max(np.abs(left - t)), np.max(np.abs(right - t))))


def quartic_cumulant(family: ExponentialFamily, beta) -> np.ndarray:
    """Fourth joint cumulant of the scores, equal to the fourth derivative of psi."""
    mu4 = score_moment(family, beta, 4)
    g = score_moment(family, beta, 2)

    def value(idx):
        i, j, k, l = idx
        return mu4[idx] - (g[i, j] * g[k, l] + g[i, k] * g[j, l] + g[i, l] * g[j, k])

    return sym_fill(family.n, 4, value)


@dataclass(frozen=True)
class ConnectionField:
    alpha: float
    gamma: np.ndarray  # gamma[k, i, j] = Gamma^k_ij


def _pencil_coefficient(alpha: float, zero_skewness: bool) -> float:
    # coefficient c with Gamma = c * tbar
    return 0.5 + (0.0 if zero_skewness else 0.5 * alpha)


def christoffels(family: ExponentialFamily, beta, alpha: float,
                 zero_skewness: bool = False) -> ConnectionField:
    """Christoffel symbols of the alpha-connection in natural coordinates.

    ``zero_skewness`` drops the (alpha/2) tbar deformation, leaving the
    Levi-Civita connection for every alpha (a statistical structure with t
    forced to zero).
    """
    b = as_beta(family, beta)
    tbar = mixed_tensor(fisher_metric(family, b), skewness_tensor(family, b))
    levi_civita = 0.5 * tbar
    if zero_skewness:
        return ConnectionField(float(alpha), levi_civita)
    return ConnectionField(float(alpha), levi_civita + 0.5 * alpha * tbar)


def lowered(gamma, metric) -> np.ndarray:
    """Gamma_{ij,k} = g_{kl} Gamma^l_ij, returned as [i, j, k]."""
    return np.einsum("kl,lij->ijk", _as_metric(metric).g, np.asarray(gamma))


def _check_step(h, lo, hi):
    if not lo <= h <= hi:
        raise ValueError(f"step h={h} outside [{lo}, {hi}]")


def metric_derivative_fd(family: ExponentialFamily, beta, h: float) -> np.ndarray:
    """dg[k, i, j] = d_k g_ij by centred differences of the Fisher metric."""
    b = as_beta(family, beta)
    n = family.n
    out = np.empty((n, n, n))
    for k in range(n):
        e = np.zeros(n)
        e[k] = h
        out[k] = (fisher_metric(family, b + e).g - fisher_metric(family, b - e).g) / (2 * h)
    return out


def metric_compatibility_residual(family: ExponentialFamily, beta, alpha: float,
                                  h: float = 1e-4) -> float:
    """max |d_k g_ij - Gamma_{ki,j} - Gamma_{kj,i} + alpha t_kij| with d_k g by finite differences.

    The covariant derivative of g along the pencil is -alpha t with the pencil
    written as Gamma^(0) + (alpha/2) tbar.
    """
    _check_step(h, 1e-6, 1e-2)
    b = as_beta(family, beta)
    metric = fisher_metric(family, b)
    t = skewness_tensor(family, b)
    low = lowered(christoffels(family, b, alpha).gamma, metric)  # [k, i, j] = Gamma_{ki,j}
    dg = metric_derivative_fd(family, b, h)
    resid = dg - low - np.transpose(low, (0, 2, 1)) + alpha * t
    return float(np.max(np.abs(resid)))


def _assemble_curvature(gamma, dgamma):
    # dgamma[i, l, j, k] = d_i Gamma^l_jk ; result r[l, k, i, j] = R^l_kij
    first = np.einsum("iljk->lkij", dgamma) - np.einsum("jlik->lkij", dgamma)
    quad = np.einsum("lim,mjk->lkij", gamma, gamma) - np.einsum("ljm,mik->lkij", gamma, gamma)
    return first + quad


def curvature(family: ExponentialFamily, beta, alpha: float,
              zero_skewness: bool = False) -> np.ndarray:
    """R^l_kij = d_i Gamma^l_jk - d_j Gamma^l_ik + Gamma^l_im Gamma^m_jk - Gamma^l_jm Gamma^m_ik.

    Exact: d_i g^{la} = -g^{lb} t_ibc g^{ca} and d_i t_ajk = kappa4_iajk.
    Returned as r[l, k, i, j].
    """
    b = as_beta(family, beta)
    metric = fisher_metric(family, b)
    t = skewness_tensor(family, b)
    kappa4 = quartic_cumulant(family, b)
    gamma = christoffels(family, b, alpha, zero_skewness).gamma
    c = _pencil_coefficient(alpha, zero_skewness)
    ginv = metric.g_inv
    d_ginv_t = -np.einsum("lb,ibc,ca,ajk->iljk", ginv, t, ginv, t)
    ginv_dt = np.einsum("la,iajk->iljk", ginv, kappa4)
    dgamma = c * (d_ginv_t + ginv_dt)
    return _assemble_curvature(gamma, dgamma)


def curvature_fd(family: ExponentialFamily, beta, alpha: float, h: float = 1e-4,
                 zero_skewness: bool = False) -> np.ndarray:
    """Curvature with d Gamma taken by centred differences of the Christoffel symbols."""
    b = as_beta(family, beta)
    n = family.n
    gamma = christoffels(family, b, alpha, zero_skewness).gamma
    dgamma = np.empty((n, n, n, n))
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        plus = christoffels(family, b + e, alpha, zero_skewness).gamma
        minus = christoffels(family, b - e, alpha, zero_skewness).gamma
        dgamma[i] = (plus - minus) / (2 * h)
    return _assemble_curvature(gamma, dgamma)


def flatness_residual(family: ExponentialFamily, beta, alpha: float,
                      zero_skewness: bool = False) -> float:
    return float(np.max(np.abs(curvature(family, beta, alpha, zero_skewness))))


def sectional_curvature(family: ExponentialFamily, beta, alpha: float, u, v) -> float:
    """<R(u, v) v, u> / (g(u, u) g(v, v) - g(u, v)^2)."""
    b = as_beta(family, beta)
    g = fisher_metric(family, b).g
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    r_low = np.einsum("pl,lkij->pkij", g, curvature(family, b, alpha))
    num = np.einsum("pkij,p,k,i,j->", r_low, u, v, u, v)
    area = (u @ g @ u) * (v @ g @ v) - (u @ g @ v) ** 2
    if area <= 0:
        raise DimensionMismatch("u and v span a degenerate plane")
    return float(num / area)


def wdvv_defect(metric, t) -> np.ndarray:
    """D[a,b,c,d] = t_abe g^ef t_fcd - t_bce g^ef t_fad (even case)."""
    metric = _as_metric(metric)
    t = np.asarray(t, dtype=float)
    if t.shape != (metric.n,) * 3:
        raise DimensionMismatch(f"t has shape {t.shape}, metric has n={metric.n}")
    ginv = metric.g_inv
    lhs = np.einsum("abe,ef,fcd->abcd", t, ginv, t)
    rhs = np.einsum("bce,ef,fad->abcd", t, ginv, t)
    return lhs - rhs


def wdvv_residual(metric, t) -> float:
    return float(np.max(np.abs(wdvv_defect(metric, t))))


def wdvv_curvature_link_residual(family: ExponentialFamily, beta, alpha: float) -> float:
    """Check R_pkij = (c - c^2) D[j,p,i,k] with c = (1 + alpha)/2.

    The lowered curvature of every pencil member is a multiple of the WDVV
    defect built from the Fisher metric, so the two vanish together except at
    alpha = +-1, where the multiple is zero.
    """
    b = as_beta(family, beta)
    metric = fisher_metric(family, b)
    t = skewness_tensor(family, b)
    r_low = np.einsum("pl,lkij->pkij", metric.g, curvature(family, b, alpha))
    c = _pencil_coefficient(alpha, False)
    predicted = (c - c * c) * np.einsum("jpik->pkij", wdvv_defect(metric, t))
    return float(np.max(np.abs(r_low - predicted)))


def potential_consistency(family: ExponentialFamily, beta, h: float = 1e-3) -> float:
    """max |D^3 psi - t| with D^3 psi the centred third difference of the log-partition."""
    _check_step(h, 1e-5, 1e-2)
    b = as_beta(family, beta)
    d3 = fd_derivative_tensor(lambda x: log_partition(family, x), b, 3, h)
    return float(np.max(np.abs(d3 - skewness_tensor(family, b))))


def hessian_consistency(family: ExponentialFamily, beta, h: float = 1e-4) -> float:
    """max |D^2 psi - g| with D^2 psi the centred second difference of the log-partition."""
    _check_step(h, 1e-6, 1e-2)
    b = as_beta(family, beta)
    d2 = fd_derivative_tensor(lambda x: log_partition(family, x), b, 2, h)
    return float(np.max(np.abs(d2 - fisher_metric(family, b).g)))
