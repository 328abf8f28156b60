"""Derivative (cumulant) tensors of the log-partition and their multilinear maps.

The order-k tensor is the k-th derivative of psi at beta, i.e. the k-th joint
cumulant of the centred scores -X + E[X]. Order 2 is the Fisher metric, order 3
the skewness tensor, and the Taylor series of psi is sum_k Y_k(delta^k) / k!.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import factorial

import numpy as np

from ._tensors import fd_derivative_tensor, sym_fill
from .errors import DimensionMismatch, OrderOutOfRange
from .expfam import ExponentialFamily, as_beta, expectation_params, log_partition, score_moment

MAX_ORDER = 6


@dataclass(frozen=True)
class GwsTensor:
    order: int
    y: np.ndarray

    @property
    def n(self) -> int:
        return self.y.shape[0]


@lru_cache(maxsize=None)
def _centred_partitions(order: int):
    """Set partitions of range(order) with no singleton block, with Moebius weights."""
    from sympy.utilities.iterables import multiset_partitions

    out = []
    for part in multiset_partitions(list(range(order))):
        if any(len(block) == 1 for block in part):
            continue
        k = len(part)
        weight = (-1) ** (k - 1) * factorial(k - 1)
        out.append((weight, tuple(tuple(block) for block in part)))
    return tuple(out)


def _check_order(order, lo=2):
    if int(order) != order or not lo <= order <= MAX_ORDER:
        raise OrderOutOfRange(f"order must be an integer in [{lo}, {MAX_ORDER}], got {order!r}")
    return int(order)


def gws_tensor(family: ExponentialFamily, beta, order: int) -> GwsTensor:
    order = _check_order(order)
    b = as_beta(family, beta)
    moments = {k: score_moment(family, b, k) for k in range(2, order + 1)}
    parts = _centred_partitions(order)

    def value(idx):
        total = 0.0
        for weight, blocks in parts:
            term = float(weight)
            for block in blocks:
                term *= moments[len(block)][tuple(idx[p] for p in block)]
            total += term
        return total

    return GwsTensor(order, sym_fill(family.n, order, value))


def gws_contract(yt: GwsTensor, vectors) -> float:
    """Full multilinear contraction Y(v_1, ..., v_k)."""
    vecs = [np.asarray(v, dtype=float) for v in vectors]
    if len(vecs) != yt.order:
        raise DimensionMismatch(f"{len(vecs)} vectors for an order-{yt.order} tensor")
    out = yt.y
    for v in vecs:
        if v.shape != (yt.n,):
            raise DimensionMismatch(f"vector of shape {v.shape}, expected ({yt.n},)")
        out = np.tensordot(v, out, axes=(0, 0))
    return float(out)


def potential_derivative_fd(family: ExponentialFamily, beta, order: int, h: float) -> np.ndarray:
    """Oracle: order-k centred finite-difference tensor of psi."""
    b = as_beta(family, beta)
    return fd_derivative_tensor(lambda x: log_partition(family, x), b, order, h)


def potential_derivative_richardson(family: ExponentialFamily, beta, order: int, h: float) -> np.ndarray:
    """Finite-difference oracle with one Richardson step, O(h^4)."""
    coarse = potential_derivative_fd(family, beta, order, h)
    fine = potential_derivative_fd(family, beta, order, h / 2)
    return (4.0 * fine - coarse) / 3.0


def taylor_terms(family: ExponentialFamily, beta0, delta, order_max: int) -> list[float]:
    """[Y_k(delta, ..., delta) / k! for k = 1..order_max], with Y_1 = -eta."""
    order_max = _check_order(order_max, lo=1)
    b = as_beta(family, beta0)
    d = np.asarray(delta, dtype=float)
    if d.shape != (family.n,):
        raise DimensionMismatch(f"delta has shape {d.shape}, family has n={family.n}")
    terms = [float(-expectation_params(family, b) @ d)]
    for k in range(2, order_max + 1):
        terms.append(gws_contract(gws_tensor(family, b, k), [d] * k) / factorial(k))
    return terms


def expansion_residual(family: ExponentialFamily, beta0, delta, order_max: int) -> float:
    """|psi(beta0 + delta) - psi(beta0) - sum_{k<=order_max} Y_k(delta^k)/k!|."""
    d = np.asarray(delta, dtype=float)
    if np.linalg.norm(d) > 1.0:
        raise ValueError(f"|delta| = {np.linalg.norm(d):.3g} exceeds 1")
    b = as_beta(family, beta0)
    terms = taylor_terms(family, b, d, order_max)
    exact = log_partition(family, b + d) - log_partition(family, b)
    return abs(exact - sum(terms))
