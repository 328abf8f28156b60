"""Small dense-tensor helpers: exact symmetric fills and finite-difference stencils."""

from __future__ import annotations

import itertools
from math import factorial

import numpy as np


def sym_fill(n: int, order: int, value) -> np.ndarray:
    """Build a fully symmetric tensor from its values on sorted index tuples.

    ``value`` is called once per multiset of indices, so every permutation of a
    given index tuple receives the bit-identical number.
    """
    out = np.empty((n,) * order)
    for idx in itertools.combinations_with_replacement(range(n), order):
        v = value(idx)
        for perm in set(itertools.permutations(idx)):
            out[perm] = v
    return out


def max_asymmetry(t: np.ndarray) -> float:
    """Largest deviation of ``t`` from any of its axis permutations."""
    worst = 0.0
    for perm in itertools.permutations(range(t.ndim)):
        worst = max(worst, float(np.max(np.abs(t - np.transpose(t, perm)))) if t.size else 0.0)
    return worst


def central_weights(deriv: int) -> tuple[np.ndarray, np.ndarray]:
    """Offsets and weights of the minimal centred stencil for a ``deriv``-th derivative.

    Accuracy is O(h^2) for every order. The weights solve the moment
    conditions sum_j w_j j^q = deriv! [q == deriv] for q = 0..2p.
    """
    if deriv == 0:
        return np.array([0]), np.array([1.0])
    p = (deriv + 1) // 2
    offsets = np.arange(-p, p + 1)
    vander = np.vander(offsets.astype(float), increasing=True).T
    rhs = np.zeros(2 * p + 1)
    rhs[deriv] = factorial(deriv)
    return offsets, np.linalg.solve(vander, rhs)


def fd_mixed_partial(f, x: np.ndarray, idx: tuple[int, ...], h: float) -> float:
    """Centred finite-difference estimate of d^k f / dx_idx[0] ... dx_idx[k-1]."""
    x = np.asarray(x, dtype=float)
    counts: dict[int, int] = {}
    for i in idx:
        counts[i] = counts.get(i, 0) + 1
    axes = sorted(counts)
    stencils = [central_weights(counts[a]) for a in axes]
    total = 0.0
    for combo in itertools.product(*(range(len(s[0])) for s in stencils)):
        w = 1.0
        point = x.copy()
        for a, (offs, wts), c in zip(axes, stencils, combo):
            w *= wts[c]
            point[a] += offs[c] * h
        if w != 0.0:
            total += w * f(point)
    return total / h ** len(idx)


def fd_derivative_tensor(f, x: np.ndarray, order: int, h: float) -> np.ndarray:
    """Symmetric tensor of all order-``order`` centred mixed partials of scalar ``f``."""
    n = len(x)
    return sym_fill(n, order, lambda idx: fd_mixed_partial(f, x, idx, h))
