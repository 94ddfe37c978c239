"""Brute-force Z/2 linear algebra used to cross-check the fast algorithms.

Everything here is dense and quadratic-to-cubic; it exists for tests and
acceptance checks, never for training.
"""
from __future__ import annotations

import math
from collections import Counter

import numpy as np

from ..complex import SimplicialComplex
from ..filtration import Filtration


def gf2_rank(M: np.ndarray) -> int:
    """Rank over Z/2 by Gaussian elimination on a copy."""
    A = (np.asarray(M, dtype=np.uint8) & 1).copy()
    rows, cols = A.shape if A.ndim == 2 else (0, 0)
    r = 0
    for c in range(cols):
        if r == rows:
            break
        hits = np.flatnonzero(A[r:, c])
        if not len(hits):
            continue
        p = r + hits[0]
        if p != r:
            A[[r, p]] = A[[p, r]]
        below = np.flatnonzero(A[:, c])
        below = below[below != r]
        A[below] ^= A[r]
        r += 1
    return r


def boundary_matrix(K: SimplicialComplex, p: int, rows=None, cols=None) -> np.ndarray:
    """Dense Z/2 matrix of the boundary map from ``p``-chains to ``(p-1)``-chains.

    ``rows``/``cols`` optionally restrict to the given simplex ids (in that order).
    """
    rows = list(K.by_dim[p - 1]) if rows is None else list(rows)
    cols = list(K.by_dim[p]) if cols is None else list(cols)
    where = {sid: i for i, sid in enumerate(rows)}
    M = np.zeros((len(rows), len(cols)), dtype=np.uint8)
    for j, sid in enumerate(cols):
        s = K.simplices[sid]
        for k in range(len(s)):
            i = where.get(K.id_of(s[:k] + s[k + 1:]))
            if i is not None:
                M[i, j] = 1
    return M


def betti_oracle(K: SimplicialComplex, p: int) -> int:
    """``beta_p = n_p - rank d_p - rank d_{p+1}`` over Z/2."""
    if p < 0 or p > K.dim:
        raise ValueError(f"p={p} outside 0..{K.dim}")
    n_p = K.count(p)
    r_p = gf2_rank(boundary_matrix(K, p)) if p >= 1 else 0
    r_q = gf2_rank(boundary_matrix(K, p + 1)) if p + 1 <= K.dim else 0
    return n_p - r_p - r_q


def persistent_betti(K: SimplicialComplex, rank, p: int, a: float, b: float) -> int:
    """``dim Z_p(K_a) - dim(Z_p(K_a) cap B_p(K_b))`` for ``a <= b``.

    Cycles of ``K_a`` that bound in ``K_b`` are the boundaries of ``K_b``
    supported on ``K_a``; their dimension is ``rank d_{p+1}|K_b`` minus the
    rank of its rows outside ``K_a``.
    """
    rank = np.asarray(rank, dtype=float)
    P = [s for s in K.by_dim[p] if rank[s] <= a] if p <= K.dim else []
    if not P:
        return 0
    z = len(P) - (gf2_rank(boundary_matrix(K, p, cols=P)) if p >= 1 else 0)
    if p + 1 > K.dim:
        return z
    Q = [s for s in K.by_dim[p + 1] if rank[s] <= b]
    if not Q:
        return z
    allp = list(K.by_dim[p])
    B = boundary_matrix(K, p + 1, rows=allp, cols=Q)
    inside = np.array([rank[s] <= a for s in allp])
    zb = gf2_rank(B) - gf2_rank(B[~inside])
    return z - zb


def bookkeeping_diagram(filt: Filtration, p: int) -> Counter:
    """Off-diagonal dim-``p`` pairs from persistent Betti numbers via the multiplicity formula.

    ``mu^{i,j} = (beta^{i,j-1} - beta^{i,j}) - (beta^{i-1,j-1} - beta^{i-1,j})``
    over the distinct rank levels, with ``j = n+1`` standing for infinity.
    Zero-persistence pairs are invisible to this formula.
    """
    K, rank = filt.complex, filt.rank
    lv = list(filt.levels)
    n = len(lv)

    def beta(i, j):
        if i == 0:
            return 0
        return persistent_betti(K, rank, p, lv[i - 1], lv[min(j, n) - 1])

    out = Counter()
    for i in range(1, n + 1):
        for j in range(i + 1, n + 2):
            if j == n + 1:
                mu = beta(i, n) - beta(i - 1, n)
                death = math.inf
            else:
                mu = (beta(i, j - 1) - beta(i, j)) - (beta(i - 1, j - 1) - beta(i - 1, j))
                death = lv[j - 1]
            if mu < 0:
                raise AssertionError(f"negative multiplicity at ({i}, {j})")
            if mu:
                out[(lv[i - 1], death)] += mu
    return out
