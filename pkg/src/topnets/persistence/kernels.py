"""Hot loops for persistence: dim-0 union-find and Z/2 column reduction.

Each kernel has a numba-compiled and a plain numpy/python variant with
identical outputs; :func:`union_find` and :func:`reduce_blocks` dispatch on
``topnets._accel.USE_NUMBA`` unless a backend is forced.
"""
from __future__ import annotations

import numpy as np

from .. import _accel


# -- union-find ---------------------------------------------------------------
def _uf_py(edge_order, eu, ev, birth, tie):
    n = len(birth)
    parent = np.arange(n, dtype=np.int64)
    killer = np.full(n, -1, dtype=np.int64)
    cycle = np.zeros(len(eu), dtype=np.bool_)

    def find(a):
        root = a
        while parent[root] != root:
            root = parent[root]
        while parent[a] != root:
            parent[a], a = root, parent[a]
        return root

    for e in edge_order:
        ru, rv = find(eu[e]), find(ev[e])
        if ru == rv:
            cycle[e] = True
            continue
        # the younger root dies; ties -> larger tie value, then larger index
        if (birth[ru], tie[ru], ru) > (birth[rv], tie[rv], rv):
            ru, rv = rv, ru
        killer[rv] = e
        parent[rv] = ru
    return killer, cycle


@_accel.njit
def _uf_nb(edge_order, eu, ev, birth, tie):
    n = len(birth)
    parent = np.arange(n)
    killer = np.full(n, -1, dtype=np.int64)
    cycle = np.zeros(len(eu), dtype=np.bool_)
    for k in range(len(edge_order)):
        e = edge_order[k]
        ru = eu[e]
        while parent[ru] != ru:
            parent[ru] = parent[parent[ru]]
            ru = parent[ru]
        rv = ev[e]
        while parent[rv] != rv:
            parent[rv] = parent[parent[rv]]
            rv = parent[rv]
        if ru == rv:
            cycle[e] = True
            continue
        swap = False
        if birth[ru] != birth[rv]:
            swap = birth[ru] > birth[rv]
        elif tie[ru] != tie[rv]:
            swap = tie[ru] > tie[rv]
        else:
            swap = ru > rv
        if swap:
            ru, rv = rv, ru
        killer[rv] = e
        parent[rv] = ru
    return killer, cycle


def union_find(edge_order, eu, ev, birth, tie=None, backend: str | None = None):
    """Elder-rule union-find over edges visited in ``edge_order``.

    Returns ``(killer, cycle)``: ``killer[v]`` is the edge whose arrival killed
    the component rooted at vertex ``v`` (``-1`` if it survives) and
    ``cycle[e]`` marks edges that closed a loop.
    """
    birth = np.ascontiguousarray(birth, dtype=np.float64)
    tie = np.zeros_like(birth) if tie is None else np.ascontiguousarray(tie, dtype=np.float64)
    args = (np.ascontiguousarray(edge_order, dtype=np.int64), np.ascontiguousarray(eu, dtype=np.int64),
            np.ascontiguousarray(ev, dtype=np.int64), birth, tie)
    if _pick(backend) == "numba":
        return _uf_nb(*args)
    return _uf_py(*args)


# -- Z/2 boundary reduction --------------------------------------------------
def _reduce_py(col_ptr, col_idx, blk_ptr):
    n = len(col_ptr) - 1
    low = np.full(n, -1, dtype=np.int64)
    for b in range(len(blk_ptr) - 1):
        s, t = blk_ptr[b], blk_ptr[b + 1]
        m = t - s
        M = np.zeros((m, m), dtype=np.uint8)
        for j in range(m):
            M[col_idx[col_ptr[s + j]:col_ptr[s + j + 1]], j] = 1
        owner = np.full(m, -1, dtype=np.int64)
        for j in range(m):
            col = M[:, j]
            nz = np.flatnonzero(col)
            while len(nz) and owner[nz[-1]] >= 0:
                col ^= M[:, owner[nz[-1]]]
                nz = np.flatnonzero(col)
            if len(nz):
                low[s + j] = nz[-1]
                owner[nz[-1]] = j
    return low


@_accel.njit
def _reduce_nb(col_ptr, col_idx, blk_ptr):
    n = len(col_ptr) - 1
    low = np.full(n, -1, dtype=np.int64)
    for b in range(len(blk_ptr) - 1):
        s = blk_ptr[b]
        m = blk_ptr[b + 1] - s
        M = np.zeros((m, m), dtype=np.uint8)
        for j in range(m):
            for k in range(col_ptr[s + j], col_ptr[s + j + 1]):
                M[col_idx[k], j] = 1
        owner = np.full(m, -1, dtype=np.int64)
        for j in range(m):
            piv = -1
            for i in range(m - 1, -1, -1):
                if M[i, j]:
                    piv = i
                    break
            while piv >= 0 and owner[piv] >= 0:
                o = owner[piv]
                for i in range(piv + 1):
                    M[i, j] ^= M[i, o]
                nxt = -1
                for i in range(piv - 1, -1, -1):
                    if M[i, j]:
                        nxt = i
                        break
                piv = nxt
            if piv >= 0:
                low[s + j] = piv
                owner[piv] = j
    return low


def reduce_blocks(col_ptr, col_idx, blk_ptr, backend: str | None = None) -> np.ndarray:
    """Left-to-right Z/2 reduction of block-diagonal boundary matrices.

    Columns are given in filtration order and concatenated over blocks;
    ``col_idx`` holds block-relative row positions. Returns the block-relative
    pivot row (``low``) of every reduced column, ``-1`` for zero columns.
    """
    args = (np.ascontiguousarray(col_ptr, dtype=np.int64), np.ascontiguousarray(col_idx, dtype=np.int64),
            np.ascontiguousarray(blk_ptr, dtype=np.int64))
    if _pick(backend) == "numba":
        return _reduce_nb(*args)
    return _reduce_py(*args)


def _pick(backend):
    if backend is None:
        return _accel.backend()
    if backend not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "numba" and not _accel.HAVE_NUMBA:
        raise RuntimeError("numba backend requested but numba is not importable")
    return backend
