"""Flat array layout of one or more complexes, used by every batched kernel.

Simplices of dimension ``d`` are stored in stratum order; the *flat* id of a
simplex is ``offset[d] + local``, i.e. dimension-major. A batch is the
disjoint union of its members, so per-graph persistence pairs are unchanged
by batching.
"""
from __future__ import annotations

from itertools import combinations

import numpy as np

from .complex import AttributedComplex, GeometricComplex, SimplicialComplex

_EMPTY = np.zeros(0, dtype=np.int64)


class ComplexArrays:
    """Index arrays for a single complex (cached on the complex object)."""

    def __init__(self, K: SimplicialComplex):
        self.dim = K.dim
        vpos = {K.simplices[sid][0]: i for i, sid in enumerate(K.by_dim[0])} if K.dim >= 0 else {}
        self.cells = []
        local = []
        for d in range(K.dim + 1):
            rows = [K.simplices[sid] for sid in K.by_dim[d]]
            cells = np.array([[vpos[v] for v in s] for s in rows], dtype=np.int64).reshape(len(rows), d + 1)
            self.cells.append(cells)
            local.append({tuple(r): i for i, r in enumerate(cells.tolist())})
        self.faces = {}
        for d in range(K.dim + 1):
            for i in range(d + 1):
                c = self.cells[d]
                if i == d:
                    self.faces[(d, i)] = np.arange(len(c), dtype=np.int64)[:, None]
                    continue
                idx = [[local[i][t] for t in combinations(row, i + 1)] for row in c.tolist()]
                self.faces[(d, i)] = np.array(idx, dtype=np.int64).reshape(len(c), -1)
        self.nbrs = {}
        for d in range(K.dim + 1):
            n_d = len(self.cells[d])
            if d >= 1:
                f = self.faces[(d, d - 1)]
                src = f.reshape(-1)
                dst = np.repeat(np.arange(n_d), d + 1)
                self.nbrs[("boundary", d)] = (src, dst)
                # lower adjacency: share a (d-1)-face
                cof = [[] for _ in range(len(self.cells[d - 1]))]
                for j, row in enumerate(f.tolist()):
                    for t in row:
                        cof[t].append(j)
                pairs = [(a, b) for lst in cof for a in lst for b in lst if a != b]
                self.nbrs[("lower", d)] = _pairs(pairs)
            else:
                self.nbrs[("boundary", d)] = (_EMPTY, _EMPTY)
                self.nbrs[("lower", d)] = (_EMPTY, _EMPTY)
            if d + 1 <= K.dim:
                f = self.faces[(d + 1, d)]
                src = np.repeat(np.arange(len(f)), d + 2)
                dst = f.reshape(-1)
                self.nbrs[("coboundary", d)] = (src, dst)
                pairs = [(a, b) for row in f.tolist() for a in row for b in row if a != b]
                self.nbrs[("upper", d)] = _pairs(pairs)
            else:
                self.nbrs[("coboundary", d)] = (_EMPTY, _EMPTY)
                self.nbrs[("upper", d)] = (_EMPTY, _EMPTY)


def _pairs(pairs):
    if not pairs:
        return (_EMPTY, _EMPTY)
    arr = np.array(sorted(set(pairs)), dtype=np.int64)
    # (src, dst): message flows from src to dst
    return arr[:, 1].copy(), arr[:, 0].copy()


def arrays_of(K: SimplicialComplex) -> ComplexArrays:
    arr = getattr(K, "_arrays", None)
    if arr is None:
        arr = ComplexArrays(K)
        K._arrays = arr
    return arr


class ComplexBatch:
    """Disjoint union of complexes with concatenated colors and coordinates."""

    def __init__(self, items, max_dim: int | None = None):
        items = list(items)
        self.size = len(items)
        complexes, colors, coords = [], [], []
        for it in items:
            if isinstance(it, GeometricComplex):
                complexes.append(it.complex)
                colors.append(it.colors)
                coords.append(it.coords)
            elif isinstance(it, AttributedComplex):
                complexes.append(it.complex)
                colors.append(it.colors)
                coords.append(None)
            else:
                complexes.append(it)
                colors.append(None)
                coords.append(None)
        self.complexes = complexes
        top = max((K.dim for K in complexes), default=-1)
        self.dim = top if max_dim is None else min(top, max_dim)
        arrs = [arrays_of(K) for K in complexes]
        D = self.dim + 1
        self.counts = np.zeros(D, dtype=np.int64)
        self.cells, self.graph, self.faces, self.nbrs = [], [], {}, {}
        per_dim_off = np.zeros((len(items) + 1, D), dtype=np.int64)
        for g, a in enumerate(arrs):
            for d in range(D):
                per_dim_off[g + 1, d] = per_dim_off[g, d] + (len(a.cells[d]) if d <= a.dim else 0)
        self.counts = per_dim_off[-1].copy()
        self._graph_offsets = per_dim_off
        for d in range(D):
            cells, graph = [], []
            for g, a in enumerate(arrs):
                if d <= a.dim:
                    cells.append(a.cells[d] + per_dim_off[g, 0])
                    graph.append(np.full(len(a.cells[d]), g, dtype=np.int64))
            self.cells.append(np.concatenate(cells).astype(np.int64) if cells else np.zeros((0, d + 1), np.int64))
            self.graph.append(np.concatenate(graph) if graph else _EMPTY)
            for i in range(d + 1):
                blocks = [a.faces[(d, i)] + per_dim_off[g, i] for g, a in enumerate(arrs) if d <= a.dim]
                width = len(list(combinations(range(d + 1), i + 1)))
                self.faces[(d, i)] = np.concatenate(blocks) if blocks else np.zeros((0, width), np.int64)
            for kind in ("boundary", "coboundary", "upper", "lower"):
                sd = {"boundary": d - 1, "coboundary": d + 1}.get(kind, d)
                srcs, dsts = [], []
                for g, a in enumerate(arrs):
                    if d > a.dim:
                        continue
                    if kind in ("coboundary", "upper") and d + 1 > self.dim:
                        continue
                    s, t = a.nbrs[(kind, d)]
                    if len(s):
                        srcs.append(s + per_dim_off[g, sd])
                        dsts.append(t + per_dim_off[g, d])
                self.nbrs[(kind, d)] = (np.concatenate(srcs), np.concatenate(dsts)) if srcs else (_EMPTY, _EMPTY)
        self.offsets = np.concatenate([[0], np.cumsum(self.counts)]).astype(np.int64)
        self.total = int(self.offsets[-1])
        self.flat_dim = np.repeat(np.arange(D), self.counts)
        self.flat_graph = np.concatenate(self.graph) if D else _EMPTY
        # colors
        self.colors = {}
        if all(c is not None for c in colors) and items:
            for d in range(D):
                blocks = []
                for g, c in enumerate(colors):
                    if d <= complexes[g].dim:
                        if d not in c:
                            blocks = None
                            break
                        blocks.append(c[d])
                if blocks:
                    self.colors[d] = np.concatenate(blocks)
        self.coords = np.concatenate(coords) if items and all(z is not None for z in coords) else None
        self._boundary = None

    def count(self, d: int) -> int:
        return int(self.counts[d]) if 0 <= d <= self.dim else 0

    def graph_slice(self, g: int, d: int) -> slice:
        o = self._graph_offsets
        return slice(int(o[g, d]), int(o[g + 1, d]))

    def flat_boundary(self):
        """Per flat simplex: array of flat ids of its codim-1 faces (CSR form)."""
        if self._boundary is None:
            ptr = [np.zeros(self.count(0), dtype=np.int64)]
            idx = []
            for d in range(1, self.dim + 1):
                f = self.faces[(d, d - 1)] + self.offsets[d - 1]
                idx.append(f.reshape(-1))
                ptr.append(np.full(len(f), d + 1, dtype=np.int64))
            lens = np.concatenate(ptr) if ptr else _EMPTY
            indptr = np.concatenate([[0], np.cumsum(lens)]).astype(np.int64)
            indices = np.concatenate(idx).astype(np.int64) if idx else _EMPTY
            self._boundary = (indptr, indices)
        return self._boundary

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.count(0))
        if self.dim >= 1:
            np.add.at(deg, self.cells[1].reshape(-1), 1.0)
        return deg
