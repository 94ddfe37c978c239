"""Differentiable diagrams for a whole batch, one computation per filter column.

Pairing is combinatorial (numpy/numba); the values of every pair are gathered
from the rank tensor so gradients flow back only to the generating simplex
of each birth and death (and from there to the maximizing face's filter
value, see :func:`topnets.filtration.batched_ranks`).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import autodiff as ad
from ..batch import ComplexBatch
from ..filtration import FilterFn, InvFeature, batch_degrees, batched_ranks
from . import kernels

KINDS = ("vc", "isimplex", "geometric", "rephine")


@dataclass
class PairSet:
    """Pairs of one homology dimension across graphs and filters."""

    birth: ad.Tensor
    death: ad.Tensor
    graph: np.ndarray
    filt: np.ndarray
    essential: np.ndarray
    birth_flat: np.ndarray
    death_flat: np.ndarray

    def __len__(self):
        return len(self.graph)

    def points(self) -> ad.Tensor:
        return ad.concat([self.birth.reshape((-1, 1)), self.death.reshape((-1, 1))], axis=1)


@dataclass
class LayerDiagrams:
    kind: str
    k: int
    ranks: ad.Tensor
    sentinel: ad.Tensor
    # per vertex, per filter column
    v_birth: ad.Tensor
    v_death: ad.Tensor
    v_killed: np.ndarray
    dims: dict = field(default_factory=dict)
    alpha: ad.Tensor | None = None
    gamma: ad.Tensor | None = None
    i: int = 0

    def vertex_points(self, c: int) -> ad.Tensor:
        return ad.concat([self.v_birth[:, [c]], self.v_death[:, [c]]], axis=1)

    def dim0(self) -> PairSet:
        n0, k = self.v_killed.shape
        rows = np.tile(np.arange(n0), k)
        cols = np.repeat(np.arange(k), n0)
        return PairSet(self.v_birth[(rows, cols)], self.v_death[(rows, cols)], self._vgraph[rows], cols,
                       ~self.v_killed[rows, cols], rows, np.full(len(rows), -1))

    _vgraph: np.ndarray = None


def value_gap(values: np.ndarray, graph: np.ndarray) -> float:
    """Smallest gap between two values of the same graph and column (inf if none)."""
    best = np.inf
    v2 = values.reshape(len(values), -1)
    for c in range(v2.shape[1]):
        order = np.lexsort((v2[:, c], graph))
        same = graph[order][1:] == graph[order][:-1]
        if same.any():
            best = min(best, float(np.diff(v2[order, c])[same].min()))
    return best


def tie_margin(ld: "LayerDiagrams", batch: ComplexBatch) -> float:
    """Smallest same-graph gap among the filter values that decide pairings and gradient routes."""
    sel = batch.flat_dim == ld.i
    m = value_gap(ld.ranks.data[sel], batch.flat_graph[sel])
    if ld.alpha is not None:
        m = min(m, value_gap(ld.alpha.data, batch.graph[0]))
    return m


def _filter_values(f: FilterFn, batch: ComplexBatch, x, i: int, inv=None):
    if f.kind == "fixed-degree":
        return f(None, degree=batch_degrees(batch, i))
    return f(x, inv)


def pd_for_layer(batch: ComplexBatch, kind: str, *, x=None, z=None, f: FilterFn | None = None,
                 f_v: FilterFn | None = None, f_e: FilterFn | None = None, i: int = 0,
                 inv: InvFeature | None = None, pd_dims=(0, 1), sentinel_offset: float = 1.0,
                 backend: str | None = None) -> LayerDiagrams:
    """Diagrams for every graph of ``batch`` and every filter column.

    ``x`` maps dim -> feature Tensor. ``kind`` selects vertex-color (``vc``),
    ``isimplex`` (dim ``i`` colors), ``geometric`` (dim ``i`` colors plus
    ``inv`` of the coordinates ``z``) or ``rephine`` (``f_v`` on vertices,
    ``f_e`` on edges, vertices born at 0).
    """
    if kind not in KINDS:
        raise ValueError(f"unknown diagram kind {kind!r}")
    x = x or {}
    alpha = None
    if kind == "vc":
        i = 0
        F = _filter_values(f, batch, x.get(0), 0)
    elif kind == "isimplex":
        F = _filter_values(f, batch, x.get(i), i)
    elif kind == "geometric":
        if z is None or inv is None:
            raise ValueError("geometric diagrams need coordinates and an invariant feature")
        if i < 1:
            raise ValueError("geometric filtrations need i >= 1")
        F = f(x[i], inv.tensor(z, batch.cells[i]))
    else:
        if batch.dim < 1:
            raise ValueError("RePHINE diagrams need edges")
        i = 1
        alpha = _filter_values(f_v, batch, x.get(0), 0)
        F = _filter_values(f_e, batch, x.get(1), 1)
        if alpha.shape[1] != F.shape[1]:
            raise ValueError("vertex and edge filters must have the same number of columns")
    if i > batch.dim:
        raise ValueError(f"filtration dim {i} exceeds batch dimension {batch.dim}")
    return diagrams_from_values(batch, F, i, kind=kind, alpha=alpha, pd_dims=pd_dims,
                                sentinel_offset=sentinel_offset, backend=backend)


def diagrams_from_values(batch: ComplexBatch, F: ad.Tensor, i: int, *, kind: str = "vc", alpha=None,
                         pd_dims=(0, 1), sentinel_offset: float = 1.0, backend=None) -> LayerDiagrams:
    ranks, _ = batched_ranks(batch, F, i)
    k = ranks.shape[1]
    G = batch.size
    n0 = batch.count(0)
    R = ranks.data
    sentinel = ad.add(ad.segment_max(ranks, batch.flat_graph, G), sentinel_offset)
    cat = ad.concat([ranks, sentinel], axis=0)
    vgraph = batch.graph[0]

    # dim 0: union-find per filter column
    e_off = batch.offsets[1] if batch.dim >= 1 else 0
    cells = batch.cells[1] if batch.dim >= 1 else np.zeros((0, 2), np.int64)
    m = len(cells)
    killer = np.full((n0, k), -1, dtype=np.int64)
    cycles = []
    for c in range(k):
        er = R[e_off:e_off + m, c]
        order = np.lexsort((np.arange(m), er))
        tie = None if alpha is None else alpha.data[:, c]
        kil, cyc = kernels.union_find(order, cells[:, 0], cells[:, 1], R[:n0, c], tie, backend)
        killer[:, c] = kil
        cycles.append(np.flatnonzero(cyc))
    cols = np.broadcast_to(np.arange(k), (n0, k))
    didx = np.where(killer >= 0, e_off + killer, batch.total + vgraph[:, None])
    v_birth = ranks[(np.broadcast_to(np.arange(n0)[:, None], (n0, k)), cols)]
    v_death = cat[(didx, cols)]
    out = LayerDiagrams(kind, k, ranks, sentinel, v_birth, v_death, killer >= 0)
    out._vgraph = vgraph
    out.i = i

    higher = [p for p in pd_dims if p >= 1 and p <= batch.dim]
    if higher:
        top = max(higher)
        if batch.dim <= 1:
            per_p = {1: _graph_cycles(batch, cycles, e_off)}
        else:
            per_p = _reduce_batch(batch, R, top, backend)
        for p in higher:
            bf, df, cc = per_p.get(p, (np.zeros(0, np.int64),) * 3)
            ess = df < 0
            g = batch.flat_graph[bf] if len(bf) else np.zeros(0, np.int64)
            dsel = np.where(ess, batch.total + g, df)
            out.dims[p] = PairSet(ranks[(bf, cc)], cat[(dsel, cc)], g, cc, ess, bf, df)

    if kind == "rephine":
        out.alpha = alpha
        out.gamma = _min_incident(batch, F, sentinel)
    return out


def _graph_cycles(batch, cycles, e_off):
    bf = np.concatenate([e_off + c for c in cycles]) if cycles else np.zeros(0, np.int64)
    cc = np.concatenate([np.full(len(c), j) for j, c in enumerate(cycles)]) if cycles else np.zeros(0, np.int64)
    return (bf.astype(np.int64), np.full(len(bf), -1, dtype=np.int64), cc.astype(np.int64))


def _reduce_batch(batch: ComplexBatch, R: np.ndarray, top: int, backend):
    """Z/2 reduction per (filter, graph) block over simplices of dim <= top + 1."""
    indptr, indices = batch.flat_boundary()
    sel = np.flatnonzero(batch.flat_dim <= top + 1)
    gsel = batch.flat_graph[sel]
    found = {}
    for c in range(R.shape[1]):
        order = sel[np.lexsort((sel, batch.flat_dim[sel], R[sel, c], gsel))]
        g = batch.flat_graph[order]
        blk = np.concatenate([[0], np.cumsum(np.bincount(g, minlength=batch.size))]).astype(np.int64)
        pos = np.full(batch.total, -1, dtype=np.int64)
        pos[order] = np.arange(len(order)) - blk[g]
        lens = indptr[order + 1] - indptr[order]
        col_ptr = np.concatenate([[0], np.cumsum(lens)]).astype(np.int64)
        starts = np.repeat(indptr[order], lens) + (np.arange(col_ptr[-1]) - np.repeat(col_ptr[:-1], lens))
        col_idx = pos[indices[starts]] if len(starts) else np.zeros(0, np.int64)
        low = kernels.reduce_blocks(col_ptr, col_idx, blk, backend)
        j = np.flatnonzero(low >= 0)
        creators = order[blk[g[j]] + low[j]]
        killers = order[j]
        paired = np.zeros(batch.total, dtype=bool)
        paired[creators] = True
        paired[killers] = True
        ess = order[~paired[order]]
        ess = ess[batch.flat_dim[ess] <= top]
        for p in range(1, top + 1):
            a = creators[batch.flat_dim[creators] == p]
            b = killers[batch.flat_dim[creators] == p]
            e = ess[batch.flat_dim[ess] == p]
            bf = np.concatenate([a, e])
            df = np.concatenate([b, np.full(len(e), -1)])
            prev = found.get(p)
            cc = np.full(len(bf), c)
            found[p] = (bf, df, cc) if prev is None else tuple(np.concatenate([u, v]) for u, v in zip(prev, (bf, df, cc)))
    return {p: tuple(a.astype(np.int64) for a in v) for p, v in found.items()}


def _min_incident(batch: ComplexBatch, F: ad.Tensor, sentinel: ad.Tensor) -> ad.Tensor:
    """Per vertex and filter: min of incident edge values, sentinel when isolated."""
    n0 = batch.count(0)
    cells = batch.cells[1]
    vert = cells.reshape(-1)
    edge = np.repeat(np.arange(len(cells)), 2)
    neg = ad.neg(F[edge])
    k = F.shape[1]
    arg = ad.segment_argmax(neg.data, vert, n0)
    has = arg >= 0
    cols = np.broadcast_to(np.arange(k), arg.shape)
    picked = F[(edge[np.where(has, arg, 0)], cols)]
    sent = sentinel[(np.broadcast_to(batch.graph[0][:, None], arg.shape), cols)]
    hasf = has.astype(float)
    return picked * hasf + sent * (1.0 - hasf)
