"""Diagram vectorizers: PersLay form, TOGL per-vertex embeddings, RePHINE DeepSets.

Each vectorizer has a batched, differentiable form (``__call__`` on a
:class:`~topnets.persistence.batched.LayerDiagrams`) and a plain form on a
single diagram used by the small-scale API.
"""
from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .persistence.batched import LayerDiagrams, PairSet

WEIGHTS = ("one", "persistence", "learned")


def _onehot(idx, k) -> np.ndarray:
    out = np.zeros((len(idx), k))
    out[np.arange(len(idx)), idx] = 1.0
    return out


class PersLay:
    """``Agg({omega(p) * phi(p)})`` over the points of one diagram per segment."""

    def __init__(self, store=None, prefix="perslay", *, weight="one", phi="identity", agg="sum",
                 in_width=2, hidden=16, out=16, act="relu"):
        if weight not in WEIGHTS:
            raise ValueError(f"unknown weight {weight!r}")
        if agg not in ("sum", "mean", "max"):
            raise ValueError(f"unknown aggregation {agg!r}")
        self.weight, self.agg, self.in_width = weight, agg, in_width
        self.phi = None if phi == "identity" else ad.MLP(store, prefix + ".phi", [in_width, hidden, out], act=act)
        self.omega = ad.MLP(store, prefix + ".omega", [in_width, hidden, 1], act=act) if weight == "learned" else None

    @property
    def out_width(self) -> int:
        return self.in_width if self.phi is None else self.phi.out_width

    def __call__(self, pts, seg=None, n: int = 1) -> ad.Tensor:
        pts = ad.as_tensor(pts)
        if seg is None:
            seg = np.zeros(pts.shape[0], dtype=np.int64)
        if pts.shape[0] == 0:
            return ad.Tensor(np.zeros((n, self.out_width)))
        v = pts if self.phi is None else self.phi(pts)
        if self.weight == "persistence":
            v = v * (pts[:, [1]] - pts[:, [0]])
        elif self.weight == "learned":
            v = v * self.omega(pts)
        return ad.pool(v, seg, n, self.agg)


def perslay_vectorize(D, layer: PersLay, p: int | None = None, sentinel: float | None = None) -> np.ndarray:
    """Vectorize one diagram (``PersistenceDiagram`` with dim ``p``, or an ``(m, 2)`` array)."""
    if hasattr(D, "points"):
        pts = D.points(0 if p is None else p, sentinel)
    else:
        pts = np.asarray(D, dtype=float).reshape(-1, 2)
    return layer(pts).data[0]


class ToglVectorizer:
    """Per-vertex psi over the concatenated (birth, death) of every filter, plus a D1 DeepSet."""

    def __init__(self, store, prefix="togl", *, k=1, hidden=16, out=16, act="relu", psi="mlp"):
        self.k = k
        self.psi = None if psi == "identity" else ad.MLP(store, prefix + ".psi", [2 * k, hidden, out], act=act)
        self.d1 = ad.DeepSet(store, prefix + ".d1", [2 + k, hidden], [hidden, out], act=act)

    @property
    def out_width(self):
        return 2 * self.k if self.psi is None else self.psi.out_width

    def vertex(self, ld: LayerDiagrams) -> ad.Tensor:
        cols = []
        for c in range(ld.k):
            cols += [ld.v_birth[:, [c]], ld.v_death[:, [c]]]
        pts = ad.concat(cols, axis=1)
        return pts if self.psi is None else self.psi(pts)

    def graph(self, ps: PairSet | None, n_graphs: int) -> ad.Tensor:
        if ps is None or len(ps) == 0:
            return self.d1(ad.Tensor(np.zeros((0, 2 + self.k))), np.zeros(0, np.int64), n_graphs)
        feats = ad.concat([ps.points(), _onehot(ps.filt, self.k)], axis=1)
        return self.d1(feats, ps.graph, n_graphs)


def togl_vectorize(d0_per_vertex, d1, psi=None, deepset=None):
    """Single-graph TOGL: ``(psi(pair_v) for each v, DeepSet(D1))``; identity ``psi`` when None."""
    d0 = ad.as_tensor(np.asarray(d0_per_vertex, dtype=float).reshape(-1, 2))
    vert = d0 if psi is None else psi(d0)
    pts = np.asarray(d1, dtype=float).reshape(-1, 2)
    if deepset is None:
        g = ad.Tensor(pts.sum(axis=0, keepdims=True) if len(pts) else np.zeros((1, 2)))
    else:
        g = deepset(pts)
    return vert.data, g.data[0]


class RephineVectorizer:
    """DeepSet over ``(b, d, alpha, gamma, onehot(filter))`` tuples and one over dim-1 pairs."""

    def __init__(self, store, prefix="rephine", *, k=1, hidden=16, out=16, act="relu", pool="sum"):
        self.k = k
        self.d0 = ad.DeepSet(store, prefix + ".d0", [4 + k, hidden], [hidden, out], pool=pool, act=act)
        self.d1 = ad.DeepSet(store, prefix + ".d1", [2 + k, hidden], [hidden, out], pool=pool, act=act)

    @property
    def out_width(self):
        return self.d0.out_width + self.d1.out_width

    def tuples(self, ld: LayerDiagrams) -> tuple[ad.Tensor, np.ndarray]:
        n0 = ld.v_killed.shape[0]
        rows = np.tile(np.arange(n0), ld.k)
        cols = np.repeat(np.arange(ld.k), n0)
        b = ld.v_killed[rows, cols].astype(float)[:, None]
        feats = ad.concat([
            b,
            ld.v_death[(rows, cols)].reshape((-1, 1)),
            ld.alpha[(rows, cols)].reshape((-1, 1)),
            ld.gamma[(rows, cols)].reshape((-1, 1)),
            _onehot(cols, ld.k),
        ], axis=1)
        return feats, ld._vgraph[rows]

    def parts(self, ld: LayerDiagrams, n_graphs: int) -> tuple[ad.Tensor, ad.Tensor]:
        feats, seg = self.tuples(ld)
        m0 = self.d0(feats, seg, n_graphs)
        ps = ld.dims.get(1)
        if ps is None or len(ps) == 0:
            m1 = self.d1(ad.Tensor(np.zeros((0, 2 + self.k))), np.zeros(0, np.int64), n_graphs)
        else:
            m1 = self.d1(ad.concat([ps.points(), _onehot(ps.filt, self.k)], axis=1), ps.graph, n_graphs)
        return m0, m1

    def __call__(self, ld: LayerDiagrams, n_graphs: int) -> ad.Tensor:
        return ad.concat(list(self.parts(ld, n_graphs)), axis=1)


def rephine_vectorize(R, d0: ad.DeepSet, d1: ad.DeepSet | None = None) -> np.ndarray:
    """Single-graph RePHINE vector: ``DeepSet(tuples)`` concatenated with ``DeepSet(D1)`` when given."""
    parts = [d0(R.array()).data[0]]
    if d1 is not None:
        parts.append(d1(R.dim1_points()).data[0])
    return np.concatenate(parts)
