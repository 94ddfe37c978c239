"""Message passing: GIN/GCN on graphs, MPSN over simplicial neighborhoods, EMPSN with coordinates.

Features are dicts ``dim -> Tensor (n_d, width)`` over a :class:`ComplexBatch`.
"""
from __future__ import annotations

import warnings
from itertools import combinations

import numpy as np

from . import autodiff as ad
from .batch import ComplexBatch

ALL_NEIGHBORHOODS = ("boundary", "coboundary", "lower", "upper")


class GNNLayer:
    """GIN: ``MLP((1 + eps) x_v + sum_u x_u)``; GCN: ``act(W mean_{u in N(v) + v} x_u + b)``."""

    def __init__(self, store, prefix, in_w, out_w, kind="gin", act="relu"):
        if kind not in ("gin", "gcn"):
            raise ValueError(f"unknown GNN kind {kind!r}")
        self.kind = kind
        if kind == "gin":
            self.eps = store.param(prefix + ".eps", (1,), init="zeros")
            self.mlp = ad.MLP(store, prefix + ".mlp", [in_w, out_w, out_w], act=act)
        else:
            self.lin = ad.MLP(store, prefix + ".lin", [in_w, out_w], act=act)
            self.act = ad.ACTIVATIONS[act]

    def __call__(self, batch: ComplexBatch, x: dict, z=None):
        x0 = x[0]
        n = x0.shape[0]
        src, dst = batch.nbrs[("upper", 0)] if batch.dim >= 1 else (np.zeros(0, np.int64),) * 2
        agg = ad.segment_sum(x0[src], dst, n) if len(src) else ad.Tensor(np.zeros(x0.shape))
        if self.kind == "gin":
            h = self.mlp(x0 * (self.eps + 1.0) + agg)
        else:
            deg = np.bincount(dst, minlength=n).astype(float)
            h = self.act(self.lin((x0 + agg) * (1.0 / (deg + 1.0))[:, None]))
        out = dict(x)
        out[0] = h
        return out, z


def _nbhd_map(neighborhoods, top):
    if neighborhoods is None:
        return {d: tuple(ALL_NEIGHBORHOODS) for d in range(top + 1)}
    if isinstance(neighborhoods, (list, tuple)):
        return {d: tuple(neighborhoods) for d in range(top + 1)}
    return {int(d): tuple(v) for d, v in neighborhoods.items()}


class MPSNLayer:
    """Simplicial message passing over the enabled neighborhoods of every dimension.

    ``msg``: ``identity`` (send ``x_src``) or ``mlp`` (``MLP([x_src, x_dst])``).
    ``between``: ``linear`` (sum after a per-neighborhood linear map) or ``sum``.
    ``update``: ``gin`` (``MLP((1 + eps) x + m)``) or ``mlp`` (``MLP([x, m])``).
    """

    def __init__(self, store, prefix, width, max_dim, *, neighborhoods=None, msg="mlp", between="linear",
                 update="mlp", act="relu", inv_width=0):
        self.width, self.max_dim = width, max_dim
        self.nb = _nbhd_map(neighborhoods, max_dim)
        self.msg, self.between, self.update = msg, between, update
        self.inv_width = inv_width
        self.msgs, self.lins, self.upds, self.eps = {}, {}, {}, {}
        for d in range(max_dim + 1):
            for kind in self.nb.get(d, ()):
                key = f"{kind}{d}"
                if msg == "mlp":
                    self.msgs[(kind, d)] = ad.MLP(store, f"{prefix}.msg.{key}", [2 * width + inv_width, width, width], act=act, final_act=act)
                if between == "linear":
                    self.lins[(kind, d)] = store.param(f"{prefix}.between.{key}", (width, width))
            if update == "gin":
                self.eps[d] = store.param(f"{prefix}.eps{d}", (1,), init="zeros")
                self.upds[d] = ad.MLP(store, f"{prefix}.upd{d}", [width, width, width], act=act)
            elif update == "mlp":
                self.upds[d] = ad.MLP(store, f"{prefix}.upd{d}", [2 * width, width, width], act=act)
            else:
                raise ValueError(f"unknown update {update!r}")
        self._warned = set()

    def _sd(self, kind, d):
        return {"boundary": d - 1, "coboundary": d + 1}.get(kind, d)

    def messages(self, batch, x, d, kind, inv=None):
        src, dst = batch.nbrs[(kind, d)]
        xs = x[self._sd(kind, d)][src]
        if self.msg == "identity":
            return xs, dst
        parts = [xs, x[d][dst]]
        if inv is not None:
            parts.append(inv)
        return self.msgs[(kind, d)](ad.concat(parts, axis=1)), dst

    def aggregate(self, batch, x, d, inv_fn=None, keep=None):
        n_d = x[d].shape[0]
        total = None
        for kind in self.nb.get(d, ()):
            src, dst = batch.nbrs.get((kind, d), (np.zeros(0),) * 2) if d <= batch.dim else (np.zeros(0),) * 2
            if len(src) == 0:
                continue
            inv = inv_fn(kind, d) if inv_fn is not None else None
            m, dst = self.messages(batch, x, d, kind, inv)
            if keep is not None:
                keep[(kind, d)] = m
            a = ad.segment_sum(m, dst, n_d)
            if self.between == "linear":
                a = a @ self.lins[(kind, d)]
            total = a if total is None else total + a
        if total is None:
            key = d
            if key not in self._warned and n_d and self.nb.get(d):
                self._warned.add(key)
                warnings.warn(f"no enabled neighborhood is populated for dim {d}; messages are zero", stacklevel=3)
            total = ad.Tensor(np.zeros((n_d, self.width)))
        return total

    def _update(self, d, xd, agg):
        if self.update == "gin":
            return self.upds[d](xd * (self.eps[d] + 1.0) + agg)
        return self.upds[d](ad.concat([xd, agg], axis=1))

    def __call__(self, batch: ComplexBatch, x: dict, z=None):
        out = {}
        for d in range(min(batch.dim, self.max_dim) + 1):
            out[d] = self._update(d, x[d], self.aggregate(batch, x, d))
        return out, z


def barycenters(z: ad.Tensor, cells: np.ndarray) -> ad.Tensor:
    out = z[cells[:, 0]]
    for j in range(1, cells.shape[1]):
        out = out + z[cells[:, j]]
    return out * (1.0 / cells.shape[1])


def _dist(a: ad.Tensor, b: ad.Tensor) -> ad.Tensor:
    return ad.sqrt(ad.square(a - b).sum(axis=1, keepdims=True))


def pair_invariants(z: ad.Tensor, cs: np.ndarray, cd: np.ndarray) -> ad.Tensor:
    """``[barycenter distance, max pairwise distance over the union of vertices]`` per row."""
    bary = _dist(barycenters(z, cs), barycenters(z, cd))
    verts = np.concatenate([cs, cd], axis=1)
    ds = [_dist(z[verts[:, p]], z[verts[:, q]]) for p, q in combinations(range(verts.shape[1]), 2)]
    stack = ad.concat(ds, axis=1)
    arg = np.argmax(stack.data, axis=1)
    mx = stack[(np.arange(len(verts)), arg)].reshape((-1, 1))
    return ad.concat([bary, mx], axis=1)


class EMPSNLayer(MPSNLayer):
    """MPSN with E(n)-invariant pair features in every message and a vertex coordinate update.

    ``z_v <- z_v + C_v * sum_{u in N_up(v)} (z_v - z_u) * phi_z(m_{u->v})``
    with ``C_v = 1 / max(1, |N_up(v)|)``.
    """

    def __init__(self, store, prefix, width, max_dim, *, neighborhoods=None, act="relu", update="mlp",
                 coord_hidden=None):
        super().__init__(store, prefix, width, max_dim, neighborhoods=neighborhoods, msg="mlp",
                         between="linear", update=update, act=act, inv_width=2)
        self.phi_z = ad.MLP(store, prefix + ".phi_z", [width, coord_hidden or width, 1], act=act)

    def step(self, batch: ComplexBatch, x: dict, z: ad.Tensor):
        """Return ``(x_new, dz)``: updated features and the vertex displacement."""
        if z is None:
            raise ValueError("EMPSN layers need vertex coordinates")
        z = ad.as_tensor(z)

        def inv_fn(kind, d):
            src, dst = batch.nbrs[(kind, d)]
            return pair_invariants(z, batch.cells[self._sd(kind, d)][src], batch.cells[d][dst])

        keep = {}
        out = {}
        for d in range(min(batch.dim, self.max_dim) + 1):
            out[d] = self._update(d, x[d], self.aggregate(batch, x, d, inv_fn, keep))
        n0 = z.shape[0]
        m = keep.get(("upper", 0))
        if m is None:
            return out, ad.Tensor(np.zeros(z.shape))
        src, dst = batch.nbrs[("upper", 0)]
        w = self.phi_z(m)
        rel = (z[dst] - z[src]) * w
        deg = np.bincount(dst, minlength=n0).astype(float)
        C = 1.0 / np.maximum(1.0, deg)
        dz = ad.segment_sum(rel, dst, n0) * C[:, None]
        return out, dz

    def __call__(self, batch: ComplexBatch, x: dict, z=None):
        out, dz = self.step(batch, x, z)
        return out, ad.as_tensor(z) + dz
