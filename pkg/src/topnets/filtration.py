"""Filtering functions and color-based filtrations.

A filtration is stored as a per-simplex rank. Ranks of ``d``-simplices are the
maximum of filter values over their ``i``-faces (vertex-color filtrations are
the ``i = 0`` case) and ``0`` below dimension ``i``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable

import numpy as np

from . import autodiff as ad
from .batch import ComplexBatch
from .complex import AttributedComplex, GeometricComplex, SimplicialComplex

EPS = 1e-6


class FilterFn:
    """Maps colors (optionally with invariant features) to positive filter values.

    ``kind`` is one of ``fixed-degree``, ``fixed-coordinate-sum`` or
    ``learned-mlp``. Learned filters produce ``n_filters`` columns through a
    softplus head shifted by ``1e-6``.
    """

    def __init__(self, kind: str, mlp: ad.MLP | None = None, n_filters: int = 1):
        if kind not in ("fixed-degree", "fixed-coordinate-sum", "learned-mlp"):
            raise ValueError(f"unknown filter kind {kind!r}")
        self.kind = kind
        self.mlp = mlp
        self.n_filters = mlp.out_width if mlp is not None else n_filters

    @classmethod
    def learned(cls, store, prefix, in_width, hidden=16, n_filters=1, act="relu"):
        return cls("learned-mlp", ad.MLP(store, prefix, [in_width, hidden, n_filters], act=act))

    @classmethod
    def degree(cls):
        return cls("fixed-degree")

    @classmethod
    def coordinate_sum(cls):
        return cls("fixed-coordinate-sum")

    @property
    def is_learned(self) -> bool:
        return self.kind == "learned-mlp"

    def __call__(self, x, inv=None, degree=None) -> ad.Tensor:
        if self.kind == "fixed-degree":
            if degree is None:
                raise ValueError("degree filter needs structural degrees")
            return ad.Tensor(np.asarray(degree, dtype=float).reshape(-1, 1))
        x = ad.as_tensor(x)
        if inv is not None:
            x = ad.concat([x, ad.as_tensor(inv)], axis=1)
        if self.kind == "fixed-coordinate-sum":
            return ad.Tensor(x.data.sum(axis=1, keepdims=True))
        return ad.add(ad.softplus(self.mlp(x)), EPS)


INV_KINDS = ("max-pairwise-distance", "sum-pairwise-distance", "simplex-volume-proxy")


@dataclass(frozen=True)
class InvFeature:
    """E(n)- and permutation-invariant scalar of the vertex positions of an ``arity``-simplex."""

    kind: str = "max-pairwise-distance"
    arity: int = 1

    def __post_init__(self):
        if self.kind not in INV_KINDS:
            raise ValueError(f"unknown invariant kind {self.kind!r}")
        if self.arity < 1:
            raise ValueError("a single point has no non-constant E(n)-invariant; arity must be >= 1")

    def __call__(self, points) -> float:
        pts = np.asarray(points, dtype=float)
        if len(pts) != self.arity + 1:
            raise ValueError(f"{self.kind} of arity {self.arity} needs {self.arity + 1} points, got {len(pts)}")
        if self.kind == "simplex-volume-proxy":
            e = pts[1:] - pts[0]
            return float(np.sqrt(max(np.linalg.det(e @ e.T), 0.0)))
        d = [np.linalg.norm(a - b) for a, b in combinations(pts, 2)]
        return float(max(d) if self.kind == "max-pairwise-distance" else sum(d))

    def tensor(self, z, cells: np.ndarray) -> ad.Tensor:
        """Batched, differentiable version: one value per row of ``cells`` (vertex indices)."""
        z = ad.as_tensor(z)
        m = cells.shape[1]
        if m != self.arity + 1:
            raise ValueError(f"{self.kind} of arity {self.arity} applied to {m}-vertex simplices")
        if len(cells) == 0:
            return ad.Tensor(np.zeros((0, 1)))
        if self.kind == "simplex-volume-proxy":
            if self.arity > 2:
                raise NotImplementedError("differentiable volume proxy implemented for arity <= 2")
            a = z[cells[:, 1]] - z[cells[:, 0]]
            if self.arity == 1:
                return ad.sqrt(ad.square(a).sum(axis=1, keepdims=True))
            b = z[cells[:, 2]] - z[cells[:, 0]]
            aa = ad.square(a).sum(axis=1, keepdims=True)
            bb = ad.square(b).sum(axis=1, keepdims=True)
            ab = (a * b).sum(axis=1, keepdims=True)
            return ad.sqrt(ad.relu(aa * bb - ad.square(ab)))
        dists = []
        for p, q in combinations(range(m), 2):
            diff = z[cells[:, p]] - z[cells[:, q]]
            dists.append(ad.sqrt(ad.square(diff).sum(axis=1, keepdims=True)))
        if self.kind == "sum-pairwise-distance":
            out = dists[0]
            for d in dists[1:]:
                out = out + d
            return out
        stack = ad.concat(dists, axis=1)
        arg = np.argmax(stack.data, axis=1)
        return stack[(np.arange(len(cells)), arg)].reshape((-1, 1))


class NestednessError(ValueError):
    pass


@dataclass
class Filtration:
    """Per-simplex ranks (indexed by simplex id) with derived thresholds and order.

    ``tie`` optionally carries a secondary per-simplex value used by the
    union-find elder rule (RePHINE uses vertex-filter values there).
    """

    complex: SimplicialComplex
    rank: np.ndarray
    defining_dim: int = 0
    tie: np.ndarray | None = None
    thresholds: np.ndarray = field(init=False)
    order: np.ndarray = field(init=False)

    def __post_init__(self):
        K = self.complex
        self.rank = np.asarray(self.rank, dtype=float).reshape(len(K))
        check_nested(K, self.rank)
        dims = np.array([len(s) - 1 for s in K.simplices], dtype=np.int64)
        ids = np.arange(len(K))
        self.order = np.lexsort((ids, dims, self.rank))
        sel = dims == self.defining_dim
        vals = self.rank[sel] if sel.any() else self.rank
        self.thresholds = np.unique(vals)

    @property
    def levels(self) -> np.ndarray:
        """All distinct rank values (thresholds plus the 0 level below the defining dimension)."""
        return np.unique(self.rank)

    def membership(self, alpha: float) -> set:
        return {i for i in range(len(self.complex)) if self.rank[i] <= alpha}

    def rank_of(self, simplex) -> float:
        return float(self.rank[self.complex.id_of(simplex)])

    def max_threshold(self) -> float:
        return float(self.rank.max()) if len(self.rank) else 0.0


def check_nested(K: SimplicialComplex, rank: np.ndarray):
    for sid, s in enumerate(K.simplices):
        if len(s) < 2:
            continue
        for tau in combinations(s, len(s) - 1):
            j = K.id_of(tau)
            if rank[j] > rank[sid]:
                raise NestednessError(f"face {list(tau)} (rank {rank[j]}) enters after {list(s)} (rank {rank[sid]})")


def build_thresholds(filt: Filtration):
    """Return ``(thresholds, memberships)`` with ``memberships[j] = {sigma : rank <= thresholds[j]}``."""
    check_nested(filt.complex, filt.rank)
    th = filt.thresholds
    return th, [filt.membership(a) for a in th]


# -- batched rank construction (differentiable) ------------------------------
def sorted_faces(batch: ComplexBatch, d: int, i: int) -> np.ndarray:
    key = ("_sorted_faces", d, i)
    cache = batch.__dict__.setdefault("_cache", {})
    if key not in cache:
        cache[key] = np.sort(batch.faces[(d, i)], axis=1)
    return cache[key]


def face_argmax(batch: ComplexBatch, values: np.ndarray, i: int) -> dict:
    """For each dim ``d >= i``: (n_d, k) local index of the maximizing ``i``-face (lowest index on ties)."""
    out = {}
    for d in range(i, batch.dim + 1):
        faces = sorted_faces(batch, d, i)
        if len(faces) == 0:
            out[d] = np.zeros((0, values.shape[1]), dtype=np.int64)
            continue
        v = values[faces]  # (n_d, m, k)
        pos = np.argmax(v, axis=1)  # (n_d, k)
        out[d] = np.take_along_axis(faces, pos, axis=1)
    return out


def batched_ranks(batch: ComplexBatch, F: ad.Tensor, i: int = 0):
    """Flat rank tensor ``(total, k)`` from filter values ``F`` on the ``i``-simplices.

    Returns ``(ranks, arg)`` where ``arg[d]`` is the face index routed to for
    ``d >= i`` (the gradient of a rank flows only to that face's value).
    """
    F = ad.as_tensor(F)
    k = F.shape[1]
    arg = face_argmax(batch, F.data, i)
    cols = np.arange(k)
    blocks = []
    for d in range(batch.dim + 1):
        n_d = batch.count(d)
        if d < i:
            blocks.append(ad.Tensor(np.zeros((n_d, k))))
        else:
            blocks.append(F[(arg[d], np.broadcast_to(cols, arg[d].shape))])
    return ad.concat(blocks, axis=0), arg


def batch_degrees(batch: ComplexBatch, i: int) -> np.ndarray:
    """Degree-based fixed filter input: vertex degree (i=0) or mean endpoint degree (i=1)."""
    deg = batch.degrees()
    if i == 0:
        return deg
    if i == 1:
        return deg[batch.cells[1]].mean(axis=1) if batch.count(1) else np.zeros(0)
    return deg[batch.cells[i]].mean(axis=1) if batch.count(i) else np.zeros(0)


# -- single-complex API ------------------------------------------------------
def _single(K) -> tuple[ComplexBatch, np.ndarray]:
    b = ComplexBatch([K])
    cx = K.complex if hasattr(K, "complex") else K
    flat_ids = np.array([sid for d in range(cx.dim + 1) for sid in cx.by_dim[d]], dtype=np.int64)
    return b, flat_ids


def _values(f, x, n, *, inv=None, degree=None) -> np.ndarray:
    if isinstance(f, FilterFn):
        v = f(x, inv, degree=degree).data
    elif callable(f):
        if inv is None:
            v = np.array([f(row) for row in np.asarray(x)], dtype=float)
        else:
            v = np.array([f(row, w) for row, w in zip(np.asarray(x), np.asarray(inv))], dtype=float)
    else:
        v = np.asarray(f, dtype=float)
    v = np.asarray(v, dtype=float).reshape(n, -1)
    if v.shape[1] != 1:
        raise ValueError("single-complex filtrations take one filter column")
    return v


def _rank_from(K: SimplicialComplex, b, flat_ids, values, i) -> np.ndarray:
    ranks, _ = batched_ranks(b, ad.Tensor(values), i)
    out = np.zeros(len(K))
    out[flat_ids] = ranks.data[:, 0]
    return out


def vertex_color_rank(K: AttributedComplex, f) -> Filtration:
    """``rank(sigma) = max_{v in sigma} f(x_v)``."""
    return i_simplex_color_rank(K, f, 0)


def i_simplex_color_rank(K: AttributedComplex, f, i: int) -> Filtration:
    cx = K.complex
    if i < 0 or i > cx.dim:
        raise ValueError(f"i={i} outside 0..{cx.dim}")
    b, flat_ids = _single(K)
    n_i = cx.count(i)
    x = K.colors.get(i)
    if x is None and not (isinstance(f, FilterFn) and f.kind == "fixed-degree") and callable(f):
        raise ValueError(f"no colors on dim-{i} simplices; synthesize them first")
    degree = batch_degrees(b, i) if isinstance(f, FilterFn) and f.kind == "fixed-degree" else None
    values = _values(f, x if x is not None else np.zeros((n_i, 1)), n_i, degree=degree)
    return Filtration(cx, _rank_from(cx, b, flat_ids, values, i), defining_dim=i)


def geometric_rank(K: GeometricComplex, f, inv: InvFeature, i: int) -> Filtration:
    """``rank(sigma) = max over i-faces tau of f(x_tau, Inv(z_tau))``; 0 below dim ``i``."""
    cx = K.complex
    if inv.arity != i:
        raise ValueError(f"invariant arity {inv.arity} does not match filtration dim {i}")
    if i < 1 or i > cx.dim:
        raise ValueError(f"geometric filtration needs 1 <= i <= {cx.dim}")
    b, flat_ids = _single(K)
    n_i = cx.count(i)
    x = K.colors.get(i)
    if x is None:
        raise ValueError(f"no colors on dim-{i} simplices; synthesize them first")
    w = inv.tensor(K.coords, b.cells[i]).data
    values = _values(f, x, n_i, inv=w)
    return Filtration(cx, _rank_from(cx, b, flat_ids, values, i), defining_dim=i)


def synthesize_higher_colors(K: AttributedComplex, phi: Callable | None = None) -> AttributedComplex:
    """Give every simplex of dim >= 1 the color ``phi({x_v : v in sigma})`` (default: elementwise sum).

    ``phi`` receives the ``(dim+1, d)`` array of vertex colors; a
    :class:`topnets.autodiff.DeepSet` is also accepted.
    """
    cx = K.complex
    x0 = K.colors[0]
    b = ComplexBatch([cx])
    cols = {0: x0}
    for d in range(1, cx.dim + 1):
        cells = b.cells[d]
        if isinstance(phi, ad.DeepSet):
            seg = np.repeat(np.arange(len(cells)), d + 1)
            cols[d] = phi(x0[cells.reshape(-1)], seg, len(cells)).data
        elif phi is None:
            cols[d] = x0[cells].sum(axis=1)
        else:
            cols[d] = np.array([np.asarray(phi(x0[c]), dtype=float) for c in cells]).reshape(len(cells), -1)
    return AttributedComplex(cx, cols)
