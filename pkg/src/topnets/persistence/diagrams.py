"""Persistence diagrams of a single filtered complex, and RePHINE diagrams of graphs."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from ..batch import arrays_of
from ..complex import AttributedComplex, SimplicialComplex
from ..filtration import FilterFn, Filtration, synthesize_higher_colors
from . import kernels

INF = math.inf


@dataclass(frozen=True)
class PersistencePair:
    dim: int
    birth: float
    death: float
    birth_simplex: int
    death_simplex: int | None = None

    def __post_init__(self):
        if self.dim < 0:
            raise ValueError("negative homology dimension")
        if self.death < self.birth:
            raise ValueError(f"death {self.death} precedes birth {self.birth}")
        if (self.death == INF) != (self.death_simplex is None):
            raise ValueError("essential pairs have death=inf and no death simplex")

    @property
    def essential(self) -> bool:
        return self.death == INF

    @property
    def persistence(self) -> float:
        return self.death - self.birth


@dataclass
class PersistenceDiagram:
    pairs: list = field(default_factory=list)
    filtration: Filtration | None = None

    def __len__(self):
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    @property
    def dims(self) -> list[int]:
        return sorted({p.dim for p in self.pairs})

    def of_dim(self, p: int) -> list[PersistencePair]:
        return [q for q in self.pairs if q.dim == p]

    def multiset(self, p: int, drop_diagonal: bool = False) -> Counter:
        return Counter((q.birth, q.death) for q in self.of_dim(p) if not (drop_diagonal and q.birth == q.death))

    def essential_count(self, p: int) -> int:
        return sum(q.essential for q in self.of_dim(p))

    def points(self, p: int, sentinel: float | None = None) -> np.ndarray:
        """``(n, 2)`` array of (birth, death); essential deaths replaced by ``sentinel``."""
        if sentinel is None:
            sentinel = self.sentinel()
        pts = [(q.birth, sentinel if q.essential else q.death) for q in self.of_dim(p)]
        return np.array(pts, dtype=float).reshape(-1, 2)

    def sentinel(self, offset: float = 1.0) -> float:
        if self.filtration is not None:
            return self.filtration.max_threshold() + offset
        finite = [v for q in self.pairs for v in (q.birth, q.death) if v != INF]
        return max(finite, default=0.0) + offset

    def to_lines(self) -> list[str]:
        out = []
        for q in sorted(self.pairs, key=lambda q: (q.dim, q.birth, q.death, q.birth_simplex)):
            d = "inf" if q.essential else repr(q.death)
            ds = "-" if q.death_simplex is None else str(q.death_simplex)
            out.append(f"{q.dim} {q.birth!r} {d} {int(q.essential)} {q.birth_simplex} {ds}")
        return out

    @classmethod
    def from_lines(cls, lines) -> "PersistenceDiagram":
        pairs = []
        for n, line in enumerate(lines, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 6:
                raise ValueError(f"line {n}: expected 6 fields, got {len(parts)}")
            dim, b, d, ess, bs, ds = parts
            death = INF if d == "inf" else float(d)
            if (ess == "1") != (death == INF):
                raise ValueError(f"line {n}: essential flag disagrees with death")
            pairs.append(PersistencePair(int(dim), float(b), death, int(bs), None if ds == "-" else int(ds)))
        return cls(pairs)


# -- algorithms --------------------------------------------------------------
def _edge_order(K: SimplicialComplex, rank: np.ndarray) -> np.ndarray:
    ids = np.array(K.by_dim[1], dtype=np.int64) if K.dim >= 1 else np.zeros(0, np.int64)
    return np.lexsort((ids, rank[ids])) if len(ids) else ids


def pd_dim0_unionfind(filt: Filtration, backend: str | None = None) -> PersistenceDiagram:
    """Dim-0 diagram by elder-rule union-find over edges in filtration order."""
    K = filt.complex
    if len(K) == 0:
        return PersistenceDiagram([], filt)
    vids = np.array(K.by_dim[0], dtype=np.int64)
    eids = np.array(K.by_dim[1], dtype=np.int64) if K.dim >= 1 else np.zeros(0, np.int64)
    cells = arrays_of(K).cells[1] if K.dim >= 1 else np.zeros((0, 2), np.int64)
    birth = filt.rank[vids]
    tie = None if filt.tie is None else np.asarray(filt.tie, dtype=float)[vids]
    killer, _ = kernels.union_find(_edge_order(K, filt.rank), cells[:, 0], cells[:, 1], birth, tie, backend)
    pairs = []
    for v, sid in enumerate(vids):
        e = killer[v]
        if e < 0:
            pairs.append(PersistencePair(0, float(birth[v]), INF, int(sid)))
        else:
            pairs.append(PersistencePair(0, float(birth[v]), float(filt.rank[eids[e]]), int(sid), int(eids[e])))
    return PersistenceDiagram(pairs, filt)


def pd_matrix_reduction(filt: Filtration, max_p: int | None = None, backend: str | None = None) -> PersistenceDiagram:
    """Diagrams in dims ``0..max_p`` by Z/2 column reduction in filtration order."""
    K = filt.complex
    if max_p is None:
        max_p = K.dim
    if max_p > K.dim:
        raise ValueError(f"max_p={max_p} exceeds complex dimension {K.dim}")
    if len(K) == 0:
        return PersistenceDiagram([], filt)
    dims = np.array([len(s) - 1 for s in K.simplices])
    order = np.array([i for i in filt.order if dims[i] <= max_p + 1], dtype=np.int64)
    pos = np.full(len(K), -1, dtype=np.int64)
    pos[order] = np.arange(len(order))
    ptr, idx = [0], []
    for sid in order:
        s = K.simplices[sid]
        if len(s) > 1:
            rows = sorted(pos[K.id_of(t)] for t in _codim1(s))
            idx.extend(rows)
        ptr.append(len(idx))
    low = kernels.reduce_blocks(np.array(ptr), np.array(idx, dtype=np.int64), np.array([0, len(order)]), backend)
    paired = np.zeros(len(order), dtype=bool)
    pairs = []
    for j, i in enumerate(low):
        if i < 0:
            continue
        paired[i] = paired[j] = True
        b, d = int(order[i]), int(order[j])
        pairs.append(PersistencePair(int(dims[b]), float(filt.rank[b]), float(filt.rank[d]), b, d))
    for j in np.flatnonzero(~paired):
        b = int(order[j])
        if dims[b] <= max_p:
            pairs.append(PersistencePair(int(dims[b]), float(filt.rank[b]), INF, b))
    return PersistenceDiagram(pairs, filt)


def _codim1(s):
    return [s[:k] + s[k + 1:] for k in range(len(s))]


# -- RePHINE -----------------------------------------------------------------
@dataclass(frozen=True)
class RePHINETuple:
    b: int
    d: float
    alpha: float
    gamma: float
    owner: int

    def vector(self, sentinel: float) -> tuple:
        return (float(self.b), sentinel if self.d == INF else self.d, self.alpha,
                sentinel if self.gamma == INF else self.gamma)


@dataclass
class RePHINEDiagram:
    tuples: list
    dim1: list
    sentinel: float

    def array(self) -> np.ndarray:
        return np.array([t.vector(self.sentinel) for t in self.tuples], dtype=float).reshape(-1, 4)

    def dim1_points(self) -> np.ndarray:
        pts = [(q.birth, self.sentinel if q.essential else q.death) for q in self.dim1]
        return np.array(pts, dtype=float).reshape(-1, 2)

    def multiset(self) -> Counter:
        return Counter((t.b, t.d, t.alpha, t.gamma) for t in self.tuples)

    @property
    def components(self) -> int:
        return sum(t.b == 0 for t in self.tuples)


def _filter_values(f, K: AttributedComplex, d: int) -> np.ndarray:
    cx = K.complex if isinstance(K, AttributedComplex) else K
    n = cx.count(d)
    if not isinstance(K, AttributedComplex) and (callable(f) and not (isinstance(f, FilterFn) and f.kind == "fixed-degree")):
        raise ValueError("filter functions need an attributed complex; pass values for a bare complex")
    if isinstance(f, FilterFn):
        if f.kind == "fixed-degree":
            deg = cx.degrees()
            vals = deg if d == 0 else deg[arrays_of(cx).cells[1]].mean(axis=1)
            return np.asarray(vals, dtype=float).reshape(n)
        if d not in K.colors:
            K = synthesize_higher_colors(K)
        return f(K.colors[d]).data[:, 0]
    if callable(f):
        if d not in K.colors:
            K = synthesize_higher_colors(K)
        return np.array([float(f(row)) for row in K.colors[d]], dtype=float).reshape(n)
    return np.asarray(f, dtype=float).reshape(n)


def rephine_diagram(K: AttributedComplex, f_v, f_e, *, sentinel_offset: float = 1.0,
                    backend: str | None = None) -> RePHINEDiagram:
    """Per-vertex ``(b, d, alpha, gamma)`` tuples from an edge-color filtration with vertices born at 0."""
    cx = K.complex if isinstance(K, AttributedComplex) else K
    if cx.dim >= 2:
        raise ValueError("RePHINE diagrams are defined on graphs (dim <= 1)")
    n = cx.vertex_count
    alpha = _filter_values(f_v, K, 0)
    fe = _filter_values(f_e, K, 1) if cx.dim >= 1 else np.zeros(0)
    cells = arrays_of(cx).cells[1] if cx.dim >= 1 else np.zeros((0, 2), np.int64)
    eids = np.array(cx.by_dim[1], dtype=np.int64) if cx.dim >= 1 else np.zeros(0, np.int64)
    gamma = np.full(n, INF)
    for k, (u, v) in enumerate(cells):
        gamma[u] = min(gamma[u], fe[k])
        gamma[v] = min(gamma[v], fe[k])
    order = np.lexsort((np.arange(len(fe)), fe)) if len(fe) else np.zeros(0, np.int64)
    killer, cycle = kernels.union_find(order, cells[:, 0], cells[:, 1], np.zeros(n), alpha, backend)
    sentinel = (float(fe.max()) if len(fe) else 0.0) + sentinel_offset
    tuples = []
    for v in range(n):
        e = killer[v]
        owner = cx.by_dim[0][v]
        if e < 0:
            tuples.append(RePHINETuple(0, INF, float(alpha[v]), float(gamma[v]), owner))
        else:
            tuples.append(RePHINETuple(1, float(fe[e]), float(alpha[v]), float(gamma[v]), owner))
    dim1 = [PersistencePair(1, float(fe[e]), INF, int(eids[e])) for e in np.flatnonzero(cycle)]
    return RePHINEDiagram(tuples, dim1, sentinel)
