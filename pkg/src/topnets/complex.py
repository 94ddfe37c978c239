"""Simplicial complexes, attributed/geometric variants and neighborhood queries."""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, NamedTuple, Sequence

import numpy as np

NEIGHBORHOODS = ("boundary", "coboundary", "lower", "upper")


@dataclass(frozen=True, order=True)
class Simplex:
    vertices: tuple

    def __post_init__(self):
        v = tuple(int(a) for a in self.vertices)
        if not v:
            raise ValueError("a simplex needs at least one vertex")
        if any(a < 0 for a in v) or any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError(f"simplex vertices must be non-negative and strictly increasing: {v}")
        object.__setattr__(self, "vertices", v)

    @property
    def dim(self) -> int:
        return len(self.vertices) - 1

    def faces(self, dim: int) -> list[tuple]:
        return list(combinations(self.vertices, dim + 1))


class ValidationReport(NamedTuple):
    ok: bool
    simplex: tuple | None = None
    face: tuple | None = None
    reason: str = ""

    def __bool__(self):
        return self.ok


def validate(simplices) -> ValidationReport:
    """Check sortedness and face closure; report the first offending (simplex, face)."""
    if isinstance(simplices, SimplicialComplex):
        simplices = simplices.simplices
    seen = set()
    items = [tuple(s) for s in simplices]
    for s in items:
        if not s:
            return ValidationReport(False, s, None, "empty simplex")
        if any(b <= a for a, b in zip(s, s[1:])) or s[0] < 0:
            return ValidationReport(False, s, None, "vertices not strictly increasing")
        seen.add(s)
    for s in items:
        for k in range(len(s) - 1, 0, -1):
            for tau in combinations(s, k):
                if tau not in seen:
                    return ValidationReport(False, s, tau, f"missing face {list(tau)} of {list(s)}")
    return ValidationReport(True)


class SimplicialComplex:
    """Immutable face-closed simplicial complex.

    Simplex ids are dense (``0..len(K)-1``) in insertion order. Neighborhoods
    are computed once on first use and cached; the object is never mutated
    afterwards.
    """

    def __init__(self, simplices: Iterable[Sequence[int]], *, close: bool = False):
        items = []
        index = {}
        for s in simplices:
            t = Simplex(tuple(s)).vertices
            if t not in index:
                index[t] = len(items)
                items.append(t)
        if close:
            for s in list(items):
                for k in range(1, len(s)):
                    for tau in combinations(s, k):
                        if tau not in index:
                            index[tau] = len(items)
                            items.append(tau)
        report = validate(items)
        if not report.ok:
            raise ValueError(f"invalid simplicial complex: {report.reason}")
        self.simplices: list[tuple] = items
        self._index = index
        self.dim = max((len(s) - 1 for s in items), default=-1)
        self.by_dim: list[list[int]] = [[] for _ in range(self.dim + 1)]
        self._local = np.empty(len(items), dtype=np.int64)
        for i, s in enumerate(items):
            d = len(s) - 1
            self._local[i] = len(self.by_dim[d])
            self.by_dim[d].append(i)
        self._nbrs = None

    # -- basic access -------------------------------------------------------
    def __len__(self):
        return len(self.simplices)

    def __iter__(self):
        return iter(self.simplices)

    def __contains__(self, s):
        return tuple(s) in self._index

    def __repr__(self):
        counts = ", ".join(str(len(b)) for b in self.by_dim)
        return f"SimplicialComplex(dim={self.dim}, counts=[{counts}])"

    @property
    def vertex_count(self) -> int:
        return len(self.by_dim[0]) if self.dim >= 0 else 0

    @property
    def vertices(self) -> list[int]:
        return [self.simplices[i][0] for i in self.by_dim[0]] if self.dim >= 0 else []

    def count(self, dim: int) -> int:
        return len(self.by_dim[dim]) if 0 <= dim <= self.dim else 0

    def id_of(self, simplex) -> int:
        key = tuple(int(v) for v in simplex)
        try:
            return self._index[key]
        except KeyError:
            raise KeyError(f"simplex {list(key)} not in complex") from None

    def simplex(self, sid: int) -> tuple:
        return self.simplices[sid]

    def dim_of(self, sid: int) -> int:
        return len(self.simplices[sid]) - 1

    def local_index(self, sid: int) -> int:
        """Position of ``sid`` within its dimension stratum."""
        return int(self._local[sid])

    def _resolve(self, sigma) -> int:
        if isinstance(sigma, (int, np.integer)):
            if not 0 <= sigma < len(self.simplices):
                raise KeyError(f"simplex id {sigma} not in complex")
            return int(sigma)
        return self.id_of(sigma)

    # -- neighborhoods ------------------------------------------------------
    def _build_neighborhoods(self):
        n = len(self.simplices)
        bnd = [set() for _ in range(n)]
        cob = [set() for _ in range(n)]
        for i, s in enumerate(self.simplices):
            if len(s) > 1:
                for tau in combinations(s, len(s) - 1):
                    j = self._index[tau]
                    bnd[i].add(j)
                    cob[j].add(i)
        upper = [set() for _ in range(n)]
        lower = [set() for _ in range(n)]
        for i in range(n):
            for delta in cob[i]:
                upper[i].update(bnd[delta])
            upper[i].discard(i)
            for tau in bnd[i]:
                lower[i].update(cob[tau])
            lower[i].discard(i)
        self._nbrs = {"boundary": bnd, "coboundary": cob, "upper": upper, "lower": lower}

    def neighbors(self, kind: str, sigma) -> set:
        if kind not in NEIGHBORHOODS:
            raise ValueError(f"unknown neighborhood {kind!r}")
        sid = self._resolve(sigma)
        if self._nbrs is None:
            self._build_neighborhoods()
        return set(self._nbrs[kind][sid])

    def boundary_neighbors(self, sigma) -> set:
        return self.neighbors("boundary", sigma)

    def coboundary_neighbors(self, sigma) -> set:
        return self.neighbors("coboundary", sigma)

    def upper_adjacent(self, sigma) -> set:
        return self.neighbors("upper", sigma)

    def lower_adjacent(self, sigma) -> set:
        return self.neighbors("lower", sigma)

    def faces_of_dim(self, sigma, dim: int) -> list[int]:
        s = self.simplices[self._resolve(sigma)]
        return [self._index[t] for t in combinations(s, dim + 1)]

    def degrees(self) -> np.ndarray:
        """Vertex degrees (number of incident edges), in vertex stratum order."""
        if self._nbrs is None:
            self._build_neighborhoods()
        return np.array([len(self._nbrs["upper"][i]) for i in self.by_dim[0]], dtype=float)

    def skeleton(self, dim: int) -> "SimplicialComplex":
        return SimplicialComplex([s for s in self.simplices if len(s) - 1 <= dim])

    def relabel(self, mapping) -> "SimplicialComplex":
        """Apply a vertex relabeling ``old -> mapping[old]``; simplex order follows the new labels."""
        new = [tuple(sorted(int(mapping[v]) for v in s)) for s in self.simplices]
        new.sort(key=lambda t: (len(t), t))
        return SimplicialComplex(new)

    @classmethod
    def from_graph(cls, n: int, edges) -> "SimplicialComplex":
        simplices = [(v,) for v in range(n)]
        simplices += [tuple(sorted(e)) for e in edges]
        return cls(simplices)

    def edges(self) -> list[tuple]:
        return [self.simplices[i] for i in self.by_dim[1]] if self.dim >= 1 else []


def clique_lift(graph: SimplicialComplex, max_dim: int = 2) -> SimplicialComplex:
    """Add every clique with at most ``max_dim + 1`` vertices as a simplex."""
    if isinstance(graph, SimplicialComplex):
        simplices = graph.simplices
    else:
        simplices = [tuple(s) for s in graph]
    report = validate(simplices)
    if not report.ok:
        raise ValueError(f"cannot lift an invalid complex: {report.reason}")
    if any(len(s) > 2 for s in simplices):
        raise ValueError("clique_lift expects a graph (dimension <= 1)")
    if max_dim < 1:
        raise ValueError("max_dim must be >= 1")
    adj: dict[int, set] = {}
    for s in simplices:
        if len(s) == 1:
            adj.setdefault(s[0], set())
        else:
            a, b = s
            adj.setdefault(a, set()).add(b)
            adj.setdefault(b, set()).add(a)
    out = list(simplices)
    frontier = [s for s in simplices if len(s) == 2]
    for _ in range(2, max_dim + 1):
        nxt = []
        for s in frontier:
            common = set.intersection(*(adj[v] for v in s))
            for w in sorted(common):
                if w > s[-1]:
                    nxt.append(s + (w,))
        nxt.sort()
        out.extend(nxt)
        frontier = nxt
    return SimplicialComplex(out)


@dataclass
class AttributedComplex:
    """Complex with per-simplex colors stored per dimension stratum.

    ``colors[d]`` has one row per ``d``-simplex in ``complex.by_dim[d]`` order.
    Graph inputs usually carry only ``colors[0]``; see
    :func:`topnets.filtration.synthesize_higher_colors`.
    """

    complex: SimplicialComplex
    colors: dict = field(default_factory=dict)

    def __post_init__(self):
        K = self.complex
        cols = {}
        for d, arr in self.colors.items():
            arr = np.asarray(arr, dtype=float)
            if arr.ndim == 1:
                arr = arr[:, None]
            if arr.shape[0] != K.count(int(d)):
                raise ValueError(f"dim-{d} colors have {arr.shape[0]} rows for {K.count(int(d))} simplices")
            cols[int(d)] = arr
        widths = {a.shape[1] for a in cols.values()}
        if len(widths) > 1:
            raise ValueError(f"color widths differ across dimensions: {sorted(widths)}")
        if K.vertex_count and 0 not in cols:
            raise ValueError("vertex colors are required")
        self.colors = cols

    @property
    def width(self) -> int:
        return next(iter(self.colors.values())).shape[1] if self.colors else 0

    @property
    def has_all_colors(self) -> bool:
        return all(d in self.colors for d in range(self.complex.dim + 1))

    def color(self, sid: int) -> np.ndarray:
        K = self.complex
        d = K.dim_of(sid)
        if d not in self.colors:
            raise KeyError(f"no colors for dim-{d} simplices")
        return self.colors[d][K.local_index(sid)]

    @classmethod
    def from_vertex_colors(cls, complex: SimplicialComplex, x) -> "AttributedComplex":
        return cls(complex, {0: np.asarray(x, dtype=float)})


@dataclass
class GeometricComplex:
    """Attributed complex plus vertex coordinates (``coords[i]`` is vertex stratum row ``i``)."""

    attributed: AttributedComplex
    coords: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.coords, dtype=float)
        if z.ndim != 2 or z.shape[0] != self.attributed.complex.vertex_count:
            raise ValueError("coords must be a (vertex_count, n) array")
        self.coords = z

    @property
    def complex(self) -> SimplicialComplex:
        return self.attributed.complex

    @property
    def colors(self) -> dict:
        return self.attributed.colors

    def moved(self, rotation: np.ndarray, translation: np.ndarray) -> "GeometricComplex":
        return GeometricComplex(self.attributed, self.coords @ rotation.T + translation)


def random_rigid_motion(n: int, rng: np.random.Generator):
    """Orthogonal matrix from QR of a Gaussian matrix (sign-corrected) plus a random translation."""
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    q = q * np.sign(np.diag(r))
    return q, rng.normal(scale=5.0, size=n)
