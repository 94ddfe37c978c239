"""Synthetic datasets whose labels come from the Betti-number oracle, never from model code."""
from __future__ import annotations

import numpy as np

from ..complex import AttributedComplex, GeometricComplex, SimplicialComplex, clique_lift
from ..expressivity import wl_equivalent
from ..persistence.oracle import betti_oracle
from .datasets import DatasetRecord


def _cycles(sizes, pendants: bool):
    edges, base = [], 0
    for p in sizes:
        edges += [(base + i, base + (i + 1) % p) for i in range(p)]
        base += p
    n = base
    if pendants:
        edges += [(v, n + v) for v in range(n)]
        n *= 2
    return n, edges


def _relabeled(n, edges, rng):
    perm = rng.permutation(n)
    return SimplicialComplex.from_graph(n, sorted(tuple(sorted((int(perm[a]), int(perm[b])))) for a, b in edges))


def wl_hard_label(K: SimplicialComplex) -> int:
    """1 when the clique complex has exactly one independent cycle, else 0."""
    return int(betti_oracle(clique_lift(K, 2), 1) == 1)


def gen_wl_hard(n_pairs: int, seed: int = 0, max_cycle: int = 6) -> list[DatasetRecord]:
    """Pairs ``(C_{a+b}, C_a + C_b)`` that 1-WL cannot tell apart, labeled by beta_1 of the clique complex.

    ``a = b = 3`` or ``4 <= a, b <= max_cycle``; optionally every vertex gets a
    pendant; each pair shares one random scalar color. Both members carry the
    pair index as ``group``.
    """
    rng = np.random.default_rng(seed)
    options = [(3, 3)] + [(a, b) for a in range(4, max_cycle + 1) for b in range(a, max_cycle + 1)]
    out = []
    for g in range(n_pairs):
        a, b = options[int(rng.integers(len(options)))]
        pend = bool(rng.integers(2))
        color = float(rng.integers(1, 4))
        pair = []
        for sizes in ([a + b], [a, b]):
            n, edges = _cycles(sizes, pend)
            K = _relabeled(n, edges, rng)
            pair.append(K)
        if not wl_equivalent(pair[0], pair[1]):
            raise AssertionError(f"generated pair {g} is not 1-WL-equivalent")
        for K in pair:
            A = AttributedComplex.from_vertex_colors(K, np.full((K.vertex_count, 1), color))
            out.append(DatasetRecord(A, wl_hard_label(K), g))
    return out


def gen_geometric_toy(n: int, seed: int = 0, scale: float = 1.0, points=(6, 12), box: float = 3.0):
    """Planar point clouds with edges at distance <= ``scale``; target = number of components."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        m = int(rng.integers(points[0], points[1] + 1))
        z = rng.uniform(0, box, size=(m, 2))
        d = np.linalg.norm(z[:, None] - z[None], axis=-1)
        edges = [(i, j) for i in range(m) for j in range(i + 1, m) if d[i, j] <= scale]
        K = SimplicialComplex.from_graph(m, edges)
        A = AttributedComplex.from_vertex_colors(K, np.ones((m, 1)))
        out.append(DatasetRecord(GeometricComplex(A, z), float(betti_oracle(K, 0))))
    return out


def _tetra_pair(rng, extra: int):
    """Hollow and filled tetrahedron on vertices 0..3 with the same random decoration."""
    simplices = [(v,) for v in range(4)]
    simplices += [(a, b) for a in range(4) for b in range(a + 1, 4)]
    simplices += [(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)]
    n = 4
    deco = []
    for _ in range(extra):
        # hang a path of length 1-3 from a random existing vertex
        anchor = int(rng.integers(n))
        for _ in range(int(rng.integers(1, 4))):
            deco += [(n,), (min(anchor, n), max(anchor, n))]
            anchor = n
            n += 1
    hollow = simplices + deco
    filled = simplices + [(0, 1, 2, 3)] + deco
    return n, hollow, filled


def _relabel_complex(n, simplices, rng):
    perm = rng.permutation(n)
    out = [tuple(sorted(int(perm[v]) for v in s)) for s in simplices]
    out.sort(key=lambda t: (len(t), t))
    return SimplicialComplex(out)


def gen_beta2(n_pairs: int, seed: int = 0) -> list[DatasetRecord]:
    """Hollow vs filled tetrahedra sharing a 1-skeleton and decorations; label = beta_2."""
    rng = np.random.default_rng(seed)
    out = []
    for g in range(n_pairs):
        n, hollow, filled = _tetra_pair(rng, int(rng.integers(0, 4)))
        color = float(rng.integers(1, 4))
        for simp in (hollow, filled):
            K = _relabel_complex(n, simp, rng)
            A = AttributedComplex.from_vertex_colors(K, np.full((n, 1), color))
            out.append(DatasetRecord(A, int(betti_oracle(K, 2)) if K.dim >= 2 else 0, g))
    return out


def random_graph_complex(rng, n_range=(5, 9), p: float = 0.4, width: int = 2, connected: bool = True,
                         lift: int | None = None) -> AttributedComplex:
    """Erdos-Renyi graph (resampled until connected if asked) with Gaussian vertex colors."""
    while True:
        n = int(rng.integers(n_range[0], n_range[1] + 1))
        edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p]
        K = SimplicialComplex.from_graph(n, edges)
        if not connected or betti_oracle(K, 0) == 1:
            break
    if lift is not None:
        K = clique_lift(K, lift)
    return AttributedComplex.from_vertex_colors(K, rng.standard_normal((n, width)))


def random_geometric_complex(rng, n_range=(6, 10), space: int = 3, radius: float = 1.2, width: int = 2,
                             max_dim: int = 2, min_dim: int = 0) -> GeometricComplex:
    """Gaussian points, proximity edges, clique-lifted to ``max_dim``; resampled until ``dim >= min_dim``."""
    while True:
        n = int(rng.integers(n_range[0], n_range[1] + 1))
        z = rng.standard_normal((n, space))
        d = np.linalg.norm(z[:, None] - z[None], axis=-1)
        edges = [(i, j) for i in range(n) for j in range(i + 1, n) if d[i, j] <= radius]
        K = clique_lift(SimplicialComplex.from_graph(n, edges), max_dim)
        if K.dim >= min_dim:
            break
    A = AttributedComplex.from_vertex_colors(K, rng.standard_normal((n, width)))
    return GeometricComplex(A, z)


GENERATORS = {"wl-hard": gen_wl_hard, "geometric": gen_geometric_toy, "beta2": gen_beta2}
