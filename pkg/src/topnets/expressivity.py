"""Color refinement (1-WL, simplicial WL) and a searchable witness that color-filtration
diagrams separate complexes that simplicial WL cannot.

Colors are interned: every refinement round maps the tuple
``(old color, sorted neighbor colors...)`` to a small integer through an
explicit dictionary, so two colors are equal exactly when their signatures
are equal. Comparing several complexes means refining their disjoint union
with one shared table.
"""
from __future__ import annotations

import json
import time
from collections import Counter
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .complex import AttributedComplex, SimplicialComplex, clique_lift
from .filtration import vertex_color_rank
from .persistence.diagrams import pd_matrix_reduction


@dataclass
class Coloring:
    colors: list  # per complex: list of color ids in simplex-id order
    rounds: int
    histograms: list = field(default_factory=list)

    @property
    def histogram(self) -> Counter:
        return self.histograms[0]

    def partition(self, g: int = 0) -> list:
        """Classes of simplex ids of complex ``g`` (sorted, order-independent form)."""
        buckets: dict = {}
        for sid, c in enumerate(self.colors[g]):
            buckets.setdefault(c, []).append(sid)
        return sorted(buckets.values())


def _intern(signatures) -> list:
    table = {s: i for i, s in enumerate(sorted(set(signatures), key=repr))}
    return [table[s] for s in signatures]


def _refine(n_items, neighbors_of, init, max_rounds=None):
    """Generic stable refinement: ``neighbors_of(i, colors)`` returns the signature tail of item ``i``."""
    colors = _intern(init)
    rounds = 0
    n_classes = len(set(colors))
    limit = max_rounds if max_rounds is not None else n_items + 1
    while rounds < limit:
        sig = [(colors[i],) + neighbors_of(i, colors) for i in range(n_items)]
        new = _intern(sig)
        rounds += 1
        k = len(set(new))
        if k < n_classes:
            raise AssertionError("refinement coarsened the partition")
        colors = new
        if k == n_classes:
            break
        n_classes = k
    return colors, rounds


def _norm_color(c):
    if isinstance(c, np.ndarray):
        return tuple(float(v) for v in c.ravel())
    if isinstance(c, (list, tuple)):
        return tuple(float(v) for v in c)
    return (float(c),)


def _graph_parts(item, colors):
    if isinstance(item, AttributedComplex):
        K = item.complex
        colors = item.colors[0] if colors is None else colors
    else:
        K = item
    if colors is None:
        colors = [0] * K.vertex_count
    return K, [_norm_color(c) for c in colors]


def wl1_refine(graphs, colors=None, max_rounds=None) -> Coloring:
    """1-WL refinement of one graph or (jointly) of a list of graphs.

    ``graphs`` is a complex of dim <= 1 (or ``AttributedComplex``), or a list
    of them; ``colors`` optionally gives per-vertex initial colors (a list per
    graph when ``graphs`` is a list). Returned colors cover vertices only.
    """
    single = not isinstance(graphs, (list, tuple))
    gs = [graphs] if single else list(graphs)
    cs = [colors] if single else (colors or [None] * len(gs))
    adj, init, owner = [], [], []
    for g, (item, col) in enumerate(zip(gs, cs)):
        K, col = _graph_parts(item, col)
        if K.dim > 1:
            raise ValueError("wl1_refine expects graphs (dim <= 1)")
        base = len(adj)
        pos = {K.simplices[sid][0]: i for i, sid in enumerate(K.by_dim[0])}
        local = [[] for _ in K.by_dim[0]]
        for a, b in K.edges():
            local[pos[a]].append(base + pos[b])
            local[pos[b]].append(base + pos[a])
        adj.extend(local)
        init.extend(col)
        owner.extend([g] * len(local))
    final, rounds = _refine(len(adj), lambda i, c: (tuple(sorted(c[j] for j in adj[i])),), init, max_rounds)
    out, hists = [], []
    for g in range(len(gs)):
        cg = [final[i] for i in range(len(final)) if owner[i] == g]
        out.append(cg)
        hists.append(Counter(cg))
    return Coloring(out, rounds, hists)


def swl_refine(complexes, colors=None, max_rounds=None) -> Coloring:
    """Simplicial WL over all simplices using boundary and upper adjacency.

    A simplex's signature is its color, the sorted multiset of its boundary
    faces' colors and the sorted multiset of ``(upper neighbor color, shared
    coface color)``. Initial colors: the given vertex colors; a higher simplex
    starts from ``(dim, sorted vertex colors)``.
    """
    single = not isinstance(complexes, (list, tuple))
    ks = [complexes] if single else list(complexes)
    cs = [colors] if single else (colors or [None] * len(ks))
    bnd, up, init, owner = [], [], [], []
    for g, (item, col) in enumerate(zip(ks, cs)):
        K, col = _graph_parts(item, col)
        base = len(bnd)
        vcol = {K.simplices[sid][0]: col[i] for i, sid in enumerate(K.by_dim[0])}
        for sid, s in enumerate(K.simplices):
            bnd.append([base + j for j in K.boundary_neighbors(sid)])
            pairs = []
            for delta in K.coboundary_neighbors(sid):
                for other in K.boundary_neighbors(delta):
                    if other != sid:
                        pairs.append((base + other, base + delta))
            up.append(pairs)
            init.append(("v",) + vcol[s[0]] if len(s) == 1 else (len(s) - 1,) + tuple(sorted(vcol[v] for v in s)))
            owner.append(g)

    def tail(i, c):
        return (tuple(sorted(c[j] for j in bnd[i])), tuple(sorted((c[a], c[d]) for a, d in up[i])))

    final, rounds = _refine(len(bnd), tail, init, max_rounds)
    out, hists = [], []
    for g in range(len(ks)):
        cg = [final[i] for i in range(len(final)) if owner[i] == g]
        out.append(cg)
        hists.append(Counter(cg))
    return Coloring(out, rounds, hists)


def wl_equivalent(g1, g2, c1=None, c2=None) -> bool:
    col = wl1_refine([g1, g2], [c1, c2])
    return col.histograms[0] == col.histograms[1]


def swl_equivalent(k1, k2, c1=None, c2=None) -> bool:
    col = swl_refine([k1, k2], [c1, c2])
    return col.histograms[0] == col.histograms[1]


def _components(n, edges) -> int:
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    count = n
    for a, b in edges:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
            count -= 1
    return count


def color_disconnecting_check(graphs, edge_colors, Q) -> list[tuple[int, int]]:
    """``(beta_0 before, beta_0 after removing edges colored in Q)`` for each graph.

    ``edge_colors[g]`` lists one color per edge of ``graphs[g]`` (edge-stratum order).
    """
    single = isinstance(graphs, SimplicialComplex)
    gs = [graphs] if single else list(graphs)
    ecs = [edge_colors] if single else list(edge_colors)
    Q = set(Q)
    out = []
    for K, ec in zip(gs, ecs):
        if len(ec) != K.count(1):
            raise ValueError(f"{len(ec)} edge colors for {K.count(1)} edges")
        pos = {K.simplices[sid][0]: i for i, sid in enumerate(K.by_dim[0])}
        edges = [(pos[a], pos[b]) for a, b in K.edges()]
        kept = [e for e, c in zip(edges, ec) if c not in Q]
        out.append((_components(K.vertex_count, edges), _components(K.vertex_count, kept)))
    return out[0] if single else out


# -- witness search ------------------------------------------------------------
def _diagram_lines(K: SimplicialComplex, colors) -> list[str]:
    A = AttributedComplex.from_vertex_colors(K, np.asarray(colors, dtype=float))
    filt = vertex_color_rank(A, np.asarray(colors, dtype=float))
    D = pd_matrix_reduction(filt, min(1, K.dim))
    return sorted(f"{q.dim} {q.birth!r} {'inf' if q.essential else repr(q.death)}" for q in D)


def _hist_list(h: Counter) -> list:
    return sorted([int(c), int(n)] for c, n in h.items())


def _candidate_graphs(max_vertices):
    import networkx as nx

    by_n: dict = {}
    for G in nx.graph_atlas_g():
        n = G.number_of_nodes()
        if 1 <= n <= min(7, max_vertices):
            by_n.setdefault(n, []).append(sorted(tuple(sorted(e)) for e in G.edges()))
    if max_vertices >= 8:
        # unions of cycles (2-regular graphs) on 8 vertices
        cands = []
        for parts in ([8], [5, 3], [4, 4]):
            edges, base = [], 0
            for p in parts:
                edges += [tuple(sorted((base + i, base + (i + 1) % p))) for i in range(p)]
                base += p
            cands.append(sorted(edges))
        by_n[8] = cands
    return by_n


def _colorings(n, c):
    if c == 1:
        yield (1,) * n
        return
    seen = set()
    for col in product(range(1, c + 1), repeat=n):
        if len(set(col)) != c:
            continue
        if col in seen:
            continue
        seen.add(col)
        yield col


def find_counterexample_pair(max_vertices: int = 8, max_colors: int = 3, time_budget: float | None = None,
                             colored_max_n: int = 5):
    """Search colored graphs (n ascending, then number of colors) for a pair whose clique
    complexes share SWL stable histograms but whose vertex-color diagrams differ.

    Returns a certificate dict, or ``{"found": False, "reason": ...}`` when the bounded
    space holds no witness. Colorings with more than one color are enumerated for
    ``n <= colored_max_n`` only (the space grows as ``c^n`` per graph).
    """
    t0 = time.time()
    by_n = _candidate_graphs(max_vertices)
    checked = 0
    for n in sorted(by_n):
        graphs = [SimplicialComplex.from_graph(n, e) for e in by_n[n]]
        lifted = [clique_lift(g, 2) for g in graphs]
        for c in range(1, max_colors + 1):
            if c > 1 and n > colored_max_n:
                break
            items = [(gi, col) for gi in range(len(graphs)) for col in _colorings(n, c)]
            buckets: dict = {}
            for gi, col in items:
                K = lifted[gi]
                key = (tuple(K.count(d) for d in range(K.dim + 1)),
                       tuple(sorted(Counter(zip(K.degrees().tolist(), col)).items())))
                buckets.setdefault(key, []).append((gi, col))
            for key in sorted(buckets, key=repr):
                group = buckets[key]
                if len(group) < 2:
                    continue
                col = swl_refine([lifted[gi] for gi, _ in group], [list(cc) for _, cc in group])
                classes: dict = {}
                for idx, h in enumerate(col.histograms):
                    classes.setdefault(tuple(map(tuple, _hist_list(h))), []).append(idx)
                for members in classes.values():
                    if len(members) < 2:
                        continue
                    diag = {}
                    for idx in members:
                        gi, cc = group[idx]
                        diag.setdefault(tuple(_diagram_lines(lifted[gi], cc)), idx)
                    checked += len(members)
                    if len(diag) >= 2:
                        a, b = sorted(diag.values())[:2]
                        (ga, ca), (gb, cb) = group[a], group[b]
                        cert = make_certificate(graphs[ga], ca, graphs[gb], cb)
                        cert["search"] = {"vertices": n, "colors": c, "checked": checked,
                                          "seconds": round(time.time() - t0, 3)}
                        return cert
                if time_budget is not None and time.time() - t0 > time_budget:
                    return {"found": False, "reason": f"time budget {time_budget}s exhausted at n={n}, c={c}"}
    return {"found": False, "reason": f"none found in bounds (<= {max_vertices} vertices, <= {max_colors} colors)"}


def make_certificate(g1: SimplicialComplex, c1, g2: SimplicialComplex, c2) -> dict:
    K1, K2 = clique_lift(g1, 2), clique_lift(g2, 2)
    col = swl_refine([K1, K2], [list(c1), list(c2)])
    return {
        "found": True,
        "version": 1,
        "graphs": [
            {"n": g.vertex_count, "edges": [list(e) for e in g.edges()], "colors": [int(v) for v in c]}
            for g, c in ((g1, c1), (g2, c2))
        ],
        "swl_histograms": [_hist_list(col.histograms[0]), _hist_list(col.histograms[1])],
        "diagrams": [_diagram_lines(K1, c1), _diagram_lines(K2, c2)],
        "filtration": "vertex-color, f(x) = x, clique complexes up to dim 2",
    }


def verify_certificate(cert: dict) -> tuple[bool, list[str]]:
    """Re-derive everything in ``cert`` from its graphs; returns ``(ok, problems)``."""
    problems = []
    if not cert.get("found"):
        return False, ["certificate records no witness"]
    gs, cs = [], []
    for g in cert["graphs"]:
        gs.append(SimplicialComplex.from_graph(g["n"], [tuple(e) for e in g["edges"]]))
        cs.append(list(g["colors"]))
    Ks = [clique_lift(g, 2) for g in gs]
    col = swl_refine(Ks, cs)
    h = [_hist_list(x) for x in col.histograms]
    if h[0] != h[1]:
        problems.append("SWL histograms differ")
    if h != cert["swl_histograms"]:
        problems.append("recorded SWL histograms do not match recomputation")
    d = [_diagram_lines(K, c) for K, c in zip(Ks, cs)]
    if d[0] == d[1]:
        problems.append("diagrams are identical")
    if d != cert["diagrams"]:
        problems.append("recorded diagrams do not match recomputation")
    if not wl_equivalent(gs[0], gs[1]):
        problems.append("decolored graphs are not 1-WL-equivalent")
    return not problems, problems


def save_certificate(cert: dict, path):
    with open(path, "w") as fh:
        json.dump(cert, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_certificate(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def report(cert: dict) -> str:
    if not cert.get("found"):
        return f"no witness: {cert.get('reason', '')}"
    lines = ["witness pair (clique complexes, vertex-color filtration f(x) = x)"]
    for i, (g, d) in enumerate(zip(cert["graphs"], cert["diagrams"])):
        lines.append(f"  graph {i}: n={g['n']} edges={g['edges']} colors={g['colors']}")
        lines.append(f"    diagram: {'; '.join(d)}")
    lines.append(f"  SWL stable histograms equal: {cert['swl_histograms'][0] == cert['swl_histograms'][1]}")
    return "\n".join(lines)
