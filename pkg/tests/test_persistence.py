import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from topnets import AttributedComplex, SimplicialComplex, clique_lift, autodiff as ad
from topnets.batch import ComplexBatch
from topnets.filtration import Filtration, i_simplex_color_rank, vertex_color_rank
from topnets.persistence import (PersistenceDiagram, betti_oracle, bookkeeping_diagram, diagrams_from_values,
                                 gf2_rank, pd_dim0_unionfind, pd_for_layer, pd_matrix_reduction, rephine_diagram)
from topnets.persistence import kernels

from conftest import cycle, filled_triangle, path3

INF = math.inf


def _vc(K, values):
    A = AttributedComplex.from_vertex_colors(K, np.asarray(values, dtype=float).reshape(-1, 1))
    return vertex_color_rank(A, lambda r: r[0])


def test_dim0_path_example(backend):
    F = _vc(path3(), [1, 2, 3])
    for dgm in (pd_dim0_unionfind(F, backend), pd_matrix_reduction(F, backend=backend)):
        assert dgm.multiset(0) == Counter({(1.0, INF): 1, (2.0, 2.0): 1, (3.0, 3.0): 1})


def test_dim0_uniform_triangle(backend):
    F = _vc(cycle(3), [1, 1, 1])
    assert pd_dim0_unionfind(F, backend).multiset(0) == Counter({(1.0, INF): 1, (1.0, 1.0): 2})
    assert pd_matrix_reduction(F, 1, backend).multiset(1) == Counter({(1.0, INF): 1})


def test_empty_complex():
    F = Filtration(SimplicialComplex([]), np.zeros(0))
    assert len(pd_dim0_unionfind(F)) == 0


def test_filled_triangle_loop_dies_instantly(backend):
    F = _vc(filled_triangle(), [1, 1, 1])
    assert pd_matrix_reduction(F, backend=backend).multiset(1) == Counter({(1.0, 1.0): 1})
    assert betti_oracle(filled_triangle(), 1) == 0


def test_c4_edge_filtration(backend):
    K = cycle(4)
    edges = K.by_dim[1]
    cols = np.zeros((4, 1))
    ecol = np.array([[1.0], [2.0], [3.0], [4.0]])
    A = AttributedComplex(K, {0: cols, 1: ecol})
    F = i_simplex_color_rank(A, lambda r: r[0], 1)
    assert pd_matrix_reduction(F, backend=backend).multiset(1) == Counter({(4.0, INF): 1})
    assert len(edges) == 4


def test_betti_examples():
    assert betti_oracle(cycle(6), 0) == 1 and betti_oracle(cycle(6), 1) == 1
    two = SimplicialComplex.from_graph(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)])
    assert betti_oracle(two, 0) == 2 and betti_oracle(two, 1) == 2
    assert gf2_rank(np.array([[1, 1], [1, 1]], dtype=np.uint8)) == 1


def test_rephine_single_edge(backend):
    K = SimplicialComplex.from_graph(2, [(0, 1)])
    R = rephine_diagram(K, [5.0, 7.0], [2.0], backend=backend)
    assert R.multiset() == Counter({(0, INF, 5.0, 2.0): 1, (1, 2.0, 7.0, 2.0): 1})
    assert R.sentinel == 3.0


def test_rephine_isolated_vertex():
    K = SimplicialComplex([(0,)])
    R = rephine_diagram(K, [3.0], [])
    t = R.tuples[0]
    assert (t.b, t.d, t.alpha) == (0, INF, 3.0) and t.gamma == INF
    assert R.array()[0, 3] == R.sentinel


def test_rephine_triangle(backend):
    R = rephine_diagram(cycle(3), [1.0, 1.0, 1.0], [1.0, 1.0, 1.0], backend=backend)
    assert R.multiset() == Counter({(1, 1.0, 1.0, 1.0): 2, (0, INF, 1.0, 1.0): 1})
    assert Counter((q.birth, q.death) for q in R.dim1) == Counter({(1.0, INF): 1})


def test_rephine_rejects_higher_dim():
    with pytest.raises(ValueError):
        rephine_diagram(filled_triangle(), [1, 1, 1], [1, 1, 1])


def test_lines_round_trip(rng):
    K = clique_lift(SimplicialComplex.from_graph(5, [(0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (4, 2)]), 2)
    dgm = pd_matrix_reduction(_vc(K, rng.integers(0, 3, 5)))
    back = PersistenceDiagram.from_lines(dgm.to_lines())
    assert back.to_lines() == dgm.to_lines()
    with pytest.raises(ValueError):
        PersistenceDiagram.from_lines(["0 1.0 inf 0 3 -", "1 1.0"])


@st.composite
def graphs(draw):
    n = draw(st.integers(1, 7))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    mask = draw(st.lists(st.booleans(), min_size=len(pairs), max_size=len(pairs)))
    colors = draw(st.lists(st.integers(0, 3), min_size=n, max_size=n))
    return SimplicialComplex.from_graph(n, [p for p, m in zip(pairs, mask) if m]), colors


def _off_diag(dgm, p):
    return Counter({k: v for k, v in dgm.multiset(p, drop_diagonal=True).items()})


@settings(max_examples=60, deadline=None)
@given(graphs())
def test_algorithms_agree_with_bookkeeping(gc):
    G, colors = gc
    K = clique_lift(G, 2)
    F = _vc(K, colors)
    red = pd_matrix_reduction(F)
    uf = pd_dim0_unionfind(F)
    assert red.multiset(0) == uf.multiset(0)
    for p in range(K.dim + 1):
        assert _off_diag(red, p) == bookkeeping_diagram(F, p)
        assert red.essential_count(p) == betti_oracle(K, p)


@settings(max_examples=30, deadline=None)
@given(graphs())
def test_backends_agree(gc):
    G, colors = gc
    K = clique_lift(G, 2)
    F = _vc(K, np.asarray(colors) + 0.5)
    assert pd_matrix_reduction(F, backend="numpy").to_lines() == pd_matrix_reduction(F, backend="numba").to_lines()
    assert pd_dim0_unionfind(F, "numpy").to_lines() == pd_dim0_unionfind(F, "numba").to_lines()


def test_kernels_direct_equivalence(rng):
    for _ in range(20):
        n, m = 12, 20
        eu, ev = rng.integers(0, n, m), rng.integers(0, n, m)
        order = rng.permutation(m)
        birth = rng.integers(0, 3, n).astype(float)
        tie = rng.random(n)
        a = kernels.union_find(order, eu, ev, birth, tie, "numpy")
        b = kernels.union_find(order, eu, ev, birth, tie, "numba")
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
    with pytest.raises(ValueError):
        kernels.reduce_blocks(np.array([0]), np.zeros(0, np.int64), np.array([0, 0]), "fortran")


def _batched_vs_single(items, values, backend):
    batch = ComplexBatch(items)
    F = ad.Tensor(np.concatenate(values).reshape(-1, 1))
    ld = diagrams_from_values(batch, F, 0, pd_dims=(0, 1, 2), backend=backend)
    for g, (K, v) in enumerate(zip(items, values)):
        ref = pd_matrix_reduction(_vc(K, v), backend=backend)
        s = ld.sentinel.data[g, 0]
        d0 = ld.dim0()
        sel = d0.graph == g
        got = Counter(zip(d0.birth.data[sel], d0.death.data[sel]))
        assert got == Counter(map(tuple, ref.points(0, s)))
        for p in (1, 2):
            if p > K.dim:
                continue
            ps = ld.dims[p]
            sel = ps.graph == g
            got = Counter(zip(ps.birth.data[sel], ps.death.data[sel]))
            assert got == Counter(map(tuple, ref.points(p, s))), (g, p)


def test_batched_matches_single(backend, rng):
    items, values = [], []
    for _ in range(6):
        n = int(rng.integers(3, 8))
        edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < 0.5]
        items.append(clique_lift(SimplicialComplex.from_graph(n, edges), 3))
        values.append(rng.integers(0, 4, n).astype(float))
    _batched_vs_single(items, values, backend)


def test_batched_graph_only_path(backend, rng):
    items = [cycle(5), path3(), SimplicialComplex.from_graph(4, [(0, 1), (2, 3)])]
    values = [rng.random(K.vertex_count) for K in items]
    _batched_vs_single(items, values, backend)


def test_pd_for_layer_rephine_matches_single():
    K = SimplicialComplex.from_graph(4, [(0, 1), (1, 2), (0, 2), (2, 3)])
    from topnets.filtration import FilterFn
    batch = ComplexBatch([AttributedComplex.from_vertex_colors(K, [[1.0], [2.0], [3.0], [4.0]])])
    x0 = ad.Tensor(batch.colors[0])
    x1 = ad.Tensor(batch.colors[0][batch.cells[1]].sum(axis=1))
    f = FilterFn.coordinate_sum()
    ld = pd_for_layer(batch, "rephine", x={0: x0, 1: x1}, f_v=f, f_e=f)
    R = rephine_diagram(AttributedComplex.from_vertex_colors(K, [[1.0], [2.0], [3.0], [4.0]]), f, f)
    assert ld.sentinel.data[0, 0] == R.sentinel
    got = Counter(zip(ld.v_death.data[:, 0], ld.alpha.data[:, 0], ld.gamma.data[:, 0]))
    want = Counter((t[1], t[2], t[3]) for t in map(tuple, R.array()))
    assert got == want
