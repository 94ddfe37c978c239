import numpy as np
import pytest

from topnets import AttributedComplex, SimplicialComplex, autodiff as ad
from topnets.batch import ComplexBatch
from topnets.filtration import FilterFn, vertex_color_rank
from topnets.persistence import diagrams_from_values, pd_dim0_unionfind, pd_for_layer, rephine_diagram
from topnets.vectorize import (PersLay, RephineVectorizer, ToglVectorizer, perslay_vectorize, rephine_vectorize,
                               togl_vectorize)

from conftest import path3


def test_perslay_identity_examples():
    layer = PersLay(weight="one", phi="identity", agg="sum")
    assert np.allclose(perslay_vectorize(np.array([[1.0, 2.0]]), layer), [1, 2])
    mean = PersLay(weight="one", phi="identity", agg="mean")
    assert np.allclose(perslay_vectorize(np.array([[1.0, 2.0], [3.0, 4.0]]), mean), [2, 3])


def test_perslay_persistence_weight_kills_diagonal():
    layer = PersLay(weight="persistence", phi="identity", agg="sum")
    assert np.allclose(perslay_vectorize(np.array([[1.0, 1.0]]), layer), [0, 0])
    assert np.allclose(perslay_vectorize(np.array([[1.0, 1.0], [1.0, 3.0]]), layer), [2, 6])


def test_perslay_empty_is_zero():
    store = ad.ParamStore(0)
    layer = PersLay(store, "p", phi="mlp", out=5)
    assert np.allclose(layer(np.zeros((0, 2))).data, 0) and layer(np.zeros((0, 2))).shape == (1, 5)


def test_perslay_learned_permutation_invariant(rng):
    store = ad.ParamStore(1)
    layer = PersLay(store, "p", weight="learned", phi="mlp", agg="max", out=4)
    pts = rng.random((6, 2))
    assert np.allclose(layer(pts).data, layer(pts[rng.permutation(6)]).data)
    with pytest.raises(ValueError):
        PersLay(weight="bogus")


def test_togl_identity_on_path():
    A = AttributedComplex.from_vertex_colors(path3(), [[1.0], [2.0], [3.0]])
    F = vertex_color_rank(A, lambda r: r[0])
    dgm = pd_dim0_unionfind(F)
    s = dgm.sentinel()
    per_vertex = [(q.birth, s if q.essential else q.death) for q in sorted(dgm.pairs, key=lambda q: q.birth_simplex)]
    vert, g = togl_vectorize(per_vertex, np.zeros((0, 2)))
    assert np.allclose(vert, per_vertex)
    assert np.allclose(g, 0)


def test_togl_batched_relabel_equivariant(rng):
    K = SimplicialComplex.from_graph(5, [(0, 1), (1, 2), (2, 3), (3, 4), (0, 4), (1, 3)])
    x = rng.standard_normal((5, 2))
    perm = rng.permutation(5)
    Kp = K.relabel({i: int(perm[i]) for i in range(5)})
    xp = np.zeros_like(x)
    xp[perm] = x
    store = ad.ParamStore(0)
    f = FilterFn.learned(store, "f", 2, n_filters=2)
    vec = ToglVectorizer(store, "t", k=2, out=3)
    outs = []
    for KK, xx in ((K, x), (Kp, xp)):
        b = ComplexBatch([AttributedComplex.from_vertex_colors(KK, xx)])
        ld = pd_for_layer(b, "vc", x={0: ad.Tensor(b.colors[0])}, f=f)
        outs.append(vec.vertex(ld).data)
    assert np.allclose(outs[0], outs[1][perm])


def test_rephine_single_vertex_convention():
    store = ad.ParamStore(0)
    ds = ad.DeepSet(store, "d", [4, 6], [6, 3])
    R = rephine_diagram(SimplicialComplex([(0,)]), [2.5], [])
    s = R.sentinel
    want = ds.outer(ad.tsum(ds.inner(ad.Tensor([[0.0, s, 2.5, s]])), axis=0, keepdims=True)).data[0]
    assert np.allclose(rephine_vectorize(R, ds), want)


def test_rephine_vectorizer_shuffle_and_isomorphism(rng):
    K = SimplicialComplex.from_graph(4, [(0, 1), (1, 2), (2, 3), (0, 2)])
    x = rng.standard_normal((4, 2))
    perm = np.array([2, 0, 3, 1])
    Kp = K.relabel({i: int(perm[i]) for i in range(4)})
    xp = np.zeros_like(x)
    xp[perm] = x
    store = ad.ParamStore(0)
    fv = FilterFn.learned(store, "fv", 2, n_filters=2)
    fe = FilterFn.learned(store, "fe", 2, n_filters=2)
    vec = RephineVectorizer(store, "r", k=2, out=4)
    outs = []
    for KK, xx in ((K, x), (Kp, xp)):
        b = ComplexBatch([AttributedComplex.from_vertex_colors(KK, xx)])
        x0 = ad.Tensor(b.colors[0])
        x1 = x0[b.cells[1][:, 0]] + x0[b.cells[1][:, 1]]
        outs.append(vec(pd_for_layer(b, "rephine", x={0: x0, 1: x1}, f_v=fv, f_e=fe), 1).data)
    assert np.allclose(outs[0], outs[1], atol=1e-12)
    assert outs[0].shape == (1, 8)
