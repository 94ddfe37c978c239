import copy
import time
from importlib import resources

import pytest

from topnets import SimplicialComplex, clique_lift
from topnets.expressivity import (color_disconnecting_check, find_counterexample_pair, load_certificate,
                                  make_certificate, report, swl_equivalent, swl_refine, verify_certificate,
                                  wl1_refine, wl_equivalent)

from conftest import cycle, path3


def two_triangles():
    return SimplicialComplex.from_graph(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)])


def fixture_path():
    return resources.files("topnets") / "data" / "swl_witness.json"


def test_wl_classic_pair():
    assert wl_equivalent(cycle(6), two_triangles())
    assert not wl_equivalent(path3(), cycle(3))


def test_wl_single_vertex_stabilizes():
    col = wl1_refine([SimplicialComplex([(0,)])])
    assert col.rounds <= 1


def test_wl_respects_colors():
    assert not wl_equivalent(cycle(4), cycle(4), [1, 1, 1, 2], [1, 1, 1, 1])


def test_swl_sees_triangles():
    assert not swl_equivalent(clique_lift(cycle(6), 2), clique_lift(two_triangles(), 2))


def test_swl_on_graphs_matches_wl_partition(rng):
    for _ in range(10):
        n = int(rng.integers(3, 8))
        edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < 0.4]
        G = SimplicialComplex.from_graph(n, edges)
        colors = list(rng.integers(1, 3, n))
        wl = wl1_refine([G], [colors]).partition(0)
        sw = swl_refine([G], [colors]).partition(0)
        verts = set(G.by_dim[0])
        assert sorted(sorted(c for c in cls if c in verts) for cls in sw if set(cls) & verts) == \
            sorted(sorted(c for c in cls if c in verts) for cls in wl if set(cls) & verts)


def test_vertex_transitive_single_class():
    K4 = clique_lift(SimplicialComplex.from_graph(4, [(a, b) for a in range(4) for b in range(a + 1, 4)]), 2)
    col = swl_refine([K4])
    verts = [col.colors[0][v] for v in K4.by_dim[0]]
    assert len(set(verts)) == 1


def test_color_disconnecting_examples():
    edge = SimplicialComplex.from_graph(2, [(0, 1)])
    assert color_disconnecting_check(edge, ["blue"], {"blue"}) == (1, 2)
    assert color_disconnecting_check(edge, ["blue"], set()) == (1, 1)
    with pytest.raises(ValueError):
        color_disconnecting_check(edge, [], {"blue"})


def test_fixture_certificate_revalidates_fast():
    cert = load_certificate(fixture_path())
    t = time.perf_counter()
    ok, problems = verify_certificate(cert)
    assert ok, problems
    assert time.perf_counter() - t < 1.0
    assert "witness pair" in report(cert)


def test_certificate_properties():
    cert = load_certificate(fixture_path())
    gs = [SimplicialComplex.from_graph(g["n"], [tuple(e) for e in g["edges"]]) for g in cert["graphs"]]
    cs = [g["colors"] for g in cert["graphs"]]
    assert max(g.vertex_count for g in gs) <= 8
    assert swl_equivalent(clique_lift(gs[0], 2), clique_lift(gs[1], 2), cs[0], cs[1])
    assert cert["diagrams"][0] != cert["diagrams"][1]
    assert wl_equivalent(gs[0], gs[1])
    ecs = [[max(c[a], c[b]) for a, b in g.edges()] for g, c in zip(gs, cs)]
    before_after = color_disconnecting_check(gs, ecs, set())
    assert before_after[0][1] != before_after[1][1]


def test_tampered_certificate_fails():
    cert = load_certificate(fixture_path())
    bad = copy.deepcopy(cert)
    bad["diagrams"][0] = bad["diagrams"][1]
    assert not verify_certificate(bad)[0]
    bad = copy.deepcopy(cert)
    bad["graphs"][1]["edges"] = bad["graphs"][1]["edges"][:-1]
    ok, problems = verify_certificate(bad)
    assert not ok and problems
    assert verify_certificate({"found": False})[0] is False


def test_make_certificate_rejects_distinguishable_pair():
    cert = make_certificate(path3(), [1, 1, 1], cycle(3), [1, 1, 1])
    assert not verify_certificate(cert)[0]


def test_small_search_space_has_no_witness():
    res = find_counterexample_pair(max_vertices=5, max_colors=2)
    assert res["found"] is False
