"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line with its runtime.

Run alone with ``python3 tests/test_acceptance.py`` or through pytest (the lines
are repeated in the terminal summary).
"""
import os
import sys
import tempfile
import time
from collections import Counter
from importlib import resources
from pathlib import Path

import networkx as nx
import numpy as np

sys.path.insert(0, os.path.dirname(__file__))

from conftest import ACCEPTANCE_LINES  # noqa: E402
from topnets import AttributedComplex, SimplicialComplex, clique_lift, autodiff as ad  # noqa: E402
from topnets import _accel  # noqa: E402
from topnets.batch import ComplexBatch  # noqa: E402
from topnets.expressivity import load_certificate, verify_certificate  # noqa: E402
from topnets.filtration import FilterFn, vertex_color_rank  # noqa: E402
from topnets.harness import cli, random_geometric_complex, random_graph_complex  # noqa: E402
from topnets.harness.experiments import (geometric_diagram_invariance, model_equivariance, run_ablation,  # noqa: E402
                                         run_ode_error, run_separation)
from topnets.persistence import (betti_oracle, bookkeeping_diagram, pd_dim0_unionfind,  # noqa: E402
                                 pd_for_layer, pd_matrix_reduction)
from topnets.persistence.batched import tie_margin  # noqa: E402
from topnets.topnet import TopNet, TopNetSpec  # noqa: E402
from topnets.vectorize import PersLay, _onehot  # noqa: E402

BACKENDS = ["numba", "numpy"] if _accel.HAVE_NUMBA else ["numpy"]


def _record(n, title, ok, detail, seconds):
    line = f"[{'PASS' if ok else 'FAIL'}] AC{n} {title}: {detail} ({seconds:.1f}s)"
    print(line, flush=True)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


# -- AC1: diagrams vs oracles on every small connected graph ----------------------
def connected_classes(max_n=5):
    return [g for g in nx.graph_atlas_g() if 0 < g.number_of_nodes() <= max_n and nx.is_connected(g)]


def _off_diag(dgm, p):
    return Counter(dgm.multiset(p, drop_diagonal=True))


def test_ac1_small_graphs_match_oracles():
    t = time.perf_counter()
    rng = np.random.default_rng(0)
    classes = connected_classes()
    problems, cases = [], 0
    for g in classes:
        n = g.number_of_nodes()
        K = clique_lift(SimplicialComplex.from_graph(n, list(g.edges())), max(n - 1, 1))
        betti = [betti_oracle(K, p) for p in range(K.dim + 1)]
        for _ in range(5):
            cases += 1
            colors = rng.integers(0, 4, n).astype(float).reshape(-1, 1)
            F = vertex_color_rank(AttributedComplex.from_vertex_colors(K, colors), lambda r: r[0])
            book = [bookkeeping_diagram(F, p) for p in range(K.dim + 1)]
            for be in BACKENDS:
                red = pd_matrix_reduction(F, backend=be)
                uf = pd_dim0_unionfind(F, be)
                if red.multiset(0) != uf.multiset(0) or _off_diag(uf, 0) != book[0]:
                    problems.append((list(g.edges()), colors.ravel().tolist(), be, "dim0"))
                for p in range(K.dim + 1):
                    if _off_diag(red, p) != book[p] or red.essential_count(p) != betti[p]:
                        problems.append((list(g.edges()), colors.ravel().tolist(), be, p))
    dt = time.perf_counter() - t
    ok = len(classes) == 31 and not problems and dt < 60
    _record(1, "diagrams match oracles", ok,
            f"{len(classes)} classes, {cases} colored complexes x {len(BACKENDS)} backends, {len(problems)} mismatches", dt)


# -- AC2: geometric diagram invariance --------------------------------------------
def test_ac2_geometric_diagram_invariance():
    t = time.perf_counter()
    res = geometric_diagram_invariance(n_complexes=100, n_motions=10, dims=(1, 2), seed=0)
    dt = time.perf_counter() - t
    ok = res["checked"] == 100 * 10 * 2 and res["max_deviation"] <= 1e-9
    _record(2, "geometric diagram invariance", ok,
            f"{res['checked']} (complex, motion, i) checks, max deviation {res['max_deviation']:.2e} <= 1e-9", dt)


# -- AC3: counterexample search and fixture re-validation -------------------------
def test_ac3_expressivity_certificate():
    t = time.perf_counter()
    with tempfile.TemporaryDirectory() as tmp:
        code = cli.main(["expressivity", "--out", tmp, "--max-vertices", "8", "--max-colors", "3"])
        found = Path(tmp, "certificate.json")
        cert = load_certificate(found) if found.exists() else {}
    search = time.perf_counter() - t
    ok_found = code == 0 and verify_certificate(cert)[0] if cert.get("found") else False

    t = time.perf_counter()
    fixture = load_certificate(resources.files("topnets") / "data" / "swl_witness.json")
    ok_fix, problems = verify_certificate(fixture)
    check = time.perf_counter() - t
    ok = ok_found and search < 600 and ok_fix and check < 1.0
    _record(3, "expressivity certificate", ok,
            f"search found+verified={ok_found} in {search:.1f}s (< 600s); fixture valid={ok_fix} "
            f"in {check:.3f}s (< 1s){'; ' + '; '.join(problems) if problems else ''}", search + check)


# -- AC4: WL-hard separation ------------------------------------------------------
def test_ac4_wl_hard_separation():
    t = time.perf_counter()
    res = run_separation(n_pairs=150, seed=0, epochs=60)
    dt = time.perf_counter() - t
    gin = res["gin"]["test_acc"]
    vc, rep = res["topnet-vc"]["test_acc"], res["topnet-rephine"]["test_acc"]
    ok = res["graphs"] >= 200 and 0.45 <= gin <= 0.55 and vc >= 0.95 and rep >= 0.95
    _record(4, "wl-hard separation", ok,
            f"{res['graphs']} graphs; GIN {gin:.3f} in [0.45, 0.55]; TopNet-VC {vc:.3f}, "
            f"TopNet-RePHINE {rep:.3f} (>= 0.95)", dt)


# -- AC5: gradient checks ---------------------------------------------------------
GRAD_CONFIGS = [
    dict(tnn="gin", diagram="vc", topagg="perslay"),
    dict(tnn="gin", diagram="vc", topagg="togl"),
    dict(tnn="gcn", diagram="rephine", topagg="rephine"),
    dict(tnn="mpsn", diagram="isimplex", filtration_dim=1, topagg="perslay", lift=2, pd_dims=[0, 1, 2]),
    dict(tnn="empsn", diagram="geometric", filtration_dim=1, topagg="perslay"),
]


def _items(rng, geometric, n):
    if geometric:
        return [random_geometric_complex(rng, max_dim=2) for _ in range(n)]
    return [random_graph_complex(rng) for _ in range(n)]


def _widest(draw, margin, tries=20, enough=1e-3):
    """Resample inputs until the tie margin exceeds ``enough``; else keep the widest draw."""
    best, best_m = None, -1.0
    for _ in range(tries):
        b = draw()
        m = margin(b)
        if m > best_m:
            best, best_m = b, m
        if m > enough:
            break
    return best


def _pipeline_case(seed):
    """Learned filter -> batched diagrams -> PersLay -> squared loss."""
    rng = np.random.default_rng(seed)
    store = ad.ParamStore(seed)
    f = FilterFn.learned(store, "f", 2, hidden=6, n_filters=2, act="tanh")
    vecs = {p: PersLay(store, f"pl{p}", phi="mlp", in_width=4, hidden=6, out=3, act="tanh") for p in (0, 1)}
    b = _widest(lambda: ComplexBatch([random_graph_complex(rng) for _ in range(2)]),
                lambda b: tie_margin(pd_for_layer(b, "vc", x={0: ad.Tensor(b.colors[0])}, f=f), b))
    x = ad.Tensor(b.colors[0])
    target = rng.standard_normal((2, 6))

    def loss():
        ld = pd_for_layer(b, "vc", x={0: x}, f=f)
        parts = []
        for p, ps in ((0, ld.dim0()), (1, ld.dims[1])):
            pts = ad.concat([ps.points(), _onehot(ps.filt, 2)], axis=1)
            parts.append(vecs[p](pts, ps.graph, 2))
        return ad.tsum(ad.square(ad.concat(parts, axis=1) - target))

    return ad.grad_check(loss, store, tie_margin=lambda: tie_margin(pd_for_layer(b, "vc", x={0: x}, f=f), b),
                         rng=rng)


def _model_case(seed):
    cfg = GRAD_CONFIGS[seed % len(GRAD_CONFIGS)]
    spec = TopNetSpec(**dict(dict(layers=1, hidden=6, num_filtrations=2, filter_hidden=6, ph_dim=4, act="tanh"),
                             **cfg))
    rng = np.random.default_rng(seed)
    model = TopNet(spec, 2, seed=seed)
    b = _widest(lambda: model.prepare(_items(rng, spec.geometric, 2)), model.tie_margin)
    y = np.array([0, 1])
    return ad.grad_check(lambda: model.loss(b, y)[0], model.store, tie_margin=lambda: model.tie_margin(b), rng=rng)


def test_ac5_gradient_checks():
    t = time.perf_counter()
    reports = [(_pipeline_case if s % 2 == 0 else _model_case)(s) for s in range(50)]
    dt = time.perf_counter() - t
    skipped = sum(bool(r["skipped"]) for r in reports)
    failed = [s for s, r in enumerate(reports) if not r["skipped"] and not r.passed]
    worst = max((r["max_rel_err"] for r in reports if not r["skipped"]), default=float("nan"))
    ok = skipped == 0 and not failed
    _record(5, "gradient checks", ok,
            f"50 seeds (25 filter->PD->PersLay->loss, 25 one-layer TopNets), {skipped} skipped, "
            f"{len(failed)} failed, max rel err {worst:.2e} <= 1e-4", dt)


# -- AC6: Euler vs RK4 discretization error ---------------------------------------
def test_ac6_ode_error():
    t = time.perf_counter()
    res = run_ode_error(steps=(8, 16, 32, 64), seed=0)
    dt = time.perf_counter() - t
    rows = res["rows"]
    ratios = [r["ratio"] for r in rows[1:]]
    e_r = [r["e_r"] for r in rows]
    ok = (all(0.35 <= q <= 0.65 for q in ratios) and all(b <= a for a, b in zip(e_r, e_r[1:]))
          and res["ref_check"] < 0.01)
    _record(6, "ODE discretization error", ok,
            f"ratios e_v(2N)/e_v(N) for N=8,16,32: {', '.join(f'{q:.4f}' for q in ratios)}; "
            f"e_r {', '.join(f'{e:.3g}' for e in e_r)}; reference check {res['ref_check']:.2e}", dt)


# -- AC7: reductions to TOGL, PersLay and RePHINE ---------------------------------
# Reference pipelines in plain numpy, reading the model's parameters by name.
ACT = {"relu": lambda v: np.maximum(v, 0.0), "tanh": np.tanh}


def np_mlp(store, prefix, x, act="relu", final_act=None):
    n = 0
    while f"{prefix}.W{n}" in store.params:
        n += 1
    for i in range(n):
        x = x @ store.params[f"{prefix}.W{i}"].data + store.params[f"{prefix}.b{i}"].data
        if i < n - 1:
            x = ACT[act](x)
    return ACT[final_act](x) if final_act else x


def np_deepset(store, prefix, pts, out_w, act="relu"):
    if len(pts) == 0:
        inner = np.zeros((1, store.params[prefix + ".inner.W0"].shape[1]))
        return np_mlp(store, prefix + ".outer", inner, act)[0]
    h = np_mlp(store, prefix + ".inner", pts, act, final_act=act)
    return np_mlp(store, prefix + ".outer", h.sum(axis=0, keepdims=True), act)[0]


def np_filter(store, prefix, x):
    return np.logaddexp(0.0, np_mlp(store, prefix, x)) + 1e-6


def elder_d0(n, edges, birth, edge_val, tie=None):
    """Per-vertex death value (None if it survives) and cycle edges, by explicit component merging."""
    comp = {v: {v} for v in range(n)}
    key = (lambda v: (birth[v], 0.0 if tie is None else tie[v], v))
    death, cycles = [None] * n, []
    for e in sorted(range(len(edges)), key=lambda e: edge_val[e]):
        u, v = edges[e]
        if comp[u] is comp[v]:
            cycles.append(e)
            continue
        a, b = min(comp[u], key=key), min(comp[v], key=key)
        old, young = (a, b) if key(a) < key(b) else (b, a)
        death[young] = edge_val[e]
        merged = comp[u] | comp[v]
        for w in merged:
            comp[w] = merged
    return death, cycles


def _graph(item):
    K = item.complex
    assert list(K.vertices) == list(range(K.vertex_count))
    return K.vertex_count, [tuple(e) for e in K.edges()], item.colors[0]


def np_gin(store, prefix, n, edges, x):
    agg = np.zeros_like(x)
    for u, v in edges:
        agg[u] += x[v]
        agg[v] += x[u]
    eps = store.params[prefix + ".eps"].data[0]
    return np_mlp(store, prefix + ".mlp", (1 + eps) * x + agg)


def ref_togl(model, item):
    s, P = model.store, model.store
    n, edges, colors = _graph(item)
    x = np_gin(P, "L0.gnn", n, edges, np_mlp(s, "enc", colors))
    F = np_filter(s, "L0.f", x)
    k = F.shape[1]
    feats, d1 = [], []
    for c in range(k):
        er = [max(F[u, c], F[v, c]) for u, v in edges]
        sent = F[:, c].max() + 1.0
        death, cyc = elder_d0(n, edges, F[:, c], er)
        feats += [F[:, c], np.array([sent if d is None else d for d in death])]
        d1 += [[er[e], sent] + [float(j == c) for j in range(k)] for e in cyc]
    x = x + np_mlp(s, "L0.togl.psi", np.stack(feats, axis=1))
    m = np_deepset(s, "L0.togl.d1", np.array(d1).reshape(-1, 2 + k), model.xw)
    return np_mlp(s, "head", np.concatenate([x.sum(axis=0), m])[None])[0]


def ref_perslay(model, item):
    s = model.store
    n, edges, colors = _graph(item)
    x = np_mlp(s, "enc", colors)
    F = np_filter(s, "L0.f", x)
    k = F.shape[1]
    pts = {0: [], 1: []}
    for c in range(k):
        er = [max(F[u, c], F[v, c]) for u, v in edges]
        sent = F[:, c].max() + 1.0
        death, cyc = elder_d0(n, edges, F[:, c], er)
        oh = [float(j == c) for j in range(k)]
        pts[0] += [[F[v, c], sent if death[v] is None else death[v]] + oh for v in range(n)]
        pts[1] += [[er[e], sent] + oh for e in cyc]
    ms = []
    for p in (0, 1):
        if pts[p]:
            ms.append(np_mlp(s, f"L0.perslay{p}.phi", np.array(pts[p])).sum(axis=0))
        else:
            ms.append(np.zeros(model.spec.ph_dim))
    return np_mlp(s, "head", np.concatenate([x.sum(axis=0)] + ms)[None])[0]


def ref_rephine(model, item):
    s = model.store
    n, edges, colors = _graph(item)
    x = np_gin(s, "L0.gnn", n, edges, np_mlp(s, "enc", colors))
    xe = np.array([x[u] + x[v] for u, v in edges])
    A = np_filter(s, "L0.fv", x)
    Fe = np_filter(s, "L0.fe", xe)
    k = A.shape[1]
    tuples, d1 = [], []
    for c in range(k):
        sent = max(Fe[:, c].max(), 0.0) + 1.0
        death, cyc = elder_d0(n, edges, np.zeros(n), Fe[:, c], tie=A[:, c])
        oh = [float(j == c) for j in range(k)]
        for v in range(n):
            inc = [Fe[e, c] for e, (a, b) in enumerate(edges) if v in (a, b)]
            gamma = min(inc) if inc else sent
            tuples.append([float(death[v] is not None), sent if death[v] is None else death[v], A[v, c], gamma] + oh)
        d1 += [[Fe[e, c], sent] + oh for e in cyc]
    m0 = np_deepset(s, "L0.rephine.d0", np.array(tuples), model.spec.ph_dim)
    m1 = np_deepset(s, "L0.rephine.d1", np.array(d1).reshape(-1, 2 + k), model.spec.ph_dim)
    return np_mlp(s, "head", np.concatenate([x.sum(axis=0), m0, m1])[None])[0]


REDUCTIONS = {
    "togl": (dict(tnn="gin", diagram="vc", topagg="togl"), ref_togl),
    "perslay": (dict(tnn="identity", diagram="vc", topagg="perslay"), ref_perslay),
    "rephine": (dict(tnn="gin", diagram="rephine", topagg="rephine"), ref_rephine),
}


def test_ac7_reductions_match_direct_pipelines():
    t = time.perf_counter()
    rng = np.random.default_rng(5)
    devs = {}
    for name, (cfg, ref) in REDUCTIONS.items():
        spec = TopNetSpec(**dict(dict(layers=1, hidden=8, num_filtrations=3, filter_hidden=8, ph_dim=6), **cfg))
        model = TopNet(spec, 2, seed=11)
        items = [random_graph_complex(rng, connected=(j % 2 == 0)) for j in range(20)]
        got = model(model.prepare(items)).data
        want = np.stack([ref(model, it) for it in items])
        devs[name] = float(np.abs(got - want).max())
    dt = time.perf_counter() - t
    ok = all(d <= 1e-12 for d in devs.values())
    _record(7, "TOGL/PersLay/RePHINE reductions", ok,
            "20 graphs each, max |logit gap| " + ", ".join(f"{k} {v:.1e}" for k, v in devs.items()) + " <= 1e-12", dt)


# -- AC8: E(n) invariance and equivariance ----------------------------------------
def test_ac8_equivariance():
    t = time.perf_counter()
    res = model_equivariance(n_complexes=20, n_motions=3, seed=0)
    dt = time.perf_counter() - t
    ok = res["max_logit_deviation"] <= 1e-7 and res["max_coordinate_deviation"] <= 1e-9
    _record(8, "E(n) invariance/equivariance", ok,
            f"20 complexes x 3 motions; logits {res['max_logit_deviation']:.1e} <= 1e-7, "
            f"EMPSN coordinates {res['max_coordinate_deviation']:.1e} <= 1e-9", dt)


# -- AC9: D2 ablation -------------------------------------------------------------
def test_ac9_d2_ablation():
    t = time.perf_counter()
    res = run_ablation(n_pairs=100, seed=0, epochs=60)
    dt = time.perf_counter() - t
    wl, b2 = res["wl-hard"], res["beta2"]
    ok = wl["d012"]["test_acc"] >= wl["d01"]["test_acc"] and b2["gain"] >= 0.10
    _record(9, "D2 ablation", ok,
            f"wl-hard {wl['d01']['test_acc']:.3f} -> {wl['d012']['test_acc']:.3f} (no drop); "
            f"beta2 {b2['d01']['test_acc']:.3f} -> {b2['d012']['test_acc']:.3f} (gain {b2['gain']:+.3f} >= 0.10)", dt)


if __name__ == "__main__":
    failed = 0
    for name, fn in sorted((k, v) for k, v in globals().items() if k.startswith("test_ac")):
        try:
            fn()
        except AssertionError:
            failed += 1
        except Exception as e:  # a crash is a failure too
            failed += 1
            print(f"[FAIL] {name}: {type(e).__name__}: {e}", flush=True)
    sys.exit(1 if failed else 0)
