"""Experiment drivers; each returns a JSON-ready dict and optionally writes it under ``out``."""
from __future__ import annotations

import json
import time
from pathlib import Path

import numpy as np

from .. import autodiff as ad
from ..complex import random_rigid_motion
from ..expressivity import find_counterexample_pair, save_certificate, verify_certificate
from ..filtration import FilterFn, InvFeature, geometric_rank, synthesize_higher_colors
from ..persistence.diagrams import pd_matrix_reduction
from ..topnet import TopNet, TopNetSpec, discretization_error_experiment
from .generators import gen_beta2, gen_wl_hard, random_geometric_complex, random_graph_complex
from .train import RunConfig, train

EXPERIMENTS = ("invariance", "expressivity", "ode-error", "classify")


def _diagram_points(dgm, p, sentinel):
    pts = dgm.points(p, sentinel)
    return pts[np.lexsort((pts[:, 1], pts[:, 0]))] if len(pts) else pts


def _deviation(a: np.ndarray, b: np.ndarray) -> float:
    if a.shape != b.shape:
        return float("inf")
    return float(np.abs(a - b).max()) if a.size else 0.0


def geometric_diagram_invariance(n_complexes=100, n_motions=10, dims=(1, 2), seed=0, inv="max-pairwise-distance"):
    """Max deviation of geometric i-simplex-color diagrams under random rigid motions."""
    rng = np.random.default_rng(seed)
    store = ad.ParamStore(seed)
    worst = 0.0
    checked = 0
    for _ in range(n_complexes):
        G = random_geometric_complex(rng, min_dim=max(dims))
        A = synthesize_higher_colors(G.attributed)
        G = type(G)(A, G.coords)
        for i in dims:
            f = FilterFn.learned(store, f"inv.f{i}", A.width + 1, hidden=8)
            feat = InvFeature(inv, i)
            ref = pd_matrix_reduction(geometric_rank(G, f, feat, i))
            sent = ref.sentinel()
            ref_pts = [_diagram_points(ref, p, sent) for p in range(G.complex.dim + 1)]
            for _ in range(n_motions):
                R, t = random_rigid_motion(G.coords.shape[1], rng)
                moved = pd_matrix_reduction(geometric_rank(G.moved(R, t), f, feat, i))
                for p, rp in enumerate(ref_pts):
                    worst = max(worst, _deviation(rp, _diagram_points(moved, p, sent)))
                checked += 1
    return {"complexes": n_complexes, "motions": n_motions, "dims": list(dims), "checked": checked,
            "max_deviation": worst}


def model_equivariance(n_complexes=20, n_motions=3, seed=0, spec: TopNetSpec | None = None):
    """Logit invariance of a geometric TopNet and coordinate equivariance of one EMPSN layer."""
    rng = np.random.default_rng(seed)
    spec = spec or TopNetSpec(tnn="empsn", layers=2, hidden=8, diagram="geometric", filtration_dim=1,
                              num_filtrations=2, filter_hidden=8, ph_dim=8, topagg="perslay", pd_dims=[0, 1])
    model = TopNet(spec, in_width=2, seed=seed)
    layer = model.tnns[0]
    logit_dev = coord_dev = 0.0
    for _ in range(n_complexes):
        G = random_geometric_complex(rng, max_dim=2)
        b = model.prepare([G])
        out = model(b).data
        x, z = model.encode(b)
        _, z1 = layer(b, x, z)
        for _ in range(n_motions):
            R, t = random_rigid_motion(G.coords.shape[1], rng)
            bm = model.prepare([G.moved(R, t)])
            logit_dev = max(logit_dev, float(np.abs(model(bm).data - out).max()))
            xm, zm = model.encode(bm)
            _, z1m = layer(bm, xm, zm)
            coord_dev = max(coord_dev, float(np.abs(z1m.data - (z1.data @ R.T + t)).max()))
    return {"complexes": n_complexes, "motions": n_motions, "max_logit_deviation": logit_dev,
            "max_coordinate_deviation": coord_dev}


def run_invariance(seed=0, n_complexes=100, n_motions=10, model_complexes=20):
    return {"diagrams": geometric_diagram_invariance(n_complexes, n_motions, seed=seed),
            "model": model_equivariance(model_complexes, seed=seed)}


def run_expressivity(max_vertices=8, max_colors=3, out=None, time_budget=None):
    t = time.perf_counter()
    cert = find_counterexample_pair(max_vertices=max_vertices, max_colors=max_colors, time_budget=time_budget)
    search = time.perf_counter() - t
    t = time.perf_counter()
    ok, problems = verify_certificate(cert) if cert.get("found") else (False, ["no witness found"])
    verify = time.perf_counter() - t
    if out is not None:
        save_certificate(cert, Path(out) / "certificate.json")
    return {"found": bool(cert.get("found")), "verified": ok, "problems": problems,
            "search_seconds": search, "verify_seconds": verify, "certificate": cert}


def ode_spec(**kw) -> TopNetSpec:
    base = dict(tnn="mpsn", hidden=8, diagram="vc", filtration="learned", num_filtrations=2, filter_hidden=8,
                ph_dim=8, topagg="perslay", pd_dims=[0, 1], continuous=True, lift=2, act="tanh")
    base.update(kw)
    return TopNetSpec(**base)


def run_ode_error(steps=(8, 16, 32, 64), seed=0, n_graphs=4, ref_factor=64, spec: TopNetSpec | None = None):
    rng = np.random.default_rng(seed)
    model = TopNet(spec or ode_spec(), in_width=2, seed=seed)
    batch = model.prepare([random_graph_complex(rng) for _ in range(n_graphs)])
    res = discretization_error_experiment(model, batch, steps, ref_factor=ref_factor)
    res["spec"] = json.loads(model.spec.to_json())
    return res


def _fit(records, model: dict, seed, epochs, lr=3e-3, batch_size=16):
    cfg = RunConfig(model=model, seed=seed, epochs=epochs, lr=lr, batch_size=batch_size)
    res = train(cfg, records)
    return {"test_acc": res.test["acc"], "test_auroc": res.test["auroc"], "best_epoch": res.best_epoch,
            "train_acc": res.rows[-1]["train_acc"], "n_test": res.test["n"]}


SEPARATION_MODELS = {
    "gin": dict(tnn="gin", diagram="none", topagg="none"),
    "topnet-vc": dict(tnn="gin", diagram="vc", topagg="perslay"),
    "topnet-rephine": dict(tnn="gin", diagram="rephine", topagg="rephine"),
}


def run_separation(n_pairs=150, seed=0, epochs=60, layers=1, k=4):
    recs = gen_wl_hard(n_pairs, seed=seed)
    out = {"graphs": len(recs)}
    for name, m in SEPARATION_MODELS.items():
        out[name] = _fit(recs, dict(m, layers=layers, num_filtrations=k), seed, epochs)
    return out


def ablation_model(pd_dims, max_dim):
    return dict(tnn="gin", layers=1, diagram="vc", filtration="degree", topagg="perslay", pd_dims=list(pd_dims),
                max_dim=max_dim, readout_dims="dim0")


def run_ablation(n_pairs=100, seed=0, epochs=60):
    """Accuracy with and without D2 on clique-lifted wl-hard graphs and on the beta_2 dataset."""
    out = {}
    wl = gen_wl_hard(n_pairs, seed=seed)
    b2 = gen_beta2(n_pairs, seed=seed)
    for name, recs, lift, top in (("wl-hard", wl, 2, 2), ("beta2", b2, None, 3)):
        row = {"graphs": len(recs)}
        for tag, dims in (("d01", (0, 1)), ("d012", (0, 1, 2))):
            m = dict(ablation_model(dims, top), lift=lift)
            row[tag] = _fit(recs, m, seed, epochs)
        row["gain"] = row["d012"]["test_acc"] - row["d01"]["test_acc"]
        out[name] = row
    return out


def run_classify(seed=0, n_pairs=150, epochs=60):
    return {"separation": run_separation(n_pairs, seed, epochs), "ablation": run_ablation(n_pairs, seed, epochs)}


def run_experiments(which: str, out=None, seed: int = 0, **kw) -> dict:
    if which not in EXPERIMENTS:
        raise ValueError(f"unknown experiment {which!r}; choose from {EXPERIMENTS}")
    t = time.perf_counter()
    if which == "invariance":
        res = run_invariance(seed=seed, **kw)
    elif which == "expressivity":
        res = run_expressivity(out=out, **kw)
    elif which == "ode-error":
        res = run_ode_error(seed=seed, **kw)
    else:
        res = run_classify(seed=seed, **kw)
    res = {"experiment": which, "seed": seed, "seconds": time.perf_counter() - t, "result": res}
    if out is not None:
        Path(out).mkdir(parents=True, exist_ok=True)
        (Path(out) / "report.json").write_text(json.dumps(res, indent=2, sort_keys=True, default=_jsonable))
    return res


def _jsonable(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o).__name__}")
