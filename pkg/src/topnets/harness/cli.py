"""``topnet`` command line entry point."""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from ..filtration import (FilterFn, InvFeature, geometric_rank, i_simplex_color_rank, synthesize_higher_colors,
                          vertex_color_rank)
from ..persistence.diagrams import pd_matrix_reduction, rephine_diagram
from . import experiments
from .datasets import load_dataset, save_dataset
from .generators import GENERATORS
from .train import RunConfig, evaluate, load_model, train


def _seed(args) -> int:
    env = os.environ.get("TOPNET_SEED")
    return int(env) if env is not None else args.seed


def _out(args) -> Path:
    p = Path(args.out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _write_report(out: Path, obj) -> Path:
    path = out / "report.json"
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=experiments._jsonable))
    return path


def cmd_train(args):
    cfg = RunConfig.from_file(args.config)
    cfg.out = args.out
    if args.data:
        cfg.data = args.data
    if args.epochs is not None:
        cfg.epochs = args.epochs
    res = train(cfg, verbose=not args.quiet)
    print(f"best epoch {res.best_epoch}; outputs in {args.out}")
    return 0


def cmd_eval(args):
    model = load_model(args.checkpoint)
    res = evaluate(model, load_dataset(args.data))
    print(" ".join(f"{k}={v}" for k, v in sorted(res.items())))
    _write_report(_out(args), {"checkpoint": str(args.checkpoint), "data": str(args.data), "metrics": res})
    return 0


def record_diagram_lines(rec, kind: str) -> list[str]:
    """Diagram of one record under a fixed filter (sum of color channels)."""
    f = FilterFn.coordinate_sum()
    A = rec.attributed
    if kind == "vc":
        return pd_matrix_reduction(vertex_color_rank(A, f)).to_lines()
    if kind == "edge":
        return pd_matrix_reduction(i_simplex_color_rank(synthesize_higher_colors(A), f, 1)).to_lines()
    if kind == "geom":
        if not hasattr(rec.item, "coords"):
            raise ValueError("geometric filtration needs records with coords")
        G = type(rec.item)(synthesize_higher_colors(A), rec.item.coords)
        return pd_matrix_reduction(geometric_rank(G, f, InvFeature("max-pairwise-distance", 1), 1)).to_lines()
    R = rephine_diagram(A, f, f)
    return [" ".join(repr(float(v)) for v in row) for row in R.array()]


def cmd_diagrams(args):
    recs = load_dataset(args.data)
    out = [{"index": i, "lines": record_diagram_lines(r, args.filtration)} for i, r in enumerate(recs)]
    path = _write_report(_out(args), {"filtration": args.filtration, "records": out})
    print(f"{len(out)} diagrams -> {path}")
    return 0


def cmd_expressivity(args):
    out = _out(args)
    res = experiments.run_experiments("expressivity", out=out, seed=_seed(args), max_vertices=args.max_vertices,
                                      max_colors=args.max_colors)
    r = res["result"]
    print(f"found={r['found']} verified={r['verified']} search={r['search_seconds']:.2f}s "
          f"verify={r['verify_seconds']:.3f}s -> {out / 'certificate.json'}")
    return 0 if r["verified"] else 1


def cmd_ode_error(args):
    steps = [int(s) for s in args.steps.split(",") if s]
    res = experiments.run_experiments("ode-error", out=_out(args), seed=_seed(args), steps=steps,
                                      ref_factor=args.ref_factor)
    r = res["result"]
    print(f"{'N':>5} {'e_v':>12} {'e_r':>12} {'ratio':>8}")
    for row in r["rows"]:
        ratio = "-" if row["ratio"] is None else f"{row['ratio']:.4f}"
        print(f"{row['N']:>5} {row['e_v']:12.6g} {row['e_r']:12.6g} {ratio:>8}")
    print(f"reference steps {r['n_ref']}; halved-step change {r['ref_check']:.3g}")
    return 0


def cmd_run(args):
    res = experiments.run_experiments(args.which, out=_out(args), seed=_seed(args))
    print(json.dumps(res["result"], indent=2, sort_keys=True, default=experiments._jsonable)[:4000])
    return 0


def cmd_generate(args):
    gen = GENERATORS[args.kind]
    recs = gen(args.n, seed=_seed(args))
    Path(args.path).parent.mkdir(parents=True, exist_ok=True)
    save_dataset(recs, args.path)
    print(f"{len(recs)} records -> {args.path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="topnet", description="Topological message-passing networks.")
    sub = p.add_subparsers(dest="cmd", required=True)

    def add(name, fn, help):
        s = sub.add_parser(name, help=help)
        s.add_argument("--out", default="out", help="output directory")
        s.add_argument("--seed", type=int, default=0, help="overridden by TOPNET_SEED")
        s.set_defaults(fn=fn)
        return s

    s = add("train", cmd_train, "train a model from a JSON run config")
    s.add_argument("--config", required=True)
    s.add_argument("--data", help="override the dataset path of the config")
    s.add_argument("--epochs", type=int)
    s.add_argument("--quiet", action="store_true")

    s = add("eval", cmd_eval, "evaluate a checkpoint on a dataset")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--data", required=True)

    s = add("diagrams", cmd_diagrams, "persistence diagrams of every record")
    s.add_argument("--data", required=True)
    s.add_argument("--filtration", choices=["vc", "edge", "geom", "rephine"], default="vc")

    s = add("expressivity", cmd_expressivity, "search and verify a colored SWL counterexample pair")
    s.add_argument("--max-vertices", type=int, default=8)
    s.add_argument("--max-colors", type=int, default=3)

    s = add("ode-error", cmd_ode_error, "Euler discretization error against an RK4 reference")
    s.add_argument("--steps", default="8,16,32,64")
    s.add_argument("--ref-factor", type=int, default=64)

    s = add("run", cmd_run, "run an experiment driver")
    s.add_argument("which", choices=experiments.EXPERIMENTS)

    s = add("generate", cmd_generate, "write a synthetic JSONL dataset")
    s.add_argument("kind", choices=sorted(GENERATORS))
    s.add_argument("--n", type=int, default=100, help="pairs for wl-hard/beta2, records for geometric")
    s.add_argument("--path", required=True)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, FileNotFoundError) as e:
        print(f"topnet {args.cmd}: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
