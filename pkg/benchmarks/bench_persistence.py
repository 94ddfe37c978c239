"""Time the numba and numpy persistence kernels on the same random inputs.

    python3 benchmarks/bench_persistence.py [--graphs 64] [--repeat 5]

Both backends are called explicitly, so ``TOPNETS_DISABLE_NUMBA`` only changes
what the library uses by default, not what this script measures.
"""
import argparse
import time

import numpy as np

from topnets import _accel
from topnets.batch import ComplexBatch
from topnets.harness.generators import random_graph_complex
from topnets.persistence import kernels
from topnets.persistence.batched import diagrams_from_values
from topnets import autodiff as ad


def _best(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--graphs", type=int, default=64)
    ap.add_argument("--nodes", type=int, default=30)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(args.seed)

    items = [random_graph_complex(rng, (args.nodes // 2, args.nodes), p=0.2, lift=2) for _ in range(args.graphs)]
    batch = ComplexBatch(items, max_dim=2)
    F = ad.Tensor(rng.random((batch.count(0), 4)))

    # raw union-find on one big forest
    m = batch.count(1)
    cells = batch.cells[1]
    order = np.argsort(rng.random(m), kind="stable")
    birth = rng.random(batch.count(0))

    rows = []
    for backend in ("numba", "numpy"):
        if backend == "numba" and not _accel.HAVE_NUMBA:
            continue
        # warm-up compiles the numba kernels
        kernels.union_find(order, cells[:, 0], cells[:, 1], birth, None, backend)
        diagrams_from_values(batch, F, 0, pd_dims=(0, 1, 2), backend=backend)
        uf = _best(lambda: kernels.union_find(order, cells[:, 0], cells[:, 1], birth, None, backend), args.repeat)
        full = _best(lambda: diagrams_from_values(batch, F, 0, pd_dims=(0, 1, 2), backend=backend), args.repeat)
        rows.append((backend, uf, full))

    print(f"{args.graphs} graphs, {batch.count(0)} vertices, {m} edges, {batch.count(2)} triangles, 4 filters")
    print(f"{'backend':<8} {'union-find ms':>14} {'D0-D2 batch ms':>15}")
    for b, uf, full in rows:
        print(f"{b:<8} {uf * 1e3:14.3f} {full * 1e3:15.3f}")
    if len(rows) == 2:
        print(f"speedup  {rows[1][1] / rows[0][1]:14.1f}x {rows[1][2] / rows[0][2]:14.1f}x")


if __name__ == "__main__":
    main()
