"""Compiled versus fallback Dijkstra kernels on metric grid graphs.

Usage::

    python3 benchmarks/bench_dijkstra.py [--sizes 16,24,32] [--repeat 3]

For each grid size the single-source distance field of ``D_1`` (``Q = I``)
on a ``[-3, 3]^3`` box is computed with both backends; the table lists the
best wall time of each and the largest disagreement between the fields.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from lie3atlas import graph
from lie3atlas.catalog import parse_spec
from lie3atlas.metric import metric_tensor


def _problem(n, radius=2):
    spec = parse_spec("D:lambda=1")
    grid = graph.GridSpec(np.full(3, -3.0), np.full(3, 3.0), (n, n, n))
    xi = grid.nodes_xi()
    h = grid.spacing()
    G = metric_tensor(spec, np.eye(3), xi) * h[None, :, None] * h[None, None, :]
    mask = np.ones(len(xi), dtype=bool)
    src = grid.flat_index(grid.nearest_index(np.zeros((1, 3))))
    return G, mask, grid.n, grid.periodic, graph.stencil(radius), src


def _time(fn, repeat):
    best, out = np.inf, None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--sizes", default="16,24,32")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if graph._compiled_dijkstra is None:
        raise SystemExit("compiled kernel not built; run pip install -e . first")
    print(f"{'nodes':>8} {'edges':>10} {'cython s':>10} {'scipy s':>10} {'speedup':>8} {'max |diff|':>11}")
    for n in (int(s) for s in args.sizes.split(",")):
        G, mask, dims, per, offs, src = _problem(n)
        tc, dc = _time(lambda: graph.run_dijkstra(G, mask, dims, per, offs, src, backend="cython"), args.repeat)
        tp, dp = _time(lambda: graph.run_dijkstra(G, mask, dims, per, offs, src, backend="python"), args.repeat)
        diff = float(np.max(np.abs(dc - dp)))
        print(f"{n ** 3:>8} {n ** 3 * len(offs):>10} {tc:>10.4f} {tp:>10.4f} {tp / tc:>8.2f} {diff:>11.2e}")


if __name__ == "__main__":
    main()
