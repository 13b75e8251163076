"""Compiled vs pure-Python kernels on realistic inputs.

    python3 benchmarks/bench_kernels.py [--repeat 3]

Workloads: clique expansion, boundary reduction and end-to-end Betti curves
on a daily top-150 graph, plus Gini split search on bootstrap-sized columns.
"""

import argparse
import time
from itertools import combinations

import numpy as np

from tokentopo import kernels
from tokentopo.homology import barcode, curves_from_barcode, rips_complex


def daily_graph(seed=0, n=150, p=0.06):
    rng = np.random.default_rng(seed)
    pairs = [(u, v) for u, v in combinations(range(n), 2) if rng.random() < p]
    # a few dense communities so triangles and tetrahedra appear
    for base in range(0, 60, 12):
        pairs += list(combinations(range(base, base + 8), 2))
    pairs = sorted(set(pairs))
    eu = np.array([u for u, _ in pairs], dtype=np.int64)
    ev = np.array([v for _, v in pairs], dtype=np.int64)
    return n, eu, ev, rng.uniform(0.1, 1.0, len(pairs))


def timeit(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    n, eu, ev, ew = daily_graph()
    indptr = np.cumsum(np.concatenate([[0], np.bincount(eu, minlength=n)])).astype(np.int64)
    cx = rips_complex(tuple(range(n)), eu, ev, ew)
    dims = cx.dims.astype(np.int32)
    rng = np.random.default_rng(1)
    cols = [(rng.uniform(size=200).round(3), (rng.random(200) < 0.1).astype(np.int8)) for _ in range(200)]

    def curves(b):
        return curves_from_barcode(barcode(rips_complex(tuple(range(n)), eu, ev, ew, backend=b), b), 2)

    work = {
        "expand_cliques": lambda b: kernels.get(b).expand_cliques(n, indptr, ev, 4),
        "reduce_boundary": lambda b: kernels.get(b).reduce_boundary(cx.indptr, cx.indices, dims),
        "best_split x200": lambda b: [kernels.get(b).best_split(x, y, 1) for x, y in cols],
        "betti curves": curves,
    }
    print(f"graph: {n} nodes, {len(eu)} edges, {len(cx)} simplices")
    print(f"{'kernel':<18}" + "".join(f"{b:>12}" for b in kernels.BACKENDS) + "     speedup")
    for label, fn in work.items():
        times = {b: timeit(lambda: fn(b), args.repeat) for b in kernels.BACKENDS}
        row = f"{label:<18}" + "".join(f"{times[b] * 1e3:10.2f}ms" for b in kernels.BACKENDS)
        if "compiled" in times:
            row += f"   {times['python'] / times['compiled']:8.1f}x"
        print(row)


if __name__ == "__main__":
    main()
