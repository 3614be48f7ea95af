"""Compare the compiled and pure-Python kernels on synthetic inputs.

    python3 benchmarks/bench_kernels.py [--patients N] [--nodes N] [--repeat R]
"""

import argparse
import time

import numpy as np

from provnet import kernels


def patient_rows(n_patients, n_nodes, seed=0):
    rng = np.random.default_rng(seed)
    sizes = rng.integers(2, 12, size=n_patients)
    indptr = np.zeros(n_patients + 1, dtype=np.int64)
    indptr[1:] = np.cumsum(sizes)
    indices = np.concatenate([np.sort(rng.choice(n_nodes, size=s, replace=False)) for s in sizes]).astype(np.int64)
    return indptr, indices


def block_graph(n_nodes, seed=0, blocks=10, p_in=0.2, p_out=0.005):
    rng = np.random.default_rng(seed)
    iu = np.triu_indices(n_nodes, 1)
    same = (iu[0] * blocks // n_nodes) == (iu[1] * blocks // n_nodes)
    keep = rng.random(iu[0].size) < np.where(same, p_in, p_out)
    src, dst = iu[0][keep].astype(np.int64), iu[1][keep].astype(np.int64)
    w = rng.integers(2, 30, size=src.size).astype(np.float64)
    return src, dst, w


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--patients", type=int, default=50_000)
    ap.add_argument("--nodes", type=int, default=2_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    backends = ["python"] + (["cython"] if kernels.compiled is not None else [])
    indptr, indices = patient_rows(args.patients, args.nodes)
    src, dst, w = block_graph(args.nodes)
    print(f"pair_keys: {args.patients} patients; greedy_merges: {args.nodes} nodes, {src.size} edges")
    results = {}
    for b in backends:
        results[("pair_keys", b)] = best_of(lambda: kernels.pair_keys(indptr, indices, args.nodes, 0, args.patients, backend=b), args.repeat)
        results[("greedy_merges", b)] = best_of(lambda: kernels.greedy_merges(args.nodes, src, dst, w, backend=b), args.repeat)
    for kernel in ("pair_keys", "greedy_merges"):
        line = f"{kernel:14s}" + "".join(f"  {b}={results[(kernel, b)]:.3f}s" for b in backends)
        if len(backends) == 2:
            line += f"  speedup={results[(kernel, 'python')] / results[(kernel, 'cython')]:.1f}x"
        print(line)
    if len(backends) == 2:
        a = kernels.greedy_merges(args.nodes, src, dst, w, backend="python")
        c = kernels.greedy_merges(args.nodes, src, dst, w, backend="cython")
        print("greedy_merges outputs identical:", all(np.array_equal(x, y) for x, y in zip(a, c)))
    else:
        print("compiled kernels not built; only the Python fallback was timed")


if __name__ == "__main__":
    main()
