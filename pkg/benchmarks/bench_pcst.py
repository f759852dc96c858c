"""Benchmark the pure-Python and compiled PCST kernels on the same inputs.

Generates retrieval-shaped instances (a few rank prizes over many nodes,
uniform edge costs), times ``solve`` for each kernel, and checks that the
two kernels stay bit-for-bit interchangeable while timing.

Usage:
    python benchmarks/bench_pcst.py --nodes 300 --edges 900 --rounds 25
"""

import argparse
import statistics
import time

import numpy as np

from graphqa import _pcst_pure

try:
    from graphqa import _pcst_core
except ImportError:
    _pcst_core = None


def make_instance(rng, n_nodes, n_edges, k_prized=8):
    """Raw kernel arrays shaped like assign_prizes output."""
    prizes = np.zeros(n_nodes)
    picked = rng.choice(n_nodes, size=min(k_prized, n_nodes), replace=False)
    for rank, node in enumerate(picked):
        prizes[node] = float(len(picked) - rank)
    pairs = set()
    while len(pairs) < min(n_edges, n_nodes * (n_nodes - 1) // 2):
        a, b = rng.integers(0, n_nodes, size=2)
        if a != b:
            pairs.add((min(int(a), int(b)), max(int(a), int(b))))
    src = np.array([a for a, _ in sorted(pairs)], dtype=np.int64)
    dst = np.array([b for _, b in sorted(pairs)], dtype=np.int64)
    cost = np.full(len(src), float(rng.choice([0.5, 1.0])))
    return prizes, src, dst, cost


def time_kernel(kernel, instances):
    """Per-instance wall times and the solutions for parity checking."""
    times = []
    outputs = []
    for prizes, src, dst, cost in instances:
        start = time.perf_counter()
        result = kernel.solve(len(prizes), prizes, src, dst, cost)
        times.append(time.perf_counter() - start)
        outputs.append(result)
    return times, outputs


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--nodes", type=int, default=300)
    parser.add_argument("--edges", type=int, default=900)
    parser.add_argument("--rounds", type=int, default=25)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    instances = [
        make_instance(rng, args.nodes, args.edges) for _ in range(args.rounds)
    ]

    # warm-up round outside the timed set
    warm = make_instance(rng, args.nodes, args.edges)
    _pcst_pure.solve(len(warm[0]), *warm)

    pure_times, pure_out = time_kernel(_pcst_pure, instances)
    pure_ms = 1000.0 * statistics.mean(pure_times)
    print(f"pure kernel:     {pure_ms:8.3f} ms/instance "
          f"({args.rounds} instances, {args.nodes} nodes, {args.edges} edges)")

    if _pcst_core is None:
        print("compiled kernel: unavailable (extension not built)")
        return 0

    _pcst_core.solve(len(warm[0]), *warm)
    core_times, core_out = time_kernel(_pcst_core, instances)
    core_ms = 1000.0 * statistics.mean(core_times)
    print(f"compiled kernel: {core_ms:8.3f} ms/instance")

    mismatches = 0
    for (pn, pe, pv), (cn, ce, cv) in zip(pure_out, core_out):
        if pv != cv or not np.array_equal(pn, cn) or not np.array_equal(pe, ce):
            mismatches += 1
    if mismatches:
        print(f"kernel parity:   FAILED on {mismatches}/{args.rounds} instances")
        return 2
    print(f"kernel parity:   identical on all {args.rounds} instances")
    print(f"speedup:         {pure_ms / core_ms:.2f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
