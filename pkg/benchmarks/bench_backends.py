#!/usr/bin/env python3
"""Benchmark the numba-JIT kernels against the pure-numpy fallback.

Times the three hot stages of batched inference (conditionals, chain-rule
leaf masses, expected-distance decisions) on a synthetic workload, then
checks that both backends agree on every decision.

Usage:
    python benchmarks/bench_backends.py [--samples N] [--depth D]
                                        [--branching B] [--iters I]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from treeood import ScoreModel, depth_class_index
from treeood.backends import codes, numba_backend, numpy_backend
from treeood.engine import FlatTree, StackBatch
from treeood.synthetic import perfect_tree


def make_workload(depth: int, branching: int, n_samples: int, seed: int):
    h = perfect_tree(depth, branching)
    index = depth_class_index(h)
    flat = FlatTree(h, index)
    rng = np.random.default_rng(seed)
    probs, logits = [], []
    for d in range(1, index.max_depth + 1):
        raw = rng.random((n_samples, index.n_classes(d))) + 1e-3
        raw /= raw.sum(axis=1, keepdims=True)
        probs.append(raw)
        logits.append(np.log(raw))
    batch = StackBatch(tuple(f"s{i}" for i in range(n_samples)),
                       tuple(probs), tuple(logits))
    return h, index, flat, batch


def run_pipeline(backend, flat, flat_probs, model_code):
    cond, _ = backend.compute_conditionals(
        flat_probs, np.zeros((0, 0)), flat.slot_offsets, flat.child_cols,
        np.zeros((0, 0)), flat.node_depth_index, model_code, -1, np.zeros(0))
    masses = backend.compute_leaf_masses(cond, flat.path_slots, flat.path_offsets)
    best_idx, best_exp = backend.minexp_decisions(
        masses, flat.target_dist, flat.node_depths)
    return cond, masses, best_idx, best_exp


def bench(fn, iters):
    times = []
    for _ in range(iters):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return float(np.median(times)), float(np.min(times))


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--samples", type=int, default=20000)
    parser.add_argument("--depth", type=int, default=4)
    parser.add_argument("--branching", type=int, default=4)
    parser.add_argument("--iters", type=int, default=7)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    h, index, flat, batch = make_workload(args.depth, args.branching,
                                          args.samples, args.seed)
    flat_probs = flat.flat_probs(batch)
    print(f"workload: {len(h.node_ids)} nodes ({len(h.leaves)} leaves, "
          f"depth {h.max_depth}), {args.samples} samples, "
          f"model={ScoreModel.ENTCOMPPROB.value}")

    print("warming up numba JIT...", end=" ", flush=True)
    t0 = time.perf_counter()
    run_pipeline(numba_backend, flat, flat_probs[:64], codes.ENTCOMPPROB)
    print(f"done ({time.perf_counter() - t0:.2f}s, cached for later runs)")

    results = []
    for name, backend in (("numpy", numpy_backend), ("numba", numba_backend)):
        med, best = bench(
            lambda b=backend: run_pipeline(b, flat, flat_probs, codes.ENTCOMPPROB),
            args.iters)
        results.append((name, med, best))

    base = results[0][1]
    print()
    print(f"{'backend':<10}{'median (ms)':>14}{'min (ms)':>12}{'speedup':>10}")
    print("-" * 46)
    for name, med, best in results:
        print(f"{name:<10}{med * 1e3:>14.2f}{best * 1e3:>12.2f}{base / med:>9.2f}x")

    # agreement check: identical decisions, matching numerics
    c_np, m_np, i_np, e_np = run_pipeline(numpy_backend, flat, flat_probs,
                                          codes.ENTCOMPPROB)
    c_nb, m_nb, i_nb, e_nb = run_pipeline(numba_backend, flat, flat_probs,
                                          codes.ENTCOMPPROB)
    print()
    print(f"max |Δconditional| = {np.abs(c_np - c_nb).max():.2e}")
    print(f"max |Δleaf mass|   = {np.abs(m_np - m_nb).max():.2e}")
    print(f"decision agreement = {(i_np == i_nb).mean() * 100:.2f}%")
    same = (i_np == i_nb).all() and np.allclose(e_np, e_nb, rtol=1e-9)
    print("agreement:", "OK" if same else "MISMATCH (see above)")
    return 0 if same else 1


if __name__ == "__main__":
    raise SystemExit(main())
