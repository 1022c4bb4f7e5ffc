"""Compare the jit-compiled kernels against the plain numpy fallback.

Times the full loss-and-gradient pass (the training hot path) plus the
two scoring kernels, per transform variant.  The jit path is warmed up
before timing so compilation cost is excluded.

Usage:
    python3 benchmarks/bench_kernels.py --batch 4096 --d 384 --l 64
"""

import argparse
import time

import numpy as np

import impscore.kernels as kernels
from impscore import ModelConfig, TrainConfig, init_head
from impscore.model import implicitness_scores, pragmatic_distances
from impscore.training import loss_gradients

VARIANTS = [(t, im, pm)
            for t in ("p_to_s", "s_to_p", "third_space")
            for im in ("cosine", "euclidean")
            for pm in ("cosine", "euclidean")]


def time_best(fn, repeats):
    """Best-of-N wall time in milliseconds."""
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best * 1e3


def bench_variant(transform, imp_metric, prag_metric, args, rng):
    cfg = ModelConfig(d=args.d, l=args.l, imp_metric=imp_metric,
                      prag_metric=prag_metric, transform=transform)
    head = init_head(cfg, rng)
    train_cfg = TrainConfig()
    E1 = rng.standard_normal((args.batch, args.d))
    E2 = rng.standard_normal((args.batch, args.d))
    E3 = rng.standard_normal((args.batch, args.d))

    ops = {
        "scores": lambda: implicitness_scores(E1, head),
        "distances": lambda: pragmatic_distances(E1, E2, head),
        "loss+grads": lambda: loss_gradients(E1, E2, E3, head, train_cfg),
    }

    rows = []
    for op_name, fn in ops.items():
        timings = {}
        for backend in args.backends:
            kernels.use_backend(backend)
            fn()  # warmup; compiles on the jit path
            timings[backend] = time_best(fn, args.repeats)
        rows.append((op_name, timings))
    return rows


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--batch", type=int, default=4096)
    parser.add_argument("--d", type=int, default=384)
    parser.add_argument("--l", type=int, default=64)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--all-variants", action="store_true",
                        help="bench all 12 variants instead of one per transform")
    args = parser.parse_args(argv)

    args.backends = ["numpy"]
    if kernels.HAS_NUMBA:
        args.backends.append("numba")
    else:
        print("numba not importable; timing the numpy path only")

    variants = VARIANTS if args.all_variants else [
        (t, "cosine", "euclidean") for t in ("p_to_s", "s_to_p", "third_space")]

    rng = np.random.default_rng(0)
    header = f"{'variant':<34}{'op':<12}" + "".join(
        f"{b + ' (ms)':>14}" for b in args.backends)
    if len(args.backends) == 2:
        header += f"{'speedup':>10}"
    print(f"batch={args.batch} d={args.d} l={args.l} best of {args.repeats}")
    print(header)
    print("-" * len(header))

    previous = kernels.active_backend()
    try:
        for transform, imp_metric, prag_metric in variants:
            label = f"{transform}/{imp_metric}/{prag_metric}"
            for op_name, timings in bench_variant(
                    transform, imp_metric, prag_metric, args, rng):
                line = f"{label:<34}{op_name:<12}" + "".join(
                    f"{timings[b]:>14.3f}" for b in args.backends)
                if len(args.backends) == 2:
                    line += f"{timings['numpy'] / timings['numba']:>9.2f}x"
                print(line)
                label = ""
    finally:
        kernels.use_backend(previous)


if __name__ == "__main__":
    main()
