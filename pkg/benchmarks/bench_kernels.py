#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Times every kernel pair on training-representative shapes and prints a
table with the speedup. Run after any kernel change:

    python3 benchmarks/bench_kernels.py [--repeats 200] [--dtype float32]
"""

import argparse
import time

import numpy as np

from tinyrecurse.kernels import backends


def timeit(fn, args, repeats):
    fn(*args)  # warmup (and numba compile)
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn(*args)
    return (time.perf_counter() - t0) / repeats


def build_cases(dtype):
    rng = np.random.default_rng(0)
    n, d, f, l, v = 2048, 64, 256, 16, 6
    x = rng.standard_normal((n, d)).astype(dtype)
    w = rng.standard_normal(d).astype(dtype)
    g = rng.standard_normal((n, d)).astype(dtype)
    inv = 1.0 / np.sqrt(np.mean(x * x, axis=1) + 1e-6)
    a = rng.standard_normal((n, f)).astype(dtype)
    b = rng.standard_normal((n, f)).astype(dtype)
    gf = rng.standard_normal((n, f)).astype(dtype)
    q = rng.standard_normal((128, 8, l, 8)).astype(dtype)
    pos = np.arange(l)[:, None]
    freqs = 1.0 / 10000.0 ** (np.arange(0, 8, 2) / 8)
    cos = np.cos(pos * freqs).astype(dtype)
    sin = np.sin(pos * freqs).astype(dtype)
    scores = rng.standard_normal((n, l)).astype(dtype)
    probs_np = backends()["numpy"].softmax_fwd(scores)
    logits = rng.standard_normal((n, v)).astype(dtype)
    targets = rng.integers(0, v, n)
    mask = np.ones(n, dtype=np.bool_)
    _, s, ssum = backends()["numpy"].stablemax_ce_fwd(logits, targets, mask)
    p = rng.standard_normal(200_000).astype(dtype)
    pg = rng.standard_normal(200_000).astype(dtype)
    m = np.zeros_like(p)
    vv = np.zeros_like(p)
    shadow = p.copy()

    return [
        ("rmsnorm_fwd", (x, w, 1e-6)),
        ("rmsnorm_bwd", (x, w, inv.astype(dtype), g)),
        ("silu_mul_fwd", (a, b)),
        ("silu_mul_bwd", (a, b, gf)),
        ("rotary_fwd", (q, cos, sin)),
        ("rotary_bwd", (q, cos, sin)),
        ("softmax_fwd", (scores,)),
        ("softmax_bwd", (probs_np.astype(dtype), scores)),
        ("stablemax_ce_fwd", (logits, targets, mask)),
        ("stablemax_ce_bwd", (logits, s, ssum, targets, mask, 0.01)),
        ("adamw_update", (p, pg, m, vv, 1e-3, 0.9, 0.95, 1e-8, 0.1, 0.1, 0.05)),
        ("ema_update", (shadow, p, 0.999)),
    ]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeats", type=int, default=200)
    ap.add_argument("--dtype", choices=["float32", "float64"], default="float32")
    args = ap.parse_args()

    impls = backends()
    if "numba" not in impls:
        print("numba backend unavailable; nothing to compare")
        return
    cases = build_cases(np.dtype(args.dtype))
    print(f"{'kernel':22s} {'numpy us':>10s} {'numba us':>10s} {'speedup':>8s}")
    for name, case_args in cases:
        t_np = timeit(getattr(impls["numpy"], name), case_args, args.repeats)
        t_nb = timeit(getattr(impls["numba"], name), case_args, args.repeats)
        print(f"{name:22s} {t_np * 1e6:10.1f} {t_nb * 1e6:10.1f} {t_np / t_nb:7.1f}x")


if __name__ == "__main__":
    main()
