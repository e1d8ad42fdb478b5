#!/usr/bin/env python3
"""Time the hot kernels on the numpy and numba backends.

Run: python benchmarks/bench_backends.py [--repeats N]

Covers the three jitted kernel groups (softmax rows, layernorm rows,
multipath synthesis) at shapes matching dataset generation and training,
plus one full training step through the dispatch layer under each backend.
"""

import argparse
import time

import numpy as np

from mucsi import autodiff as ad
from mucsi import backend, codec, training


def timeit(fn, repeats):
    fn()  # warm-up (includes JIT compilation on the numba path)
    start = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - start) / repeats


def kernel_cases(rng):
    x_small = rng.standard_normal((4096, 16))
    x_wide = rng.standard_normal((1024, 64))
    gain = np.ones(64)
    bias = np.zeros(64)
    gy = rng.standard_normal(x_wide.shape)
    gains = rng.standard_normal((256, 6)) + 1j * rng.standard_normal((256, 6))
    delays = rng.uniform(0, 16, size=(256, 6))
    aods = rng.uniform(-1.0, 1.0, size=(256, 6))

    ln_out = {}

    def layernorm_fwd():
        ln_out["val"] = backend.layernorm_rows(x_wide, gain, bias, 1e-5)

    layernorm_fwd()

    def layernorm_bwd():
        _, xhat, inv_std = ln_out["val"]
        backend.layernorm_rows_vjp(gy, xhat, inv_std, gain)

    return [
        ("softmax_rows (4096x16)", lambda: backend.softmax_rows(x_small)),
        ("softmax_vjp (4096x16)",
         lambda: backend.softmax_rows_vjp(backend.softmax_rows(x_small), x_small)),
        ("layernorm_rows (1024x64)", layernorm_fwd),
        ("layernorm_vjp (1024x64)", layernorm_bwd),
        ("multipath_csi (256 samples, 6 paths, 64x16)",
         lambda: backend.multipath_csi(gains, delays, aods, 16, 64)),
    ]


def train_step_case(rng):
    cfg = codec.CodecConfig(n_tx=16, n_delay=16, k_feedback=32, d_model=64,
                            heads=4, l1=1, l2=1, l3=2)
    params = codec.ModelParams(cfg, seed=0)
    tokens = rng.standard_normal((100, 2, 16, 32))
    noise = rng.standard_normal((100, 2, 32))

    def step():
        params.zero_grad()
        loss, _ = training.group_loss(params, cfg, tokens, 10.0, noise)
        ad.backward(loss)

    return "train step (B=100, M=2, d=64)", step


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=20)
    args = parser.parse_args()

    backends = ["numpy"]
    if backend.numba_available():
        backends.append("numba")
    else:
        print("numba not importable; timing the numpy backend only")

    rng = np.random.default_rng(0)
    results = {}
    for name in backends:
        backend.set_backend(name)
        rows = []
        for label, fn in kernel_cases(rng):
            rows.append((label, timeit(fn, args.repeats)))
        label, fn = train_step_case(rng)
        rows.append((label, timeit(fn, max(3, args.repeats // 5))))
        results[name] = rows
    backend.set_backend(None)

    width = max(len(label) for label, _ in results[backends[0]])
    header = f"{'case':<{width}}  " + "".join(f"{b:>12}" for b in backends)
    if len(backends) == 2:
        header += f"{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for i, (label, _) in enumerate(results[backends[0]]):
        line = f"{label:<{width}}  "
        times = [results[b][i][1] for b in backends]
        line += "".join(f"{t * 1e3:>10.3f}ms" for t in times)
        if len(times) == 2:
            line += f"{times[0] / times[1]:>9.2f}x"
        print(line)


if __name__ == "__main__":
    main()
