#!/usr/bin/env python3
"""Compare the NumPy (im2col + BLAS) and Cython (direct) conv lanes.

Times forward, weight-gradient and full backward on the shapes the trainer
actually runs, then one end-to-end training step per lane via subprocess
(the lane is fixed at import time by ZSDN_KERNELS).

Usage:
    python benchmarks/bench_kernels.py [--json] [--skip-train-step]
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

from zsdn._kernels import compiled_available, npconv

# (N, H, W, C, K): input conv, encoder conv, decoder conv, feature conv, deep level
SHAPES = [
    (12, 64, 64, 1, 32),
    (12, 64, 64, 32, 32),
    (12, 64, 64, 64, 32),
    (12, 64, 64, 32, 128),
    (12, 16, 16, 32, 32),
    (8, 48, 48, 24, 24),
]

TRAIN_STEP_SNIPPET = r"""
import numpy as np, time
from zsdn.network import NetConfig
from zsdn.trainer import TrainConfig, train_zero_shot
from zsdn.subsampler import SamplerConfig
from zsdn._kernels import backend
noisy = (np.random.default_rng(0).random((192, 192)) * 0.5).astype(np.float32)
net = NetConfig(stride=2, base_channels=24, depth=3, feature_channels=96)
cfg = TrainConfig(patch_size=96, batch_size=8, epochs=6, iters_per_epoch=1, lr=1e-3,
                  sampler=SamplerConfig(stride=2, seed=1), seed=2)
t0 = time.perf_counter()
train_zero_shot(noisy, net, cfg)
dt = (time.perf_counter() - t0) / 6
print(f"{backend()} {dt*1e3:.1f}")
"""


def timeit(fn, reps=5):
    fn()
    t0 = time.perf_counter()
    for _ in range(reps):
        fn()
    return (time.perf_counter() - t0) / reps


def bench_shape(n, h, w, c, k):
    rng = np.random.default_rng(0)
    x = rng.standard_normal((n, h, w, c)).astype(np.float32)
    wt = rng.standard_normal((3, 3, c, k)).astype(np.float32)
    b = np.zeros(k, np.float32)
    gy = rng.standard_normal((n, h, w, k)).astype(np.float32)
    gflop = 2 * n * k * c * 9 * h * w / 1e9

    _, ctx = npconv.conv2d_fwd(x, wt, b)
    row = {
        "shape": f"N{n} {h}x{w} C{c} K{k}",
        "gflop": round(gflop, 3),
        "numpy_fwd_ms": round(timeit(lambda: npconv.conv2d_fwd(x, wt, b)) * 1e3, 2),
        "numpy_bwd_ms": round(timeit(lambda: npconv.conv2d_bwd(ctx, wt, gy)) * 1e3, 2),
    }
    if compiled_available():
        from zsdn._kernels import cyconv

        xp = np.pad(x, ((0, 0), (1, 1), (1, 1), (0, 0)))
        gyp = np.pad(gy, ((0, 0), (1, 1), (1, 1), (0, 0)))
        wf = np.ascontiguousarray(wt[::-1, ::-1].transpose(0, 1, 3, 2))
        zb = np.zeros(c, np.float32)
        row["cython_fwd_ms"] = round(
            timeit(lambda: cyconv.conv2d_padded(xp, wt, b, h, w)) * 1e3, 2
        )
        row["cython_bwd_ms"] = round(
            timeit(lambda: (cyconv.conv2d_grad_w(xp, gy, 3, 3),
                            cyconv.conv2d_padded(gyp, wf, zb, h, w))) * 1e3, 2
        )
    return row


def bench_train_step(lane):
    env = dict(os.environ, ZSDN_KERNELS=lane)
    proc = subprocess.run(
        [sys.executable, "-c", TRAIN_STEP_SNIPPET], env=env, capture_output=True, text=True
    )
    if proc.returncode != 0:
        return None
    name, ms = proc.stdout.split()
    assert name == lane
    return float(ms)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--json", action="store_true", help="machine-readable output")
    parser.add_argument("--skip-train-step", action="store_true")
    args = parser.parse_args()

    rows = [bench_shape(*shape) for shape in SHAPES]
    steps = {}
    if not args.skip_train_step:
        steps["numpy"] = bench_train_step("numpy")
        if compiled_available():
            steps["cython"] = bench_train_step("cython")

    if args.json:
        print(json.dumps({"shapes": rows, "train_step_ms": steps}, indent=2))
        return

    hdr = f"{'shape':>22} {'GFLOP':>6} {'np fwd':>8} {'np bwd':>8}"
    if compiled_available():
        hdr += f" {'cy fwd':>8} {'cy bwd':>8}"
    print(hdr)
    for row in rows:
        line = (f"{row['shape']:>22} {row['gflop']:>6.2f} "
                f"{row['numpy_fwd_ms']:>8.1f} {row['numpy_bwd_ms']:>8.1f}")
        if "cython_fwd_ms" in row:
            line += f" {row['cython_fwd_ms']:>8.1f} {row['cython_bwd_ms']:>8.1f}"
        print(line)
    for lane, ms in steps.items():
        if ms is not None:
            print(f"train step ({lane:>6}): {ms:.1f} ms")


if __name__ == "__main__":
    main()
