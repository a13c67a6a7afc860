"""Convolution kernel lanes.

Two interchangeable implementations of the hot conv2d forward/backward pair
(NHWC activations, (kh, kw, C, K) weights):

* ``cyconv`` - compiled Cython extension (float32 only), built by setup.py;
* ``npconv`` - pure NumPy im2col + BLAS matmul, dtype-generic.

The lane is chosen once at import from the ``ZSDN_KERNELS`` environment
variable (``auto``, ``cython`` or ``numpy``). ``auto`` prefers the compiled
extension when it built; on the reference host the two lanes measure within
noise of each other on the trainer's shapes (``benchmarks/bench_kernels.py``
compares them on yours). Float64 calls (used by the 64-bit gradient checks)
and 1x1 convolutions (plain GEMMs, where BLAS is the right tool in either
lane) always take the NumPy path.

``conv2d_fwd`` returns ``(y, ctx)``; ``ctx`` is an opaque per-lane context
that ``conv2d_bwd`` consumes, so each lane caches exactly what its backward
pass needs.
"""

import os

import numpy as np

from . import npconv

try:
    from . import cyconv

    _HAVE_CY = True
except ImportError:
    cyconv = None
    _HAVE_CY = False

_MODE = os.environ.get("ZSDN_KERNELS", "auto").lower()
if _MODE not in ("auto", "cython", "numpy"):
    raise ValueError(f"ZSDN_KERNELS must be auto, cython or numpy, got {_MODE!r}")
if _MODE == "cython" and not _HAVE_CY:
    raise ImportError("ZSDN_KERNELS=cython but the compiled extension is not built")

_USE_CY = _HAVE_CY if _MODE == "auto" else (_MODE == "cython")

__all__ = ["conv2d", "conv2d_fwd", "conv2d_bwd", "backend", "compiled_available"]


def backend() -> str:
    """Name of the active lane."""
    return "cython" if _USE_CY else "numpy"


def compiled_available() -> bool:
    return _HAVE_CY


def _use_compiled(x: np.ndarray, w: np.ndarray) -> bool:
    return (
        _USE_CY
        and x.dtype == np.float32
        and w.shape[0] > 1
        and w.shape[3] <= 1024
    )


def _pad(x: np.ndarray, kh: int, kw: int) -> np.ndarray:
    return np.pad(x, ((0, 0), (kh // 2, kh // 2), (kw // 2, kw // 2), (0, 0)))


def conv2d(x: np.ndarray, w: np.ndarray, b: np.ndarray | None) -> np.ndarray:
    """Same-padding stride-1 conv of (N, H, W, C) with (kh, kw, C, K) filters."""
    if _use_compiled(x, w):
        kh, kw = w.shape[0], w.shape[1]
        bias = b if b is not None else np.zeros(w.shape[3], dtype=np.float32)
        return cyconv.conv2d_padded(_pad(x, kh, kw), w, bias, x.shape[1], x.shape[2])
    return npconv.conv2d(x, w, b)


def conv2d_fwd(x: np.ndarray, w: np.ndarray, b: np.ndarray | None):
    """Training-time forward; returns (y, ctx) for :func:`conv2d_bwd`."""
    if _use_compiled(x, w):
        return conv2d(x, w, b), ("cy", x)
    y, ctx = npconv.conv2d_fwd(x, w, b)
    return y, ("np", ctx)


def conv2d_bwd(ctx, w: np.ndarray, gy: np.ndarray):
    """Gradients (gx, gw, gb) of :func:`conv2d_fwd` at the cached context."""
    lane, inner = ctx
    if lane == "np":
        return npconv.conv2d_bwd(inner, w, gy)
    x = inner
    kh, kw, c, k = w.shape
    gy = np.ascontiguousarray(gy)
    gb = gy.reshape(-1, k).sum(axis=0)
    gw = cyconv.conv2d_grad_w(_pad(x, kh, kw), gy, kh, kw)
    w_flip = np.ascontiguousarray(w[::-1, ::-1].transpose(0, 1, 3, 2))
    zero_b = np.zeros(c, dtype=np.float32)
    gx = cyconv.conv2d_padded(_pad(gy, kh, kw), w_flip, zero_b, x.shape[1], x.shape[2])
    return gx, gw, gb
