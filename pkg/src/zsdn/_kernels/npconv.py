"""NumPy conv kernels: NHWC im2col + BLAS matmul.

Reference lane: dtype-generic (float32/float64), used for gradient checks in
64-bit and as the fallback when the compiled extension is unavailable.
Stride is always 1 and padding is same-padding for odd kernels, which is all
the network needs. Activations are NHWC; weights are (kh, kw, C, K).

``conv2d_fwd`` returns an opaque context reused by ``conv2d_bwd`` so the
im2col buffer is built once per layer per step.
"""

import numpy as np

__all__ = ["conv2d", "conv2d_fwd", "conv2d_bwd"]


def _im2col(x: np.ndarray, kh: int, kw: int) -> np.ndarray:
    """(N, H, W, C) -> (N*H*W, kh*kw*C) same-padded patch matrix."""
    n, h, w, c = x.shape
    ph, pw = kh // 2, kw // 2
    xp = np.pad(x, ((0, 0), (ph, ph), (pw, pw), (0, 0)))
    cols = np.empty((n * h * w, kh * kw * c), dtype=x.dtype)
    t = 0
    for u in range(kh):
        for v in range(kw):
            cols[:, t * c : (t + 1) * c] = xp[:, u : u + h, v : v + w, :].reshape(-1, c)
            t += 1
    return cols


def conv2d_fwd(x: np.ndarray, w: np.ndarray, b: np.ndarray | None):
    """Same-padding stride-1 convolution; returns (y, ctx) with y (N, H, W, K)."""
    n, h, wd, c = x.shape
    kh, kw, _, k = w.shape
    if kh == 1 and kw == 1:
        cols = x.reshape(-1, c)
    else:
        cols = _im2col(x, kh, kw)
    y = cols @ w.reshape(-1, k)
    if b is not None:
        y += b
    return y.reshape(n, h, wd, k), (x, cols)


def conv2d(x: np.ndarray, w: np.ndarray, b: np.ndarray | None) -> np.ndarray:
    y, _ = conv2d_fwd(x, w, b)
    return y


def conv2d_bwd(ctx, w: np.ndarray, gy: np.ndarray):
    """Gradients (gx, gw, gb) of conv2d at the cached forward context."""
    x, cols = ctx
    n, h, wd, c = x.shape
    kh, kw, _, k = w.shape
    gyf = gy.reshape(-1, k)
    gb = gyf.sum(axis=0)
    gw = (cols.T @ gyf).reshape(kh, kw, c, k)
    if kh == 1 and kw == 1:
        gx = (gyf @ w.reshape(c, k).T).reshape(x.shape)
        return gx, gw, gb
    # Input gradient: correlate gy with the spatially flipped, channel-swapped
    # weights; same padding keeps it a plain conv2d call.
    w_flip = np.ascontiguousarray(w[::-1, ::-1].transpose(0, 1, 3, 2))
    gcols = _im2col(gy, kh, kw)
    gx = (gcols @ w_flip.reshape(-1, c)).reshape(x.shape)
    return gx, gw, gb
