import numpy as np
import pytest

from zsdn._kernels import backend, compiled_available, conv2d, conv2d_bwd, conv2d_fwd, npconv


def rand(shape, seed, dtype=np.float32):
    return np.random.default_rng(seed).standard_normal(shape).astype(dtype)


@pytest.mark.parametrize("shape", [(2, 8, 6, 3, 5, 3), (1, 4, 4, 1, 2, 3), (3, 6, 6, 4, 4, 1)])
def test_numpy_conv_matches_direct_loops(shape):
    """im2col path against a naive quadruple loop."""
    n, h, w, c, k, ksz = shape
    x = rand((n, h, w, c), 1)
    wt = rand((ksz, ksz, c, k), 2)
    b = rand((k,), 3)
    y = npconv.conv2d(x, wt, b)
    pad = ksz // 2
    xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad), (0, 0)))
    ref = np.zeros((n, h, w, k), np.float32)
    for ni in range(n):
        for i in range(h):
            for j in range(w):
                patch = xp[ni, i : i + ksz, j : j + ksz, :]
                for ki in range(k):
                    ref[ni, i, j, ki] = (patch * wt[:, :, :, ki]).sum() + b[ki]
    np.testing.assert_allclose(y, ref, atol=2e-4)


def test_backward_matches_float64_finite_differences():
    n, h, w, c, k = 1, 5, 4, 2, 3
    x = rand((n, h, w, c), 4, np.float64)
    wt = rand((3, 3, c, k), 5, np.float64)
    b = rand((k,), 6, np.float64)
    tgt = rand((n, h, w, k), 7, np.float64)

    y, ctx = npconv.conv2d_fwd(x, wt, b)
    gy = 2 * (y - tgt)
    gx, gw, gb = npconv.conv2d_bwd(ctx, wt, gy)

    def loss(xx, ww, bb):
        yy, _ = npconv.conv2d_fwd(xx, ww, bb)
        return float(((yy - tgt) ** 2).sum())

    eps = 1e-6
    for arr, grad in ((x, gx), (wt, gw), (b, gb)):
        flat = arr.ravel()
        gflat = grad.ravel()
        for i in range(0, flat.size, max(1, flat.size // 10)):
            old = flat[i]
            flat[i] = old + eps
            lp = loss(x, wt, b)
            flat[i] = old - eps
            lm = loss(x, wt, b)
            flat[i] = old
            num = (lp - lm) / (2 * eps)
            assert num == pytest.approx(gflat[i], rel=1e-5, abs=1e-7)


@pytest.mark.skipif(not compiled_available(), reason="compiled lane not built")
def test_lanes_agree():
    from zsdn._kernels import cyconv

    for seed, (n, h, w, c, k) in enumerate([(2, 8, 8, 3, 5), (1, 6, 10, 8, 16), (3, 4, 4, 1, 2)]):
        x = rand((n, h, w, c), seed)
        wt = rand((3, 3, c, k), 100 + seed)
        b = rand((k,), 200 + seed)
        gy = rand((n, h, w, k), 300 + seed)
        xp = np.pad(x, ((0, 0), (1, 1), (1, 1), (0, 0)))
        y_np, ctx = npconv.conv2d_fwd(x, wt, b)
        y_cy = cyconv.conv2d_padded(xp, wt, b, h, w)
        np.testing.assert_allclose(y_cy, y_np, atol=1e-4)
        gw_np = npconv.conv2d_bwd(ctx, wt, gy)[1]
        gw_cy = cyconv.conv2d_grad_w(xp, gy, 3, 3)
        np.testing.assert_allclose(gw_cy, gw_np, rtol=1e-3, atol=1e-2)


def test_dispatcher_fwd_bwd_consistent():
    x = rand((2, 8, 8, 4), 8)
    wt = rand((3, 3, 4, 6), 9)
    b = rand((6,), 10)
    y1 = conv2d(x, wt, b)
    y2, ctx = conv2d_fwd(x, wt, b)
    np.testing.assert_allclose(y1, y2, atol=1e-6)
    gx, gw, gb = conv2d_bwd(ctx, wt, rand((2, 8, 8, 6), 11))
    assert gx.shape == x.shape and gw.shape == wt.shape and gb.shape == b.shape
    assert backend() in ("numpy", "cython")


def test_float64_supported():
    x = rand((1, 4, 4, 2), 12, np.float64)
    wt = rand((3, 3, 2, 3), 13, np.float64)
    y = conv2d(x, wt, None)
    assert y.dtype == np.float64
