# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled direct convolution kernels (float32, NHWC, stride 1, same padding).

The channel axis is innermost, so the hot loops run fused multiply-adds over
contiguous K-wide output rows; the inner loops use raw pointers so the C
compiler can vectorize them. Each output element is accumulated serially by
a single thread; results are bit-identical regardless of thread count.
"""

import numpy as np

cimport numpy as cnp
from cython.parallel import prange
from libc.stdlib cimport free, malloc

cnp.import_array()


def conv2d_padded(cnp.float32_t[:, :, :, ::1] xp,
                  cnp.float32_t[:, :, :, ::1] w,
                  cnp.float32_t[::1] b,
                  int out_h, int out_w):
    """Correlate padded (N, Hp, Wp, C) input with (kh, kw, C, K) filters."""
    cdef Py_ssize_t n = xp.shape[0], wp_w = xp.shape[2], c = xp.shape[3]
    cdef Py_ssize_t kh = w.shape[0], kw = w.shape[1], k = w.shape[3]
    cdef cnp.ndarray[cnp.float32_t, ndim=4] out = np.empty((n, out_h, out_w, k), dtype=np.float32)
    cdef cnp.float32_t[:, :, :, ::1] y = out
    cdef Py_ssize_t ni, i, j, u, v, ci, ki, row
    cdef float xv
    cdef float* acc
    cdef const float* xrow
    cdef const float* wrow
    cdef const float* bp = &b[0]
    cdef const float* wbase = &w[0, 0, 0, 0]
    cdef const float* xbase = &xp[0, 0, 0, 0]
    cdef float* ybase = &y[0, 0, 0, 0]
    cdef float* yrow

    for row in prange(n * out_h, nogil=True, schedule='static'):
        ni = row // out_h
        i = row % out_h
        acc = <float*> malloc(k * sizeof(float))
        for j in range(out_w):
            for ki in range(k):
                acc[ki] = bp[ki]
            for u in range(kh):
                xrow = xbase + ((ni * (out_h + kh - 1) + i + u) * wp_w + j) * c
                wrow = wbase + u * kw * c * k
                for v in range(kw):
                    for ci in range(c):
                        xv = xrow[ci]
                        for ki in range(k):
                            acc[ki] = acc[ki] + xv * wrow[ki]
                        wrow = wrow + k
                    xrow = xrow + c
            yrow = ybase + ((ni * out_h + i) * out_w + j) * k
            for ki in range(k):
                yrow[ki] = acc[ki]
        free(acc)
    return out


def conv2d_grad_w(cnp.float32_t[:, :, :, ::1] xp,
                  cnp.float32_t[:, :, :, ::1] gy,
                  int kh, int kw):
    """Weight gradient (kh, kw, C, K): correlate padded input with gy."""
    cdef Py_ssize_t n = xp.shape[0], wp_w = xp.shape[2], c = xp.shape[3]
    cdef Py_ssize_t out_h = gy.shape[1], out_w = gy.shape[2], k = gy.shape[3]
    cdef cnp.ndarray[cnp.float32_t, ndim=4] out = np.zeros((kh, kw, c, k), dtype=np.float32)
    cdef cnp.float32_t[:, :, :, ::1] gw = out
    cdef Py_ssize_t t, u, v, ni, i, j, ci, ki
    cdef float xv
    cdef const float* xr
    cdef const float* gr
    cdef const float* xbase = &xp[0, 0, 0, 0]
    cdef const float* gbase = &gy[0, 0, 0, 0]
    cdef float* gwbase = &gw[0, 0, 0, 0]
    cdef float* gwrow

    for t in prange(kh * kw, nogil=True, schedule='static'):
        u = t // kw
        v = t % kw
        for ni in range(n):
            for i in range(out_h):
                xr = xbase + ((ni * (out_h + kh - 1) + i + u) * wp_w + v) * c
                gr = gbase + (ni * out_h + i) * out_w * k
                for j in range(out_w):
                    gwrow = gwbase + t * c * k
                    for ci in range(c):
                        xv = xr[ci]
                        for ki in range(k):
                            gwrow[ki] = gwrow[ki] + xv * gr[ki]
                        gwrow = gwrow + k
                    xr = xr + c
                    gr = gr + k
    return out
