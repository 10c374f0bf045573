# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled im2col/col2im; same layout and accumulation order as _kernels_py."""

import numpy as np

ctypedef fused real:
    float
    double


def im2col(real[:, :, :, ::1] xp, Py_ssize_t k, Py_ssize_t stride,
           Py_ssize_t oh, Py_ssize_t ow):
    cdef Py_ssize_t n = xp.shape[0], c = xp.shape[1]
    dtype = np.float64 if real is double else np.float32
    out = np.empty((n, c, k, k, oh, ow), dtype=dtype)
    cdef real[:, :, :, :, :, ::1] cols = out
    cdef Py_ssize_t i, ch, kh, kw, y, x, row
    with nogil:
        for i in range(n):
            for ch in range(c):
                for kh in range(k):
                    for kw in range(k):
                        for y in range(oh):
                            row = y * stride + kh
                            for x in range(ow):
                                cols[i, ch, kh, kw, y, x] = xp[i, ch, row, x * stride + kw]
    return out


def col2im(real[:, :, :, :, :, ::1] cols, Py_ssize_t hp, Py_ssize_t wp,
           Py_ssize_t stride):
    cdef Py_ssize_t n = cols.shape[0], c = cols.shape[1], k = cols.shape[2]
    cdef Py_ssize_t oh = cols.shape[4], ow = cols.shape[5]
    dtype = np.float64 if real is double else np.float32
    out = np.zeros((n, c, hp, wp), dtype=dtype)
    cdef real[:, :, :, ::1] dxp = out
    cdef Py_ssize_t i, ch, kh, kw, y, x, row
    with nogil:
        for i in range(n):
            for ch in range(c):
                for kh in range(k):
                    for kw in range(k):
                        for y in range(oh):
                            row = y * stride + kh
                            for x in range(ow):
                                dxp[i, ch, row, x * stride + kw] += cols[i, ch, kh, kw, y, x]
    return out
