# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementations of the hot kernels.

Each function reproduces the accumulation order of ``_fallback`` exactly so
the two backends agree bit-for-bit on identical inputs.
"""

import numpy as np

cimport cython
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()

ctypedef fused floating:
    float
    double

BACKEND_NAME = "native"


cdef inline object _dtype_of(bint is_single):
    return np.float32 if is_single else np.float64


def grad(const floating[:, ::1] u):
    cdef Py_ssize_t h = u.shape[0], w = u.shape[1]
    cdef Py_ssize_t i, j
    out_arr = np.zeros((2, h, w), dtype=_dtype_of(floating is float))
    cdef floating[:, :, ::1] g = out_arr
    for i in range(h):
        for j in range(w - 1):
            g[0, i, j] = u[i, j + 1] - u[i, j]
    for i in range(h - 1):
        for j in range(w):
            g[1, i, j] = u[i + 1, j] - u[i, j]
    return out_arr


def conv2x2(const floating[:, :, :, ::1] taps, const floating[:, :, ::1] x):
    cdef Py_ssize_t co = taps.shape[0], ci = taps.shape[1]
    cdef Py_ssize_t h = x.shape[1], w = x.shape[2]
    cdef Py_ssize_t o, c, di, dj, i, j, ii, jj
    cdef floating t
    out_arr = np.zeros((co, h, w), dtype=_dtype_of(floating is float))
    cdef floating[:, :, ::1] out = out_arr
    for o in range(co):
        for c in range(ci):
            for di in range(2):
                for dj in range(2):
                    t = taps[o, c, di, dj]
                    for i in range(h):
                        ii = i + di
                        if ii > h - 1:
                            ii = h - 1
                        for j in range(w):
                            jj = j + dj
                            if jj > w - 1:
                                jj = w - 1
                            out[o, i, j] += t * x[c, ii, jj]
    return out_arr


def conv2x2_adjoint(const floating[:, :, :, ::1] taps, const floating[:, :, ::1] g):
    cdef Py_ssize_t co = taps.shape[0], ci = taps.shape[1]
    cdef Py_ssize_t h = g.shape[1], w = g.shape[2]
    cdef Py_ssize_t o, c, di, dj, i, j
    cdef floating t
    buf_arr = np.zeros((ci, h + 1, w + 1), dtype=_dtype_of(floating is float))
    cdef floating[:, :, ::1] buf = buf_arr
    for o in range(co):
        for c in range(ci):
            for di in range(2):
                for dj in range(2):
                    t = taps[o, c, di, dj]
                    for i in range(h):
                        for j in range(w):
                            buf[c, di + i, dj + j] += t * g[o, i, j]
    out_arr = np.empty((ci, h, w), dtype=_dtype_of(floating is float))
    cdef floating[:, :, ::1] out = out_arr
    for c in range(ci):
        for i in range(h):
            for j in range(w):
                out[c, i, j] = buf[c, i, j]
        for j in range(w):
            out[c, h - 1, j] += buf[c, h, j]
        for i in range(h):
            out[c, i, w - 1] += buf[c, i, w]
        out[c, h - 1, w - 1] += buf[c, h, w]
    return out_arr


def prox_mcp_field(const floating[:, :, ::1] g, double lam, double a):
    cdef Py_ssize_t h = g.shape[1], w = g.shape[2]
    cdef Py_ssize_t i, j
    cdef floating lam_t = <floating> lam
    cdef floating denom_t = <floating> (1.0 - a * lam)
    cdef floating n, m, scale, one = <floating> 1.0
    cdef bint denom_pos = (1.0 - a * lam) > 0.0
    out_arr = np.empty((2, h, w), dtype=_dtype_of(floating is float))
    cdef floating[:, :, ::1] out = out_arr
    for i in range(h):
        for j in range(w):
            # sqrt in double then round: exact for both widths (2p+2 rule)
            n = <floating> sqrt(<double> (g[0, i, j] * g[0, i, j] + g[1, i, j] * g[1, i, j]))
            if n == 0.0:
                scale = 0.0
            else:
                m = one - lam_t / n
                if m <= 0.0:
                    scale = 0.0
                elif denom_pos:
                    scale = m / denom_t
                    if scale > one:
                        scale = one
                else:
                    scale = one
            out[0, i, j] = scale * g[0, i, j]
            out[1, i, j] = scale * g[1, i, j]
    return out_arr


def project_c(const floating[:, ::1] u, const floating[:, ::1] v,
              const floating[:, ::1] f, const cnp.uint8_t[:, ::1] mask):
    cdef Py_ssize_t h = u.shape[0], w = u.shape[1]
    cdef Py_ssize_t i, j
    cdef floating s, un
    dt = _dtype_of(floating is float)
    un_arr = np.empty((h, w), dtype=dt)
    vn_arr = np.empty((h, w), dtype=dt)
    cdef floating[:, ::1] uo = un_arr
    cdef floating[:, ::1] vo = vn_arr
    for i in range(h):
        for j in range(w):
            if mask[i, j] != 0:
                s = f[i, j] - u[i, j] - v[i, j]
                un = u[i, j] + <floating> 0.5 * s
                uo[i, j] = un
                vo[i, j] = f[i, j] - un
            else:
                uo[i, j] = u[i, j]
                vo[i, j] = v[i, j]
    return un_arr, vn_arr


def patch_extract(const floating[:, ::1] u, Py_ssize_t p, Py_ssize_t stride):
    cdef Py_ssize_t h = u.shape[0], w = u.shape[1]
    cdef Py_ssize_t gh = (h - p) // stride + 1
    cdef Py_ssize_t gw = (w - p) // stride + 1
    cdef Py_ssize_t gi, gj, di, dj, k, r
    pm_arr = np.empty((p * p, gh * gw), dtype=_dtype_of(floating is float))
    cdef floating[:, ::1] pm = pm_arr
    for gi in range(gh):
        for gj in range(gw):
            k = gi * gw + gj
            for dj in range(p):
                for di in range(p):
                    r = di + p * dj
                    pm[r, k] = u[gi * stride + di, gj * stride + dj]
    return pm_arr


def patch_adjoint(const floating[:, ::1] pm, Py_ssize_t p, Py_ssize_t stride,
                  Py_ssize_t h, Py_ssize_t w):
    cdef Py_ssize_t gh = (h - p) // stride + 1
    cdef Py_ssize_t gw = (w - p) // stride + 1
    cdef Py_ssize_t gi, gj, di, dj, k, r
    out_arr = np.zeros((h, w), dtype=_dtype_of(floating is float))
    cdef floating[:, ::1] out = out_arr
    # r-major accumulation matches the fallback's slice-add order
    for r in range(p * p):
        di = r % p
        dj = r // p
        for gi in range(gh):
            for gj in range(gw):
                k = gi * gw + gj
                out[gi * stride + di, gj * stride + dj] += pm[r, k]
    return out_arr
