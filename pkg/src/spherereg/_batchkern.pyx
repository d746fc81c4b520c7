# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled batched training kernels (one sample per row).

Same contract as ``_batch_numpy``; kept to tight C loops so the per-minibatch
dispatch overhead of many small numpy calls disappears from the hot path.
"""

import numpy as np

from libc.math cimport exp, sqrt

DEGENERATE_NORM = 1e-12


def affine_fwd(double[:, ::1] x, double[:, ::1] w, double[::1] b):
    cdef Py_ssize_t n = x.shape[0], din = x.shape[1], dout = w.shape[0]
    out_arr = np.empty((n, dout))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j, k
    cdef double acc
    for i in range(n):
        for j in range(dout):
            acc = b[j]
            for k in range(din):
                acc += x[i, k] * w[j, k]
            out[i, j] = acc
    return out_arr


def affine_bwd(double[:, ::1] x, double[:, ::1] w, double[:, ::1] gz):
    cdef Py_ssize_t n = x.shape[0], din = x.shape[1], dout = w.shape[0]
    gx_arr = np.zeros((n, din))
    gw_arr = np.zeros((dout, din))
    gb_arr = np.zeros(dout)
    cdef double[:, ::1] gx = gx_arr
    cdef double[:, ::1] gw = gw_arr
    cdef double[::1] gb = gb_arr
    cdef Py_ssize_t i, j, k
    cdef double g
    for i in range(n):
        for j in range(dout):
            g = gz[i, j]
            gb[j] += g
            for k in range(din):
                gx[i, k] += g * w[j, k]
                gw[j, k] += g * x[i, k]
    return gx_arr, gw_arr, gb_arr


def relu_fwd(double[:, ::1] z):
    cdef Py_ssize_t n = z.shape[0], d = z.shape[1]
    out_arr = np.empty((n, d))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    for i in range(n):
        for j in range(d):
            out[i, j] = z[i, j] if z[i, j] > 0.0 else 0.0
    return out_arr


def relu_bwd(double[:, ::1] z, double[:, ::1] ga):
    cdef Py_ssize_t n = z.shape[0], d = z.shape[1]
    out_arr = np.empty((n, d))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    for i in range(n):
        for j in range(d):
            out[i, j] = ga[i, j] if z[i, j] > 0.0 else 0.0
    return out_arr


def softmax_rows(double[:, ::1] o):
    cdef Py_ssize_t n = o.shape[0], d = o.shape[1]
    out_arr = np.empty((n, d))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double m, s
    for i in range(n):
        m = o[i, 0]
        for j in range(1, d):
            if o[i, j] > m:
                m = o[i, j]
        s = 0.0
        for j in range(d):
            out[i, j] = exp(o[i, j] - m)
            s += out[i, j]
        for j in range(d):
            out[i, j] /= s
    return out_arr


def softmax_bwd_rows(double[:, ::1] p, double[:, ::1] gp):
    cdef Py_ssize_t n = p.shape[0], d = p.shape[1]
    out_arr = np.empty((n, d))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double s
    for i in range(n):
        s = 0.0
        for j in range(d):
            s += p[i, j] * gp[i, j]
        for j in range(d):
            out[i, j] = p[i, j] * (gp[i, j] - s)
    return out_arr


def sexp_rows(double[:, ::1] o):
    cdef Py_ssize_t n = o.shape[0], d = o.shape[1]
    out_arr = np.empty((n, d))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double m, s
    for i in range(n):
        m = o[i, 0]
        for j in range(1, d):
            if o[i, j] > m:
                m = o[i, j]
        s = 0.0
        for j in range(d):
            out[i, j] = exp(o[i, j] - m)
            s += out[i, j] * out[i, j]
        s = sqrt(s)
        for j in range(d):
            out[i, j] /= s
    return out_arr


def sexp_bwd_rows(double[:, ::1] p, double[:, ::1] gp):
    cdef Py_ssize_t n = p.shape[0], d = p.shape[1]
    out_arr = np.empty((n, d))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double s
    for i in range(n):
        s = 0.0
        for j in range(d):
            s += p[i, j] * gp[i, j]
        for j in range(d):
            out[i, j] = p[i, j] * gp[i, j] - p[i, j] * p[i, j] * s
    return out_arr


def sflat_rows(double[:, ::1] o):
    cdef Py_ssize_t n = o.shape[0], d = o.shape[1]
    out_arr = np.empty((n, d))
    norms_arr = np.empty(n)
    cdef double[:, ::1] out = out_arr
    cdef double[::1] norms = norms_arr
    cdef Py_ssize_t i, j
    cdef double s
    for i in range(n):
        s = 0.0
        for j in range(d):
            s += o[i, j] * o[i, j]
        s = sqrt(s)
        if s < DEGENERATE_NORM:
            raise ValueError("cannot l2-normalize a (near-)zero row")
        norms[i] = s
        for j in range(d):
            out[i, j] = o[i, j] / s
    return out_arr, norms_arr


def sflat_bwd_rows(double[:, ::1] p, double[::1] norms, double[:, ::1] gp):
    cdef Py_ssize_t n = p.shape[0], d = p.shape[1]
    out_arr = np.empty((n, d))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double s
    for i in range(n):
        s = 0.0
        for j in range(d):
            s += p[i, j] * gp[i, j]
        for j in range(d):
            out[i, j] = (gp[i, j] - p[i, j] * s) / norms[i]
    return out_arr
