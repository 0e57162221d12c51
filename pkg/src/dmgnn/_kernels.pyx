# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels for small dense float64 matrices.

The model spends most of its time in per-node, per-edge recurrent updates
on tiny (1 x d .. N x d) matrices, where Python/numpy dispatch overhead
dominates. These kernels run plain C loops instead. The numpy fallback in
``_kernels_py`` is the reference implementation.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, tanh as c_tanh

cnp.import_array()

COMPILED = True


def matmul(cnp.ndarray[double, ndim=2] a, cnp.ndarray[double, ndim=2] b):
    cdef Py_ssize_t m = a.shape[0], k = a.shape[1], n = b.shape[1]
    cdef cnp.ndarray[double, ndim=2] c = np.zeros((m, n))
    cdef double[:, ::1] av = a, bv = b, cv = c
    cdef Py_ssize_t i, j, p
    cdef double aip
    for i in range(m):
        for p in range(k):
            aip = av[i, p]
            for j in range(n):
                cv[i, j] += aip * bv[p, j]
    return c


def matmul_bwd_a(cnp.ndarray[double, ndim=2] gc, cnp.ndarray[double, ndim=2] b):
    # ga = gc . b^T
    cdef Py_ssize_t m = gc.shape[0], n = gc.shape[1], k = b.shape[0]
    cdef cnp.ndarray[double, ndim=2] ga = np.zeros((m, k))
    cdef double[:, ::1] gv = gc, bv = b, av = ga
    cdef Py_ssize_t i, j, p
    cdef double s
    for i in range(m):
        for p in range(k):
            s = 0.0
            for j in range(n):
                s += gv[i, j] * bv[p, j]
            av[i, p] = s
    return ga


def matmul_bwd_b(cnp.ndarray[double, ndim=2] a, cnp.ndarray[double, ndim=2] gc):
    # gb = a^T . gc
    cdef Py_ssize_t m = a.shape[0], k = a.shape[1], n = gc.shape[1]
    cdef cnp.ndarray[double, ndim=2] gb = np.zeros((k, n))
    cdef double[:, ::1] av = a, gv = gc, bv = gb
    cdef Py_ssize_t i, j, p
    cdef double aip
    for i in range(m):
        for p in range(k):
            aip = av[i, p]
            for j in range(n):
                bv[p, j] += aip * gv[i, j]
    return gb


def add(cnp.ndarray[double, ndim=2] a, cnp.ndarray[double, ndim=2] b):
    cdef Py_ssize_t m = a.shape[0], n = a.shape[1]
    cdef cnp.ndarray[double, ndim=2] out = np.empty((m, n))
    cdef double[:, ::1] av = a, bv = b, ov = out
    cdef Py_ssize_t i, j
    for i in range(m):
        for j in range(n):
            ov[i, j] = av[i, j] + bv[i, j]
    return out


def hadamard(cnp.ndarray[double, ndim=2] a, cnp.ndarray[double, ndim=2] b):
    cdef Py_ssize_t m = a.shape[0], n = a.shape[1]
    cdef cnp.ndarray[double, ndim=2] out = np.empty((m, n))
    cdef double[:, ::1] av = a, bv = b, ov = out
    cdef Py_ssize_t i, j
    for i in range(m):
        for j in range(n):
            ov[i, j] = av[i, j] * bv[i, j]
    return out


def scale(cnp.ndarray[double, ndim=2] a, double s):
    cdef Py_ssize_t m = a.shape[0], n = a.shape[1]
    cdef cnp.ndarray[double, ndim=2] out = np.empty((m, n))
    cdef double[:, ::1] av = a, ov = out
    cdef Py_ssize_t i, j
    for i in range(m):
        for j in range(n):
            ov[i, j] = av[i, j] * s
    return out


def tanh_fwd(cnp.ndarray[double, ndim=2] x):
    cdef Py_ssize_t m = x.shape[0], n = x.shape[1]
    cdef cnp.ndarray[double, ndim=2] out = np.empty((m, n))
    cdef double[:, ::1] xv = x, ov = out
    cdef Py_ssize_t i, j
    for i in range(m):
        for j in range(n):
            ov[i, j] = c_tanh(xv[i, j])
    return out


def tanh_bwd(cnp.ndarray[double, ndim=2] y, cnp.ndarray[double, ndim=2] gy):
    cdef Py_ssize_t m = y.shape[0], n = y.shape[1]
    cdef cnp.ndarray[double, ndim=2] out = np.empty((m, n))
    cdef double[:, ::1] yv = y, gv = gy, ov = out
    cdef Py_ssize_t i, j
    for i in range(m):
        for j in range(n):
            ov[i, j] = gv[i, j] * (1.0 - yv[i, j] * yv[i, j])
    return out


def relu_fwd(cnp.ndarray[double, ndim=2] x):
    cdef Py_ssize_t m = x.shape[0], n = x.shape[1]
    cdef cnp.ndarray[double, ndim=2] out = np.empty((m, n))
    cdef double[:, ::1] xv = x, ov = out
    cdef Py_ssize_t i, j
    for i in range(m):
        for j in range(n):
            ov[i, j] = xv[i, j] if xv[i, j] > 0.0 else 0.0
    return out


def relu_bwd(cnp.ndarray[double, ndim=2] x, cnp.ndarray[double, ndim=2] gy):
    cdef Py_ssize_t m = x.shape[0], n = x.shape[1]
    cdef cnp.ndarray[double, ndim=2] out = np.empty((m, n))
    cdef double[:, ::1] xv = x, gv = gy, ov = out
    cdef Py_ssize_t i, j
    for i in range(m):
        for j in range(n):
            ov[i, j] = gv[i, j] if xv[i, j] > 0.0 else 0.0
    return out


def sigmoid_fwd(cnp.ndarray[double, ndim=2] x):
    cdef Py_ssize_t m = x.shape[0], n = x.shape[1]
    cdef cnp.ndarray[double, ndim=2] out = np.empty((m, n))
    cdef double[:, ::1] xv = x, ov = out
    cdef Py_ssize_t i, j
    cdef double v, e
    for i in range(m):
        for j in range(n):
            v = xv[i, j]
            if v >= 0.0:
                ov[i, j] = 1.0 / (1.0 + exp(-v))
            else:
                e = exp(v)
                ov[i, j] = e / (1.0 + e)
    return out


def sigmoid_bwd(cnp.ndarray[double, ndim=2] y, cnp.ndarray[double, ndim=2] gy):
    cdef Py_ssize_t m = y.shape[0], n = y.shape[1]
    cdef cnp.ndarray[double, ndim=2] out = np.empty((m, n))
    cdef double[:, ::1] yv = y, gv = gy, ov = out
    cdef Py_ssize_t i, j
    for i in range(m):
        for j in range(n):
            ov[i, j] = gv[i, j] * yv[i, j] * (1.0 - yv[i, j])
    return out


def softmax_row(cnp.ndarray[double, ndim=2] x):
    cdef Py_ssize_t m = x.shape[0], n = x.shape[1]
    cdef cnp.ndarray[double, ndim=2] out = np.empty((m, n))
    cdef double[:, ::1] xv = x, ov = out
    cdef Py_ssize_t i, j
    cdef double mx, s
    mx = xv[0, 0]
    for i in range(m):
        for j in range(n):
            if xv[i, j] > mx:
                mx = xv[i, j]
    s = 0.0
    for i in range(m):
        for j in range(n):
            ov[i, j] = exp(xv[i, j] - mx)
            s += ov[i, j]
    for i in range(m):
        for j in range(n):
            ov[i, j] /= s
    return out


def softmax_bwd(cnp.ndarray[double, ndim=2] y, cnp.ndarray[double, ndim=2] gy):
    cdef Py_ssize_t m = y.shape[0], n = y.shape[1]
    cdef cnp.ndarray[double, ndim=2] out = np.empty((m, n))
    cdef double[:, ::1] yv = y, gv = gy, ov = out
    cdef Py_ssize_t i, j
    cdef double dot = 0.0
    for i in range(m):
        for j in range(n):
            dot += gv[i, j] * yv[i, j]
    for i in range(m):
        for j in range(n):
            ov[i, j] = yv[i, j] * (gv[i, j] - dot)
    return out


def accumulate(cnp.ndarray[double, ndim=2] dst, cnp.ndarray[double, ndim=2] src):
    cdef Py_ssize_t m = dst.shape[0], n = dst.shape[1]
    cdef double[:, ::1] dv = dst, sv = src
    cdef Py_ssize_t i, j
    for i in range(m):
        for j in range(n):
            dv[i, j] += sv[i, j]
