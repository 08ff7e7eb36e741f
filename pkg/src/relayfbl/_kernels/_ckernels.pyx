# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the kernels in ``_pykernels``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, log, cos, sin, M_PI

cnp.import_array()

cdef double INV_2_53 = 1.0 / 9007199254740992.0


def box_muller(raw):
    cdef const cnp.uint64_t[::1] r = np.ascontiguousarray(raw, dtype=np.uint64)
    cdef Py_ssize_t m = r.shape[0]
    if m % 2:
        raise ValueError("box_muller needs an even number of raw draws")
    out_arr = np.empty(m, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i
    cdef double u0, u1, rad, th
    for i in range(0, m, 2):
        u0 = 1.0 - <double>(r[i] >> 11) * INV_2_53
        u1 = <double>(r[i + 1] >> 11) * INV_2_53
        rad = sqrt(-2.0 * log(u0))
        th = 2.0 * M_PI * u1
        out[i] = rad * cos(th)
        out[i + 1] = rad * sin(th)
    return out_arr


def sq_dist_rows(bank, resid, double coef):
    cdef const double[:, ::1] b = np.ascontiguousarray(bank, dtype=np.float64)
    cdef const double[::1] y = np.ascontiguousarray(resid, dtype=np.float64)
    cdef Py_ssize_t rows = b.shape[0], n = b.shape[1]
    if y.shape[0] != n:
        raise ValueError("resid length does not match bank width")
    out_arr = np.empty(rows, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t w, k
    cdef double acc, d
    for w in range(rows):
        acc = 0.0
        for k in range(n):
            d = y[k] - coef * b[w, k]
            acc += d * d
        out[w] = acc
    return out_arr


def mgf_exponents(z, x, double t, double power):
    cdef const double[:, ::1] zz = np.ascontiguousarray(z, dtype=np.float64)
    cdef const double[:, ::1] xx = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t rows = zz.shape[0], n = zz.shape[1]
    if xx.shape[0] != rows or xx.shape[1] != n:
        raise ValueError("z and x must have the same shape")
    out_arr = np.empty(rows, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double c2 = 2.0 * t * t / (1.0 + 2.0 * t * power)
    cdef Py_ssize_t i, k
    cdef double lin, sx2, zk, xk
    for i in range(rows):
        lin = 0.0
        sx2 = 0.0
        for k in range(n):
            zk = zz[i, k]
            xk = xx[i, k]
            lin += -power * zk * zk + 2.0 * xk * zk
            sx2 += xk * xk
        out[i] = t * (lin + n * power) + c2 * (n * power - sx2)
    return out_arr
