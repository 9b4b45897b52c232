# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled single-pass kernels for the class-relative error computations.

Same contracts as ``_ref``; one pass per row, no temporaries.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()


def relative_l1_errors(double[:, ::1] features, double[:, ::1] class_means,
                       cnp.int64_t[::1] pred):
    cdef Py_ssize_t n = features.shape[0]
    cdef Py_ssize_t d = features.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] dist = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] norm = np.empty(n, dtype=np.float64)
    cdef double[::1] dist_v = dist
    cdef double[::1] norm_v = norm
    cdef Py_ssize_t i, j, k
    cdef double acc_d, acc_n, f
    for i in range(n):
        k = <Py_ssize_t> pred[i]
        acc_d = 0.0
        acc_n = 0.0
        for j in range(d):
            f = features[i, j]
            acc_d += fabs(f - class_means[k, j])
            acc_n += fabs(f)
        dist_v[i] = acc_d
        norm_v[i] = acc_n
    return dist, norm


def decoupled_error_sums(double[:, ::1] features, double[:, ::1] class_means,
                         double[:, ::1] weights, cnp.int64_t[::1] pred,
                         bint relative_sign, bint sum_abs):
    cdef Py_ssize_t n = features.shape[0]
    cdef Py_ssize_t d = features.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] pos = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] neg = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] norm = np.empty(n, dtype=np.float64)
    cdef double[::1] pos_v = pos
    cdef double[::1] neg_v = neg
    cdef double[::1] norm_v = norm
    cdef Py_ssize_t i, j, k
    cdef double acc_p, acc_n, acc_l1, f, rel, basis, prod
    for i in range(n):
        k = <Py_ssize_t> pred[i]
        acc_p = 0.0
        acc_n = 0.0
        acc_l1 = 0.0
        for j in range(d):
            f = features[i, j]
            rel = f - class_means[k, j]
            basis = rel if relative_sign else f
            prod = weights[k, j] * basis
            if sum_abs:
                if prod > 0.0:
                    acc_p += fabs(rel)
                else:
                    acc_n += fabs(rel)
            else:
                if prod > 0.0:
                    acc_p += rel
                else:
                    acc_n += rel
            acc_l1 += fabs(f)
        if sum_abs:
            pos_v[i] = acc_p
            neg_v[i] = acc_n
        else:
            pos_v[i] = fabs(acc_p)
            neg_v[i] = fabs(acc_n)
        norm_v[i] = acc_l1
    return pos, neg, norm
