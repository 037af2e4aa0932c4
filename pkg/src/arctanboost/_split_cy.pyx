# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled split scan. Mirrors ``_split_py.scan_feature`` operation for operation."""
import numpy as np

from libc.math cimport INFINITY


def scan_feature(const double[::1] values, const double[:, ::1] grad, const double[:, ::1] hess,
                 const double[::1] grad_miss, const double[::1] hess_miss,
                 double parent_score, double lam, double gamma, double min_child_weight):
    cdef Py_ssize_t n = values.shape[0]
    cdef Py_ssize_t K = grad.shape[1]
    cdef Py_ssize_t i, j, d
    cdef double best = -INFINITY
    cdef Py_ssize_t best_i = -1
    cdef int best_left = 1
    cdef double acc, hl_tot, hr_tot, GL, HL, GR, HR, dl, dr, gain, a, b, thr
    cdef bint ok

    if n < 2:
        return -np.inf, np.nan, True

    suf_g_arr = np.empty((n, K))
    suf_h_arr = np.empty((n, K))
    pre_g_arr = np.zeros(K)
    pre_h_arr = np.zeros(K)
    cdef double[:, ::1] sg = suf_g_arr
    cdef double[:, ::1] sh = suf_h_arr
    cdef double[::1] pg = pre_g_arr
    cdef double[::1] ph = pre_h_arr

    for j in range(K):
        sg[n - 1, j] = grad[n - 1, j]
        sh[n - 1, j] = hess[n - 1, j]
    for i in range(n - 2, -1, -1):
        for j in range(K):
            sg[i, j] = sg[i + 1, j] + grad[i, j]
            sh[i, j] = sh[i + 1, j] + hess[i, j]

    for i in range(n - 1):
        for j in range(K):
            if i == 0:
                pg[j] = grad[0, j]
                ph[j] = hess[0, j]
            else:
                pg[j] = pg[j] + grad[i, j]
                ph[j] = ph[j] + hess[i, j]
        if not values[i] < values[i + 1]:
            continue
        for d in range(2):
            acc = 0.0
            hl_tot = 0.0
            hr_tot = 0.0
            ok = True
            for j in range(K):
                if d == 0:
                    GL = pg[j] + grad_miss[j]
                    HL = ph[j] + hess_miss[j]
                    GR = sg[i + 1, j]
                    HR = sh[i + 1, j]
                else:
                    GL = pg[j]
                    HL = ph[j]
                    GR = sg[i + 1, j] + grad_miss[j]
                    HR = sh[i + 1, j] + hess_miss[j]
                dl = HL + lam
                dr = HR + lam
                if not (dl > 0 and dr > 0):
                    ok = False
                    break
                acc = acc + (GL * GL / dl + GR * GR / dr)
                hl_tot = hl_tot + HL
                hr_tot = hr_tot + HR
            if not ok:
                continue
            if not (hl_tot >= min_child_weight and hr_tot >= min_child_weight):
                continue
            gain = 0.5 * (acc - parent_score) - gamma
            if gain > best:
                best = gain
                best_i = i
                best_left = d == 0

    if best_i < 0:
        return -np.inf, np.nan, True
    a = values[best_i]
    b = values[best_i + 1]
    thr = (a + b) * 0.5
    if not a < thr:
        thr = b
    return best, thr, bool(best_left)
