# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels.

Every routine mirrors its numpy twin in ``_pycore`` operation for operation
(sequential accumulation order, identical expression trees) so the two
backends return bit-identical results.  The extension is compiled with
-ffp-contract=off to rule out fused multiply-add divergence.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, NAN

BACKEND_NAME = "compiled"

NO_SPLIT = (-float("inf"), float("nan"), 0)


def split_scan(
    const cnp.int64_t[::1] order,
    const cnp.uint8_t[::1] mask,
    const double[:] col,
    const double[::1] g,
    double reg_lambda,
    double gamma,
    long min_cover,
):
    """See ``_pycore.split_scan``."""
    cdef Py_ssize_t n_total = order.shape[0]
    cdef Py_ssize_t j, n = 0
    cdef cnp.int64_t r
    cdef double g_tot = 0.0

    for j in range(n_total):
        r = order[j]
        if mask[r]:
            g_tot += g[r]
            n += 1
    if n < 2:
        return NO_SPLIT

    cdef double h_tot = <double> n
    cdef double parent = g_tot * g_tot / (h_tot + reg_lambda)
    cdef double mc = <double> min_cover
    cdef double best_gain = -INFINITY
    cdef double best_thr = NAN
    cdef Py_ssize_t best_nleft = 0
    cdef double cum = 0.0
    cdef double prev_val = 0.0
    cdef double cur_val, thr, g_left, g_right, h_left, h_right, gain
    cdef Py_ssize_t k = 0

    for j in range(n_total):
        r = order[j]
        if not mask[r]:
            continue
        cur_val = col[r]
        if k >= 1:
            thr = 0.5 * (prev_val + cur_val)
            if prev_val < thr and thr <= cur_val:
                h_left = <double> k
                h_right = h_tot - h_left
                if min_cover <= 1 or (h_left >= mc and h_right >= mc):
                    g_left = cum
                    g_right = g_tot - g_left
                    gain = (
                        0.5
                        * (
                            g_left * g_left / (h_left + reg_lambda)
                            + g_right * g_right / (h_right + reg_lambda)
                            - parent
                        )
                        - gamma
                    )
                    if gain > best_gain:
                        best_gain = gain
                        best_thr = thr
                        best_nleft = k
        cum += g[r]
        prev_val = cur_val
        k += 1

    if best_nleft == 0:
        return NO_SPLIT
    return best_gain, best_thr, <long> best_nleft


def route_rows(
    const cnp.int32_t[::1] feature,
    const double[::1] threshold,
    const cnp.int32_t[::1] left,
    const cnp.int32_t[::1] right,
    const double[:, ::1] X,
):
    """See ``_pycore.route_rows``."""
    cdef Py_ssize_t n = X.shape[0]
    out = np.zeros(n, dtype=np.int32)
    cdef cnp.int32_t[::1] out_v = out
    cdef Py_ssize_t i
    cdef cnp.int32_t node

    for i in range(n):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] < threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out_v[i] = node
    return out


def shap_accumulate(
    const double[::1] leaf_weight,
    const cnp.int32_t[::1] path_offset,
    const cnp.int32_t[::1] path_feature,
    const double[::1] path_lo,
    const double[::1] path_hi,
    const double[:, ::1] X,
    const double[:, ::1] Z,
    const double[:, ::1] coef_keep,
    const double[:, ::1] coef_drop,
    double[:, ::1] phi,
):
    """See ``_pycore.shap_accumulate``."""
    cdef Py_ssize_t n_leaves = leaf_weight.shape[0]
    cdef Py_ssize_t n_rows = X.shape[0]
    cdef Py_ssize_t n_refs = Z.shape[0]
    cdef Py_ssize_t zi, l, i, k, start, p
    cdef cnp.int32_t f
    cdef double w, v
    cdef int n_keep, n_drop
    cdef bint alive, xo

    cdef Py_ssize_t max_len = 0
    for l in range(n_leaves):
        p = path_offset[l + 1] - path_offset[l]
        if p > max_len:
            max_len = p
    if max_len == 0:
        return

    z_ok_arr = np.empty(max_len, dtype=np.uint8)
    x_ok_arr = np.empty(max_len, dtype=np.uint8)
    cdef cnp.uint8_t[::1] z_ok = z_ok_arr
    cdef cnp.uint8_t[::1] x_ok = x_ok_arr

    for zi in range(n_refs):
        for l in range(n_leaves):
            start = path_offset[l]
            p = path_offset[l + 1] - start
            if p == 0:
                continue
            for k in range(p):
                v = Z[zi, path_feature[start + k]]
                z_ok[k] = 1 if (v >= path_lo[start + k] and v < path_hi[start + k]) else 0
            w = leaf_weight[l]
            for i in range(n_rows):
                alive = True
                n_keep = 0
                n_drop = 0
                for k in range(p):
                    v = X[i, path_feature[start + k]]
                    xo = v >= path_lo[start + k] and v < path_hi[start + k]
                    x_ok[k] = 1 if xo else 0
                    if xo:
                        if not z_ok[k]:
                            n_keep += 1
                    elif z_ok[k]:
                        n_drop += 1
                    else:
                        alive = False
                        break
                if not alive:
                    continue
                for k in range(p):
                    f = path_feature[start + k]
                    if z_ok[k]:
                        if not x_ok[k]:
                            phi[i, f] += w * coef_drop[n_keep, n_drop]
                    elif x_ok[k]:
                        phi[i, f] += w * coef_keep[n_keep, n_drop]
