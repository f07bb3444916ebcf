# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twins of the kernels in ``_pykernels.py``.

Semantics (argument order, adaptation schedule, family codes) are defined
by the Python reference; keep the two in lockstep.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport log, log1p, exp, fabs, sqrt, pow, INFINITY, isfinite

cnp.import_array()


def loglik_grid(double[:, ::1] resid, double[::1] sigma, double gamma, double[::1] offset):
    cdef Py_ssize_t nobs = resid.shape[0], nb = resid.shape[1], ns = sigma.shape[0]
    cdef Py_ssize_t i, j, s
    out_arr = np.zeros((nb, ns))
    cdef double[:, ::1] out = out_arr
    cdef double[::1] inv = np.empty(ns)
    cdef double[::1] logs = np.empty(ns)
    cdef double c = log(gamma / 2.0), g1 = 1.0 + gamma, a, l1, cs
    for s in range(ns):
        inv[s] = 1.0 / sigma[s]
        logs[s] = log(sigma[s])
    with nogil:
        for j in range(nb):
            for i in range(nobs):
                a = fabs(resid[i, j])
                cs = c - offset[i]
                for s in range(ns):
                    l1 = log1p(a * inv[s])
                    out[j, s] += cs - l1 - g1 * log1p(l1) - logs[s]
    return out_arr


cdef inline double _log_target(double[::1] theta, double[:, ::1] X, double[::1] y, double[::1] offset,
                               double gamma, int coef_kind, double[::1] cp, int scale_kind,
                               double[::1] sp) noexcept nogil:
    cdef Py_ssize_t p = X.shape[1], n = X.shape[0], i, k
    cdef double u = theta[p], sigma, inv, c, total = 0.0, r, l1, nu, q, s, a, b, m
    if not isfinite(u) or u > 700.0 or u < -700.0:
        return -INFINITY
    sigma = exp(u)
    inv = 1.0 / sigma
    c = log(gamma / 2.0)
    for i in range(n):
        r = y[i]
        for k in range(p):
            r -= X[i, k] * theta[k]
        l1 = log1p(fabs(r) * inv)
        total += c - l1 - (1.0 + gamma) * log1p(l1) - u - offset[i]
    if coef_kind == 0:
        for k in range(p):
            nu = cp[k]
            total += log(nu / 2.0) - u - (1.0 + nu) * log1p(fabs(theta[k]) * inv)
    else:
        nu = cp[0]
        q = 0.0
        for k in range(p):
            q += (theta[k] * inv) * (theta[k] * inv)
        total += cp[1] - p * u - 0.5 * (nu + p) * log1p(q / nu)
    if scale_kind == 0:
        s = sp[0]
        total += sp[1] - log1p((sigma / s) * (sigma / s))
    elif scale_kind == 1:
        a = sp[0]
        b = sp[1]
        total += sp[2] - (a + 1.0) * u - b * inv
    else:
        m = sp[0]
        s = sp[1]
        total += sp[2] - u - 0.5 * ((u - m) / s) * ((u - m) / s)
    return total + u


def log_target(theta, X, y, offset, double gamma, int coef_kind, coef_params, int scale_kind, scale_params):
    return _log_target(np.ascontiguousarray(theta, dtype=float), np.ascontiguousarray(X, dtype=float),
                       np.ascontiguousarray(y, dtype=float), np.ascontiguousarray(offset, dtype=float),
                       gamma, coef_kind, np.ascontiguousarray(coef_params, dtype=float), scale_kind,
                       np.ascontiguousarray(scale_params, dtype=float))


def rwm(x0, double[:, ::1] normals, double[::1] log_unif, scale0, Py_ssize_t n_warmup,
        double target_accept, double[:, ::1] X, double[::1] y, double[::1] offset, double gamma,
        int coef_kind, double[::1] coef_params, int scale_kind, double[::1] scale_params):
    cdef Py_ssize_t n_total = normals.shape[0], d = normals.shape[1], n_post = n_total - n_warmup
    cdef Py_ssize_t t, k, j
    cur_arr = np.array(x0, dtype=float)
    scale_arr = np.array(scale0, dtype=float)
    cdef double[::1] cur = cur_arr
    cdef double[::1] scale = scale_arr
    cdef double[::1] prop = np.empty(d)
    cdef double[::1] mean = cur_arr.copy()
    cdef double[::1] m2 = np.zeros(d)
    draws_arr = np.empty((n_post, d))
    logps_arr = np.empty(n_post)
    cdef double[:, ::1] draws = draws_arr
    cdef double[::1] logps = logps_arr
    cdef double lp, lp_prop, diff, alpha, lam, log_lam = 0.0, cnt, delta
    cdef long acc_post = 0
    cdef bint accepted
    with nogil:
        lp = _log_target(cur, X, y, offset, gamma, coef_kind, coef_params, scale_kind, scale_params)
        for t in range(n_total):
            lam = exp(log_lam)
            for k in range(d):
                prop[k] = cur[k] + lam * scale[k] * normals[t, k]
            lp_prop = _log_target(prop, X, y, offset, gamma, coef_kind, coef_params, scale_kind, scale_params)
            diff = lp_prop - lp
            if diff != diff:
                diff = -INFINITY
            accepted = log_unif[t] < diff
            if accepted:
                for k in range(d):
                    cur[k] = prop[k]
                lp = lp_prop
            if t < n_warmup:
                alpha = 1.0 if diff >= 0 else exp(diff)
                log_lam += pow(t + 1.0, -0.6) * (alpha - target_accept)
                cnt = t + 2.0
                for k in range(d):
                    delta = cur[k] - mean[k]
                    mean[k] += delta / cnt
                    m2[k] += delta * (cur[k] - mean[k])
                if t >= 100:
                    for k in range(d):
                        scale[k] = sqrt(m2[k] / (cnt - 1.0)) + 1e-10
            else:
                j = t - n_warmup
                for k in range(d):
                    draws[j, k] = cur[k]
                logps[j] = lp
                if accepted:
                    acc_post += 1
    return draws_arr, logps_arr, acc_post, scale_arr, log_lam
