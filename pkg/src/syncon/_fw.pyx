# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Frank-Wolfe kernel for least squares on the unit simplex.

Same iteration as ``syncon._fw_py.simplex_fw``; the loop runs without the GIL.
"""
import numpy as np

from libc.math cimport INFINITY

cdef int REFRESH_EVERY = 32


cdef inline void _matvec(const double[:, ::1] G, const double[::1] w,
                         double[::1] out, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double acc
    for i in range(n):
        acc = 0.0
        for j in range(n):
            if w[j] != 0.0:
                acc = acc + G[i, j] * w[j]
        out[i] = acc


cdef inline double _dot(const double[::1] a, const double[::1] b,
                        Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i
    cdef double acc = 0.0
    for i in range(n):
        acc = acc + a[i] * b[i]
    return acc


def simplex_fw(G_in, c_in, w0, double eps, long max_iter):
    """Minimise ``w'Gw - 2c'w`` over the unit simplex with away steps.

    Returns ``(w, iterations, gap, converged)``.
    """
    cdef double[:, ::1] G = np.ascontiguousarray(G_in, dtype=np.float64)
    cdef double[::1] c = np.ascontiguousarray(c_in, dtype=np.float64)
    w_arr = np.array(w0, dtype=np.float64)
    cdef double[::1] w = w_arr
    cdef Py_ssize_t n = c.shape[0]
    Gw_arr = np.empty(n, dtype=np.float64)
    g_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] Gw = Gw_arr
    cdef double[::1] g = g_arr

    cdef long it = 0
    cdef bint stalled = False
    cdef bint fresh = True
    cdef bint drop
    cdef Py_ssize_t j, s, v
    cdef double wGw, gw, gfw, ga, gmin, gvmax, dGd, gamma, gmax, scale

    with nogil:
        _matvec(G, w, Gw, n)
        wGw = _dot(w, Gw, n)
        while True:
            gw = 0.0
            s = 0
            gmin = INFINITY
            for j in range(n):
                g[j] = 2.0 * (Gw[j] - c[j])
                gw = gw + g[j] * w[j]
                if g[j] < gmin:
                    gmin = g[j]
                    s = j
            gfw = gw - gmin

            if gfw <= eps or it >= max_iter or stalled:
                if not fresh:
                    _matvec(G, w, Gw, n)
                    wGw = _dot(w, Gw, n)
                    fresh = True
                    stalled = False
                    continue
                break

            v = 0
            gvmax = -INFINITY
            for j in range(n):
                if w[j] > 0.0 and g[j] > gvmax:
                    gvmax = g[j]
                    v = j
            ga = gvmax - gw

            if gfw >= ga:
                dGd = G[s, s] - 2.0 * Gw[s] + wGw
                if dGd > 0.0:
                    gamma = gfw / (2.0 * dGd)
                else:
                    gamma = 1.0
                if gamma >= 1.0:
                    for j in range(n):
                        w[j] = 0.0
                        Gw[j] = G[j, s]
                    w[s] = 1.0
                elif gamma > 0.0:
                    scale = 1.0 - gamma
                    for j in range(n):
                        w[j] = w[j] * scale
                        Gw[j] = scale * Gw[j] + gamma * G[j, s]
                    w[s] = w[s] + gamma
            else:
                if w[v] < 1.0:
                    gmax = w[v] / (1.0 - w[v])
                else:
                    gmax = INFINITY
                dGd = wGw - 2.0 * Gw[v] + G[v, v]
                if dGd > 0.0:
                    gamma = ga / (2.0 * dGd)
                else:
                    gamma = gmax
                drop = gamma >= gmax
                if drop:
                    gamma = gmax
                if gamma > 0.0:
                    scale = 1.0 + gamma
                    for j in range(n):
                        w[j] = w[j] * scale
                        Gw[j] = scale * Gw[j] - gamma * G[j, v]
                    w[v] = w[v] - gamma
                    if drop:
                        w[v] = 0.0

            it += 1
            if gamma > 0.0:
                fresh = False
            else:
                stalled = True
            if it % REFRESH_EVERY == 0:
                _matvec(G, w, Gw, n)
                fresh = True
            wGw = _dot(w, Gw, n)

    if gfw < 0.0:
        gfw = 0.0
    return w_arr, int(it), float(gfw), bool(gfw <= eps)
