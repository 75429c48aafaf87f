"""Pure-Python Frank-Wolfe kernel for least squares on the unit simplex.

Mirrors ``syncon._fw`` step for step; used when the compiled extension is
not available or when ``SYNCON_PURE_PYTHON=1``.
"""
import numpy as np

# Iterations between exact recomputations of G @ w.
REFRESH_EVERY = 32


def simplex_fw(G, c, w0, eps, max_iter):
    """Minimise ``w'Gw - 2c'w`` over the unit simplex with away steps.

    Returns ``(w, iterations, gap, converged)`` where ``gap`` is the
    Frank-Wolfe duality gap of the returned iterate.
    """
    G = np.ascontiguousarray(G, dtype=np.float64)
    c = np.ascontiguousarray(c, dtype=np.float64)
    w = np.array(w0, dtype=np.float64)
    Gw = G @ w
    wGw = float(w @ Gw)
    it = 0
    stalled = False
    fresh = True

    while True:
        g = 2.0 * (Gw - c)
        gw = float(g @ w)
        s = int(np.argmin(g))
        gfw = gw - g[s]

        if gfw <= eps or it >= max_iter or stalled:
            if not fresh:
                Gw = G @ w
                wGw = float(w @ Gw)
                fresh = True
                stalled = False
                continue
            return w, it, max(gfw, 0.0), bool(gfw <= eps)

        gsup = np.where(w > 0.0, g, -np.inf)
        v = int(np.argmax(gsup))
        ga = g[v] - gw

        if gfw >= ga:
            dGd = G[s, s] - 2.0 * Gw[s] + wGw
            gamma = gfw / (2.0 * dGd) if dGd > 0.0 else 1.0
            if gamma >= 1.0:
                w[:] = 0.0
                w[s] = 1.0
                Gw = G[:, s].copy()
            elif gamma > 0.0:
                w *= 1.0 - gamma
                w[s] += gamma
                Gw = (1.0 - gamma) * Gw + gamma * G[:, s]
        else:
            gmax = w[v] / (1.0 - w[v]) if w[v] < 1.0 else np.inf
            dGd = wGw - 2.0 * Gw[v] + G[v, v]
            gamma = ga / (2.0 * dGd) if dGd > 0.0 else gmax
            drop = gamma >= gmax
            if drop:
                gamma = gmax
            if gamma > 0.0:
                w *= 1.0 + gamma
                w[v] -= gamma
                if drop:
                    w[v] = 0.0
                Gw = (1.0 + gamma) * Gw - gamma * G[:, v]

        it += 1
        if gamma > 0.0:
            fresh = False
        else:
            stalled = True
        if it % REFRESH_EVERY == 0:
            Gw = G @ w
            fresh = True
        wGw = float(w @ Gw)
