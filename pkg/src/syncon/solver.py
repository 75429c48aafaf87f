"""Least-squares kernels: fit ``y0`` on the columns of ``Y`` under a weight regime.

Three regimes are supported:

* ``Regime.SIMPLEX``: nonnegative weights summing to one (synthetic control).
* ``Regime.ADDING_UP``: weights summing to one, sign unrestricted.
* ``Regime.UNRESTRICTED``: ordinary least squares without intercept.

The simplex problem is solved by Frank-Wolfe with away steps. The iteration
runs in a compiled extension (``syncon._fw``) when it is importable and in
``syncon._fw_py`` otherwise; set ``SYNCON_PURE_PYTHON=1`` to force the
fallback. ``BACKEND`` names the kernel in use.
"""
from __future__ import annotations

import enum
import os
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from . import _fw_py

if os.environ.get("SYNCON_PURE_PYTHON"):
    _simplex_fw = _fw_py.simplex_fw
    BACKEND = "python"
else:
    try:
        from ._fw import simplex_fw as _simplex_fw

        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on the build
        _simplex_fw = _fw_py.simplex_fw
        BACKEND = "python"

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 200_000
# Cutoff on cond(R) of the QR factor for the least-squares regimes.
COND_LIMIT = 1e12


class SolverError(Exception):
    """Base class for solver failures."""


class NonFiniteError(SolverError, ValueError):
    pass


class RankDeficientError(SolverError):
    pass


class InfeasibleInputError(SolverError, ValueError):
    pass


class MaxIterExceeded(RuntimeWarning):
    """Frank-Wolfe hit ``max_iter``; the best iterate is still returned."""


class Regime(str, enum.Enum):
    SIMPLEX = "simplex"
    ADDING_UP = "adding_up"
    UNRESTRICTED = "unrestricted"


@dataclass(frozen=True)
class LsProblem:
    """Fit ``y0`` (length T) on the columns of ``Y`` (T x J) under ``regime``."""

    y0: np.ndarray
    Y: np.ndarray
    regime: Regime = Regime.SIMPLEX

    def __post_init__(self):
        y0 = np.asarray(self.y0, dtype=np.float64)
        Y = np.asarray(self.Y, dtype=np.float64)
        if Y.ndim == 1:
            Y = Y[:, None]
        if y0.ndim != 1 or Y.ndim != 2:
            raise ValueError("y0 must be a vector and Y a matrix")
        if Y.shape[0] != y0.shape[0]:
            raise ValueError(
                f"y0 has {y0.shape[0]} rows but Y has {Y.shape[0]}"
            )
        if y0.shape[0] < 1 or Y.shape[1] < 1:
            raise ValueError("need T >= 1 and J >= 1")
        if not (np.isfinite(y0).all() and np.isfinite(Y).all()):
            raise NonFiniteError("inputs contain NaN or Inf")
        regime = Regime(self.regime)
        T, J = Y.shape
        if regime is not Regime.SIMPLEX and T < J:
            raise RankDeficientError(
                f"{regime.value} least squares: T0 >= J required (T0={T}, J={J})"
            )
        object.__setattr__(self, "y0", y0)
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "regime", regime)

    @property
    def T(self) -> int:
        return self.Y.shape[0]

    @property
    def J(self) -> int:
        return self.Y.shape[1]


@dataclass(frozen=True)
class SolveReport:
    weights: np.ndarray
    objective: float
    kkt_gap: float
    iterations: int
    converged: bool
    regime: Regime


def objective(p: LsProblem, w) -> float:
    """Mean squared residual ``mean((y0 - Y w)**2)``."""
    r = p.y0 - p.Y @ np.asarray(w, dtype=np.float64)
    return float(r @ r) / p.T


def _gradient(p: LsProblem, w) -> np.ndarray:
    r = p.y0 - p.Y @ w
    return (-2.0 / p.T) * (p.Y.T @ r)


def kkt_gap(p: LsProblem, w) -> float:
    """Optimality certificate of ``w`` for ``p``.

    For the simplex regime this is the Frank-Wolfe duality gap
    ``max_v grad'(w - v)`` over the vertices ``v``, an upper bound on
    ``f(w) - f*``. For the other regimes it is the sup-norm of the gradient
    after projecting out the directions the constraints forbid.
    """
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (p.J,):
        raise InfeasibleInputError(f"expected {p.J} weights, got shape {w.shape}")
    if not np.isfinite(w).all():
        raise InfeasibleInputError("weights contain NaN or Inf")
    g = _gradient(p, w)
    if p.regime is Regime.UNRESTRICTED:
        return float(np.max(np.abs(g)))
    if abs(w.sum() - 1.0) > 1e-8:
        raise InfeasibleInputError(f"weights sum to {w.sum()!r}, not 1")
    if p.regime is Regime.ADDING_UP:
        return float(np.max(np.abs(g - g.mean())))
    if (w < -1e-12).any():
        raise InfeasibleInputError("negative weight in simplex regime")
    return max(float(g @ w - g.min()), 0.0)


def simplex_qp_gram(G, c, yy, *, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
    """Simplex QP on Gram data: minimise ``w'Gw - 2c'w + yy``.

    ``G = Y'Y/T``, ``c = Y'y0/T`` and ``yy = y0'y0/T`` for the least-squares
    problem. Returns ``(w, iterations, gap, converged)``; callers that need the
    objective should compute it from residuals.
    """
    J = c.shape[0]
    w0 = np.full(J, 1.0 / J)
    if J == 1:
        return w0, 0, 0.0, True
    Gw0 = G @ w0
    f0 = float(w0 @ Gw0 - 2.0 * (c @ w0) + yy)
    eps = tol * max(1.0, f0)
    w, it, gap, ok = _simplex_fw(G, c, w0, eps, int(max_iter))
    if not ok:
        warnings.warn(
            f"Frank-Wolfe stopped after {it} iterations with gap {gap:.3g} > {eps:.3g}",
            MaxIterExceeded,
            stacklevel=3,
        )
    return w, it, gap, ok


def solve_simplex_qp(p: LsProblem, tol: float = DEFAULT_TOL,
                     max_iter: int = DEFAULT_MAX_ITER) -> SolveReport:
    """Synthetic control weights: least squares over the unit simplex.

    Starts from uniform weights and stops once the Frank-Wolfe gap is at most
    ``tol * max(1, f(uniform))``. Deterministic for fixed inputs.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    T = p.T
    G = (p.Y.T @ p.Y) / T
    c = (p.Y.T @ p.y0) / T
    yy = float(p.y0 @ p.y0) / T
    w, it, gap, ok = simplex_qp_gram(G, c, yy, tol=tol, max_iter=max_iter)
    return SolveReport(
        weights=w,
        objective=objective(p, w),
        kkt_gap=kkt_gap(p, w) if p.J > 1 else 0.0,
        iterations=it,
        converged=ok,
        regime=Regime.SIMPLEX,
    )


def _qr_lstsq(X, y, what):
    Q, R = np.linalg.qr(X, mode="reduced")
    d = np.abs(np.diag(R))
    if d.min() == 0.0 or np.linalg.cond(R) > COND_LIMIT:
        raise RankDeficientError(
            f"{what}: design is rank deficient (cond > {COND_LIMIT:.0e})"
        )
    return solve_triangular(R, Q.T @ y, lower=False)


def solve_ols(p: LsProblem) -> SolveReport:
    """Unrestricted least squares via Householder QR."""
    if p.T < p.J:
        raise RankDeficientError(
            f"unrestricted least squares: T0 >= J required (T0={p.T}, J={p.J})"
        )
    w = _qr_lstsq(p.Y, p.y0, "unrestricted least squares")
    return SolveReport(w, objective(p, w), kkt_gap(p, w), 1, True,
                       Regime.UNRESTRICTED)


def solve_adding_up_ls(p: LsProblem) -> SolveReport:
    """Least squares subject to ``sum(w) == 1`` only.

    Substitutes ``w_J = 1 - sum_{j<J} w_j`` and regresses ``y0 - Y_J`` on
    ``Y_j - Y_J``.
    """
    if p.T < p.J:
        raise RankDeficientError(
            f"adding-up least squares: T0 >= J required (T0={p.T}, J={p.J})"
        )
    J = p.J
    if J == 1:
        w = np.ones(1)
    else:
        last = p.Y[:, -1]
        D = p.Y[:, :-1] - last[:, None]
        head = _qr_lstsq(D, p.y0 - last, "adding-up least squares")
        w = np.empty(J)
        w[:-1] = head
        w[-1] = 1.0 - head.sum()
        # Put the rounding residue of the sum on the largest weight.
        w[np.argmax(np.abs(w))] += 1.0 - w.sum()
    return SolveReport(w, objective(p, w), kkt_gap(p, w), 1, True,
                       Regime.ADDING_UP)


def solve(p: LsProblem, tol: float = DEFAULT_TOL,
          max_iter: int = DEFAULT_MAX_ITER) -> SolveReport:
    """Dispatch on ``p.regime``."""
    if p.regime is Regime.SIMPLEX:
        return solve_simplex_qp(p, tol=tol, max_iter=max_iter)
    if p.regime is Regime.ADDING_UP:
        return solve_adding_up_ls(p)
    return solve_ols(p)
