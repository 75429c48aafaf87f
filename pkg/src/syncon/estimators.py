"""Weight estimators for a single treated unit.

Every estimator maps a :class:`~syncon.dgp.PanelData` to a
:class:`WeightSolution`; :func:`treatment_effects` turns a solution into
post-treatment effect estimates. Estimators are addressed by the stable ids
in :data:`ESTIMATORS`.
"""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .dgp import PanelData
from .solver import (
    DEFAULT_TOL,
    LsProblem,
    RankDeficientError,
    Regime,
    SolveReport,
    simplex_qp_gram,
    solve_adding_up_ls,
    solve_ols,
    solve_simplex_qp,
)
from . import solver


class MissingCovariates(ValueError):
    pass


class OuterSearchFailed(RuntimeWarning):
    pass


@dataclass(frozen=True)
class WeightSolution:
    weights: np.ndarray
    regime: str
    pre_mse: float
    l1_norm: float
    l2_norm: float
    report: SolveReport
    intercept: float | None = None
    v_weights: np.ndarray | None = None


def _solution(weights, regime, pre_mse, report, intercept=None, v_weights=None):
    return WeightSolution(
        weights=weights,
        regime=regime,
        pre_mse=float(pre_mse),
        l1_norm=float(np.abs(weights).sum()),
        l2_norm=float(np.sqrt(weights @ weights)),
        report=report,
        intercept=intercept,
        v_weights=v_weights,
    )


def _require_t0(panel, at_least=2):
    if panel.T0 < at_least:
        raise ValueError(f"need at least {at_least} pre-treatment periods, got {panel.T0}")


def fit_sc(panel: PanelData, tol: float = DEFAULT_TOL) -> WeightSolution:
    """Synthetic control weights using every pre-treatment outcome."""
    _require_t0(panel)
    rep = solve_simplex_qp(LsProblem(panel.y0_pre, panel.Y_pre), tol=tol)
    return _solution(rep.weights, "sc", rep.objective, rep)


def fit_demeaned_sc(panel: PanelData, tol: float = DEFAULT_TOL) -> WeightSolution:
    """Synthetic control on pre-period-demeaned outcomes, plus an intercept.

    Equivalent to adding a constant to the simplex regression. A common shift
    of the treated series cancels before demeaning, so the weights do not
    depend on the treated unit's level.
    """
    _require_t0(panel)
    y0 = panel.y0_pre
    anchor = y0[0]
    d0 = y0 - anchor
    d0_mean = d0.mean()
    Ybar = panel.Y_pre.mean(axis=0)
    rep = solve_simplex_qp(LsProblem(d0 - d0_mean, panel.Y_pre - Ybar), tol=tol)
    w = rep.weights
    intercept = float(anchor + d0_mean - Ybar @ w)
    return _solution(w, "sc_demeaned", rep.objective, rep, intercept=intercept)


def fit_ols(panel: PanelData, constraint: Regime | str = Regime.UNRESTRICTED) -> WeightSolution:
    """Least-squares weights without (``unrestricted``) or with (``adding_up``) sum-to-one."""
    constraint = Regime(constraint)
    if constraint is Regime.SIMPLEX:
        raise ValueError("use fit_sc for the simplex regime")
    name = "ols" if constraint is Regime.UNRESTRICTED else "ols_addup"
    if panel.T0 < panel.J:
        raise RankDeficientError(
            f"{name}: T0 >= J required (T0={panel.T0}, J={panel.J})"
        )
    p = LsProblem(panel.y0_pre, panel.Y_pre, constraint)
    try:
        rep = solve_ols(p) if constraint is Regime.UNRESTRICTED else solve_adding_up_ls(p)
    except RankDeficientError as exc:
        raise RankDeficientError(f"{name}: {exc}") from None
    return _solution(rep.weights, name, rep.objective, rep)


class LagSelector(str, enum.Enum):
    ALL_LAGS = "all_lags"
    FIRST_HALF_LAGS = "first_half_lags"
    MEAN_OF_LAGS = "mean_of_lags"


@dataclass(frozen=True)
class PredictorSpec:
    lag_selector: LagSelector = LagSelector.ALL_LAGS
    include_covariates: bool = False
    v_weights: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "lag_selector", LagSelector(self.lag_selector))
        if self.v_weights is not None:
            v = np.asarray(self.v_weights, dtype=np.float64)
            if (v < 0).any() or abs(v.sum() - 1.0) > 1e-10:
                raise ValueError("v_weights must be nonnegative and sum to one")
            object.__setattr__(self, "v_weights", v)


def build_predictors(panel: PanelData, spec: PredictorSpec) -> tuple[np.ndarray, np.ndarray]:
    """Predictor vector ``x0`` (R,) and matrix ``X1`` (R x J).

    Rows are the selected outcome lags (all, the earliest ``ceil(T0/2)``, or
    their mean) followed by one row per covariate.
    """
    y = panel.y[: panel.T0]
    sel = spec.lag_selector
    if sel is LagSelector.ALL_LAGS:
        block = y
    elif sel is LagSelector.FIRST_HALF_LAGS:
        block = y[: math.ceil(panel.T0 / 2)]
    else:
        block = y.mean(axis=0, keepdims=True)
    if spec.include_covariates:
        if panel.covariates is None:
            raise MissingCovariates("predictor spec asks for covariates but the panel has none")
        block = np.vstack([block, panel.covariates.T])
    return block[:, 0].copy(), block[:, 1:].copy()


def _softmax(u):
    e = np.exp(u - u.max())
    return e / e.sum()


def fit_sc_nested(panel: PanelData, spec: PredictorSpec, *, rng=None,
                  tol: float = DEFAULT_TOL, starts: int = 5,
                  max_evals: int = 500, step: float = 1.0,
                  search_max_iter: int = 2_000) -> WeightSolution:
    """Synthetic control with a predictor-weighting matrix ``V``.

    Inner problem: simplex weights minimising ``sum_r v_r (x0_r - X1_r w)^2``.
    Outer problem: the diagonal ``v`` (softmax of free reals) minimising the
    pre-treatment MSE over all lags. The outer search is Nelder-Mead from
    uniform ``v`` plus ``starts - 1`` perturbations drawn from ``rng``, each
    capped at ``max_evals`` evaluations.

    Extreme ``v`` make the inner problem badly conditioned, so inner solves
    during the search stop after ``search_max_iter`` Frank-Wolfe iterations.
    Only converged inner solves are candidates: an unfinished iterate is not
    ``w(v)`` for any ``v``, and letting it compete lets the search tune the
    solver path instead of ``v``. A converged capped solve is bit-identical
    to a full-budget one (same deterministic path). If no probe converged,
    the best probed ``v`` is re-solved with the full budget. A fixed
    ``spec.v_weights`` skips the search.
    """
    _require_t0(panel)
    x0, X1 = build_predictors(panel, spec)
    R = x0.shape[0]
    Y, y0 = panel.Y_pre, panel.y0_pre
    T0 = panel.T0
    G_all = Y.T @ Y / T0
    c_all = Y.T @ y0 / T0
    yy_all = float(y0 @ y0) / T0

    best = {"f": np.inf, "w": None, "v": None, "ok": False}
    fallback = {"f": np.inf, "v": None}

    def inner(v, max_iter=solver.DEFAULT_MAX_ITER):
        sv = np.sqrt(v)
        Xs = X1 * sv[:, None]
        xs = x0 * sv
        G = Xs.T @ Xs
        c = Xs.T @ xs
        yy = float(xs @ xs)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", solver.MaxIterExceeded)
            w, _, _, ok = simplex_qp_gram(G, c, yy, tol=tol, max_iter=max_iter)
        return w, ok

    def outer_mse(w):
        return float(w @ (G_all @ w) - 2.0 * (c_all @ w) + yy_all)

    def consider(w, v, ok):
        f = outer_mse(w)
        if ok and f < best["f"]:
            best.update(f=f, w=w, v=v, ok=True)
        elif not ok and f < fallback["f"]:
            fallback.update(f=f, v=v)
        return f

    def outer(u):
        v = _softmax(np.asarray(u, dtype=np.float64))
        w, ok = inner(v, search_max_iter)
        f = consider(w, v, ok)
        return f if np.isfinite(f) else np.inf

    if spec.v_weights is not None:
        if spec.v_weights.shape != (R,):
            raise ValueError(f"v_weights has length {spec.v_weights.shape[0]}, expected {R}")
        v = spec.v_weights
        w, ok = inner(v)
        best.update(w=w, v=v, ok=ok)
    else:
        if rng is None:
            rng = np.random.Generator(np.random.Philox(0))
        u_starts = [np.zeros(R)] + [rng.standard_normal(R) for _ in range(starts - 1)]
        for u0 in u_starts:
            if R == 1:
                outer(u0)
                continue
            simplex0 = np.vstack([u0, u0 + step * np.eye(R)])
            minimize(outer, u0, method="Nelder-Mead",
                     options={"maxfev": max_evals, "initial_simplex": simplex0,
                              "xatol": 1e-6, "fatol": 1e-12})
        if best["w"] is None and fallback["v"] is not None:
            v = fallback["v"]
            w, ok = inner(v)
            best.update(f=outer_mse(w), w=w, v=v, ok=ok)
        if best["w"] is None or not np.isfinite(best["f"]):
            warnings.warn("outer V search found no finite objective", OuterSearchFailed,
                          stacklevel=2)
            v = np.full(R, 1.0 / R)
            w, ok = inner(v)
            best.update(w=w, v=v, ok=False)

    w = best["w"]
    p = LsProblem(y0, Y)
    rep = SolveReport(
        weights=w,
        objective=solver.objective(p, w),
        kkt_gap=solver.kkt_gap(p, w) if p.J > 1 else 0.0,
        iterations=0,
        converged=bool(best["ok"]),
        regime=Regime.SIMPLEX,
    )
    name = {
        LagSelector.FIRST_HALF_LAGS: "sc_nested_halflags",
        LagSelector.MEAN_OF_LAGS: "sc_nested_mean",
    }.get(spec.lag_selector, "sc_nested")
    return _solution(w, name, rep.objective, rep, v_weights=best["v"])


def treatment_effects(panel: PanelData, w: WeightSolution) -> np.ndarray:
    """``y0_t - y_t'w - intercept`` for each post-treatment period."""
    weights = np.asarray(w.weights)
    if weights.shape != (panel.J,):
        raise ValueError(f"expected {panel.J} weights, got {weights.shape}")
    alpha = panel.y0_post - panel.Y_post @ weights
    if w.intercept is not None:
        alpha = alpha - w.intercept
    return alpha


NESTED_SPECS = {
    "sc_nested_halflags": PredictorSpec(LagSelector.FIRST_HALF_LAGS, include_covariates=True),
    "sc_nested_mean": PredictorSpec(LagSelector.MEAN_OF_LAGS, include_covariates=True),
}

ESTIMATORS = ("sc", "sc_demeaned", "ols", "ols_addup", *NESTED_SPECS)


def fit(panel: PanelData, estimator: str, *, tol: float = DEFAULT_TOL, rng=None) -> WeightSolution:
    """Fit the estimator named by its stable id (see ``ESTIMATORS``)."""
    if estimator == "sc":
        return fit_sc(panel, tol=tol)
    if estimator == "sc_demeaned":
        return fit_demeaned_sc(panel, tol=tol)
    if estimator == "ols":
        return fit_ols(panel, Regime.UNRESTRICTED)
    if estimator == "ols_addup":
        return fit_ols(panel, Regime.ADDING_UP)
    if estimator in NESTED_SPECS:
        return fit_sc_nested(panel, NESTED_SPECS[estimator], rng=rng, tol=tol)
    raise KeyError(f"unknown estimator {estimator!r}; choose from {', '.join(ESTIMATORS)}")
