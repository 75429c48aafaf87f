"""Ground-truth diagnostics for simulated panels.

These need the simulated loadings, factors and shocks, so they apply only to
panels drawn by :mod:`syncon.dgp`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dgp import DimensionMismatch, FactorModelTruth
from .estimators import WeightSolution


@dataclass(frozen=True)
class LoadingDiagnostics:
    implied_mu: np.ndarray
    mu_error: np.ndarray
    weight_l1: float
    weight_l2: float
    pre_mse: float
    implied_z: np.ndarray | None = None


@dataclass(frozen=True)
class AssumptionDiagnostics:
    max_eps0_epsj_corr: float
    max_lambda_eps_corr: float
    min_eps_sq: float
    max_cross_eps_corr: float


def _weights(w):
    return np.asarray(w.weights if isinstance(w, WeightSolution) else w, dtype=np.float64)


def implied_loadings(w: WeightSolution, truth: FactorModelTruth) -> LoadingDiagnostics:
    """Loadings of the synthetic unit, ``M_J' w`` (and ``Z_J' w`` with covariates)."""
    weights = _weights(w)
    cfg = truth.config
    M = cfg.loadings
    if weights.shape != (M.shape[0] - 1,):
        raise DimensionMismatch(
            f"{weights.shape[0]} weights for {M.shape[0] - 1} control units"
        )
    mu = M[1:].T @ weights
    z = None
    if cfg.covariates is not None:
        z = cfg.covariates.Z[1:].T @ weights
    if isinstance(w, WeightSolution):
        pre_mse = w.pre_mse
    else:
        pre_mse = float("nan")
    return LoadingDiagnostics(
        implied_mu=mu,
        mu_error=mu - M[0],
        weight_l1=float(np.abs(weights).sum()),
        weight_l2=float(np.sqrt(weights @ weights)),
        pre_mse=pre_mse,
        implied_z=z,
    )


def assumption_diagnostics(truth: FactorModelTruth) -> AssumptionDiagnostics:
    """Pre-period sample moments of shocks and factors.

    Returns ``max_j |mean(eps_0 eps_j)|``, ``max_{f,j} |mean(lambda_f eps_j)|``,
    ``min_j mean(eps_j^2)`` and ``max_{i != j} |mean(eps_i eps_j)|`` over
    controls ``j`` and the first ``T0`` periods.
    """
    T0 = truth.config.T0
    if T0 < 2:
        raise ValueError("need at least two pre-treatment periods")
    eps = truth.shocks[:T0]
    lam = truth.factors[:T0]
    e0, E = eps[:, 0], eps[:, 1:]
    J = E.shape[1]
    cross = E.T @ E / T0
    off = np.abs(cross[~np.eye(J, dtype=bool)])
    return AssumptionDiagnostics(
        max_eps0_epsj_corr=float(np.max(np.abs(e0 @ E)) / T0),
        max_lambda_eps_corr=float(np.max(np.abs(lam.T @ E)) / T0),
        min_eps_sq=float(np.min(np.diag(cross))),
        max_cross_eps_corr=float(off.max()) if off.size else 0.0,
    )


def error_decomposition(w: WeightSolution, truth: FactorModelTruth, t: int) -> dict[str, float]:
    """Split the effect-estimation error at absolute period ``t`` into three parts.

    ``factor_gap`` is the common-component mismatch
    ``lambda_t(mu_0 - mu_hat) + theta_t(z_0 - z_hat) - intercept``,
    ``own_shock`` is ``eps_0t`` and ``weighted_shock`` is ``-eps_t'w``. The
    three sum to ``alpha_hat_t - alpha_t``.
    """
    cfg = truth.config
    if not cfg.T0 <= t < cfg.T0 + cfg.T1:
        raise ValueError(f"period {t} is not post-treatment")
    weights = _weights(w)
    M = cfg.loadings
    gap = truth.factors[t] @ (M[0] - M[1:].T @ weights)
    if cfg.covariates is not None:
        Z = cfg.covariates.Z
        gap += truth.theta[t] @ (Z[0] - Z[1:].T @ weights)
    intercept = getattr(w, "intercept", None)
    if intercept is not None:
        gap -= intercept
    return {
        "factor_gap": float(gap),
        "own_shock": float(truth.shocks[t, 0]),
        "weighted_shock": float(-(truth.shocks[t, 1:] @ weights)),
    }
