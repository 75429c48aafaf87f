"""Panel simulation from a linear factor model.

Untreated outcomes follow ``y_it = lambda_t mu_i + theta_t z_i + eps_it``; the
treated unit (column 0) adds ``alpha_t`` in post-treatment periods. Common
factors are independent stationary AR(1) processes.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np


class DimensionMismatch(ValueError):
    pass


class InvalidScenario(ValueError):
    pass


# Stream ids for the per-replication generators.
PANEL_STREAM = 0
OUTER_SEARCH_STREAM = 1


def replication_rng(seed: int, rep: int, stream: int = PANEL_STREAM) -> np.random.Generator:
    """Counter-based generator keyed by ``(seed, rep, stream)``.

    Philox keyed through ``SeedSequence`` spawn keys, so streams for distinct
    replications never share state and can be produced in any order.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(rep), int(stream)))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class Covariates:
    Z: np.ndarray  # (J+1) x q, row 0 is the treated unit
    theta_sd: np.ndarray  # length q


@dataclass(frozen=True)
class FactorModelConfig:
    loadings: np.ndarray  # (J+1) x F
    shock_sd: np.ndarray  # length J+1
    T0: int
    T1: int
    ar_coefficient: float | np.ndarray = 0.0
    factor_variance: float = 1.0
    covariates: Covariates | None = None
    treatment_effects: np.ndarray | None = None

    def __post_init__(self):
        M = np.atleast_2d(np.asarray(self.loadings, dtype=np.float64))
        sd = np.asarray(self.shock_sd, dtype=np.float64)
        if sd.ndim == 0:
            sd = np.full(M.shape[0], float(sd))
        if sd.shape != (M.shape[0],):
            raise DimensionMismatch(
                f"shock_sd has shape {sd.shape}, expected ({M.shape[0]},)"
            )
        if not np.isfinite(M).all():
            raise ValueError("loadings must be finite")
        if (sd < 0).any():
            raise ValueError("shock_sd must be nonnegative")
        ar = np.broadcast_to(np.asarray(self.ar_coefficient, dtype=np.float64),
                             (M.shape[1],)).copy()
        if (np.abs(ar) >= 1).any():
            raise ValueError("AR coefficients must lie in (-1, 1)")
        if not self.factor_variance > 0:
            raise ValueError("factor_variance must be positive")
        if self.T0 < 1 or self.T1 < 0:
            raise ValueError("need T0 >= 1 and T1 >= 0")
        alpha = (np.zeros(self.T1) if self.treatment_effects is None
                 else np.asarray(self.treatment_effects, dtype=np.float64))
        if alpha.shape != (self.T1,):
            raise DimensionMismatch(
                f"treatment_effects has shape {alpha.shape}, expected ({self.T1},)"
            )
        if self.covariates is not None:
            Z = np.atleast_2d(np.asarray(self.covariates.Z, dtype=np.float64))
            th = np.atleast_1d(np.asarray(self.covariates.theta_sd, dtype=np.float64))
            if Z.shape[0] != M.shape[0] or Z.shape[1] < 1 or th.shape != (Z.shape[1],):
                raise DimensionMismatch(
                    f"covariates Z {Z.shape} / theta_sd {th.shape} do not match "
                    f"{M.shape[0]} units"
                )
            object.__setattr__(self, "covariates", Covariates(Z, th))
        object.__setattr__(self, "loadings", M)
        object.__setattr__(self, "shock_sd", sd)
        object.__setattr__(self, "ar_coefficient", ar)
        object.__setattr__(self, "treatment_effects", alpha)

    @property
    def F(self) -> int:
        return self.loadings.shape[1]

    @property
    def J(self) -> int:
        return self.loadings.shape[0] - 1


@dataclass(frozen=True)
class FactorModelTruth:
    factors: np.ndarray  # T x F
    shocks: np.ndarray  # T x (J+1)
    config: FactorModelConfig
    theta: np.ndarray | None = None  # T x q


@dataclass(frozen=True)
class PanelData:
    """Observed outcomes; column 0 is the treated unit, rows are periods."""

    y: np.ndarray
    T0: int
    T1: int
    covariates: np.ndarray | None = None  # (J+1) x q
    unit_names: tuple[str, ...] | None = None
    times: tuple[str, ...] | None = None

    def __post_init__(self):
        y = np.asarray(self.y, dtype=np.float64)
        if y.ndim != 2 or y.shape[1] < 2:
            raise DimensionMismatch("y must be T x (J+1) with J >= 1")
        if y.shape[0] != self.T0 + self.T1:
            raise DimensionMismatch(
                f"y has {y.shape[0]} rows, expected T0 + T1 = {self.T0 + self.T1}"
            )
        if not np.isfinite(y).all():
            raise ValueError("panel outcomes must be finite")
        object.__setattr__(self, "y", y)
        if self.covariates is not None:
            Z = np.atleast_2d(np.asarray(self.covariates, dtype=np.float64))
            if Z.shape[0] != y.shape[1]:
                raise DimensionMismatch(
                    f"covariates have {Z.shape[0]} rows for {y.shape[1]} units"
                )
            object.__setattr__(self, "covariates", Z)

    @property
    def J(self) -> int:
        return self.y.shape[1] - 1

    @property
    def y0_pre(self) -> np.ndarray:
        return self.y[: self.T0, 0]

    @property
    def Y_pre(self) -> np.ndarray:
        return self.y[: self.T0, 1:]

    @property
    def y0_post(self) -> np.ndarray:
        return self.y[self.T0:, 0]

    @property
    def Y_post(self) -> np.ndarray:
        return self.y[self.T0:, 1:]


def simulate_ar1_factors(F, ar, var, length, rng) -> np.ndarray:
    """``length x F`` matrix of independent stationary AR(1) paths.

    Each path starts from ``N(0, var)`` and has innovation variance
    ``var * (1 - ar**2)``, so every period has variance ``var``.
    """
    ar = np.broadcast_to(np.asarray(ar, dtype=np.float64), (F,))
    if (np.abs(ar) >= 1).any():
        raise ValueError("AR coefficients must lie in (-1, 1)")
    if not var > 0:
        raise ValueError("var must be positive")
    out = np.empty((length, F))
    if length == 0:
        return out
    sd = np.sqrt(var)
    out[0] = sd * rng.standard_normal(F)
    innov = (sd * np.sqrt(1.0 - ar**2)) * rng.standard_normal((length - 1, F))
    for t in range(1, length):
        out[t] = ar * out[t - 1] + innov[t - 1]
    return out


def simulate_panel(cfg: FactorModelConfig, rng) -> tuple[PanelData, FactorModelTruth]:
    """Draw one panel. Factors, covariate effects and shocks are drawn in that order."""
    T = cfg.T0 + cfg.T1
    lam = simulate_ar1_factors(cfg.F, cfg.ar_coefficient, cfg.factor_variance, T, rng)
    theta = None
    y = lam @ cfg.loadings.T
    Z = None
    if cfg.covariates is not None:
        Z = cfg.covariates.Z
        theta = rng.standard_normal((T, Z.shape[1])) * cfg.covariates.theta_sd
        y = y + theta @ Z.T
    eps = rng.standard_normal((T, cfg.J + 1)) * cfg.shock_sd
    y = y + eps
    y[cfg.T0:, 0] += cfg.treatment_effects
    panel = PanelData(y=y, T0=cfg.T0, T1=cfg.T1, covariates=Z)
    return panel, FactorModelTruth(factors=lam, shocks=eps, config=cfg, theta=theta)


class ScenarioKind(str, enum.Enum):
    TWO_FACTOR_GROUPS = "two_factor_groups"
    TWO_FACTOR_COVARIATES = "two_factor_covariates"
    SIMPLE_EXAMPLE_F1 = "simple_example_f1"


@dataclass(frozen=True)
class ScenarioConfig:
    """One Monte Carlo design.

    ``t0_rule`` is ``"J+5"``, ``"2J"`` or a positive integer (explicit T0).
    """

    kind: ScenarioKind
    J: int
    t0_rule: str | int = "2J"
    seed: int = 0
    replications: int = 1000
    estimators: tuple[str, ...] = ("sc",)
    sigma: float = 1.0
    T1: int = 1
    name: str = ""
    extra: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        try:
            kind = ScenarioKind(self.kind)
        except ValueError:
            raise InvalidScenario(f"unknown scenario kind {self.kind!r}") from None
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "estimators", tuple(self.estimators))
        rule = self.t0_rule
        if isinstance(rule, str) and rule.strip().lstrip("+").isdigit():
            rule = int(rule)
        if isinstance(rule, str):
            rule = rule.replace(" ", "").upper().replace("*", "")
            if rule not in ("J+5", "2J"):
                raise InvalidScenario(f"unknown t0_rule {self.t0_rule!r}")
        elif rule < 1:
            raise InvalidScenario("explicit T0 must be positive")
        object.__setattr__(self, "t0_rule", rule)
        if self.J < 1:
            raise InvalidScenario("J must be positive")
        if kind is ScenarioKind.TWO_FACTOR_GROUPS and self.J % 2:
            raise InvalidScenario("two_factor_groups needs an even J")
        if kind is ScenarioKind.TWO_FACTOR_COVARIATES and self.J % 4:
            raise InvalidScenario("two_factor_covariates needs J divisible by 4")
        if self.replications < 1:
            raise InvalidScenario("replications must be positive")
        if self.T1 < 1:
            raise InvalidScenario("T1 must be at least 1")
        if not self.sigma >= 0:
            raise InvalidScenario("sigma must be nonnegative")

    @property
    def T0(self) -> int:
        if self.t0_rule == "J+5":
            return self.J + 5
        if self.t0_rule == "2J":
            return 2 * self.J
        return int(self.t0_rule)

    @property
    def panel_label(self) -> str | None:
        """Table panel implied by the T0 rule: ``"A"`` for J+5, ``"B"`` for 2J."""
        return {"J+5": "A", "2J": "B"}.get(self.t0_rule)


def scenario_model(s: ScenarioConfig) -> FactorModelConfig:
    J = s.J
    if s.kind is ScenarioKind.SIMPLE_EXAMPLE_F1:
        # Factor is iid N(0, 1) in the F = 1 example.
        return FactorModelConfig(
            loadings=np.ones((J + 1, 1)),
            shock_sd=np.full(J + 1, s.sigma),
            T0=s.T0, T1=s.T1, ar_coefficient=0.0, factor_variance=1.0,
        )
    M = np.zeros((J + 1, 2))
    M[0] = (1.0, 0.0)
    covariates = None
    if s.kind is ScenarioKind.TWO_FACTOR_GROUPS:
        half = J // 2
        M[1: half + 1, 0] = 1.0
        M[half + 1:, 1] = 1.0
    else:
        q = J // 4
        Z = np.zeros((J + 1, 2))
        Z[0] = (1.0, 0.0)
        # Groups of q controls: (mu, z) in {(1,0),(0,1)} x {(1,0),(0,1)}.
        for g, (mu_i, z_i) in enumerate([(0, 0), (0, 1), (1, 0), (1, 1)]):
            rows = slice(1 + g * q, 1 + (g + 1) * q)
            M[rows, mu_i] = 1.0
            Z[rows, z_i] = 1.0
        covariates = Covariates(Z=Z, theta_sd=np.ones(2))
    return FactorModelConfig(
        loadings=M, shock_sd=np.full(J + 1, s.sigma), T0=s.T0, T1=s.T1,
        ar_coefficient=0.5, factor_variance=1.0, covariates=covariates,
    )


def make_scenario_panel(s: ScenarioConfig, rep_index: int) -> tuple[PanelData, FactorModelTruth]:
    """Replication ``rep_index`` of scenario ``s``; a pure function of both."""
    if rep_index < 0:
        raise InvalidScenario("rep_index must be nonnegative")
    return simulate_panel(scenario_model(s), replication_rng(s.seed, rep_index))
