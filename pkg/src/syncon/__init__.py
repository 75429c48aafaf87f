"""Synthetic control estimation under a linear factor model.

Subpackages follow the workflow: ``solver`` (least-squares kernels),
``dgp`` (panel simulation), ``estimators`` (weight estimators),
``diagnostics`` (ground-truth checks), ``montecarlo`` (replication engine)
and ``cli_io`` / ``cli`` (files and command line).
"""
__version__ = "0.1.0"

from .dgp import FactorModelConfig, PanelData, ScenarioConfig, make_scenario_panel, simulate_panel
from .estimators import fit, fit_demeaned_sc, fit_ols, fit_sc, fit_sc_nested, treatment_effects
from .solver import BACKEND, LsProblem, Regime, solve_simplex_qp

__all__ = [
    "BACKEND", "FactorModelConfig", "LsProblem", "PanelData", "Regime", "ScenarioConfig",
    "fit", "fit_demeaned_sc", "fit_ols", "fit_sc", "fit_sc_nested", "make_scenario_panel",
    "simulate_panel", "solve_simplex_qp", "treatment_effects",
]
