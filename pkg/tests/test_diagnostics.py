import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from syncon import estimators as E
from syncon.dgp import (
    DimensionMismatch,
    FactorModelConfig,
    ScenarioConfig,
    make_scenario_panel,
    replication_rng,
    simulate_panel,
)
from syncon.diagnostics import assumption_diagnostics, error_decomposition, implied_loadings


def _groups(J=10, t0_rule="J+5", seed=0, rep=0):
    return make_scenario_panel(ScenarioConfig(kind="two_factor_groups", J=J, t0_rule=t0_rule,
                                              seed=seed), rep)


def test_vertex_picks_unit_loadings():
    _, truth = _groups()
    for j in (1, 7):
        w = np.eye(10)[j - 1]
        d = implied_loadings(w, truth)
        np.testing.assert_array_equal(d.implied_mu, truth.config.loadings[j])


def test_uniform_weights_split_the_groups():
    _, truth = _groups()
    d = implied_loadings(np.full(10, 0.1), truth)
    np.testing.assert_allclose(d.implied_mu, [0.5, 0.5], atol=1e-15)
    np.testing.assert_allclose(d.mu_error, [-0.5, 0.5], atol=1e-15)
    assert d.implied_z is None
    assert np.isnan(d.pre_mse)


def test_solution_fields_carried_over():
    panel, truth = _groups()
    sol = E.fit_sc(panel)
    d = implied_loadings(sol, truth)
    assert d.pre_mse == sol.pre_mse
    assert d.weight_l2 == pytest.approx(sol.l2_norm)
    assert d.weight_l1 == pytest.approx(1.0)


def test_covariate_loadings():
    s = ScenarioConfig(kind="two_factor_covariates", J=8, seed=1)
    _, truth = make_scenario_panel(s, 0)
    d = implied_loadings(np.full(8, 1 / 8), truth)
    np.testing.assert_allclose(d.implied_z, [0.5, 0.5])


def test_wrong_weight_length():
    _, truth = _groups()
    with pytest.raises(DimensionMismatch):
        implied_loadings(np.ones(9) / 9, truth)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0, 1))
def test_prop_implied_loadings_linear(seed, t):
    _, truth = _groups(seed=seed % 1000)
    rng = np.random.default_rng(seed)
    a, b = rng.dirichlet(np.ones(10)), rng.dirichlet(np.ones(10))
    da, db = implied_loadings(a, truth), implied_loadings(b, truth)
    dm = implied_loadings(t * a + (1 - t) * b, truth)
    np.testing.assert_allclose(dm.implied_mu, t * da.implied_mu + (1 - t) * db.implied_mu,
                               atol=1e-14)


def test_mean_implied_loading_panel_a_j10():
    # 200 reps; the published figure is 0.817 with sd 0.156 over 5000
    s = ScenarioConfig(kind="two_factor_groups", J=10, t0_rule="J+5", seed=31)
    mu = []
    for rep in range(200):
        panel, truth = make_scenario_panel(s, rep)
        mu.append(implied_loadings(E.fit_sc(panel), truth).implied_mu[0])
    assert abs(np.mean(mu) - 0.817) < 4 * 0.156 / np.sqrt(200)
    assert np.std(mu, ddof=1) == pytest.approx(0.156, rel=0.2)


# --- assumption diagnostics ---------------------------------------------------


def _one_factor(J, T0, sd=1.0):
    return FactorModelConfig(loadings=np.ones((J + 1, 1)), shock_sd=sd, T0=T0, T1=1,
                             ar_coefficient=0.5)


def test_zero_shocks():
    _, truth = simulate_panel(_one_factor(5, 20, sd=0.0), replication_rng(0, 0))
    d = assumption_diagnostics(truth)
    assert d.max_eps0_epsj_corr == 0 and d.max_lambda_eps_corr == 0
    assert d.min_eps_sq == 0 and d.max_cross_eps_corr == 0


def test_min_eps_sq_band():
    # A 10^4-rep pilot put the 0.1% quantile at 0.53 and the minimum at 0.46,
    # so the band holds with high probability, not always.
    cfg = _one_factor(50, 100)
    vals = np.array([assumption_diagnostics(simulate_panel(cfg, replication_rng(41, r))[1]).min_eps_sq
                     for r in range(300)])
    assert np.mean((vals > 0.5) & (vals < 1.5)) >= 0.99
    assert (vals > 0).all()


def test_statistics_shrink_with_t0():
    # pilot medians: 0.249 at T0=100, 0.124 at T0=400
    med = {}
    for T0 in (100, 400):
        cfg = _one_factor(50, T0)
        med[T0] = np.median([
            assumption_diagnostics(simulate_panel(cfg, replication_rng(42, r))[1]).max_eps0_epsj_corr
            for r in range(200)])
    assert med[400] < med[100]


def test_diagnostics_match_definitions():
    _, truth = simulate_panel(_one_factor(4, 30), replication_rng(43, 0))
    d = assumption_diagnostics(truth)
    e = truth.shocks[:30]
    lam = truth.factors[:30, 0]
    J = 4
    assert d.max_eps0_epsj_corr == pytest.approx(max(abs(e[:, 0] @ e[:, j]) / 30 for j in range(1, J + 1)))
    assert d.max_lambda_eps_corr == pytest.approx(max(abs(lam @ e[:, j]) / 30 for j in range(1, J + 1)))
    assert d.min_eps_sq == pytest.approx(min(e[:, j] @ e[:, j] / 30 for j in range(1, J + 1)))
    assert d.max_cross_eps_corr == pytest.approx(
        max(abs(e[:, i] @ e[:, j]) / 30 for i in range(1, J + 1) for j in range(1, J + 1) if i != j))


def test_diagnostics_need_two_periods():
    _, truth = simulate_panel(_one_factor(3, 1), replication_rng(44, 0))
    with pytest.raises(ValueError):
        assumption_diagnostics(truth)


# --- error decomposition -------------------------------------------------------


def _check_identity(panel, truth, sol):
    alpha_hat = E.treatment_effects(panel, sol)
    alpha = truth.config.treatment_effects
    for k in range(panel.T1):
        parts = error_decomposition(sol, truth, panel.T0 + k)
        assert sum(parts.values()) == pytest.approx(alpha_hat[k] - alpha[k], abs=1e-10)


def test_perfect_loadings_zero_shocks():
    cfg = FactorModelConfig(loadings=np.ones((4, 1)), shock_sd=0.0, T0=6, T1=1)
    panel, truth = simulate_panel(cfg, replication_rng(45, 0))
    parts = error_decomposition(np.full(3, 1 / 3), truth, 6)
    assert all(abs(v) < 1e-15 for v in parts.values())


@pytest.mark.parametrize("name", ["sc", "sc_demeaned", "ols", "ols_addup"])
def test_decomposition_identity(name):
    s = ScenarioConfig(kind="two_factor_groups", J=10, t0_rule="2J", seed=46, T1=3)
    for rep in range(10):
        panel, truth = make_scenario_panel(s, rep)
        _check_identity(panel, truth, E.fit(panel, name))


def test_decomposition_identity_with_covariates_and_effects():
    s = ScenarioConfig(kind="two_factor_covariates", J=8, t0_rule=20, seed=47, T1=2)
    panel, truth = make_scenario_panel(s, 0)
    sol = E.fit(panel, "sc_nested_mean", rng=replication_rng(47, 0, 1))
    _check_identity(panel, truth, sol)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([4, 10, 20]))
def test_prop_decomposition_identity(seed, J):
    s = ScenarioConfig(kind="two_factor_groups", J=J, t0_rule="J+5", seed=seed)
    panel, truth = make_scenario_panel(s, 0)
    _check_identity(panel, truth, E.fit_sc(panel))


def test_decomposition_rejects_pre_period():
    panel, truth = _groups()
    with pytest.raises(ValueError):
        error_decomposition(E.fit_sc(panel), truth, 0)


def test_components_small_at_j100():
    # pilot (500 reps): mean |factor_gap| 0.064, mean |weighted_shock| 0.214,
    # sd(own shock)/3 = 0.346
    s = ScenarioConfig(kind="two_factor_groups", J=100, t0_rule="2J", seed=48)
    fg, ws, own = [], [], []
    for rep in range(150):
        panel, truth = make_scenario_panel(s, rep)
        d = error_decomposition(E.fit_sc(panel), truth, panel.T0)
        fg.append(abs(d["factor_gap"]))
        ws.append(abs(d["weighted_shock"]))
        own.append(d["own_shock"])
    bound = np.std(own, ddof=1) / 3
    assert np.mean(fg) < bound and np.mean(ws) < bound
