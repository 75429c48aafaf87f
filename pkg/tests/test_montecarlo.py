import dataclasses
import json
import math

import numpy as np
import pytest

from syncon import cli_io, montecarlo as mc
from syncon.dgp import ScenarioConfig

from .mc_cache import bundled


def _s(**kw):
    base = dict(kind="two_factor_groups", J=10, t0_rule="J+5", seed=5, replications=20,
                estimators=("sc",))
    base.update(kw)
    return ScenarioConfig(**base)


def test_single_estimator_single_entry():
    out = mc.run_replication(_s(), 0)
    assert list(out) == ["sc"]
    assert out["sc"].ok


def test_replication_is_deterministic():
    a = mc.run_replication(_s(estimators=("sc", "ols", "sc_demeaned")), 3)
    b = mc.run_replication(_s(estimators=("sc", "ols", "sc_demeaned")), 3)
    for k in a:
        assert a[k].solution.weights.tobytes() == b[k].solution.weights.tobytes()
        assert a[k].alpha_hat.tobytes() == b[k].alpha_hat.tobytes()


def test_ols_failure_recorded_and_run_continues():
    s = _s(J=10, t0_rule=6, estimators=("ols", "sc"))
    out = mc.run_replication(s, 0)
    assert not out["ols"].ok and "RankDeficientError" in out["ols"].error
    assert "T0 >= J required" in out["ols"].error
    assert out["sc"].ok
    summary = mc.run_mc(s)
    e = summary.per_estimator["ols"]
    assert e.successes == 0 and e.failures == 20
    assert summary.per_estimator["sc"].successes == 20


def test_all_failed_raises():
    with pytest.raises(mc.AllReplicationsFailed, match="T0 >= J required"):
        mc.run_mc(_s(J=10, t0_rule=6, estimators=("ols",)))


def test_needs_two_replications():
    with pytest.raises(ValueError):
        mc.run_mc(_s(replications=1))


def test_degenerate_spread_is_zero():
    s = ScenarioConfig(kind="simple_example_f1", J=2, t0_rule=5, sigma=0.0, replications=2,
                       estimators=("sc",), seed=6)
    e = mc.run_mc(s).per_estimator["sc"]
    assert e.sd_alpha1 == 0.0 and e.mean_alpha1 == 0.0


def test_summary_invariants():
    s = _s(estimators=("sc", "ols", "ols_addup"), replications=30)
    summary = mc.run_mc(s)
    for e in summary.per_estimator.values():
        assert e.failures + e.successes == s.replications
        assert min(e.sd_mu) >= 0 and e.sd_alpha1 >= 0
        assert e.mean_z is None


def test_summary_matches_manual_reduction():
    s = _s(replications=15)
    summary = mc.run_mc(s)
    alpha = [mc.run_replication(s, r)["sc"].alpha_hat[0] for r in range(15)]
    e = summary.per_estimator["sc"]
    assert e.sd_alpha1 == pytest.approx(np.std(alpha, ddof=1), rel=1e-12)
    assert e.mean_alpha1 == pytest.approx(np.mean(alpha), rel=1e-12, abs=1e-15)


def test_parallelism_does_not_change_bytes():
    s = _s(kind="two_factor_covariates", J=8, t0_rule=16, replications=12,
           estimators=("sc", "ols_addup", "sc_nested_mean"))
    one = cli_io.dump_json(cli_io.summary_document(mc.run_mc(s, parallelism=1)))
    eight = cli_io.dump_json(cli_io.summary_document(mc.run_mc(s, parallelism=8)))
    assert one == eight


# --- variance law -----------------------------------------------------------------


def test_simple_example_argument_checks():
    with pytest.raises(ValueError):
        mc.simple_example_variance(1.0, 10)
    with pytest.raises(ValueError):
        mc.simple_example_variance(0.0, 10)


def test_simple_example_near_zero_ratio():
    out = mc.simple_example_variance(0.0, 20, reps=2000, seed=7302, T0=2000)
    assert out["predicted"] == 1.0
    assert out["sd_alpha"] == pytest.approx(1.0, rel=0.05)


def test_simple_example_finite_sample_agreement():
    # independent check: exact OLS prediction variance sigma^2 (T0-1)/(T0-J-1)
    # for iid normal regressors gives 1.4178 at (T0=200, J=100)
    out = mc.simple_example_variance(0.5, 100, reps=2000, seed=7303)
    assert out["T0"] == 200
    finite = math.sqrt(199 / 99)
    assert out["sd_alpha"] == pytest.approx(finite, rel=0.05)


# --- trend properties -----------------------------------------------------------


def test_sc_weight_dilution_trend():
    l2 = [bundled(f"table1_panelB_J{J}.cfg", 500, ("sc",)).per_estimator["sc"].mean_l2
          for J in (10, 50, 100)]
    assert l2[0] > l2[1] > l2[2]


def test_ols_bias_decay_and_variance_blowup():
    runs = [bundled(f"table1_panelA_J{J}.cfg", 3000, ("sc", "ols")) for J in (4, 10, 50, 100)]
    bias = [abs(r.per_estimator["ols"].mean_mu[0] - 1) for r in runs]
    sd_ols = [r.per_estimator["ols"].sd_alpha1 for r in runs]
    sd_sc = [r.per_estimator["sc"].sd_alpha1 for r in runs]
    assert all(a > b for a, b in zip(bias, bias[1:]))
    assert all(a < b for a, b in zip(sd_ols, sd_ols[1:]))
    assert all(a > b for a, b in zip(sd_sc, sd_sc[1:]))
    assert sd_sc[-1] > 1.0


# --- reference tables -------------------------------------------------------------


def _reference_from_summary(summary, tol=0.01):
    records = []
    s = summary.scenario
    for name, e in summary.per_estimator.items():
        for stat in ("mean_mu1", "mean_mu2", "sd_mu1", "sd_alpha"):
            records.append(mc.ReferenceRecord(s.panel_label, name, s.J, stat,
                                              mc.summary_statistic(e, stat), tol))
    return mc.ReferenceTable.from_records(records)


def test_reference_equal_to_summary_passes():
    summary = mc.run_mc(_s(estimators=("sc", "ols")))
    report = mc.compare_to_reference(summary, _reference_from_summary(summary))
    assert report.all_passed and report.max_deviation == 0.0
    assert len(report.cells) == 8


def test_one_cell_off_by_ten_tolerances():
    summary = mc.run_mc(_s(estimators=("sc", "ols")))
    ref = _reference_from_summary(summary)
    key = ("A", "ols", 10, "sd_alpha")
    rec = ref[key]
    ref[key] = dataclasses.replace(rec, value=rec.value + 10 * rec.tolerance)
    report = mc.compare_to_reference(summary, ref)
    assert [c.record.key for c in report.failures] == [key]
    assert report.worst(1)[0].record.key == key
    assert "FAIL" in report.format_table()


def test_reference_text_roundtrip():
    summary = mc.run_mc(_s())
    ref = _reference_from_summary(summary)
    again = mc.parse_reference(mc.format_reference(ref))
    assert again == ref


def test_reference_parse_errors():
    with pytest.raises(ValueError, match="line 2"):
        mc.parse_reference("# c\nA,sc,10,mean_mu1,0.8\n")
    with pytest.raises(ValueError, match="line 1"):
        mc.parse_reference("A,sc,ten,mean_mu1,0.8,0.01\n")


def test_missing_reference_cells():
    summary = mc.run_mc(_s(J=6))
    with pytest.raises(mc.MissingReferenceCell):
        mc.compare_to_reference(summary, mc.load_reference(cli_io.bundled_path("table1.ref", ".")))
    with pytest.raises(mc.MissingReferenceCell):
        mc.compare_to_reference(mc.run_mc(_s(t0_rule=20)), mc.ReferenceTable())
    with pytest.raises(mc.MissingReferenceCell):
        mc.summary_statistic(summary.per_estimator["sc"], "mean_z1")
    with pytest.raises(mc.MissingReferenceCell):
        mc.summary_statistic(summary.per_estimator["sc"], "median_mu1")


def test_unreferenced_estimators_listed():
    summary = mc.run_mc(_s(estimators=("sc", "sc_demeaned")))
    report = mc.compare_to_reference(summary, mc.load_reference(cli_io.bundled_path("table1.ref", ".")))
    assert report.unreferenced == ["sc_demeaned"]


def test_shipped_table1_key_coverage():
    ref = mc.load_reference(cli_io.bundled_path("table1.ref", "."))
    keys = {(p, e, J, st) for (p, e, J, st) in ref}
    assert len(ref) == 120
    assert {k[0] for k in keys} == {"A", "B"}
    assert {k[1] for k in keys} == {"sc", "ols", "ols_addup"}
    assert {k[2] for k in keys} == {4, 10, 50, 100}
    assert {k[3] for k in keys} == {"mean_mu1", "mean_mu2", "sd_mu1", "sd_mu2", "sd_alpha"}
    assert all(r.tolerance > 0 for r in ref.values())


@pytest.mark.parametrize("key,value", [
    (("B", "sc", 100, "mean_mu1"), 0.944),
    (("B", "sc", 100, "sd_alpha"), 1.047),
    (("A", "ols", 4, "mean_mu1"), 0.653),
    (("A", "ols", 4, "mean_mu2"), -0.002),
    (("A", "sc", 50, "sd_alpha"), 1.084),
    (("A", "ols", 100, "sd_alpha"), 5.220),
    (("B", "ols", 100, "sd_alpha"), 1.444),
    (("B", "ols_addup", 100, "mean_mu1"), 0.991),
])
def test_shipped_table1_values(key, value):
    ref = mc.load_reference(cli_io.bundled_path("table1.ref", "."))
    assert ref[key].value == value


def test_shipped_tablea1_values():
    ref = mc.load_reference(cli_io.bundled_path("tableA1.ref", "."))
    assert len(ref) == 120
    assert ref[("B", "sc_nested_halflags", 100, "mean_mu1")].value == 0.942
    assert ref[("B", "sc_nested_halflags", 100, "mean_z1")].value == 0.941
    assert ref[("B", "sc_nested_mean", 100, "mean_mu1")].value == 0.666
    assert ref[("B", "sc_nested_mean", 100, "mean_z1")].value == 0.995


def test_summary_document_roundtrip():
    s = _s(kind="two_factor_covariates", J=8, estimators=("sc", "ols"), replications=5)
    summary = mc.run_mc(s)
    doc = json.loads(cli_io.dump_json(cli_io.summary_document(summary)))
    back = cli_io.summary_from_document(doc)
    assert back.per_estimator == summary.per_estimator
    assert back.scenario == summary.scenario
