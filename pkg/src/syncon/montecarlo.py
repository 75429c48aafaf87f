"""Monte Carlo replication engine and reference-table comparison."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import estimators
from .dgp import (
    OUTER_SEARCH_STREAM,
    ScenarioConfig,
    ScenarioKind,
    make_scenario_panel,
    replication_rng,
)
from .diagnostics import LoadingDiagnostics, implied_loadings
from .estimators import WeightSolution
from .solver import DEFAULT_TOL, SolverError


class AllReplicationsFailed(RuntimeError):
    pass


class MissingReferenceCell(KeyError):
    pass


@dataclass(frozen=True)
class ReplicationResult:
    solution: WeightSolution | None
    loadings: LoadingDiagnostics | None
    alpha_hat: np.ndarray | None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def run_replication(s: ScenarioConfig, rep: int, tol: float = DEFAULT_TOL) -> dict[str, ReplicationResult]:
    """Draw replication ``rep`` and fit every estimator in ``s.estimators``.

    A failing estimator is recorded with its error message; the others still run.
    """
    panel, truth = make_scenario_panel(s, rep)
    out = {}
    for name in s.estimators:
        rng = replication_rng(s.seed, rep, OUTER_SEARCH_STREAM)
        try:
            sol = estimators.fit(panel, name, tol=tol, rng=rng)
        except (SolverError, ValueError, np.linalg.LinAlgError) as exc:
            out[name] = ReplicationResult(None, None, None, f"{type(exc).__name__}: {exc}")
            continue
        out[name] = ReplicationResult(
            solution=sol,
            loadings=implied_loadings(sol, truth),
            alpha_hat=estimators.treatment_effects(panel, sol),
        )
    return out


@dataclass(frozen=True)
class EstimatorSummary:
    mean_mu: list
    sd_mu: list
    sd_alpha1: float
    mean_alpha1: float
    mean_pre_mse: float
    mean_l2: float
    mean_mu_error_l2: float
    failures: int
    successes: int
    mean_z: list | None = None
    sd_z: list | None = None
    first_error: str | None = None


@dataclass(frozen=True)
class McSummary:
    scenario: ScenarioConfig
    per_estimator: dict[str, EstimatorSummary] = field(default_factory=dict)


def _rep_stats(res: ReplicationResult):
    ld = res.loadings
    return (
        ld.implied_mu,
        ld.implied_z,
        float(res.alpha_hat[0]),
        res.solution.pre_mse,
        res.solution.l2_norm,
        float(np.sqrt(ld.mu_error @ ld.mu_error)),
    )


def _sd(x):
    return np.std(x, axis=0, ddof=1) if len(x) > 1 else np.full(np.shape(x)[1:], np.nan)


def summarize(s: ScenarioConfig, results: list[dict[str, ReplicationResult]]) -> McSummary:
    """Reduce per-replication results, in replication order, to an :class:`McSummary`."""
    per = {}
    for name in s.estimators:
        ok = [r[name] for r in results if r[name].ok]
        errors = [r[name].error for r in results if not r[name].ok]
        if not ok:
            nan = float("nan")
            per[name] = EstimatorSummary(
                mean_mu=[], sd_mu=[], sd_alpha1=nan, mean_alpha1=nan,
                mean_pre_mse=nan, mean_l2=nan, mean_mu_error_l2=nan,
                failures=len(errors), successes=0,
                first_error=errors[0] if errors else None,
            )
            continue
        stats = [_rep_stats(r) for r in ok]
        mu = np.array([st[0] for st in stats])
        alpha = np.array([st[2] for st in stats])
        has_z = stats[0][1] is not None
        z = np.array([st[1] for st in stats]) if has_z else None
        per[name] = EstimatorSummary(
            mean_mu=mu.mean(axis=0).tolist(),
            sd_mu=_sd(mu).tolist(),
            sd_alpha1=float(_sd(alpha)),
            mean_alpha1=float(alpha.mean()),
            mean_pre_mse=float(np.mean([st[3] for st in stats])),
            mean_l2=float(np.mean([st[4] for st in stats])),
            mean_mu_error_l2=float(np.mean([st[5] for st in stats])),
            failures=len(errors),
            successes=len(ok),
            mean_z=z.mean(axis=0).tolist() if has_z else None,
            sd_z=_sd(z).tolist() if has_z else None,
            first_error=errors[0] if errors else None,
        )
    if all(e.successes == 0 for e in per.values()):
        raise AllReplicationsFailed(
            f"every replication failed; first error: "
            f"{next((e.first_error for e in per.values() if e.first_error), None)}"
        )
    return McSummary(scenario=s, per_estimator=per)


def run_mc(s: ScenarioConfig, parallelism: int = 1, tol: float = DEFAULT_TOL) -> McSummary:
    """Run ``s.replications`` replications and summarise them.

    Replications run on up to ``parallelism`` threads; aggregation is by
    replication index, so the summary does not depend on ``parallelism``.
    """
    if s.replications < 2:
        raise ValueError("need at least two replications")
    reps = range(s.replications)
    if parallelism <= 1:
        results = [run_replication(s, r, tol) for r in reps]
    else:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            results = list(pool.map(lambda r: run_replication(s, r, tol), reps))
    return summarize(s, results)


def simple_example_variance(c: float, J: int, sigma: float = 1.0, reps: int = 2000,
                            seed: int = 0, T0: int | None = None) -> dict[str, float]:
    """Spread of the unrestricted-OLS effect estimate in the one-factor example.

    Uses ``T0 = round(J / c)`` unless ``T0`` is given (required for ``c = 0``).
    ``predicted`` is the large-sample value ``sigma / sqrt(1 - c)``.
    """
    if not 0 <= c < 1:
        raise ValueError("c must lie in [0, 1)")
    if T0 is None:
        if c == 0:
            raise ValueError("c = 0 needs an explicit T0")
        T0 = int(round(J / c))
    s = ScenarioConfig(kind=ScenarioKind.SIMPLE_EXAMPLE_F1, J=J, t0_rule=int(T0),
                       seed=seed, replications=reps, estimators=("ols",), sigma=sigma)
    summary = run_mc(s)
    est = summary.per_estimator["ols"]
    return {
        "sd_alpha": est.sd_alpha1,
        "predicted": sigma / math.sqrt(1.0 - c),
        "T0": T0,
        "J": J,
        "replications": est.successes,
    }


# --- reference tables -------------------------------------------------------

REFERENCE_HEADER = ("panel", "estimator", "J", "statistic", "value", "tolerance")


@dataclass(frozen=True)
class ReferenceRecord:
    panel: str
    estimator: str
    J: int
    statistic: str
    value: float
    tolerance: float

    @property
    def key(self):
        return (self.panel, self.estimator, self.J, self.statistic)


class ReferenceTable(dict):
    """Reference cells keyed by ``(panel, estimator, J, statistic)``."""

    @classmethod
    def from_records(cls, records):
        table = cls()
        for rec in records:
            table[rec.key] = rec
        return table


def parse_reference(text: str) -> ReferenceTable:
    records = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split(",")]
        if tuple(parts) == REFERENCE_HEADER:
            continue
        if len(parts) != 6:
            raise ValueError(f"reference line {lineno}: expected 6 fields, got {len(parts)}")
        panel, est, J, stat, value, tol = parts
        try:
            records.append(ReferenceRecord(panel, est, int(J), stat, float(value), float(tol)))
        except ValueError as exc:
            raise ValueError(f"reference line {lineno}: {exc}") from None
    return ReferenceTable.from_records(records)


def load_reference(path) -> ReferenceTable:
    return parse_reference(Path(path).read_text())


def format_reference(table: ReferenceTable) -> str:
    lines = [",".join(REFERENCE_HEADER)]
    for rec in table.values():
        lines.append(f"{rec.panel},{rec.estimator},{rec.J},{rec.statistic},"
                     f"{rec.value!r},{rec.tolerance!r}")
    return "\n".join(lines) + "\n"


def summary_statistic(est: EstimatorSummary, statistic: str) -> float:
    """Look up a reference statistic name (``mean_mu1``, ``sd_alpha``, ...) in a summary."""
    for prefix, means, sds in (("mu", est.mean_mu, est.sd_mu), ("z", est.mean_z, est.sd_z)):
        for kind, values in (("mean_", means), ("sd_", sds)):
            head = kind + prefix
            if statistic.startswith(head) and statistic[len(head):].isdigit():
                idx = int(statistic[len(head):]) - 1
                if values is None or not 0 <= idx < len(values):
                    raise MissingReferenceCell(f"summary has no {statistic}")
                return float(values[idx])
    simple = {
        "sd_alpha": est.sd_alpha1,
        "mean_alpha": est.mean_alpha1,
        "mean_pre_mse": est.mean_pre_mse,
        "mean_l2": est.mean_l2,
    }
    if statistic not in simple:
        raise MissingReferenceCell(f"unknown statistic {statistic!r}")
    return float(simple[statistic])


@dataclass(frozen=True)
class CellComparison:
    record: ReferenceRecord
    actual: float

    @property
    def deviation(self) -> float:
        return abs(self.actual - self.record.value)

    @property
    def passed(self) -> bool:
        return self.deviation <= self.record.tolerance

    @property
    def severity(self) -> float:
        return self.deviation / self.record.tolerance if self.record.tolerance > 0 else math.inf


@dataclass(frozen=True)
class ComparisonReport:
    cells: list[CellComparison]
    unreferenced: list[str]

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.cells)

    @property
    def failures(self) -> list[CellComparison]:
        return [c for c in self.cells if not c.passed]

    @property
    def max_deviation(self) -> float:
        return max((c.deviation for c in self.cells), default=0.0)

    def worst(self, n: int = 5) -> list[CellComparison]:
        return sorted(self.cells, key=lambda c: -c.severity)[:n]

    def format_table(self) -> str:
        rows = [f"{'panel':<5} {'estimator':<20} {'J':>4} {'statistic':<10} "
                f"{'reference':>10} {'actual':>10} {'dev':>8} {'tol':>8}  result"]
        for c in self.cells:
            r = c.record
            rows.append(f"{r.panel:<5} {r.estimator:<20} {r.J:>4} {r.statistic:<10} "
                        f"{r.value:>10.4f} {c.actual:>10.4f} {c.deviation:>8.4f} "
                        f"{r.tolerance:>8.4f}  {'PASS' if c.passed else 'FAIL'}")
        n_fail = len(self.failures)
        rows.append(f"{len(self.cells) - n_fail}/{len(self.cells)} cells within tolerance")
        return "\n".join(rows)


def compare_to_reference(summary: McSummary, reference: ReferenceTable) -> ComparisonReport:
    """Compare every reference cell matching the summary's panel and J."""
    s = summary.scenario
    panel = s.panel_label
    if panel is None:
        raise MissingReferenceCell("scenario has an explicit T0; no reference panel applies")
    cells, unreferenced = [], []
    for name, est in summary.per_estimator.items():
        rows = [rec for rec in reference.values()
                if rec.panel == panel and rec.estimator == name and rec.J == s.J]
        if not rows:
            unreferenced.append(name)
            continue
        for rec in rows:
            cells.append(CellComparison(rec, summary_statistic(est, rec.statistic)))
    if not cells:
        raise MissingReferenceCell(
            f"no reference cells for panel {panel}, J={s.J}, "
            f"estimators {', '.join(summary.per_estimator)}"
        )
    return ComparisonReport(cells=cells, unreferenced=unreferenced)
