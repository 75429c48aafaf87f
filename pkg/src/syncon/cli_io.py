"""File formats: wide panel CSV, covariate CSV, scenario config, JSON results, manifests.

Floats are written with ``repr``, the shortest decimal string that reads back
to the same double, so every file round-trips bit-exactly.
"""
from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import io as _io
import json
import math
import os
from dataclasses import asdict
from importlib import resources
from pathlib import Path

import numpy as np

from .dgp import FactorModelTruth, PanelData, ScenarioConfig
from .estimators import WeightSolution
from .montecarlo import EstimatorSummary, McSummary

__all__ = [
    "PanelFormatError", "ParseError", "MissingTreatedColumn", "NonMonotoneTime",
    "NonFiniteCell", "parse_panel_csv", "write_panel_csv", "parse_covariates_csv",
    "write_covariates_csv", "parse_scenario", "format_scenario", "load_scenario",
    "config_digest", "solution_document", "summary_document", "summary_from_document",
    "truth_document", "dump_json", "write_manifest", "bundled_path",
]


class PanelFormatError(ValueError):
    pass


class ParseError(PanelFormatError):
    pass


class MissingTreatedColumn(PanelFormatError):
    pass


class NonMonotoneTime(PanelFormatError):
    pass


class NonFiniteCell(PanelFormatError):
    pass


TREATED = "unit0"


def fmt(x) -> str:
    return repr(float(x))


def _sidecar(path: Path) -> Path:
    return path.with_suffix(".meta")


def read_keyvalue(text: str) -> dict[str, str]:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"line {lineno}: expected key=value, got {raw!r}")
        k, v = line.split("=", 1)
        out[k.strip().lower()] = v.strip()
    return out


def _time_order_key(values):
    try:
        return [float(v) for v in values]
    except ValueError:
        return list(values)


def parse_panel_csv(path, T0: int | None = None, treatment_time: str | None = None,
                    covariates_path=None) -> PanelData:
    """Read a wide ``time,unit0,unit1,...`` CSV.

    ``unit0`` is the treated unit. ``T0`` is taken from the argument, else from
    ``treatment_time`` (rows at or before it are pre-treatment), else from a
    ``<name>.meta`` sidecar holding ``t0=`` or ``treatment_time=``.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r and any(cell.strip() for cell in r)]
    if not rows:
        raise ParseError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if len(header) < 3:
        raise ParseError(f"{path}: need a time column and at least two units")
    if TREATED not in header[1:]:
        raise MissingTreatedColumn(f"{path}: no '{TREATED}' column in header")
    units = header[1:]
    if len(set(units)) != len(units):
        raise ParseError(f"{path}: duplicate unit names in header")
    times, values = [], []
    for i, row in enumerate(rows[1:], 1):
        if len(row) != len(header):
            raise ParseError(
                f"{path}: row {i} (line {i + 1}) has {len(row)} fields, expected {len(header)}"
            )
        times.append(row[0].strip())
        vals = []
        for name, cell in zip(units, row[1:]):
            try:
                x = float(cell)
            except ValueError:
                raise ParseError(
                    f"{path}: row {i} (line {i + 1}), column {name!r}: cannot parse {cell!r}"
                ) from None
            if not math.isfinite(x):
                raise NonFiniteCell(
                    f"{path}: row {i} (line {i + 1}), column {name!r}: non-finite value {cell!r}"
                )
            vals.append(x)
        values.append(vals)
    if not values:
        raise ParseError(f"{path}: no data rows")
    keys = _time_order_key(times)
    for i in range(1, len(keys)):
        if not keys[i] > keys[i - 1]:
            raise NonMonotoneTime(
                f"{path}: time {times[i]!r} in row {i + 1} does not increase"
            )

    y = np.array(values, dtype=np.float64)
    order = [units.index(TREATED)] + [j for j, u in enumerate(units) if u != TREATED]
    y = y[:, order]
    units = tuple(units[j] for j in order)

    if T0 is None:
        meta = {}
        if treatment_time is None and _sidecar(path).exists():
            meta = read_keyvalue(_sidecar(path).read_text())
        if "t0" in meta:
            T0 = int(meta["t0"])
        else:
            boundary = treatment_time if treatment_time is not None else meta.get("treatment_time")
            if boundary is None:
                raise ParseError(f"{path}: T0 not given (flag or {_sidecar(path).name} sidecar)")
            bkey = _time_order_key([boundary])[0]
            if type(bkey) is not type(keys[0]):
                bkey = boundary
                keys = list(times)
            T0 = sum(1 for k in keys if k <= bkey)
    if not 1 <= T0 <= len(times):
        raise ParseError(f"{path}: T0={T0} out of range for {len(times)} rows")

    Z = None
    if covariates_path is not None:
        Z = parse_covariates_csv(covariates_path, units)
    return PanelData(y=y, T0=T0, T1=len(times) - T0, covariates=Z,
                     unit_names=units, times=tuple(times))


def write_panel_csv(panel: PanelData, path, times=None, unit_names=None) -> None:
    """Write ``panel`` as wide CSV; the treated unit comes first."""
    J = panel.J
    units = unit_names or panel.unit_names or tuple(f"unit{j}" for j in range(J + 1))
    times = times or panel.times or tuple(str(t) for t in range(1, panel.y.shape[0] + 1))
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["time", *units])
    for t, row in zip(times, panel.y):
        w.writerow([t, *(fmt(x) for x in row)])
    Path(path).write_text(buf.getvalue())


def write_panel_sidecar(panel: PanelData, path) -> Path:
    side = _sidecar(Path(path))
    side.write_text(f"t0={panel.T0}\n")
    return side


def parse_covariates_csv(path, unit_names) -> np.ndarray:
    """Covariates, one row per unit in the panel's unit order: ``unit,z1,z2,...``."""
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if len(rows) < 2 or len(rows[0]) < 2:
        raise ParseError(f"{path}: need a header and at least one covariate column")
    body = rows[1:]
    by_unit = {}
    for i, row in enumerate(body, 1):
        if len(row) != len(rows[0]):
            raise ParseError(f"{path}: row {i} has {len(row)} fields, expected {len(rows[0])}")
        try:
            vals = [float(c) for c in row[1:]]
        except ValueError:
            raise ParseError(f"{path}: row {i}: non-numeric covariate") from None
        if not all(math.isfinite(v) for v in vals):
            raise NonFiniteCell(f"{path}: row {i}: non-finite covariate")
        by_unit[row[0].strip()] = vals
    missing = [u for u in unit_names if u not in by_unit]
    if missing:
        raise ParseError(f"{path}: no covariates for units {', '.join(missing)}")
    return np.array([by_unit[u] for u in unit_names], dtype=np.float64)


def write_covariates_csv(Z, path, unit_names=None) -> None:
    Z = np.atleast_2d(Z)
    units = unit_names or tuple(f"unit{j}" for j in range(Z.shape[0]))
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["unit", *(f"z{k + 1}" for k in range(Z.shape[1]))])
    for u, row in zip(units, Z):
        w.writerow([u, *(fmt(x) for x in row)])
    Path(path).write_text(buf.getvalue())


# --- scenarios ----------------------------------------------------------------

def parse_scenario(text: str, seed_override: str | None = None) -> ScenarioConfig:
    """Parse a flat ``key=value`` scenario file.

    Keys: ``kind``, ``J``, ``t0_rule`` (``J+5``, ``2J`` or an integer), ``seed``,
    ``replications``, ``estimators`` (comma list), optional ``sigma``, ``t1``,
    ``name``. ``seed_override`` (e.g. from ``SYNCON_SEED``) replaces ``seed``.
    """
    kv = read_keyvalue(text)
    known = {"kind", "j", "t0_rule", "seed", "replications", "estimators", "sigma", "t1", "name"}
    unknown = set(kv) - known
    if unknown:
        raise ParseError(f"unknown scenario keys: {', '.join(sorted(unknown))}")
    for key in ("kind", "j"):
        if key not in kv:
            raise ParseError(f"scenario is missing '{key}'")
    seed = kv.get("seed", "0")
    if seed_override is not None:
        seed = seed_override
    try:
        return ScenarioConfig(
            kind=kv["kind"],
            J=int(kv["j"]),
            t0_rule=kv.get("t0_rule", "2J"),
            seed=int(seed),
            replications=int(kv.get("replications", "1000")),
            estimators=tuple(e.strip() for e in kv.get("estimators", "sc").split(",") if e.strip()),
            sigma=float(kv.get("sigma", "1.0")),
            T1=int(kv.get("t1", "1")),
            name=kv.get("name", ""),
        )
    except ValueError as exc:
        raise ParseError(f"bad scenario: {exc}") from None


def format_scenario(s: ScenarioConfig) -> str:
    """Canonical text: fixed key order, so equal configs give equal bytes."""
    lines = [
        f"kind={s.kind.value}",
        f"J={s.J}",
        f"t0_rule={s.t0_rule}",
        f"seed={s.seed}",
        f"replications={s.replications}",
        f"estimators={','.join(s.estimators)}",
        f"sigma={fmt(s.sigma)}",
        f"t1={s.T1}",
    ]
    if s.name:
        lines.append(f"name={s.name}")
    return "\n".join(lines) + "\n"


def config_digest(s: ScenarioConfig) -> str:
    return hashlib.sha256(format_scenario(s).encode()).hexdigest()


def bundled_path(name: str, kind: str) -> Path | None:
    """Path of a file shipped in ``syncon/data`` (``kind`` is ``scenarios`` or ``.``)."""
    base = resources.files("syncon") / "data"
    if kind != ".":
        base = base / kind
    candidate = base / Path(name).name
    return Path(str(candidate)) if candidate.is_file() else None


def resolve_input(path, kind: str) -> Path:
    p = Path(path)
    if p.exists():
        return p
    alt = bundled_path(str(path), kind)
    if alt is None:
        raise FileNotFoundError(f"{path}: no such file")
    return alt


def load_scenario(path) -> ScenarioConfig:
    text = resolve_input(path, "scenarios").read_text()
    return parse_scenario(text, seed_override=os.environ.get("SYNCON_SEED"))


# --- JSON documents -------------------------------------------------------------

def _clean(x):
    if isinstance(x, float):
        return x if math.isfinite(x) else None
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, np.generic):
        return _clean(x.item())
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    return x


def dump_json(doc, path=None) -> str:
    text = json.dumps(_clean(doc), indent=2) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def solution_document(sol: WeightSolution, alpha_hat) -> dict:
    return {
        "weights": sol.weights,
        "intercept": sol.intercept,
        "pre_mse": sol.pre_mse,
        "l1": sol.l1_norm,
        "l2": sol.l2_norm,
        "alpha_hat": np.asarray(alpha_hat),
        "regime": sol.regime,
        "converged": bool(sol.report.converged),
        "kkt_gap": sol.report.kkt_gap,
    }


def truth_document(truth: FactorModelTruth) -> dict:
    cfg = truth.config
    cov = None
    if cfg.covariates is not None:
        cov = {"Z": cfg.covariates.Z, "theta_sd": cfg.covariates.theta_sd}
    return {
        "T0": cfg.T0,
        "T1": cfg.T1,
        "loadings": cfg.loadings,
        "shock_sd": cfg.shock_sd,
        "ar_coefficient": cfg.ar_coefficient,
        "factor_variance": cfg.factor_variance,
        "treatment_effects": cfg.treatment_effects,
        "covariates": cov,
        "factors": truth.factors,
        "theta": truth.theta,
        "shocks": truth.shocks,
    }


def scenario_document(s: ScenarioConfig) -> dict:
    return {
        "kind": s.kind.value, "J": s.J, "t0_rule": s.t0_rule, "T0": s.T0,
        "seed": s.seed, "replications": s.replications,
        "estimators": list(s.estimators), "sigma": s.sigma, "T1": s.T1, "name": s.name,
    }


def summary_document(summary: McSummary) -> dict:
    return {
        "scenario": scenario_document(summary.scenario),
        "per_estimator": {k: asdict(v) for k, v in summary.per_estimator.items()},
    }


def summary_from_document(doc: dict) -> McSummary:
    sc = doc["scenario"]
    s = ScenarioConfig(kind=sc["kind"], J=sc["J"], t0_rule=sc["t0_rule"], seed=sc["seed"],
                       replications=sc["replications"], estimators=tuple(sc["estimators"]),
                       sigma=sc["sigma"], T1=sc["T1"], name=sc.get("name", ""))
    nan = float("nan")
    per = {}
    for name, e in doc["per_estimator"].items():
        e = {k: (nan if v is None and k in ("sd_alpha1", "mean_alpha1", "mean_pre_mse",
                                             "mean_l2", "mean_mu_error_l2") else v)
             for k, v in e.items()}
        per[name] = EstimatorSummary(**e)
    return McSummary(scenario=s, per_estimator=per)


def _timestamp() -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is not None:
        when = _dt.datetime.fromtimestamp(int(epoch), tz=_dt.timezone.utc)
    else:
        when = _dt.datetime.now(tz=_dt.timezone.utc).replace(microsecond=0)
    return when.strftime("%Y-%m-%dT%H:%M:%SZ")


def tool_version() -> str:
    from . import __version__

    return __version__


def write_manifest(out_dir, command: str, digest: str, seed: int, outputs) -> Path:
    """Write ``manifest.json``; ``SOURCE_DATE_EPOCH`` pins the timestamp."""
    out_dir = Path(out_dir)
    missing = [str(p) for p in outputs if not Path(p).exists()]
    if missing:
        raise FileNotFoundError(f"outputs missing: {', '.join(missing)}")
    doc = {
        "command": command,
        "config_digest": digest,
        "seed": seed,
        "tool_version": tool_version(),
        "timestamp": _timestamp(),
        "outputs": [Path(p).name for p in outputs],
    }
    path = out_dir / "manifest.json"
    dump_json(doc, path)
    return path
