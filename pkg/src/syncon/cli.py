"""Command line: ``syncon {simulate,fit,mc,report}``.

Exit status is 0 on success, 1 on data or solver errors (and on reference
mismatches), 2 on usage errors.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import cli_io, estimators, montecarlo
from .dgp import make_scenario_panel
from .solver import DEFAULT_TOL, SolverError


def _cmd_simulate(args) -> int:
    s = cli_io.load_scenario(args.scenario)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    panel, truth = make_scenario_panel(s, args.rep)
    panel_path = out / "panel.csv"
    cli_io.write_panel_csv(panel, panel_path)
    outputs = [panel_path, cli_io.write_panel_sidecar(panel, panel_path)]
    if panel.covariates is not None:
        cov_path = out / "covariates.csv"
        cli_io.write_covariates_csv(panel.covariates, cov_path)
        outputs.append(cov_path)
    truth_path = out / "truth.json"
    cli_io.dump_json(truth_cli_doc(truth, args.rep), truth_path)
    outputs.append(truth_path)
    cli_io.write_manifest(out, f"simulate --rep {args.rep}", cli_io.config_digest(s), s.seed, outputs)
    return 0


def truth_cli_doc(truth, rep):
    doc = cli_io.truth_document(truth)
    doc["rep"] = rep
    return doc


def _cmd_fit(args) -> int:
    panel = cli_io.parse_panel_csv(args.panel, T0=args.t0, treatment_time=args.treatment_time,
                                   covariates_path=args.covariates)
    rng = np.random.Generator(np.random.Philox(args.seed))
    sol = estimators.fit(panel, args.estimator, tol=args.tol, rng=rng)
    alpha = estimators.treatment_effects(panel, sol)
    text = cli_io.dump_json(cli_io.solution_document(sol, alpha), args.out)
    if args.out is None:
        sys.stdout.write(text)
    return 0


def _cmd_mc(args) -> int:
    s = cli_io.load_scenario(args.scenario)
    if args.replications is not None:
        s = dataclasses.replace(s, replications=args.replications)
    reference = None
    if args.reference:
        reference = montecarlo.load_reference(cli_io.resolve_input(args.reference, "."))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summary = montecarlo.run_mc(s, parallelism=args.parallelism, tol=args.tol)
    summary_path = out / "summary.json"
    cli_io.dump_json(cli_io.summary_document(summary), summary_path)
    outputs = [summary_path]
    status = 0
    if reference is not None:
        report = montecarlo.compare_to_reference(summary, reference)
        table = report.format_table()
        comp_path = out / "comparison.txt"
        comp_path.write_text(table + "\n")
        outputs.append(comp_path)
        print(table)
        status = 0 if report.all_passed else 1
    cli_io.write_manifest(out, "mc", cli_io.config_digest(s), s.seed, outputs)
    return status


def _cmd_report(args) -> int:
    doc = json.loads(Path(args.summary).read_text())
    summary = cli_io.summary_from_document(doc)
    reference = montecarlo.load_reference(cli_io.resolve_input(args.reference, "."))
    report = montecarlo.compare_to_reference(summary, reference)
    print(report.format_table())
    if report.unreferenced:
        print(f"no reference cells for: {', '.join(report.unreferenced)}")
    return 0 if report.all_passed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="syncon", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="draw one replication of a scenario")
    p.add_argument("--scenario", required=True)
    p.add_argument("--rep", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("fit", help="fit weights on a wide panel CSV")
    p.add_argument("--panel", required=True)
    p.add_argument("--covariates")
    p.add_argument("--estimator", required=True, choices=estimators.ESTIMATORS)
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.add_argument("--t0", type=int)
    p.add_argument("--treatment-time")
    p.add_argument("--seed", type=int, default=0, help="seed for the nested V search")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("mc", help="run a Monte Carlo scenario")
    p.add_argument("--scenario", required=True)
    p.add_argument("--parallelism", type=int, default=1)
    p.add_argument("--replications", type=int)
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.add_argument("--reference")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_mc)

    p = sub.add_parser("report", help="compare a summary with a reference table")
    p.add_argument("--summary", required=True)
    p.add_argument("--reference", required=True)
    p.set_defaults(func=_cmd_report)
    return parser


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (SolverError, ValueError, KeyError, FileNotFoundError,
            montecarlo.AllReplicationsFailed) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"syncon {args.command}: error: {msg}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
