"""Command-line front end.

    rachsplit SUBCOMMAND --config FILE [--out-dir DIR] [--seed N] [--replications N]

Subcommands: analyze, simulate, compare, optimize, validate, sweep.
Exit codes: 0 ok, 2 config error, 3 runtime error or infeasible optimum, 4 I/O.
Fatal errors go to stderr as ``rachsplit: <tag>: <message>`` where the tag is
``config-error[<kind>]``, ``runtime-error``, ``infeasible`` or ``io-error``.
"""
from __future__ import annotations

import argparse
import sys
import warnings
from pathlib import Path

from . import pipeline
from .config import ConfigError, parse_config
from .kmc import policy_kind, split_parameter
from .metrics import CollisionRatioWarning, MetricsError
from .reports import (CDF_COLUMNS, COMPARE_COLUMNS, GRID_COLUMNS, MATRIX_COLUMNS, METRICS_COLUMNS,
                      OPTIMIZER_COLUMNS, SWEEP_COLUMNS, SWEEP_SIM_COLUMNS, VALIDATE_COLUMNS,
                      ReportWriter, cdf_rows, grid_rows, matrix_rows, metrics_rows)
from .simulator import run_batch

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_IO = 0, 2, 3, 4


class Infeasible(RuntimeError):
    pass


def _range(text: str) -> range:
    try:
        lo, hi = (int(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO:HI, got {text!r}") from None
    if hi < lo:
        raise argparse.ArgumentTypeError("range end must be >= start")
    return range(lo, hi + 1)


def _phi_list(text: str) -> tuple:
    try:
        return tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, type=Path, help="scenario file")
    common.add_argument("--out-dir", type=Path, help="override output.directory")
    common.add_argument("--seed", type=int, help="override sim.seed")
    common.add_argument("--replications", type=int, help="override sim.replications")
    common.add_argument("--workers", type=int, help="override sim.workers")

    p = argparse.ArgumentParser(prog="rachsplit", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("analyze", parents=[common], help="population recursion and metrics")
    sub.add_parser("simulate", parents=[common], help="seeded Monte-Carlo replications")
    sub.add_parser("compare", parents=[common], help="analysis vs simulation table")
    opt = sub.add_parser("optimize", parents=[common], help="x-dagger against delay thresholds")
    opt.add_argument("--phi", type=_phi_list, help="comma-separated thresholds in ms")
    val = sub.add_parser("validate", parents=[common], help="oracle-vs-engine report")
    val.add_argument("--samples", type=int, default=10**6, help="backoff Monte-Carlo samples")
    val.add_argument("--trials", type=int, default=10**5, help="contention Monte-Carlo trials")
    sw = sub.add_parser("sweep", parents=[common], help="metrics against the split parameter")
    sw.add_argument("--param", choices=("x", "a"), required=True)
    sw.add_argument("--range", dest="values", type=_range, required=True, help="LO:HI inclusive")
    sw.add_argument("--simulate", action="store_true", help="add simulated columns")
    return p


def load(args):
    config = parse_config(args.config)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.replications is not None:
        changes["replications"] = args.replications
    if args.workers is not None:
        changes["workers"] = args.workers
    if args.out_dir is not None:
        changes["out_dir"] = str(args.out_dir)
    return config.with_(**changes) if changes else config


def _seeds(config):
    return list(range(config.seed, config.seed + config.replications))


def cmd_analyze(config, args, out: ReportWriter):
    res = pipeline.analyze(config)
    sid = args.config.stem
    if "grid" in config.reports:
        out.table("grid.csv", GRID_COLUMNS, grid_rows(res.grid, config.delta_sf))
    if "matrix" in config.reports:
        out.table("matrix.csv", MATRIX_COLUMNS, matrix_rows(res.matrix))
    if "metrics" in config.reports:
        out.table("metrics.csv", METRICS_COLUMNS, metrics_rows(res.report, sid, config.policy))
    if "cdf" in config.reports:
        out.table("cdf.csv", CDF_COLUMNS, cdf_rows(res.report))


def _batch_metrics_rows(summary, sid, config):
    for key in ("H2H", "M2M", "total"):
        m = summary.mean[key]
        yield (sid, policy_kind(config.policy), split_parameter(config.policy), key,
               m["P_s"], m["P_f"], m["E_tau_ms"], m["blocked"])


def _batch_cdf_rows(summary):
    for key in ("H2H", "M2M", "total"):
        for r, v in enumerate(summary.preamble_cdf[key], 1):
            yield ("preamble", key, r, v)
        for r, v in enumerate(summary.delay_mass_cdf[key], 1):
            yield ("delay", key, r, v)


def cmd_simulate(config, args, out: ReportWriter):
    traces, summary = run_batch(config, _seeds(config), workers=config.workers)
    sid = args.config.stem
    if "traces" in config.reports:
        for t in traces:
            ue_csv, slot_csv = t.to_csv()
            out.text(f"ue_trace_seed{t.seed}.csv", ue_csv)
            out.text(f"slot_trace_seed{t.seed}.csv", slot_csv)
    if "metrics" in config.reports:
        out.table("metrics.csv", METRICS_COLUMNS, _batch_metrics_rows(summary, sid, config))
    if "cdf" in config.reports:
        out.table("cdf.csv", CDF_COLUMNS, _batch_cdf_rows(summary))


def cmd_compare(config, args, out: ReportWriter):
    out.table("compare.csv", COMPARE_COLUMNS, pipeline.compare(config, _seeds(config)))


def cmd_optimize(config, args, out: ReportWriter):
    phis = args.phi if args.phi is not None else config.phi_ms
    rows = pipeline.optimize(config, phis)
    out.table("optimizer.csv", OPTIMIZER_COLUMNS, rows)
    for r in rows:
        if not r["feasible"]:
            print(f"rachsplit: infeasible: phi={r['phi_ms']} ms has no feasible x", file=sys.stderr)
    if not any(r["feasible"] for r in rows):
        raise Infeasible("no threshold admits a feasible x")


def cmd_validate(config, args, out: ReportWriter):
    rows = pipeline.validate(config, samples=args.samples, trials=args.trials, seed=config.seed)
    out.table("validate.csv", VALIDATE_COLUMNS, rows)
    bad = [r for r in rows if r["pass"] is False]
    if bad:
        raise RuntimeError(f"{len(bad)} oracle checks failed, first: {bad[0]['check']} {bad[0]['case']}")


def cmd_sweep(config, args, out: ReportWriter):
    kind = "ja" if args.param == "x" else "da"
    bad = [v for v in args.values if not 0 < v < config.M]
    if bad:
        raise ConfigError("constraint", "--range", f"{args.param} must satisfy 0 < {args.param} < M")
    rows = pipeline.sweep(config, kind, args.values, simulate=args.simulate, seeds=_seeds(config))
    out.table("sweep.csv", SWEEP_SIM_COLUMNS if args.simulate else SWEEP_COLUMNS, rows)


COMMANDS = {"analyze": cmd_analyze, "simulate": cmd_simulate, "compare": cmd_compare,
            "optimize": cmd_optimize, "validate": cmd_validate, "sweep": cmd_sweep}


def _fail(tag: str, message: str, code: int) -> int:
    print(f"rachsplit: {tag}: {message}", file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load(args)
        out = ReportWriter(config.out_dir)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", CollisionRatioWarning)
            COMMANDS[args.command](config, args, out)
        for w in caught:
            print(f"rachsplit: warning: {w.message}", file=sys.stderr)
        extra = {"flags": {k: (list(v) if isinstance(v, range) else str(v) if isinstance(v, Path) else v)
                           for k, v in sorted(vars(args).items())}}
        out.manifest(args.command, config, config.seed, extra)
    except ConfigError as e:
        return _fail(f"config-error[{e.kind}]", str(e), EXIT_CONFIG)
    except Infeasible as e:
        return _fail("infeasible", str(e), EXIT_RUNTIME)
    except OSError as e:
        return _fail("io-error", str(e), EXIT_IO)
    except (MetricsError, ValueError, RuntimeError) as e:
        return _fail("runtime-error", str(e), EXIT_RUNTIME)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
