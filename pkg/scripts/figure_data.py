"""Regenerate the plot-ready tables behind the evaluation figures.

    python3 scripts/figure_data.py [--out figures] [--replications 10] [--no-sim]

Writes:
    policies.csv         analysis vs simulation for shared, DA(a=10), JA(x=10)
    cdf_ja_vs_da.csv     M2M preamble-transmission CDF under both splits
    sweep_da.csv         metrics against a = 1..M-1
    sweep_ja.csv         metrics against x = 1..M-1
    optimizer.csv        x-dagger against phi = 10..100 ms
"""
import argparse
from pathlib import Path

from rachsplit import pipeline
from rachsplit.config import table_one
from rachsplit.reports import (COMPARE_COLUMNS, OPTIMIZER_COLUMNS, SWEEP_COLUMNS, SWEEP_SIM_COLUMNS,
                               rows_to_csv)
from rachsplit.simulator import run_batch


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", type=Path, default=Path("figures"))
    ap.add_argument("--replications", type=int, default=10)
    ap.add_argument("--no-sim", action="store_true")
    ap.add_argument("--lambda-per-second", type=float, default=0.5)
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    base = table_one(lambda_per_second=args.lambda_per_second, replications=args.replications)
    seeds = range(1, args.replications + 1)
    sim = not args.no_sim

    if sim:
        rows = []
        for kind, extra in (("shared", {}), ("da", {"a": 10}), ("ja", {"x": 10})):
            for r in pipeline.compare(base.with_(policy_kind=kind, **extra), seeds):
                rows.append({"policy": kind, **r})
        (args.out / "policies.csv").write_text(rows_to_csv(("policy",) + COMPARE_COLUMNS, rows))

    cdf = []
    for kind, extra in (("da", {"a": 10}), ("ja", {"x": 10})):
        cfg = base.with_(policy_kind=kind, **extra)
        ana = pipeline.analyze(cfg).report["M2M"].preamble_tx_cdf
        simc = run_batch(cfg, seeds)[1].preamble_cdf["M2M"] if sim else [None] * len(ana)
        cdf += [(kind, r, a, s) for r, (a, s) in enumerate(zip(ana, simc), 1)]
    (args.out / "cdf_ja_vs_da.csv").write_text(rows_to_csv(("policy", "r", "analysis", "simulation"), cdf))

    cols = SWEEP_SIM_COLUMNS if sim else SWEEP_COLUMNS
    for kind in ("da", "ja"):
        rows = pipeline.sweep(base, kind, range(1, base.M), simulate=sim, seeds=seeds)
        (args.out / f"sweep_{kind}.csv").write_text(rows_to_csv(cols, rows))

    rows = pipeline.optimize(base.with_(policy_kind="ja", x=1), range(10, 101, 10))
    (args.out / "optimizer.csv").write_text(rows_to_csv(OPTIMIZER_COLUMNS, rows))
    print(f"wrote tables to {args.out}")


if __name__ == "__main__":
    main()
