"""CSV writers. Every file has a header row; floats use 9 significant digits.

Schemas (column order is stable):

    grid.csv        slot, t_ms, class, retry_order, expected, expected_success, expected_fail
    matrix.csv      dest, origin, prob
    metrics.csv     scenario_id, policy, split_param, class, P_s, P_f, E_tau_ms, blocked
    cdf.csv         kind, class, abscissa, value     (kind is preamble or delay)
    ue_trace.csv    ue_id, class, arrival_ms, n_attempts, final, delay_ms
    slot_trace.csv  slot, t_ms, contenders, successes, collisions
    compare.csv     class, metric, analysis, simulation, sim_std, rel_error
    optimizer.csv   phi_ms, x_dagger_bound, x_dagger_exact, J_min_ms, feasible
    validate.csv    check, case, oracle, engine, abs_error, monte_carlo, pass
    sweep.csv       policy, split, P_s_M2M, E_tau_ms, P_f [, sim_P_s_M2M, sim_E_tau_ms, sim_P_f]
"""
from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from . import __version__
from .kmc import CLASSES, policy_kind, split_parameter
from .metrics import KEYS

GRID_COLUMNS = ("slot", "t_ms", "class", "retry_order", "expected", "expected_success", "expected_fail")
MATRIX_COLUMNS = ("dest", "origin", "prob")
METRICS_COLUMNS = ("scenario_id", "policy", "split_param", "class", "P_s", "P_f", "E_tau_ms", "blocked")
CDF_COLUMNS = ("kind", "class", "abscissa", "value")
COMPARE_COLUMNS = ("class", "metric", "analysis", "simulation", "sim_std", "rel_error")
OPTIMIZER_COLUMNS = ("phi_ms", "x_dagger_bound", "x_dagger_exact", "J_min_ms", "feasible")
VALIDATE_COLUMNS = ("check", "case", "oracle", "engine", "abs_error", "monte_carlo", "pass")
SWEEP_COLUMNS = ("policy", "split", "P_s_M2M", "E_tau_ms", "P_f")
SWEEP_SIM_COLUMNS = SWEEP_COLUMNS + ("sim_P_s_M2M", "sim_E_tau_ms", "sim_P_f")


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.9g}"
    return str(v)


def rows_to_csv(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        if isinstance(r, dict):
            r = [r.get(c) for c in columns]
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


def grid_rows(pop, delta_sf: int):
    eta, W = pop.eta, pop.W
    for i in range(eta):
        for n in range(W):
            for c, name in enumerate(CLASSES):
                yield (i + 1, (i + 1) * delta_sf, name, n + 1,
                       pop.Z[i, n, c], pop.Zs[i, n, c], pop.Zf[i, n, c])


def matrix_rows(matrix):
    return matrix.triplets()


def metrics_rows(report, scenario_id: str, policy):
    kind = policy_kind(policy)
    split = split_parameter(policy)
    for key in KEYS:
        s = report.scalars(key)
        yield (scenario_id, kind, split, key, s["P_s"], s["P_f"], s["E_tau_ms"], s["blocked"])


def cdf_rows(report):
    for key in KEYS:
        m = report[key]
        for r, v in enumerate(m.preamble_tx_cdf, 1):
            yield ("preamble", key, r, v)
        for r, v in enumerate(m.delay_mass_cdf, 1):
            yield ("delay", key, r, v)


class ReportWriter:
    """Writes named reports under one directory and records them in the manifest."""

    def __init__(self, out_dir):
        self.out = Path(out_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.files: list[str] = []

    def text(self, name: str, content: str) -> Path:
        path = self.out / name
        path.write_text(content)
        self.files.append(name)
        return path

    def table(self, name: str, columns, rows) -> Path:
        return self.text(name, rows_to_csv(columns, rows))

    def manifest(self, command: str, config, seed, extra: dict | None = None) -> Path:
        data = {
            "toolkit": "rachsplit",
            "version": __version__,
            "command": command,
            "seed": seed,
            "config": config.to_flat(),
            "config_text": config.to_text(),
            "files": sorted(self.files),
        }
        if extra:
            data.update(extra)
        path = self.out / "manifest.json"
        path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
        return path
