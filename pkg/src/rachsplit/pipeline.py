"""End-to-end runs from a ScenarioConfig: analysis, comparison, sweeps, x-dagger."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import oracles
from .config import ScenarioConfig
from .kmc import (PopulationGrid, TransitionMatrix, build_matrix, ja_success_probs, max_lag,
                  propagate, success_prob_m2m, transition_prob)
from .metrics import MetricsReport, analysis_report
from .optimizer import OptimizerInput, sweep_phi
from .simulator import contention_trials, run_batch
from .traffic import new_arrivals, peak_slot_load


@dataclass
class Analysis:
    config: ScenarioConfig
    matrix: TransitionMatrix
    grid: PopulationGrid
    report: MetricsReport


def analyze(config: ScenarioConfig, matrix: TransitionMatrix | None = None) -> Analysis:
    matrix = matrix or build_matrix(config.geom, config.grid)
    pop = propagate(config.policy, matrix, new_arrivals(config.h2h_model, config.grid),
                    new_arrivals(config.m2m_model, config.grid), config.W,
                    ja_mode=config.ja_mode, contention=config.contention)
    report = analysis_report(pop, matrix, config.geom, config.M, lag=config.delay_lag)
    return Analysis(config, matrix, pop, report)


def _split_key(kind: str) -> str:
    return {"ja": "x", "da": "a"}[kind]


def sweep(config: ScenarioConfig, kind: str, values, simulate: bool = False, seeds=None) -> list[dict]:
    """Metrics against the split parameter (x for JA, a for DA)."""
    matrix = build_matrix(config.geom, config.grid)
    rows = []
    for v in values:
        cfg = config.with_(policy_kind=kind, **{_split_key(kind): int(v)})
        rep = analyze(cfg, matrix).report
        row = {"policy": kind, "split": int(v),
               "P_s_M2M": rep["M2M"].access_success_prob,
               "E_tau_ms": rep["M2M"].expected_access_delay,
               "P_f": rep["total"].collision_prob}
        if simulate:
            _, agg = run_batch(cfg, seeds if seeds is not None else range(cfg.seed, cfg.seed + cfg.replications),
                               workers=cfg.workers)
            row["sim_P_s_M2M"] = agg.mean["M2M"]["P_s"]
            row["sim_E_tau_ms"] = agg.mean["M2M"]["E_tau_ms"]
            row["sim_P_f"] = agg.mean["total"]["P_f"]
        rows.append(row)
    return rows


def exact_delay_curve(config: ScenarioConfig, kind: str = "ja") -> np.ndarray:
    """E[tau]^M2M from the full pipeline for every split value 1..M-1."""
    rows = sweep(config, kind, range(1, config.M))
    return np.array([r["E_tau_ms"] for r in rows])


def optimizer_input(config: ScenarioConfig, phi: float | None = None) -> OptimizerInput:
    grid = config.grid
    N = peak_slot_load(config.m2m_model, grid) if config.m2m_model is not None else 0.0
    k = max_lag(grid.eta, config.geom)
    phi = phi if phi is not None else max(config.phi_ms)
    return OptimizerInput(M=config.M, W=config.W, lam=config.lambda_slot, N=N, phi=phi,
                          geom=config.geom, k=k, include_delay_factor=config.include_delay_factor)


def optimize(config: ScenarioConfig, phis=None) -> list[dict]:
    phis = list(phis if phis is not None else config.phi_ms)
    curve = exact_delay_curve(config, "ja") if config.opt_mode in ("exact", "both") else None
    rows = sweep_phi(optimizer_input(config, min(phis)), phis, exact_curve=curve)
    if config.opt_mode == "exact":
        for r in rows:
            r["x_dagger_bound"] = None
    return rows


def relative_error(a: float, b: float) -> float:
    if a == b:
        return 0.0
    scale = max(abs(a), abs(b))
    return abs(a - b) / scale if scale > 0 else 0.0


def compare(config: ScenarioConfig, seeds=None) -> list[dict]:
    ana = analyze(config).report
    seeds = list(seeds if seeds is not None else range(config.seed, config.seed + config.replications))
    _, agg = run_batch(config, seeds, workers=config.workers)
    rows = []
    for key in ("H2H", "M2M", "total"):
        a = ana.scalars(key)
        for metric in ("P_s", "P_f", "E_tau_ms", "blocked"):
            s = agg.mean[key][metric]
            rows.append({"class": key, "metric": metric, "analysis": a[metric], "simulation": s,
                         "sim_std": agg.std[key][metric], "rel_error": relative_error(a[metric], s)})
    return rows


def validate(config: ScenarioConfig, samples: int = 10**6, trials: int = 10**5, seed: int = 0) -> list[dict]:
    """Oracle-vs-engine comparison rows."""
    rows = []
    for n in range(1, 7):
        for M in range(1, 7):
            exact = oracles.exhaustive_tagged_success(n, M)
            engine = success_prob_m2m(n, M, exact=True)
            mc = contention_trials(n, M, trials, seed=seed + 31 * n + M)
            rows.append({"check": "tagged_success", "case": f"n={n};M={M}",
                         "oracle": float(exact), "engine": float(engine),
                         "abs_error": abs(float(engine) - float(exact)),
                         "pass": engine == exact and abs(mc - float(exact)) <= 0.01,
                         "monte_carlo": mc})
    geom, grid = config.geom, config.grid
    last = grid.eta
    origins = range(1, min(last, 6))
    for j in origins:
        mc = oracles.mc_backoff_distribution(geom, grid, j, samples, seed=seed + j)
        eng = {i: transition_prob(i, j, geom) for i in range(j + 1, last + 1)}
        eng = {i: p for i, p in eng.items() if p > 0}
        l1 = oracles.l1_distance(mc, eng)
        rows.append({"check": "backoff_kernel", "case": f"origin={j}", "oracle": 1.0,
                     "engine": sum(eng.values()), "abs_error": l1, "pass": l1 < 0.01,
                     "monte_carlo": l1})
    for nh, nm, x, M in ((0, 2, 27, 54), (1, 1, 1, 2), (1, 2, 2, 4), (2, 2, 2, 4)):
        exact = oracles.exhaustive_ja_tagged_success(nh, nm, x, M)
        _, eng = ja_success_probs(nh, nm, x, M, mode="mixture")
        rows.append({"check": "ja_tagged_success", "case": f"h2h={nh};m2m={nm};x={x};M={M}",
                     "oracle": float(exact), "engine": eng, "abs_error": abs(eng - float(exact)),
                     "pass": None, "monte_carlo": None})
    return rows

