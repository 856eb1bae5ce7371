"""Choice of the shared H2H preamble count x under joint allocation.

Two routes to x-dagger, the largest x meeting an M2M delay threshold phi:

* ``bound``: a closed-form objective built from Jensen lower bounds on the
  expected number of successes (numerator at the per-slot loads, denominator
  at the W-scaled steady-state loads), scaled by the expected per-state delay.
* ``exact``: run the full population recursion for every x and read the M2M
  access delay from the metrics.

x is integral, so both routes scan ``1..M-1`` exhaustively.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .kmc import BackoffGeometry


@dataclass(frozen=True)
class OptimizerInput:
    """Steady-state design point; ``lam`` and ``N`` are per-slot new arrivals."""

    M: int
    W: int
    lam: float
    N: float
    phi: float
    geom: BackoffGeometry = field(default_factory=BackoffGeometry)
    k: int = 3
    include_delay_factor: bool = True

    def __post_init__(self):
        if self.M < 2:
            raise ValueError("M must be >= 2")
        if self.lam < 0 or self.N < 0:
            raise ValueError("loads must be non-negative")
        if self.phi <= self.geom.rar_wait:
            raise ValueError("phi must exceed T_RAR + W_RAR")


def expected_state_delay(geom: BackoffGeometry, k: int) -> float:
    """Mean delay of a slot fed by ``k`` past slots: k(k+1)/2 slot gaps plus the RAR wait."""
    if k < 0:
        raise ValueError("k must be >= 0")
    return k * (k + 1) / 2 * geom.delta_sf + geom.rar_wait


def _check_x(x, M):
    if not 0 < x < M:
        raise ValueError(f"x must satisfy 0 < x < M, got x={x}, M={M}")


def _term(load, pool):
    return load * (1.0 - 1.0 / pool) ** max(load - 1.0, 0.0)


def bound_A(x, M, lam, N) -> float:
    _check_x(x, M)
    alpha = lam + N * x / M
    gamma = N * (M - x) / M
    return _term(alpha, x) + _term(gamma, M - x)


def bound_B(x, M, lam, N) -> float:
    return bound_A(x, M, lam, N) + lam * math.exp(-lam / x)


def objective(x, inp: OptimizerInput) -> float:
    _check_x(x, inp.M)
    num = bound_A(x, inp.M, inp.lam, inp.N)
    den = bound_B(x, inp.M, inp.W * inp.lam, inp.W * inp.N)
    ratio = num / den if den > 0 else 0.0
    if not inp.include_delay_factor:
        return ratio
    return expected_state_delay(inp.geom, inp.k) * ratio


@dataclass
class Solution:
    x_dagger: int | None
    feasible: bool
    curve: np.ndarray
    x_min: int
    J_min: float
    mode: str = "bound"

    @property
    def xs(self) -> np.ndarray:
        return np.arange(1, self.curve.size + 1)


def largest_feasible(curve, phi) -> Solution:
    curve = np.asarray(curve, dtype=float)
    ok = np.flatnonzero(curve <= phi)
    i_min = int(np.nanargmin(curve))
    x = int(ok[-1]) + 1 if ok.size else None
    return Solution(x_dagger=x, feasible=ok.size > 0, curve=curve, x_min=i_min + 1,
                    J_min=float(curve[i_min]))


def bound_curve(inp: OptimizerInput) -> np.ndarray:
    return np.array([objective(x, inp) for x in range(1, inp.M)])


def solve_x_dagger(inp: OptimizerInput, exact_curve=None) -> dict:
    """Bound-mode solution, plus the exact-mode one when its curve is supplied.

    ``exact_curve`` is E[tau]^M2M(x) for x = 1..M-1, e.g. from
    ``pipeline.exact_delay_curve``.
    """
    out = {"bound": largest_feasible(bound_curve(inp), inp.phi)}
    if exact_curve is not None:
        sol = largest_feasible(exact_curve, inp.phi)
        sol.mode = "exact"
        out["exact"] = sol
    return out


def sweep_phi(inp: OptimizerInput, phis, exact_curve=None) -> list[dict]:
    rows = []
    bound = bound_curve(inp)
    for phi in phis:
        b = largest_feasible(bound, phi)
        row = {"phi_ms": phi, "x_dagger_bound": b.x_dagger, "J_min_ms": b.J_min,
               "feasible": b.feasible}
        if exact_curve is not None:
            e = largest_feasible(exact_curve, phi)
            row["x_dagger_exact"] = e.x_dagger
            row["exact_min_ms"] = e.J_min
            row["feasible"] = b.feasible or e.feasible
        rows.append(row)
    return rows


def with_phi(inp: OptimizerInput, phi: float) -> OptimizerInput:
    return replace(inp, phi=phi)
