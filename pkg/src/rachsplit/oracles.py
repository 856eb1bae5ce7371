"""Brute-force ground truth for the contention and backoff formulas.

These deliberately share no code with ``kmc``: enumeration walks every
preamble assignment, and the backoff oracle draws raw integer timers.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

ENUMERATION_LIMIT = 10**7
_CHUNK = 1 << 18


@dataclass
class OracleResult:
    description: str
    value: object
    method: str
    samples: int | None = None


def _alone_counts(sizes: list[int], tagged: int) -> int:
    """Count assignments (UE u picks from range(sizes[u])) leaving ``tagged`` alone."""
    sizes = np.asarray(sizes, dtype=np.int64)
    total = int(np.prod(sizes))
    if total > ENUMERATION_LIMIT:
        raise ValueError(f"{total} assignments exceed the enumeration limit {ENUMERATION_LIMIT}")
    alone = 0
    for start in range(0, total, _CHUNK):
        flat = np.arange(start, min(start + _CHUNK, total))
        picks = np.stack(np.unravel_index(flat, tuple(sizes)), axis=1)
        same = picks == picks[:, [tagged]]
        alone += int(np.count_nonzero(same.sum(axis=1) == 1))
    return alone


def exhaustive_tagged_success(n: int, M: int) -> Fraction:
    """P(tagged UE alone) with ``n`` UEs each picking uniformly from ``M`` preambles."""
    if n < 1 or M < 1:
        raise ValueError("need n >= 1 and M >= 1")
    if n == 1:
        return Fraction(1)
    return Fraction(_alone_counts([M] * n, 0), M**n)


def exhaustive_ja_tagged_success(n_h2h: int, n_m2m: int, x: int, M: int) -> Fraction:
    """Tagged M2M success when H2H picks from the first ``x`` preambles and M2M from all ``M``."""
    if n_m2m < 1:
        raise ValueError("need a tagged M2M UE (n_m2m >= 1)")
    if not 0 < x <= M:
        raise ValueError("need 0 < x <= M")
    sizes = [M] * n_m2m + [x] * n_h2h
    return Fraction(_alone_counts(sizes, 0), int(np.prod(np.asarray(sizes, dtype=object))))


def mc_backoff_distribution(geom, grid, origin: int, samples: int = 10**6, seed=None) -> dict:
    """Monte-Carlo landing slots of a UE that collided at ``origin``.

    Returns ``{slot: probability}``; slots past the horizon are kept as-is.
    """
    if samples < 10**5:
        raise ValueError("use at least 1e5 samples")
    rng = np.random.default_rng(seed)
    t0 = origin * grid.delta_sf + geom.T_RAR + geom.W_RAR
    expiry = t0 + rng.integers(0, geom.W_BO + 1, size=samples)
    slots = -(-expiry // grid.delta_sf)
    first = int(slots.min())
    counts = np.bincount(slots - first)
    return {first + k: int(c) / samples for k, c in enumerate(counts) if c}


def l1_distance(p: dict, q: dict) -> float:
    keys = set(p) | set(q)
    return float(sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys))
