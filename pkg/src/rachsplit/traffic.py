"""Arrival models for H2H (Poisson) and M2M (3GPP Type 1 / Type 2) traffic.

Expected counts feed the analytical engine; sampled arrival times feed the
simulator. A UE activating strictly between two RA slots attempts on the
next one, so slot ``i`` collects the interval ``(t_{i-1}, t_i]``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy import stats


@dataclass(frozen=True)
class SlotGrid:
    """RA time slots ``t_i = i * delta_sf`` for ``i = 1..eta`` over horizon ``T``."""

    delta_sf: int
    T: int

    def __post_init__(self):
        if self.delta_sf <= 0 or self.T <= 0:
            raise ValueError("delta_sf and T must be positive")

    @property
    def eta(self) -> int:
        return self.T // self.delta_sf

    def slot_time(self, i: int) -> int:
        return i * self.delta_sf

    def times(self) -> np.ndarray:
        """Slot times t_1..t_eta in ms."""
        return np.arange(1, self.eta + 1) * self.delta_sf

    def slot_of(self, t):
        """First slot index whose time is >= t (t = 0 maps to slot 1)."""
        idx = np.ceil(np.asarray(t, dtype=float) / self.delta_sf).astype(np.int64)
        return np.maximum(idx, 1)


@dataclass(frozen=True)
class M2MType1:
    n_mtc: int

    def __post_init__(self):
        if self.n_mtc < 0:
            raise ValueError("n_mtc must be >= 0")


@dataclass(frozen=True)
class M2MType2:
    n_mtc: int
    alpha: float = 3.0
    beta: float = 4.0

    def __post_init__(self):
        if self.n_mtc < 0:
            raise ValueError("n_mtc must be >= 0")
        if self.alpha <= 0 or self.beta <= 0:
            raise ValueError("Beta shapes must be positive")


@dataclass(frozen=True)
class H2HPoisson:
    lambda_slot: float

    def __post_init__(self):
        if self.lambda_slot < 0:
            raise ValueError("lambda_slot must be >= 0")

    @classmethod
    def from_rate_per_second(cls, rate: float, delta_sf: int) -> "H2HPoisson":
        return cls(rate * delta_sf / 1000.0)


ArrivalModel = Union[M2MType1, M2MType2, H2HPoisson]


def _is_m2m(model) -> bool:
    return isinstance(model, (M2MType1, M2MType2))


def raise_if_not_m2m(model):
    if not _is_m2m(model):
        raise TypeError(f"expected an M2M arrival model, got {type(model).__name__}")


def _activation_cdf(model, t, T):
    u = np.clip(np.asarray(t, dtype=float) / T, 0.0, 1.0)
    if isinstance(model, M2MType1):
        return u
    return stats.beta.cdf(u, model.alpha, model.beta)


def m2m_arrivals_all(model, grid: SlotGrid) -> np.ndarray:
    """Expected new M2M arrivals N_i for every slot, as an array of length eta."""
    raise_if_not_m2m(model)
    edges = np.arange(0, grid.eta + 1) * grid.delta_sf
    cdf = _activation_cdf(model, edges, grid.T)
    return model.n_mtc * np.diff(cdf)


def m2m_new_arrivals(model, grid: SlotGrid, i: int) -> float:
    raise_if_not_m2m(model)
    if not 1 <= i <= grid.eta:
        raise IndexError(f"slot {i} outside 1..{grid.eta}")
    lo, hi = _activation_cdf(model, [(i - 1) * grid.delta_sf, i * grid.delta_sf], grid.T)
    return float(model.n_mtc * (hi - lo))


def h2h_mean(model, i: int | None = None) -> float:
    """Mean H2H new arrivals per slot; time-homogeneous so ``i`` is ignored."""
    if not isinstance(model, H2HPoisson):
        raise TypeError(f"expected H2HPoisson, got {type(model).__name__}")
    return float(model.lambda_slot)


def h2h_arrivals_all(model, grid: SlotGrid) -> np.ndarray:
    return np.full(grid.eta, h2h_mean(model))


def new_arrivals(model, grid: SlotGrid) -> np.ndarray:
    """Per-slot expected new arrivals for either traffic class."""
    if model is None:
        return np.zeros(grid.eta)
    if isinstance(model, H2HPoisson):
        return h2h_arrivals_all(model, grid)
    return m2m_arrivals_all(model, grid)


def peak_slot_load(model, grid: SlotGrid) -> float:
    """Largest per-slot expected new arrivals (the binding design point)."""
    n = new_arrivals(model, grid)
    return float(n.max()) if n.size else 0.0


def _rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sample_arrivals(model, grid: SlotGrid, seed=None) -> np.ndarray:
    """Sorted arrival times (ms).

    M2M draws exactly ``n_mtc`` i.i.d. activation times on ``[0, T]``.
    H2H draws a Poisson count per slot, placed uniformly in ``(t_{i-1}, t_i]``.
    """
    rng = _rng(seed)
    if isinstance(model, H2HPoisson):
        counts = rng.poisson(model.lambda_slot, size=grid.eta)
        starts = np.repeat(np.arange(grid.eta) * grid.delta_sf, counts)
        # 1 - U lies in (0, 1], keeping each time inside its half-open interval
        return np.sort(starts + grid.delta_sf * (1.0 - rng.random(starts.size)))
    raise_if_not_m2m(model)
    if isinstance(model, M2MType1):
        u = rng.random(model.n_mtc)
    else:
        u = rng.beta(model.alpha, model.beta, size=model.n_mtc)
    return np.sort(u * grid.T)


def beta_mode(alpha: float, beta: float) -> float:
    if alpha <= 1 or beta <= 1:
        raise ValueError("mode is interior only for alpha, beta > 1")
    return (alpha - 1) / (alpha + beta - 2)


__all__ = [
    "SlotGrid", "M2MType1", "M2MType2", "H2HPoisson", "ArrivalModel",
    "m2m_new_arrivals", "m2m_arrivals_all", "h2h_mean", "h2h_arrivals_all",
    "new_arrivals", "peak_slot_load", "sample_arrivals", "beta_mode",
]
