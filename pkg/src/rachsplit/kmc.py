"""K-th order Markov-chain engine for RACH slot populations.

Slot ``i`` sees new arrivals plus UEs that failed at one of the previous
``k_i`` slots and whose uniform integer backoff expires in ``(t_{i-1}, t_i]``.
Populations are real-valued expectations (mean-field); nothing is rounded.

Array conventions: slots are 1-based in the public functions and 0-based in
arrays (row ``i - 1`` holds slot ``i``). Retry order ``n`` lives at index
``n - 1``. Class axis: ``H2H = 0``, ``M2M = 1``.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Union

import numpy as np

from .traffic import SlotGrid

H2H, M2M = 0, 1
CLASSES = ("H2H", "M2M")


@dataclass(frozen=True)
class BackoffGeometry:
    """Timing of the RAR wait and backoff window, all in integer ms."""

    T_RAR: int = 2
    W_RAR: int = 5
    W_BO: int = 20
    delta_sf: int = 10

    def __post_init__(self):
        for name in ("T_RAR", "W_RAR", "W_BO"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.delta_sf <= 0:
            raise ValueError("delta_sf must be positive")
        if self.T_RAR + self.W_RAR < 1:
            # a zero wait would put the retry back into the slot that just collided
            raise ValueError("T_RAR + W_RAR must be >= 1")

    @property
    def rar_wait(self) -> int:
        return self.T_RAR + self.W_RAR

    @property
    def delta_w_bo(self) -> int:
        return self.W_BO + 1

    def bo_min(self, j: int) -> int:
        return j * self.delta_sf + self.rar_wait

    def bo_max(self, j: int) -> int:
        return self.bo_min(j) + self.W_BO


@dataclass(frozen=True)
class Shared:
    M: int

    def __post_init__(self):
        if self.M < 1:
            raise ValueError("M must be >= 1")


@dataclass(frozen=True)
class DA:
    """Disjoint allocation: ``a`` preambles for H2H, ``M - a`` for M2M."""

    a: int
    M: int

    def __post_init__(self):
        if not 0 < self.a < self.M:
            raise ValueError("a must satisfy 0 < a < M")


@dataclass(frozen=True)
class JA:
    """Joint allocation: H2H restricted to ``x`` preambles, M2M uses all ``M``."""

    x: int
    M: int

    def __post_init__(self):
        if not 0 < self.x < self.M:
            raise ValueError("x must satisfy 0 < x < M")


AllocationPolicy = Union[Shared, DA, JA]


def _slot_range(t_lo: int, t_hi: int, delta_sf: int) -> tuple[int, int]:
    """Slots whose window (t_{i-1}, t_i] meets the integer interval [t_lo, t_hi]."""
    return -(-t_lo // delta_sf), -(-t_hi // delta_sf)


def _landing_count(i: int, j: int, geom: BackoffGeometry) -> int:
    lo = max(geom.bo_min(j), (i - 1) * geom.delta_sf + 1)
    hi = min(geom.bo_max(j), i * geom.delta_sf)
    return max(0, hi - lo + 1)


def max_lag(i: int, geom: BackoffGeometry, grid: SlotGrid | None = None) -> int:
    """Number of earlier slots whose failed UEs can reattempt at slot ``i``."""
    return sum(1 for j in range(1, i) if _landing_count(i, j, geom) > 0)


def transition_prob(i: int, j: int, geom: BackoffGeometry, grid: SlotGrid | None = None) -> float:
    if j >= i or j < 1:
        raise ValueError(f"transition needs 1 <= j < i, got i={i}, j={j}")
    return _landing_count(i, j, geom) / geom.delta_w_bo


@dataclass
class TransitionMatrix:
    """Dense lower-triangular kernel; ``P[i-1, j-1]`` is the mass moving j -> i.

    ``beyond[j-1]`` is the mass of origin ``j`` landing after ``t_eta``.
    """

    P: np.ndarray
    beyond: np.ndarray
    k: np.ndarray
    geom: BackoffGeometry

    @property
    def eta(self) -> int:
        return self.P.shape[0]

    @property
    def span(self) -> int:
        return int(self.k.max()) if self.k.size else 0

    def triplets(self):
        dest, orig = np.nonzero(self.P)
        return [(int(i) + 1, int(j) + 1, float(self.P[i, j])) for i, j in zip(dest, orig)]


def build_matrix(geom: BackoffGeometry, grid: SlotGrid) -> TransitionMatrix:
    if geom.delta_sf != grid.delta_sf:
        raise ValueError("geometry and grid disagree on delta_sf")
    eta = grid.eta
    P = np.zeros((eta, eta))
    beyond = np.zeros(eta)
    for j in range(1, eta + 1):
        first, last = _slot_range(geom.bo_min(j), geom.bo_max(j), geom.delta_sf)
        for i in range(first, last + 1):
            mass = _landing_count(i, j, geom) / geom.delta_w_bo
            if i <= eta:
                P[i - 1, j - 1] = mass
            else:
                beyond[j - 1] += mass
    k = np.count_nonzero(P, axis=1)
    return TransitionMatrix(P=P, beyond=beyond, k=k, geom=geom)


def _tagged(load, pool, offset):
    p = np.power(1.0 - 1.0 / pool, np.maximum(np.asarray(load, dtype=float) - offset, 0.0))
    return np.clip(p, 0.0, 1.0) if np.ndim(p) else float(min(max(p, 0.0), 1.0))


def success_prob_m2m(Z, pool, exact: bool = False):
    """Tagged-user success ``(1 - 1/pool)^(Z - 1)``; exponent floored at 0.

    With ``exact=True`` and integral inputs the result is a ``Fraction``.
    """
    if pool <= 0:
        raise ValueError("pool must be >= 1")
    if exact:
        return (1 - Fraction(1, pool)) ** max(int(Z) - 1, 0)
    return _tagged(Z, pool, 1.0)


def success_prob_h2h(Z, pool):
    """Poisson-form success ``exp(-Z / pool)``."""
    if pool <= 0:
        raise ValueError("pool must be >= 1")
    p = np.exp(-np.asarray(Z, dtype=float) / pool)
    return p if np.ndim(p) else float(p)


JA_MODES = ("mixture", "as-written")
CONTENTION_MODES = ("palm", "tagged")


def ja_success_probs(Z_h2h, Z_m2m, x: int, M: int, mode: str = "mixture", offset: float = 1.0):
    """H2H and M2M success probabilities under joint allocation.

    M2M UEs land in the shared ``x`` block with probability ``x/M``; there
    they meet every H2H UE. ``mixture`` weights the two blocks by that
    probability, ``as-written`` adds the two block terms and clamps.
    ``offset`` is subtracted from each block load in the exponent.
    """
    if not 0 < x < M:
        raise ValueError("x must satisfy 0 < x < M")
    if mode not in JA_MODES:
        raise ValueError(f"unknown JA mode {mode!r}")
    share = x / M
    in_shared = _tagged(Z_h2h + Z_m2m * share, x, offset)
    in_private = _tagged(Z_m2m * (1 - share), M - x, offset)
    if mode == "mixture":
        p_m2m = share * in_shared + (1 - share) * in_private
    else:
        p_m2m = np.clip(in_shared + in_private, 0.0, 1.0)
    p_h2h = success_prob_h2h(Z_h2h, x)
    return p_h2h, (float(p_m2m) if np.ndim(p_m2m) == 0 else p_m2m)


def class_success_probs(policy, Z_h2h, Z_m2m, ja_mode: str = "mixture",
                        contention: str = "palm"):
    """Per-class success probability for one slot under ``policy``.

    ``tagged`` applies the fixed-population form (others = Z - 1) to the
    expected load. ``palm`` treats the load as Poisson-like, so a tagged M2M
    UE faces Z others on average: exponent Z instead of Z - 1.
    """
    if contention not in CONTENTION_MODES:
        raise ValueError(f"unknown contention mode {contention!r}")
    offset = 1.0 if contention == "tagged" else 0.0
    if isinstance(policy, Shared):
        total = Z_h2h + Z_m2m
        return success_prob_h2h(total, policy.M), _tagged(total, policy.M, offset)
    if isinstance(policy, DA):
        return (success_prob_h2h(Z_h2h, policy.a),
                _tagged(Z_m2m, policy.M - policy.a, offset))
    if isinstance(policy, JA):
        return ja_success_probs(Z_h2h, Z_m2m, policy.x, policy.M, ja_mode, offset)
    raise TypeError(f"unknown policy {policy!r}")


@dataclass
class PopulationGrid:
    """Expected populations per (slot, retry order, class).

    ``blocked`` counts failures on the W-th attempt; ``in_flight`` counts
    backoff mass that lands after the last slot.
    """

    Z: np.ndarray
    Zs: np.ndarray
    Zf: np.ndarray
    p_success: np.ndarray
    new: np.ndarray
    blocked: np.ndarray
    in_flight: np.ndarray
    policy: object = None
    ja_mode: str = "mixture"
    contention: str = "palm"

    @property
    def eta(self) -> int:
        return self.Z.shape[0]

    @property
    def W(self) -> int:
        return self.Z.shape[1]

    def totals(self) -> np.ndarray:
        """Per-slot arrivals summed over retry orders, shape (eta, 2)."""
        return self.Z.sum(axis=1)

    def conservation_residual(self) -> np.ndarray:
        """Relative gap between new arrivals and (success + blocked + in-flight)."""
        offered = self.new.sum(axis=0)
        accounted = self.Zs.sum(axis=(0, 1)) + self.blocked + self.in_flight
        scale = np.where(offered > 0, offered, 1.0)
        return np.abs(accounted - offered) / scale


def propagate(policy, matrix: TransitionMatrix, new_h2h, new_m2m, W: int,
              ja_mode: str = "mixture", contention: str = "palm") -> PopulationGrid:
    """Forward recursion over slots; returns the filled population grid."""
    new = np.stack([np.asarray(new_h2h, dtype=float), np.asarray(new_m2m, dtype=float)], axis=1)
    eta = matrix.eta
    if new.shape[0] != eta:
        raise ValueError(f"arrival horizon {new.shape[0]} does not match matrix dimension {eta}")
    if W < 1:
        raise ValueError("W must be >= 1")
    if np.any(new < 0):
        raise ValueError("new arrivals must be non-negative")

    Z = np.zeros((eta, W, 2))
    Zs = np.zeros_like(Z)
    Zf = np.zeros_like(Z)
    ps = np.zeros((eta, 2))
    span = matrix.span
    P = matrix.P
    for i in range(eta):
        Z[i, 0] = new[i]
        if W > 1 and i > 0:
            lo = max(0, i - span)
            Z[i, 1:] = np.tensordot(P[i, lo:i], Zf[lo:i, :-1], axes=(0, 0))
        tot = Z[i].sum(axis=0)
        p_h, p_m = class_success_probs(policy, tot[H2H], tot[M2M], ja_mode, contention)
        ps[i] = (p_h, p_m)
        Zs[i] = Z[i] * ps[i]
        Zf[i] = Z[i] - Zs[i]

    blocked = Zf[:, W - 1].sum(axis=0)
    in_flight = (matrix.beyond[:, None] * Zf[:, : W - 1].sum(axis=1)).sum(axis=0)
    return PopulationGrid(Z=Z, Zs=Zs, Zf=Zf, p_success=ps, new=new, blocked=blocked,
                          in_flight=in_flight, policy=policy, ja_mode=ja_mode,
                          contention=contention)


def split_parameter(policy) -> int | None:
    if isinstance(policy, DA):
        return policy.a
    if isinstance(policy, JA):
        return policy.x
    return None


def policy_kind(policy) -> str:
    return {Shared: "shared", DA: "da", JA: "ja"}[type(policy)]


def make_policy(kind: str, M: int, a: int | None = None, x: int | None = None):
    kind = kind.lower()
    if (kind == "da" and a is None) or (kind == "ja" and x is None):
        raise ValueError(f"policy {kind} needs its split parameter")
    if kind == "shared":
        return Shared(M)
    if kind == "da":
        return DA(a, M)
    if kind == "ja":
        return JA(x, M)
    raise ValueError(f"unknown policy kind {kind!r}")

