"""The five TR 37.868 metrics, from a population grid or a simulator trace.

Analytical delay is accumulated as "delay mass" (ms x expected users) per
(slot, retry order, class) and normalised by expected successes. A UE that
succeeds on a retry is charged its last origin-to-destination gap plus the
RAR wait; ``lag="max-lag"`` charges ``k_j * delta_sf`` instead, and
``lag="cumulative"`` carries each cohort's waiting time through every retry
(the delay a UE actually experiences, comparable with the simulator).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .kmc import CLASSES, H2H, M2M, BackoffGeometry, PopulationGrid, TransitionMatrix

LAG_MODES = ("gap", "max-lag", "cumulative")
KEYS = ("H2H", "M2M", "total")


class MetricsError(ValueError):
    """Raised when a metric is undefined (no arrivals, no successes)."""


class CollisionRatioWarning(UserWarning):
    pass


@dataclass
class ClassMetrics:
    access_success_prob: float
    collision_prob: float
    preamble_tx_cdf: np.ndarray
    expected_access_delay: float
    delay_mass_cdf: np.ndarray
    blocked: float
    in_flight: float = 0.0
    offered: float = 0.0
    delays: np.ndarray | None = None

    def empirical_delay_cdf(self, d_ms):
        if self.delays is None:
            raise MetricsError("empirical delay CDF needs a simulator trace")
        return empirical_cdf(self.delays, d_ms)


@dataclass
class MetricsReport:
    per_class: dict = field(default_factory=dict)
    source: str = "analysis"

    def __getitem__(self, key) -> ClassMetrics:
        return self.per_class[key]

    def scalars(self, key: str) -> dict:
        m = self.per_class[key]
        return {"P_s": m.access_success_prob, "P_f": m.collision_prob,
                "E_tau_ms": m.expected_access_delay, "blocked": m.blocked}


def _cls_index(cls):
    if cls is None or cls == "total":
        return slice(None)
    return cls if isinstance(cls, int) else CLASSES.index(cls)


def _ratio(num, den):
    return float(num / den) if den > 0 else float("nan")


# ---- analysis path ---------------------------------------------------------

def access_success_probability(grid: PopulationGrid) -> dict:
    offered = grid.new.sum(axis=0)
    if offered.sum() <= 0:
        raise MetricsError("no arrivals in grid")
    succ = grid.Zs.sum(axis=(0, 1))
    return {"H2H": _ratio(succ[H2H], offered[H2H]),
            "M2M": _ratio(succ[M2M], offered[M2M]),
            "total": _ratio(succ.sum(), offered.sum())}


def collision_probability(grid: PopulationGrid, M: int, eta: int | None = None) -> dict:
    """Collided UEs per random-access opportunity (eta * M); may exceed 1."""
    eta = grid.eta if eta is None else eta
    if M <= 0 or eta <= 0:
        raise MetricsError("collision probability needs M > 0 and eta > 0")
    fails = grid.Zf.sum(axis=(0, 1))
    raos = eta * M
    out = {"H2H": fails[H2H] / raos, "M2M": fails[M2M] / raos, "total": fails.sum() / raos}
    if out["total"] > 1:
        warnings.warn(f"collisions per RAO = {out['total']:.3g} exceeds 1", CollisionRatioWarning)
    return {k: float(v) for k, v in out.items()}


def preamble_tx_cdf(grid: PopulationGrid, r: int, cls=None) -> float:
    if not 1 <= r <= grid.W:
        raise ValueError(f"r must be in 1..{grid.W}")
    per_order = grid.Zs[:, :, _cls_index(cls)]
    per_order = per_order.sum(axis=0)
    if per_order.ndim > 1:
        per_order = per_order.sum(axis=1)
    total = per_order.sum()
    if total <= 0:
        raise MetricsError("no expected successes")
    return float(per_order[:r].sum() / total)


def delay_mass_new(grid: PopulationGrid, i: int, geom: BackoffGeometry) -> np.ndarray:
    """Delay mass of first-attempt successes at slot ``i``, per class."""
    return grid.Zs[i - 1, 0] * (geom.delta_sf / 2 + geom.rar_wait)


def _lag_ms(matrix: TransitionMatrix, i: int, j: int, lag: str) -> float:
    geom = matrix.geom
    if lag == "gap":
        return (i - j) * geom.delta_sf
    if lag == "max-lag":
        return matrix.k[j - 1] * geom.delta_sf
    raise ValueError(f"unknown lag mode {lag!r}")


def delay_mass_retx(grid: PopulationGrid, matrix: TransitionMatrix, i: int, n: int,
                    geom: BackoffGeometry, lag: str = "gap") -> np.ndarray:
    if not 2 <= n <= grid.W:
        raise ValueError(f"n must be in 2..{grid.W}")
    out = np.zeros(2)
    for j in range(max(1, i - matrix.span), i):
        p = matrix.P[i - 1, j - 1]
        if p == 0:
            continue
        arrivals = grid.Zf[j - 1, n - 2] * p
        out += arrivals * grid.p_success[i - 1] * (_lag_ms(matrix, i, j, lag) + geom.rar_wait)
    return out


def delay_masses(grid: PopulationGrid, matrix: TransitionMatrix, geom: BackoffGeometry,
                 lag: str = "gap") -> np.ndarray:
    """All delay masses, shape (eta, W, 2); vectorised form of the two helpers above."""
    if lag not in LAG_MODES:
        raise ValueError(f"unknown lag mode {lag!r}")
    if lag == "cumulative":
        return _cumulative_delay_masses(grid, matrix, geom)
    eta, W = grid.eta, grid.W
    tau = np.zeros((eta, W, 2))
    tau[:, 0] = grid.Zs[:, 0] * (geom.delta_sf / 2 + geom.rar_wait)
    if W == 1:
        return tau
    idx = np.arange(eta)
    for d in range(1, matrix.span + 1):
        dest = idx[d:]
        orig = dest - d
        p = matrix.P[dest, orig]
        if lag == "gap":
            lag_ms = np.full(dest.size, d * geom.delta_sf, dtype=float)
        else:
            lag_ms = matrix.k[orig] * geom.delta_sf
        weight = (p * (lag_ms + geom.rar_wait))[:, None, None]
        tau[dest, 1:] += weight * grid.Zf[orig, :-1] * grid.p_success[dest][:, None, :]
    return tau


def _cumulative_delay_masses(grid, matrix, geom):
    # wait[i, n]: summed waiting (arrival -> attempt at slot i) of the (i, n) cohort.
    # Success does not depend on waiting time, so failures carry the cohort mean.
    eta, W = grid.eta, grid.W
    dsf = geom.delta_sf
    wait = np.zeros_like(grid.Z)
    wait[:, 0] = grid.Z[:, 0] * dsf / 2
    fail_wait = np.zeros_like(wait)
    q = 1.0 - grid.p_success
    for i in range(eta):
        if W > 1 and i > 0:
            lo = max(0, i - matrix.span)
            p = matrix.P[i, lo:i]
            gaps = (i - np.arange(lo, i)) * dsf
            carried = fail_wait[lo:i, :-1] + grid.Zf[lo:i, :-1] * gaps[:, None, None]
            wait[i, 1:] = np.tensordot(p, carried, axes=(0, 0))
        fail_wait[i] = wait[i] * q[i]
    return grid.p_success[:, None, :] * (wait + grid.Z * geom.rar_wait)


def expected_access_delay(grid: PopulationGrid, matrix: TransitionMatrix, geom: BackoffGeometry,
                          lag: str = "gap") -> dict:
    tau = delay_masses(grid, matrix, geom, lag).sum(axis=(0, 1))
    succ = grid.Zs.sum(axis=(0, 1))
    if succ.sum() <= 0:
        raise MetricsError("no expected successes")
    return {"H2H": _ratio(tau[H2H], succ[H2H]), "M2M": _ratio(tau[M2M], succ[M2M]),
            "total": _ratio(tau.sum(), succ.sum())}


def access_delay_cdf(grid: PopulationGrid, matrix: TransitionMatrix, geom: BackoffGeometry,
                     omega: int, cls=None, lag: str = "gap") -> float:
    """Delay mass of successes within ``omega`` attempts over all successes (ms)."""
    if not 1 <= omega <= grid.W:
        raise ValueError(f"omega must be in 1..{grid.W}")
    c = _cls_index(cls)
    tau = delay_masses(grid, matrix, geom, lag)[:, :, c]
    succ = grid.Zs[:, :, c].sum()
    if succ <= 0:
        raise MetricsError("no expected successes")
    return float(tau[:, :omega].sum() / succ)


def analysis_report(grid: PopulationGrid, matrix: TransitionMatrix, geom: BackoffGeometry,
                    M: int, lag: str = "gap") -> MetricsReport:
    tau = delay_masses(grid, matrix, geom, lag)
    offered = grid.new.sum(axis=0)
    report = MetricsReport(source="analysis")
    raos = grid.eta * M
    for key in KEYS:
        c = _cls_index(key)
        zs = grid.Zs[:, :, c].reshape(grid.eta, grid.W, -1).sum(axis=(0, 2))
        zf = grid.Zf[:, :, c].sum()
        t = tau[:, :, c].reshape(grid.eta, grid.W, -1).sum(axis=(0, 2))
        succ = zs.sum()
        off = float(np.sum(offered[c]))
        report.per_class[key] = ClassMetrics(
            access_success_prob=_ratio(succ, off),
            collision_prob=float(zf / raos),
            preamble_tx_cdf=np.cumsum(zs) / succ if succ > 0 else np.full(grid.W, np.nan),
            expected_access_delay=_ratio(t.sum(), succ),
            delay_mass_cdf=np.cumsum(t) / succ if succ > 0 else np.full(grid.W, np.nan),
            blocked=float(np.sum(grid.blocked[c])),
            in_flight=float(np.sum(grid.in_flight[c])),
            offered=off,
        )
    if report["total"].collision_prob > 1:
        warnings.warn("collisions per RAO exceeds 1", CollisionRatioWarning)
    return report


# ---- trace path ------------------------------------------------------------

def empirical_cdf(delays, d_ms):
    delays = np.sort(np.asarray(delays, dtype=float))
    if delays.size == 0:
        raise MetricsError("no successful UEs")
    return np.searchsorted(delays, d_ms, side="right") / delays.size


def trace_report(trace) -> MetricsReport:
    """Empirical metrics from a simulator trace (see ``simulator.SimTrace``)."""
    from .simulator import BLOCKED, IN_FLIGHT, SUCCESS

    W, M, eta = trace.W, trace.M, trace.eta
    ue = trace.ues
    report = MetricsReport(source="simulation")
    coll_cls = ue.cls[trace.att_ue[~trace.att_success]]
    for key in KEYS:
        mask = ue.active if key == "total" else ue.active & (ue.cls == CLASSES.index(key))
        final = ue.final[mask]
        ok = final == SUCCESS
        n_ok = int(ok.sum())
        delays = ue.delay[mask][ok]
        tries = ue.n_attempts[mask][ok]
        hist = np.bincount(tries, minlength=W + 1)[1:W + 1].astype(float)
        d_mass = np.bincount(tries, weights=delays, minlength=W + 1)[1:W + 1]
        collided = coll_cls.size if key == "total" else int((coll_cls == CLASSES.index(key)).sum())
        report.per_class[key] = ClassMetrics(
            access_success_prob=_ratio(n_ok, mask.sum()),
            collision_prob=collided / (eta * M),
            preamble_tx_cdf=np.cumsum(hist) / n_ok if n_ok else np.full(W, np.nan),
            expected_access_delay=float(delays.mean()) if n_ok else float("nan"),
            delay_mass_cdf=np.cumsum(d_mass) / n_ok if n_ok else np.full(W, np.nan),
            blocked=float((final == BLOCKED).sum()),
            in_flight=float((final == IN_FLIGHT).sum()),
            offered=float(mask.sum()),
            delays=delays,
        )
    return report


def trace_access_delay_cdf(trace, omega: int, cls=None) -> float:
    key = "total" if cls is None else cls
    m = trace_report(trace)[key]
    if not np.isfinite(m.expected_access_delay):
        raise MetricsError("no successful UEs")
    return float(m.delay_mass_cdf[omega - 1])
