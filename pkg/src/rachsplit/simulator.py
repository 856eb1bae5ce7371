"""Slot-driven simulator of the 4-step random-access procedure.

Success is declared at Msg2: a preamble picked by exactly one UE in a slot
succeeds and its UE leaves ``T_RAR + W_RAR`` ms later. Collided UEs wait the
full RAR window, draw an integer backoff uniform on ``0..W_BO`` ms and retry
at the first RA slot at or after expiry. A UE whose W-th attempt collides is
blocked.

RNG draw order per replication (one ``numpy`` Generator): M2M arrival times,
H2H arrival times, then per slot the preamble picks of all contenders in
ascending UE id followed by the backoff draws of the collided ones in
ascending UE id.
"""
from __future__ import annotations

import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .kmc import CLASSES, DA, H2H, JA, M2M, Shared
from .traffic import sample_arrivals

SUCCESS, BLOCKED, IN_FLIGHT = 0, 1, 2
FINAL_NAMES = ("success", "blocked", "in-flight")


@dataclass
class UeRecord:
    ue_id: int
    cls: str
    arrival_time: float
    attempts: list
    final: str
    success_delay: float | None


@dataclass
class SlotOutcome:
    slot: int
    contenders: np.ndarray
    successes: int
    collided: int


@dataclass
class UeTable:
    cls: np.ndarray
    arrival: np.ndarray
    first_slot: np.ndarray
    n_attempts: np.ndarray
    final: np.ndarray
    delay: np.ndarray
    active: np.ndarray

    def __len__(self):
        return self.cls.size


@dataclass
class SimTrace:
    params: dict
    seed: object
    ues: UeTable
    att_ue: np.ndarray
    att_slot: np.ndarray
    att_preamble: np.ndarray
    att_success: np.ndarray
    slot_counts: np.ndarray
    W: int
    M: int
    eta: int
    delta_sf: int

    def ue_records(self) -> list[UeRecord]:
        order = np.argsort(self.att_ue, kind="stable")
        per_ue = [[] for _ in range(len(self.ues))]
        for a in order:
            per_ue[self.att_ue[a]].append(
                (int(self.att_slot[a]), int(self.att_preamble[a]),
                 "success" if self.att_success[a] else "collision"))
        u = self.ues
        return [UeRecord(k, CLASSES[u.cls[k]], float(u.arrival[k]), per_ue[k],
                         FINAL_NAMES[u.final[k]],
                         float(u.delay[k]) if u.final[k] == SUCCESS else None)
                for k in range(len(u))]

    def slot_outcomes(self) -> list[SlotOutcome]:
        out = []
        for i in range(self.eta):
            c = self.slot_counts[i]
            out.append(SlotOutcome(i + 1, c, int((c == 1).sum()), int(c[c > 1].sum())))
        return out

    def to_csv(self) -> tuple[str, str]:
        """UE records and slot outcomes as CSV text."""
        ue = io.StringIO()
        ue.write("ue_id,class,arrival_ms,n_attempts,final,delay_ms\n")
        u = self.ues
        for k in range(len(u)):
            d = f"{u.delay[k]:.9g}" if u.final[k] == SUCCESS else ""
            ue.write(f"{k},{CLASSES[u.cls[k]]},{u.arrival[k]:.9g},{u.n_attempts[k]},"
                     f"{FINAL_NAMES[u.final[k]]},{d}\n")
        sl = io.StringIO()
        sl.write("slot,t_ms,contenders,successes,collisions\n")
        for i in range(self.eta):
            c = self.slot_counts[i]
            sl.write(f"{i + 1},{(i + 1) * self.delta_sf},{int(c.sum())},{int((c == 1).sum())},"
                     f"{int(c[c > 1].sum())}\n")
        return ue.getvalue(), sl.getvalue()


def preamble_ranges(policy, cls: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Half-open preamble index range each UE may pick from."""
    lo = np.zeros(cls.size, dtype=np.int64)
    hi = np.empty(cls.size, dtype=np.int64)
    if isinstance(policy, Shared):
        hi[:] = policy.M
    elif isinstance(policy, DA):
        h = cls == H2H
        hi[h] = policy.a
        lo[~h] = policy.a
        hi[~h] = policy.M
    elif isinstance(policy, JA):
        hi[:] = np.where(cls == H2H, policy.x, policy.M)
    else:
        raise TypeError(f"unknown policy {policy!r}")
    return lo, hi


def singletons(picks: np.ndarray, M: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-preamble contender counts and the mask of UEs alone on their preamble."""
    counts = np.bincount(picks, minlength=M)
    return counts, counts[picks] == 1


def simulate(policy, geom, grid, W: int, m2m=None, h2h=None, seed=None, params=None,
             arrivals=None) -> SimTrace:
    """Run one replication. ``arrivals=(times_ms, classes)`` replaces the traffic models."""
    rng = np.random.default_rng(seed)
    M = policy.M
    eta = grid.eta
    dsf = grid.delta_sf
    rar = geom.rar_wait

    if arrivals is not None:
        arrival = np.asarray(arrivals[0], dtype=float)
        cls = np.asarray(arrivals[1], dtype=np.int8)
    else:
        t_m = sample_arrivals(m2m, grid, rng) if m2m is not None else np.empty(0)
        t_h = sample_arrivals(h2h, grid, rng) if h2h is not None else np.empty(0)
        arrival = np.concatenate([t_m, t_h])
        cls = np.concatenate([np.full(t_m.size, M2M), np.full(t_h.size, H2H)]).astype(np.int8)
    order = np.argsort(arrival, kind="stable")
    arrival, cls = arrival[order], cls[order]
    n = arrival.size

    first = grid.slot_of(arrival) if n else np.empty(0, dtype=np.int64)
    active = first <= eta
    n_att = np.zeros(n, dtype=np.int64)
    final = np.full(n, IN_FLIGHT, dtype=np.int8)
    delay = np.full(n, np.nan)

    buckets = [[] for _ in range(eta + 2)]
    for k in np.flatnonzero(active):
        buckets[first[k]].append(k)

    att_ue, att_slot, att_pre, att_ok = [], [], [], []
    slot_counts = np.zeros((eta, M), dtype=np.int64)
    for i in range(1, eta + 1):
        if not buckets[i]:
            continue
        ids = np.array(sorted(buckets[i]), dtype=np.int64)
        buckets[i] = None
        lo, hi = preamble_ranges(policy, cls[ids])
        picks = rng.integers(lo, hi)
        counts, ok = singletons(picks, M)
        slot_counts[i - 1] = counts
        n_att[ids] += 1
        att_ue.append(ids)
        att_slot.append(np.full(ids.size, i))
        att_pre.append(picks)
        att_ok.append(ok)

        t_i = i * dsf
        won = ids[ok]
        final[won] = SUCCESS
        delay[won] = t_i + rar - arrival[won]

        lost = ids[~ok]
        done = n_att[lost] >= W
        final[lost[done]] = BLOCKED
        retry = lost[~done]
        if retry.size:
            expiry = t_i + rar + rng.integers(0, geom.W_BO + 1, size=retry.size)
            nxt = -(-expiry // dsf)
            for k, s in zip(retry, nxt):
                if s <= eta:
                    buckets[s].append(k)

    cat = (lambda xs, dt: np.concatenate(xs) if xs else np.empty(0, dtype=dt))
    ues = UeTable(cls=cls, arrival=arrival, first_slot=first, n_attempts=n_att, final=final,
                  delay=delay, active=active)
    return SimTrace(params=dict(params or {}), seed=seed, ues=ues,
                    att_ue=cat(att_ue, np.int64), att_slot=cat(att_slot, np.int64),
                    att_preamble=cat(att_pre, np.int64), att_success=cat(att_ok, bool),
                    slot_counts=slot_counts, W=W, M=M, eta=eta, delta_sf=dsf)


def run_replication(config, seed=None) -> SimTrace:
    seed = config.seed if seed is None else seed
    return simulate(config.policy, config.geom, config.grid, config.W,
                    m2m=config.m2m_model, h2h=config.h2h_model, seed=seed,
                    params=config.to_flat())


def _one(args):
    config, seed = args
    return run_replication(config, seed)


@dataclass
class BatchSummary:
    mean: dict
    std: dict
    n: int
    preamble_cdf: dict
    delay_mass_cdf: dict


SCALARS = ("P_s", "P_f", "E_tau_ms", "blocked", "in_flight")


def aggregate(reports) -> BatchSummary:
    """Mean and sample standard deviation over replication reports."""
    n = len(reports)
    mean, std, fp, fd = {}, {}, {}, {}
    for key in ("H2H", "M2M", "total"):
        vals = {
            "P_s": [r[key].access_success_prob for r in reports],
            "P_f": [r[key].collision_prob for r in reports],
            "E_tau_ms": [r[key].expected_access_delay for r in reports],
            "blocked": [r[key].blocked for r in reports],
            "in_flight": [r[key].in_flight for r in reports],
        }
        mean[key] = {k: float(np.mean(v)) for k, v in vals.items()}
        std[key] = {k: float(np.std(v, ddof=1)) if n > 1 else 0.0 for k, v in vals.items()}
        fp[key] = np.mean([r[key].preamble_tx_cdf for r in reports], axis=0)
        fd[key] = np.mean([r[key].delay_mass_cdf for r in reports], axis=0)
    return BatchSummary(mean=mean, std=std, n=n, preamble_cdf=fp, delay_mass_cdf=fd)


def run_batch(config, seeds, workers: int = 1):
    from .metrics import trace_report

    seeds = list(seeds)
    if not seeds:
        raise ValueError("run_batch needs at least one seed")
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            traces = list(pool.map(_one, [(config, s) for s in seeds]))
    else:
        traces = [run_replication(config, s) for s in seeds]
    return traces, aggregate([trace_report(t) for t in traces])


def contention_trials(n: int, M: int, trials: int, seed=None) -> float:
    """Monte-Carlo rate at which a tagged UE is alone among ``n`` uniform picks over ``M``."""
    rng = np.random.default_rng(seed)
    picks = rng.integers(0, M, size=(trials, n))
    counts = np.zeros((trials, M), dtype=np.int64)
    np.add.at(counts, (np.arange(trials)[:, None], picks), 1)
    return float(np.mean(counts[np.arange(trials), picks[:, 0]] == 1))


def backoff_landing(trace: SimTrace) -> dict:
    """Empirical (origin slot -> next attempt slot) counts for collided, retried UEs."""
    order = np.lexsort((trace.att_slot, trace.att_ue))
    ue, slot, ok = trace.att_ue[order], trace.att_slot[order], trace.att_success[order]
    same = ue[1:] == ue[:-1]
    src = slot[:-1][same & ~ok[:-1]]
    dst = slot[1:][same & ~ok[:-1]]
    out = {}
    for j, i in zip(src, dst):
        out.setdefault(int(j), {}).setdefault(int(i), 0)
        out[int(j)][int(i)] += 1
    return out
