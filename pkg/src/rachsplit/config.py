"""Scenario configuration: a flat ``dotted.key = value`` text file.

Lines are ``key = value``; ``#`` starts a comment. Values are integers,
floats, ``true``/``false``, bare or quoted strings, or ``[a, b, ...]`` lists.
All durations are integer milliseconds. Unknown keys are rejected.
"""
from __future__ import annotations

import ast
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .kmc import CONTENTION_MODES, JA_MODES, BackoffGeometry, make_policy
from .metrics import LAG_MODES
from .traffic import H2HPoisson, M2MType1, M2MType2, SlotGrid


class ConfigError(ValueError):
    """Invalid scenario file. ``kind`` is one of missing-key, unknown-key,
    type-mismatch, constraint, syntax."""

    def __init__(self, kind: str, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.kind = kind
        self.key = key


_REQUIRED = object()

# key -> (attribute, type, default)
SCHEMA = {
    "rach.M": ("M", int, _REQUIRED),
    "rach.W": ("W", int, _REQUIRED),
    "rach.W_BO_ms": ("W_BO", int, _REQUIRED),
    "rach.T_RAR_ms": ("T_RAR", int, _REQUIRED),
    "rach.W_RAR_ms": ("W_RAR", int, _REQUIRED),
    "rach.delta_sf_ms": ("delta_sf", int, _REQUIRED),
    "time.T_ms": ("T", int, _REQUIRED),
    "traffic.m2m.type": ("m2m_type", str, "type2"),
    "traffic.m2m.alpha": ("alpha", float, 3.0),
    "traffic.m2m.beta": ("beta", float, 4.0),
    "traffic.m2m.n_mtc": ("n_mtc", int, 0),
    "traffic.h2h.lambda_per_slot": ("lambda_per_slot", float, None),
    "traffic.h2h.lambda_per_second": ("lambda_per_second", float, None),
    "policy.kind": ("policy_kind", str, _REQUIRED),
    "policy.a": ("a", int, None),
    "policy.x": ("x", int, None),
    "sim.replications": ("replications", int, 10),
    "sim.seed": ("seed", int, 0),
    "sim.workers": ("workers", int, 1),
    "optimizer.phi_ms": ("phi_ms", list, (10, 20, 30, 40, 50, 60, 70, 80, 90, 100)),
    "optimizer.mode": ("opt_mode", str, "both"),
    "optimizer.include_delay_factor": ("include_delay_factor", bool, True),
    "model.ja_mode": ("ja_mode", str, "mixture"),
    "model.delay_lag": ("delay_lag", str, "gap"),
    "model.contention": ("contention", str, "palm"),
    "output.directory": ("out_dir", str, "out"),
    "output.reports": ("reports", list, ("grid", "matrix", "metrics", "cdf", "traces")),
}
REPORT_KINDS = ("grid", "matrix", "metrics", "cdf", "traces")


@dataclass(frozen=True)
class ScenarioConfig:
    M: int
    W: int
    W_BO: int
    T_RAR: int
    W_RAR: int
    delta_sf: int
    T: int
    policy_kind: str
    m2m_type: str = "type2"
    alpha: float = 3.0
    beta: float = 4.0
    n_mtc: int = 0
    lambda_per_slot: float | None = None
    lambda_per_second: float | None = None
    a: int | None = None
    x: int | None = None
    replications: int = 10
    seed: int = 0
    workers: int = 1
    phi_ms: tuple = (10, 20, 30, 40, 50, 60, 70, 80, 90, 100)
    opt_mode: str = "both"
    include_delay_factor: bool = True
    ja_mode: str = "mixture"
    delay_lag: str = "gap"
    contention: str = "palm"
    out_dir: str = "out"
    reports: tuple = REPORT_KINDS

    def __post_init__(self):
        validate(self)

    @property
    def geom(self) -> BackoffGeometry:
        return BackoffGeometry(self.T_RAR, self.W_RAR, self.W_BO, self.delta_sf)

    @property
    def grid(self) -> SlotGrid:
        return SlotGrid(self.delta_sf, self.T)

    @property
    def policy(self):
        return make_policy(self.policy_kind, self.M, a=self.a, x=self.x)

    @property
    def lambda_slot(self) -> float:
        if self.lambda_per_slot is not None:
            return self.lambda_per_slot
        if self.lambda_per_second is not None:
            return self.lambda_per_second * self.delta_sf / 1000.0
        return 0.0

    @property
    def m2m_model(self):
        if self.m2m_type == "none" or self.n_mtc == 0:
            return None
        if self.m2m_type == "type1":
            return M2MType1(self.n_mtc)
        return M2MType2(self.n_mtc, self.alpha, self.beta)

    @property
    def h2h_model(self):
        lam = self.lambda_slot
        return H2HPoisson(lam) if lam > 0 else None

    def with_(self, **changes) -> "ScenarioConfig":
        return replace(self, **changes)

    def to_flat(self) -> dict:
        out = {}
        for key, (attr, _, _) in SCHEMA.items():
            v = getattr(self, attr)
            if v is None:
                continue
            out[key] = list(v) if isinstance(v, tuple) else v
        return out

    def to_text(self) -> str:
        return "".join(f"{k} = {_format(v)}\n" for k, v in self.to_flat().items())


def _constraint(ok: bool, key: str, message: str):
    if not ok:
        raise ConfigError("constraint", key, message)


def validate(c: ScenarioConfig):
    _constraint(c.M >= 1, "rach.M", "M must be >= 1")
    _constraint(c.W >= 1, "rach.W", "W must be >= 1")
    for key, v in (("rach.W_BO_ms", c.W_BO), ("rach.T_RAR_ms", c.T_RAR), ("rach.W_RAR_ms", c.W_RAR)):
        _constraint(v >= 0, key, "durations must be >= 0")
    _constraint(c.T_RAR + c.W_RAR >= 1, "rach.W_RAR_ms", "T_RAR + W_RAR must be >= 1")
    _constraint(c.delta_sf > 0, "rach.delta_sf_ms", "delta_sf must be > 0")
    _constraint(c.T >= c.delta_sf, "time.T_ms", "T must cover at least one RA slot")
    _constraint(c.m2m_type in ("type1", "type2", "none"), "traffic.m2m.type",
                "must be one of type1, type2, none")
    _constraint(c.alpha > 0 and c.beta > 0, "traffic.m2m.alpha", "Beta shapes must be > 0")
    _constraint(c.n_mtc >= 0, "traffic.m2m.n_mtc", "n_mtc must be >= 0")
    _constraint(c.lambda_per_slot is None or c.lambda_per_second is None,
                "traffic.h2h.lambda_per_slot", "give lambda_per_slot OR lambda_per_second, not both")
    for key, v in (("traffic.h2h.lambda_per_slot", c.lambda_per_slot),
                   ("traffic.h2h.lambda_per_second", c.lambda_per_second)):
        _constraint(v is None or v >= 0, key, "rate must be >= 0")
    kind = c.policy_kind
    _constraint(kind in ("shared", "da", "ja"), "policy.kind", "must be one of shared, da, ja")
    if kind == "da":
        if c.a is None:
            raise ConfigError("missing-key", "policy.a", "required for policy.kind = da")
        _constraint(0 < c.a < c.M, "policy.a", "a must satisfy 0 < a < M")
    if kind == "ja":
        if c.x is None:
            raise ConfigError("missing-key", "policy.x", "required for policy.kind = ja")
        _constraint(0 < c.x < c.M, "policy.x", "x must satisfy 0 < x < M")
    _constraint(c.replications >= 1, "sim.replications", "must be >= 1")
    _constraint(c.workers >= 1, "sim.workers", "must be >= 1")
    _constraint(all(p > c.T_RAR + c.W_RAR for p in c.phi_ms), "optimizer.phi_ms",
                "every threshold must exceed T_RAR + W_RAR")
    _constraint(c.opt_mode in ("bound", "exact", "both"), "optimizer.mode",
                "must be one of bound, exact, both")
    _constraint(c.ja_mode in JA_MODES, "model.ja_mode", f"must be one of {', '.join(JA_MODES)}")
    _constraint(c.delay_lag in LAG_MODES, "model.delay_lag", f"must be one of {', '.join(LAG_MODES)}")
    _constraint(c.contention in CONTENTION_MODES, "model.contention",
                f"must be one of {', '.join(CONTENTION_MODES)}")
    _constraint(all(r in REPORT_KINDS for r in c.reports), "output.reports",
                f"entries must be among {', '.join(REPORT_KINDS)}")


def _format(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_format(x) for x in v) + "]"
    if isinstance(v, str):
        return f'"{v}"'
    return repr(v)


def _parse_value(text: str):
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def _coerce(key: str, typ, value):
    if typ is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if typ is list:
        if not isinstance(value, (list, tuple)):
            raise ConfigError("type-mismatch", key, f"expected a list, got {value!r}")
        return tuple(value)
    if not isinstance(value, typ) or (typ is int and isinstance(value, bool)):
        raise ConfigError("type-mismatch", key, f"expected {typ.__name__}, got {value!r}")
    return value


def parse_text(text: str) -> ScenarioConfig:
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("syntax", f"line {lineno}", "expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError("unknown-key", key, "not a recognised configuration key")
        raw[key] = _parse_value(value)
    kwargs = {}
    for key, (attr, typ, default) in SCHEMA.items():
        if key in raw:
            kwargs[attr] = _coerce(key, typ, raw[key])
        elif default is _REQUIRED:
            raise ConfigError("missing-key", key, "required key is missing")
    return ScenarioConfig(**kwargs)


def parse_config(path) -> ScenarioConfig:
    return parse_text(Path(path).read_text())


def table_one(**overrides) -> ScenarioConfig:
    """Default RACH parameters (PRACH configuration index 6) with a shared pool."""
    base = dict(M=54, W=10, W_BO=20, T_RAR=2, W_RAR=5, delta_sf=10, T=10_000,
                policy_kind="shared", n_mtc=5000)
    base.update(overrides)
    return ScenarioConfig(**base)


FIELD_NAMES = tuple(f.name for f in fields(ScenarioConfig))
