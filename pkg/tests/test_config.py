import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rachsplit.config import ConfigError, parse_config, parse_text, table_one
from rachsplit.kmc import JA

TABLE_ONE = """
rach.M = 54
rach.W = 10
rach.W_BO_ms = 20
rach.T_RAR_ms = 2
rach.W_RAR_ms = 5
rach.delta_sf_ms = 10
time.T_ms = 10000
traffic.m2m.n_mtc = 5000
policy.kind = "ja"    # joint allocation
policy.x = 5
"""


def test_parse_table_one():
    cfg = parse_text(TABLE_ONE)
    assert cfg.policy == JA(5, 54)
    assert cfg.grid.eta == 1000 and cfg.geom.rar_wait == 7
    assert cfg.m2m_model.n_mtc == 5000 and cfg.h2h_model is None


def test_round_trip():
    cfg = parse_text(TABLE_ONE)
    assert parse_text(cfg.to_text()) == cfg
    assert parse_text(cfg.to_text()).to_text() == cfg.to_text()


def test_parse_file(tmp_path):
    p = tmp_path / "s.cfg"
    p.write_text(TABLE_ONE)
    assert parse_config(p) == parse_text(TABLE_ONE)


def _err(text):
    with pytest.raises(ConfigError) as e:
        parse_text(text)
    return e.value


def test_split_out_of_range():
    e = _err(TABLE_ONE.replace("policy.x = 5", "policy.x = 54"))
    assert e.kind == "constraint" and e.key == "policy.x"
    assert "x must satisfy 0 < x < M" in str(e)


def test_missing_key():
    e = _err(TABLE_ONE.replace("rach.M = 54", ""))
    assert (e.kind, e.key) == ("missing-key", "rach.M")
    assert _err(TABLE_ONE.replace("policy.x = 5", "")).kind == "missing-key"


def test_unknown_key():
    assert _err(TABLE_ONE + "rach.colour = 3\n").kind == "unknown-key"


def test_type_mismatch():
    assert _err(TABLE_ONE.replace("rach.W = 10", "rach.W = 2.5")).kind == "type-mismatch"
    assert _err(TABLE_ONE.replace("rach.W = 10", "rach.W = true")).kind == "type-mismatch"
    assert _err(TABLE_ONE + "optimizer.phi_ms = 20\n").kind == "type-mismatch"


def test_syntax():
    assert _err(TABLE_ONE + "just words\n").kind == "syntax"


def test_exclusive_rates():
    text = TABLE_ONE + "traffic.h2h.lambda_per_slot = 1\ntraffic.h2h.lambda_per_second = 1\n"
    assert _err(text).kind == "constraint"


def test_rate_units():
    assert parse_text(TABLE_ONE + "traffic.h2h.lambda_per_second = 0.5\n").lambda_slot == pytest.approx(0.005)
    assert parse_text(TABLE_ONE + "traffic.h2h.lambda_per_slot = 10\n").lambda_slot == 10.0


def test_phi_must_exceed_rar_wait():
    assert _err(TABLE_ONE + "optimizer.phi_ms = [7, 20]\n").key == "optimizer.phi_ms"


def test_direct_construction_validates():
    with pytest.raises(ConfigError):
        table_one(W=0)
    with pytest.raises(ConfigError):
        table_one(policy_kind="da", a=None)


@settings(max_examples=50, deadline=None)
@given(M=st.integers(2, 64), W=st.integers(1, 15), wbo=st.integers(0, 100),
       kind=st.sampled_from(["shared", "da", "ja"]), data=st.data(),
       lam=st.one_of(st.none(), st.floats(0, 100, allow_nan=False)))
def test_round_trip_property(M, W, wbo, kind, data, lam):
    split = data.draw(st.integers(1, M - 1))
    cfg = table_one(M=M, W=W, W_BO=wbo, policy_kind=kind, lambda_per_slot=lam,
                    a=split if kind == "da" else None, x=split if kind == "ja" else None)
    assert parse_text(cfg.to_text()) == cfg
