import math

import pytest

from z2filippov.exprs import ArityError
from z2filippov.model import (
    C_STAR,
    SCENARIOS,
    ModelError,
    build_model,
    check_h0,
    check_hypotheses,
    dump_model_file,
    eval_field,
    load_model_file,
    load_scenario,
    scenario_case,
)


@pytest.mark.parametrize("name", sorted(SCENARIOS))
def test_scenarios_satisfy_their_hypotheses(name):
    rep = check_hypotheses(load_scenario(name), scenario_case(name))
    assert rep.holds, rep.violations


def test_s1_fails_cusp_hypotheses(s1):
    rep = check_hypotheses(s1, "cusp")
    assert not rep.holds
    assert any(v.startswith("H1'") for v in rep.violations)


def test_h0_fails_without_closing_orbit():
    m = build_model("1", "-(x+1)*(x-1/2)", 0, 1.0)
    assert not check_h0(m).holds
    assert not check_hypotheses(m, "codim1").holds


def test_reference_orbit_times(s1, s2):
    assert check_h0(s1).tau0 == pytest.approx(2.0, abs=1e-10)
    assert check_h0(s2).tau0 == pytest.approx(2.0, abs=1e-10)


def test_lower_field_is_reflection(s3):
    al = (0.01, -0.02)
    for x, y in [(0.3, -0.4), (-1.2, -0.1), (0.9, -2.0)]:
        fl, gl = eval_field(s3, "lower", x, y, al)
        fu, gu = eval_field(s3, "upper", -x, -y, al)
        assert (fl, gl) == (-fu, -gu)


def test_foldfold_constant():
    assert C_STAR == pytest.approx((math.exp(2) - 7) / 2)
    assert C_STAR == pytest.approx(0.1945280494, abs=1e-10)


def test_model_file_roundtrip(tmp_path, s2):
    p = tmp_path / "m.toml"
    p.write_text(dump_model_file(s2))
    m = load_model_file(p)
    assert m.fingerprint() == s2.fingerprint()
    assert m.value("g", 0.3, 0.1, (0.1, 0.2)) == s2.value("g", 0.3, 0.1, (0.1, 0.2))


def test_model_file_missing_keys(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text('a = 1.0\nm = 0\nf_plus = "1"\n')
    with pytest.raises(ModelError):
        load_model_file(p)


def test_invalid_models():
    with pytest.raises(ModelError):
        build_model("1", "x", 0, -1.0)
    with pytest.raises(ArityError):
        build_model("1", "x + a2", 1, 1.0)
    with pytest.raises(ModelError):
        load_scenario("s9")


def test_model_pickles(s3):
    import pickle

    m = pickle.loads(pickle.dumps(s3))
    assert m.value("g", 0.5, 0.2, (0.0, 0.0)) == s3.value("g", 0.5, 0.2, (0.0, 0.0))
