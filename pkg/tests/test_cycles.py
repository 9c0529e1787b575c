import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from z2filippov.atlas import Unfolding
from z2filippov.cycles import (
    CycleConfig,
    RegionLabel,
    classify_dynamics,
    find_connections,
    find_cycles,
    inventory,
    label_from_inventory,
    return_map_derivative,
)
from z2filippov.model import build_model, load_scenario

S1, S2, S3 = (load_scenario(k) for k in ("s1", "s2", "s3"))


def _name(model, case, al):
    return label_from_inventory(inventory(model, case, al)).name()


@pytest.mark.parametrize("a1,expected", [
    (-1e-3, "1x stable no-enclosure"),
    (0.0, "0x through-fold:internally-stable"),
    (1e-3, "0x sliding-stable@slides-on-S1"),
])
def test_codim1_regions(a1, expected):
    assert _name(S1, "codim1", (a1, 0.0)) == expected


def test_codim1_crossing_cycle_is_strongly_attracting():
    (c,) = find_cycles(S1, "codim1", (-1e-3, 0.0))
    assert c.kind == "crossing" and 0 < c.derivative < 1e-3
    assert c.symmetry_defect() < 1e-12


@pytest.fixture(scope="module")
def cusp_unfolding():
    return Unfolding(S2, "cusp")


@pytest.mark.parametrize("C,expected", [
    (-2.0, "1x stable no-enclosure"),
    (-0.5, "0x sliding-stable@from-Sigma+"),
    (1.5, "0x sliding-stable@from-Sigma-"),
    (2.5, "1x stable encloses-T_iv+T_v"),
])
def test_cusp_regions(cusp_unfolding, C, expected):
    b1 = 1e-5
    al, _, _ = cusp_unfolding.address(b1, C * math.sqrt(b1))
    assert _name(S2, "cusp", al) == expected


@pytest.mark.parametrize("b2,expected", [
    (-1e-3, "1x stable no-enclosure"),
    (0.0, "0x through-cusp:stable"),
    (1e-3, "1x stable encloses-T_c"),
])
def test_cusp_axis(cusp_unfolding, b2, expected):
    al, _, _ = cusp_unfolding.address(0.0, b2)
    assert _name(S2, "cusp", al) == expected


@pytest.fixture(scope="module")
def sliver_alpha():
    al, _, beta = Unfolding(S3, "foldfold").address(1e-3, 3e-8)
    return al


def test_foldfold_two_cycles(sliver_alpha):
    inv = inventory(S3, "foldfold", sliver_alpha)
    outer, inner = inv.cycles
    assert outer.sigma_points[0] < inner.sigma_points[0]
    assert outer.stability == "stable" and outer.derivative < 1
    assert inner.stability == "unstable" and inner.derivative > 1


def test_analytic_and_fd_return_map_derivatives_agree(sliver_alpha):
    inv = inventory(S3, "foldfold", sliver_alpha)
    inv_fd = inventory(S3, "foldfold", sliver_alpha, CycleConfig(derivative="fd"))
    for a, b in zip(inv.cycles, inv_fd.cycles):
        assert a.derivative == pytest.approx(b.derivative, rel=1e-4)
    rp = return_map_derivative(S3, "foldfold", inv.cycles[0])
    assert rp == pytest.approx(inv.cycles[0].derivative, rel=1e-4)


def test_foldfold_origin():
    conns, gaps = find_connections(S3, (0.0, 0.0))
    assert conns == ["tangent-tangent:T_u-->T_u+"]
    assert _name(S3, "foldfold", (0.0, 0.0)).startswith("0x through-fold-fold:internally-unstable")


def test_wrong_case_is_partial():
    lab = classify_dynamics(S1, "foldfold", (0.0, 0.0))
    assert isinstance(lab, RegionLabel)


def test_reversed_orientation_is_rejected():
    m = build_model("-1", "(x+1)*(x-1/3)", 0, 1.0)
    with pytest.raises(ValueError):
        inventory(m, "codim1", ())


@given(st.floats(-5e-3, 5e-3), st.floats(-5e-3, 5e-3))
@settings(max_examples=15, deadline=None)
def test_cycles_are_z2_symmetric(a1, a2):
    for c in find_cycles(S1, "codim1", (a1, a2)):
        assert c.symmetry_defect() < 1e-10


def test_region_label_roundtrip():
    lab = label_from_inventory(inventory(S3, "foldfold", (1e-3, 0.0)))
    again = RegionLabel.from_dict(lab.to_dict())
    assert again.key() == lab.key() and again.name() == lab.name()
