import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from z2filippov.flow import flow_filippov, integrate_arc, reference_orbit
from z2filippov.model import load_scenario

S1 = load_scenario("s1")


def _G(x, a1, a2):
    # antiderivative of g+ for S1 along y = const (f+ = 1, g+ independent of y)
    return -(x**3 / 3 + x**2 / 3 - x / 3) + a1 * x + a2 * (x**2 / 2 + x)


def _exact_return(x0, a1, a2):
    # roots of G(x) - G(x0) = 0 other than x0: divide out (x - x0)
    c = np.array([-1 / 3, -1 / 3 + a2 / 2, 1 / 3 + a1 + a2, 0.0])
    c[-1] = -np.polyval(c, x0)
    q, _ = np.polydiv(c, [1.0, -x0])
    r = np.roots(q)
    r = r[np.abs(r.imag) < 1e-12].real
    return r[r > x0].min()


@given(st.floats(-0.95, -0.45), st.floats(-0.02, 0.02), st.floats(-0.02, 0.02))
@settings(max_examples=40, deadline=None)
def test_boundary_event_accuracy(x0, a1, a2):
    arc = integrate_arc(S1, "upper", (x0, 0.0), (a1, a2))
    x1 = _exact_return(x0, a1, a2)
    assert arc.event == "boundary-hit"
    assert abs(arc.end[0] - x1) < 1e-10
    assert abs(arc.t1 - (x1 - x0)) < 1e-10


def test_reference_orbit_lands_on_the_fold():
    orb = reference_orbit(S1)
    assert abs(orb.end[0] - 1.0) < 1e-10 and abs(orb.end[1]) < 1e-10
    assert abs(orb.tau0 - 2.0) < 1e-10


def test_section_event():
    arc = integrate_arc(S1, "upper", (-1.0, 0.0), (0.0, 0.0), stop="section", section=(0.1, 1))
    assert abs(arc.end[1] - 0.1) < 1e-12
    assert abs(_G(arc.end[0], 0, 0) - _G(-1.0, 0, 0) - 0.1) < 1e-10


@pytest.mark.parametrize("name", ["s1", "s2", "s3"])
def test_flow_z2_covariance(name):
    m = load_scenario(name)
    al = (2e-3, -1e-3)
    for start in [(0.2, 0.3), (-0.5, 0.05), (1.1, -0.2)]:
        a = flow_filippov(m, start, al, 3.0)
        b = flow_filippov(m, (-start[0], -start[1]), al, 3.0)
        assert np.allclose(a.end, -np.asarray(b.end), atol=1e-9)
        assert [e[0] for e in a.events] == [e[0] for e in b.events]
        for ea, eb in zip(a.events, b.events):
            assert ea[1] == pytest.approx(eb[1], abs=1e-9)
            assert ea[2] == pytest.approx(-eb[2], abs=1e-9)


def test_lower_arc_is_reflected_upper_arc():
    up = integrate_arc(S1, "upper", (-0.7, 0.0), (0.01, 0.0))
    lo = integrate_arc(S1, "lower", (0.7, 0.0), (0.01, 0.0))
    assert lo.end[0] == -up.end[0] and lo.t1 == up.t1


def test_sliding_cycle_is_reached():
    # with alpha1 > 0 the fold at -1 moves inside and a stable sliding cycle appears
    tr = flow_filippov(S1, (-0.5, 0.0), (1e-3, 0.0), 30.0)
    regimes = {arc.regime for arc in tr.arcs}
    assert "sliding" in regimes


def test_trajectory_csv(tmp_path):
    tr = flow_filippov(S1, (-0.9, 0.0), (0.0, 0.0), 1.0)
    text = tr.to_csv()
    assert text.startswith("t,x,y,regime\n")
    assert "time-out" in text
