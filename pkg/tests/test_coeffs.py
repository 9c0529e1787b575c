import math

import numpy as np
import pytest

from oracles import S1, S2, S3, s3_closed_forms, s3_shooting_constant
from z2filippov.coeffs import coefficient_report, cusp_geometry, measured_unfolding, xi_functions
from z2filippov.model import C_STAR, load_scenario

M = {k: load_scenario(k) for k in ("s1", "s2", "s3")}
CASE = {"s1": "codim1", "s2": "cusp", "s3": "foldfold"}


@pytest.fixture(scope="module")
def reports():
    return {k: coefficient_report(M[k], CASE[k]) for k in M}


def test_s1_theta(reports):
    assert np.allclose(reports["s1"].theta, S1["theta"], atol=1e-6)
    assert reports["s1"].lambda0 == pytest.approx(1.0, abs=1e-10)


def test_s2_zeta_eta(reports):
    assert np.allclose(reports["s2"].zeta, S2["zeta"], atol=1e-6)
    assert np.allclose(reports["s2"].eta, S2["eta"], atol=1e-6)


def test_s3_closed_forms(reports):
    r = reports["s3"]
    ref = s3_closed_forms()
    assert r.lambda0 == pytest.approx(S3["lambda0"], abs=1e-6)
    assert np.allclose(r.kappa, S3["kappa"], atol=1e-6)
    assert r.Delta == pytest.approx(ref["Delta"], abs=1e-6)
    assert r.r == pytest.approx(ref["r"], abs=1e-6)
    assert np.allclose(r.mu, ref["mu"], atol=1e-6)
    for k, v in ref["vartheta"].items():
        assert r.vartheta_leading[k] == pytest.approx(v, abs=1e-6)


def test_s3_constant_by_shooting():
    assert abs(s3_shooting_constant() - C_STAR) < 1e-9


def test_vartheta_ordering(reports):
    t = reports["s3"].vartheta_leading
    assert t["vartheta4"] < t["vartheta6"] < t["vartheta5"] < t["vartheta7"] < t["vartheta3"]


@pytest.mark.parametrize("name", ["s1", "s2", "s3"])
def test_half_orbit_identities(reports, name):
    r = reports[name]
    assert r.lambda_minus0 * r.lambda0 == pytest.approx(r.lambda_plus0, abs=1e-8)
    for km, kp, k in zip(r.kappa_minus, r.kappa_plus, r.kappa):
        expect = kp - k * r.lambda_minus0
        assert abs(km - expect) <= 1e-6 * max(1.0, abs(expect))


def test_report_errors_are_small(reports):
    for r in reports.values():
        assert r.errors["lambda0"] < 1e-8
        assert max(r.errors["kappa"]) < 1e-8


def test_codim1_measured_slope():
    m = M["s1"]
    h = 1e-4
    r_p = measured_unfolding(m, "codim1", (h, 0.0)).rho1
    r_m = measured_unfolding(m, "codim1", (-h, 0.0)).rho1
    assert (r_p - r_m) / (2 * h) == pytest.approx(0.75, rel=1e-3)


def test_cusp_geometry_linear_part():
    m = M["s2"]
    for al in [(-1e-6, 0.0), (-1e-6, 2e-6)]:
        phi1, xi1, roots, _ = cusp_geometry(m, al)
        assert phi1 == pytest.approx(np.dot(S2["zeta"], al), rel=1e-2)
        assert len(roots) == 2 and roots[0] < roots[1]
        assert -(roots[0] + roots[1]) / 2 == pytest.approx(xi1)


def test_cusp_geometry_without_roots():
    phi1, _, roots, _ = cusp_geometry(M["s2"], (1e-6, 0.0))
    assert roots == [] and phi1 < 0


def test_foldfold_unfolding_linear_part(reports):
    m = M["s3"]
    al = (1e-5, -2e-5)
    mu = measured_unfolding(m, "foldfold", al)
    assert mu.phi1 == pytest.approx(np.dot(reports["s3"].mu, al), rel=1e-3)
    assert mu.varpi == pytest.approx(1.0, abs=1e-3)


def test_xi_functions_at_small_chord():
    m = M["s2"]
    al = (-3e-6, 0.0)
    phi1 = cusp_geometry(m, al)[0]
    xi = xi_functions(m, 0.5 * math.sqrt(phi1), al)
    assert abs(xi.xi2) < 1e-2 and math.isfinite(xi.xi3)
    with pytest.raises(ValueError):
        xi_functions(m, -1.0, al)


def test_case_validation():
    with pytest.raises(ValueError):
        coefficient_report(M["s1"], "hopf")
