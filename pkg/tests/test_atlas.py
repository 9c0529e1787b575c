import json
import math

import numpy as np
import pytest

from z2filippov import atlas as A
from z2filippov.model import load_scenario

S1, S2, S3 = (load_scenario(k) for k in ("s1", "s2", "s3"))


def test_axis_parse():
    ax = A.Axis.parse("-1e-3:1e-3:5")
    assert ax == A.Axis(-1e-3, 1e-3, 5)
    assert ax.step == pytest.approx(5e-4)
    assert list(A.Axis(2.0, 3.0, 1).values()) == [2.0]


def test_fit_recovers_synthetic_constants():
    rng = np.random.default_rng(1)
    b1 = 1e-2 * 0.5 ** np.arange(12)
    pts = [(x, 3.0 * math.sqrt(x) + 0.5 * x * (1 + 1e-3 * rng.standard_normal())) for x in b1]
    fit = A.fit_asymptotics(pts, "sqrt", "GS", cutoff=1.0, predicted=3.0)
    assert fit.intercept == pytest.approx(3.0, rel=1e-4)
    assert fit.rel_error() < 0.05
    assert fit.exponent == pytest.approx(0.5, abs=0.02)
    sq = A.fit_asymptotics([(x, 0.3 * x * x) for x in b1], "square", cutoff=1.0)
    assert sq.C == pytest.approx(0.3) and sq.exponent == pytest.approx(2.0)


def test_fit_needs_points():
    with pytest.raises(A.FitError):
        A.fit_asymptotics([(1e-3, 1e-2)] * 3, "sqrt")
    with pytest.raises(ValueError):
        A.fit_asymptotics([(1e-3 * k, 1e-2) for k in range(1, 10)], "cubic")


def test_cusp_prediction_table():
    curves = {"CS": -1.0, "SS": 1.0, "GS": 3.0}
    p = lambda b2: A.predicted_label("cusp", 1.0, b2, curves).name()  # noqa: E731
    assert p(-2) == "1x stable no-enclosure"
    assert p(0) == "0x sliding-stable@from-Sigma+"
    assert p(2) == "0x sliding-stable@from-Sigma-"
    assert p(4) == "1x stable encloses-T_iv+T_v"
    assert A.predicted_label("cusp", 1.0, 1.0, curves) is None


def test_foldfold_prediction_table():
    up = {"CS+": 1.0, "SH+": 2.0, "TC+": 3.0}
    assert A.predicted_label("foldfold", 1.0, 0.5, up).n_crossing == 2
    assert A.predicted_label("foldfold", 1.0, -0.5, up).n_crossing == 0
    assert A.predicted_label("foldfold", 1.0, 1.5, up).sliding == "stable"
    dn = {"TC-": 1.0, "SH-": 2.0, "CS-": 3.0}
    assert A.predicted_label("foldfold", -1.0, 2.5, dn).sliding == "unstable"
    assert A.predicted_label("foldfold", -1.0, 4.0, dn).stabilities == ["unstable"]


def test_empty_diagram_emits_valid_json():
    dia = A.Diagram("cusp", A.default_grid("cusp", 3))
    d = json.loads(A.emit(dia, "json"))
    assert d["cells"] == [] and d["schema_version"] == A.SCHEMA_VERSION


def test_codim1_sweep_and_csv(tmp_path):
    grid = A.GridSpec("alpha", A.Axis(-1e-2, 1e-2, 9), A.Axis(0.0, 0.0, 1))
    dia = A.run_sweep(S1, "codim1", grid)
    names = [c.label.name() for c in dia.cells]
    assert names[0] == "1x stable no-enclosure" and names[-1].startswith("0x sliding-stable")
    assert dia.misclassified() == []
    assert abs(dia.curves["CC"][0][0]) < 1e-12
    path = tmp_path / "s1.csv"
    text = A.emit(dia, "csv", path)
    assert path.read_text() == text and text.count("\n") == 10


def test_sweep_parallel_determinism():
    grid = A.GridSpec("beta", A.Axis(-4e-5, 4e-5, 4), A.Axis(-1.5e-2, 1.5e-2, 4))
    one = A.emit(A.run_sweep(S2, "cusp", grid, threads=1), "json")
    two = A.emit(A.run_sweep(S2, "cusp", grid, threads=2), "json")
    assert one == two


def test_small_cusp_sweep_consistent():
    grid = A.GridSpec("beta", A.Axis(-5e-5, 5e-5, 7), A.Axis(-2e-2, 2e-2, 9))
    dia = A.run_sweep(S2, "cusp", grid)
    assert len(dia.resolved_cells()) == len(dia.cells)
    assert dia.misclassified() == []
    assert dia.coverage_violations() == []


def test_foldfold_curve_set():
    curves = A.extract_curves(S3, "foldfold", [-2e-3, 2e-3], A.DEFAULT_RAY_WINDOW["foldfold"])
    assert set(curves) == set(A.CURVES["foldfold"])
    for k in ("CS+", "SH+", "TC+", "TC-", "SH-", "CS-", "F0"):
        assert len(curves[k]) == 1
    d = json.loads(A.emit({"curves": curves}, "json"))
    assert len(d["curves"]) == 8


def test_cusp_curves_are_ordered_on_a_ray():
    curves = A.extract_curves(S2, "cusp", [1e-6], A.DEFAULT_RAY_WINDOW["cusp"])
    cs, ss, gs = (curves[k][0].beta2 for k in ("CS", "SS", "GS"))
    assert cs < ss < gs


def test_default_rays():
    r = A.default_rays("foldfold", 3, 1e-2)
    assert r == [-1e-2, -5e-3, -2.5e-3, 2.5e-3, 5e-3, 1e-2]
