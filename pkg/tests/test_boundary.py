import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from z2filippov.boundary import (
    BoundaryClass as B,
    SlidingBoundaryError,
    boundary_portrait,
    classify_point,
    sliding_function,
    sliding_velocity,
)
from z2filippov.model import load_scenario

MODELS = {k: load_scenario(k) for k in ("s1", "s2", "s3")}


def _tangents(model, alpha=(0.0, 0.0)):
    p = boundary_portrait(model, (-1.5, 1.5), alpha)
    return [(round(t.x, 6), t.cls) for t in p.tangent_points], p


def test_s1_portrait():
    tp, p = _tangents(MODELS["s1"])
    assert tp == [(-1.0, B.UPPER_FOLD_VISIBLE), (-0.333333, B.LOWER_FOLD_INVISIBLE),
                  (0.333333, B.UPPER_FOLD_INVISIBLE), (1.0, B.LOWER_FOLD_VISIBLE)]
    assert [s.cls for s in p.segments] == [B.SLIDING_STABLE, B.CROSSING_UP, B.SLIDING_UNSTABLE,
                                           B.CROSSING_DOWN, B.SLIDING_STABLE]


def test_s2_cusp_points():
    tp, _ = _tangents(MODELS["s2"])
    assert tp[0] == (-1.0, B.UPPER_CUSP)
    assert tp[-1] == (1.0, B.LOWER_CUSP)


def test_s3_foldfold_points_split():
    tp, _ = _tangents(MODELS["s3"])
    assert tp[0] == (-1.0, B.FOLD_FOLD_VV)
    tp, p = _tangents(MODELS["s3"], (1e-3, 0.0))
    kinds = [c for _, c in tp]
    assert kinds[:2] == [B.UPPER_FOLD_VISIBLE, B.LOWER_FOLD_VISIBLE]
    saddles = [q for q in p.pseudo_equilibria if q.kind == "pseudo-saddle"]
    assert len(saddles) == 2
    assert saddles[0].x == pytest.approx(-saddles[1].x, abs=1e-12)


def test_portrait_serializes():
    _, p = _tangents(MODELS["s1"])
    d = p.to_dict()
    assert d["tangent_points"][0]["class"] == "upper-fold-visible"


def test_degenerate_sliding_velocity():
    m = MODELS["s1"]
    # g+(x) + g+(-x) vanishes at x = +-1/sqrt(3) for S1 at alpha = 0
    with pytest.raises(SlidingBoundaryError):
        sliding_velocity(m, 1.0 / np.sqrt(3.0), (0.0, 0.0))


xs = st.floats(-1.5, 1.5, allow_nan=False)
alphas = st.tuples(st.floats(-0.05, 0.05), st.floats(-0.05, 0.05))


@given(st.sampled_from(sorted(MODELS)), xs, alphas)
@settings(max_examples=150, deadline=None)
def test_classification_z2_covariance(name, x, al):
    m = MODELS[name]
    assert classify_point(m, -x, al) == classify_point(m, x, al).mirror()


@given(st.sampled_from(sorted(MODELS)), xs, alphas)
@settings(max_examples=150, deadline=None)
def test_sliding_antisymmetry(name, x, al):
    m = MODELS[name]
    assert sliding_function(m, -x, al) == pytest.approx(-sliding_function(m, x, al), abs=1e-13)
    try:
        v = sliding_velocity(m, x, al)
    except SlidingBoundaryError:
        return
    assert sliding_velocity(m, -x, al) == pytest.approx(-v, rel=1e-12, abs=1e-13)


def test_mirror_is_involution():
    for c in B:
        assert c.mirror().mirror() is c
