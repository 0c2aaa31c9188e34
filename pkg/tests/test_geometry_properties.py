"""Property tests for the geometry module.

Quad coordinates are drawn as integers: real predictors emit whole
pixels, and integer inputs keep the Fraction-based oracles exact.
"""

from __future__ import annotations

from fractions import Fraction

from hypothesis import given, settings
from hypothesis import strategies as st

from bladerunner.geometry import (
    EyeSide,
    eye_box,
    eye_center,
    layout_model,
    midline_rule,
    scale_goalpost,
    sum_rule,
)
from bladerunner.landmarks import FaceRect, LandmarkSet

from facegen import face_points

coord = st.integers(min_value=-80, max_value=880)
quad = st.tuples(
    st.tuples(coord, coord), st.tuples(coord, coord),
    st.tuples(coord, coord), st.tuples(coord, coord),
)


def plant_quad(q):
    base = face_points((300.0, 380.0), (500.0, 380.0), 800, 800)
    pts = list(base)
    q1, q2, q4, q5 = q
    pts[36], pts[37], pts[39], pts[40] = q1, q2, q4, q5
    pts[38] = (q2[0], min(q2[1] + 1, 880))
    pts[41] = (q5[0], max(q5[1] - 1, -80))
    return LandmarkSet(
        points=tuple((float(x), float(y)) for x, y in pts),
        face=FaceRect(0, 0, 800, 800),
        image_width=800,
        image_height=800,
    )


@given(quad)
def test_center_matches_fraction_oracle(q):
    lms = plant_quad(q)
    cx, cy = eye_center(lms, EyeSide.LEFT)
    expect_x = Fraction(sum(p[0] for p in q), 4)
    expect_y = Fraction(sum(p[1] for p in q), 4)
    assert Fraction(cx) == expect_x
    assert Fraction(cy) == expect_y


@given(quad)
def test_box_matches_minmax_oracle_and_contains_center(q):
    lms = plant_quad(q)
    box = eye_box(lms, EyeSide.LEFT)
    assert box.min_x == min(p[0] for p in q)
    assert box.max_x == max(p[0] for p in q)
    assert box.min_y == min(p[1] for p in q)
    assert box.max_y == max(p[1] for p in q)
    assert box.contains(eye_center(lms, EyeSide.LEFT))


@given(st.integers(1, 100_000), st.integers(1, 100_000))
def test_layout_sum_exact_and_above_midline(w, h):
    model = layout_model(w, h)
    assert model.predicted_left[0] + model.predicted_right[0] == w
    assert model.predicted_left[1] < h / 2


dims = st.integers(min_value=1, max_value=4096)
res = st.tuples(dims, dims)


@given(
    st.tuples(st.integers(0, 4096), st.integers(0, 4096)),
    res, res, res,
)
@settings(max_examples=100)
def test_scale_is_multiplicative(p, a, b, c):
    point = (float(p[0]), float(p[1]))
    direct = scale_goalpost(point, a, c)
    via_b = scale_goalpost(scale_goalpost(point, a, b), b, c)
    assert abs(direct[0] - via_b[0]) <= 1e-9 * max(1.0, abs(direct[0]))
    assert abs(direct[1] - via_b[1]) <= 1e-9 * max(1.0, abs(direct[1]))


@given(
    st.tuples(st.integers(0, 2000), st.integers(0, 2000)),
    st.tuples(st.integers(0, 2000), st.integers(0, 2000)),
    st.integers(1, 2000),
    st.floats(0, 50, allow_nan=False),
    st.floats(0, 50, allow_nan=False),
)
def test_sum_rule_monotone_in_tolerance(left, right, width, t_small, t_extra):
    if sum_rule(left, right, width, t_small):
        assert sum_rule(left, right, width, t_small + t_extra)


@given(
    st.integers(0, 2000), st.integers(0, 2000),
    st.integers(1, 2000),
    st.floats(0, 400, allow_nan=False),
    st.floats(0, 400, allow_nan=False),
)
def test_midline_rule_monotone_in_margin(ly, ry, height, m_small, m_extra):
    left, right = (100.0, float(ly)), (200.0, float(ry))
    if midline_rule(left, right, height, m_small):
        assert midline_rule(left, right, height, m_small + m_extra)
