import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from horolab.errors import ConstraintError, DegenerateSegmentError, IdentityError, RangeError, WindowError
from horolab.harness import _walk
from horolab.hgeom import (
    I,
    GeodesicSegment,
    Isometry,
    PiecewiseRayParams,
    Point,
    UnitTangent,
    angle_at,
    apply,
    classify_isometry,
    dist,
    fellow_travel_bound,
    geodesic_flow,
    geodesic_point,
    law_of_cosines_side,
    piecewise_chord_deviation,
    piecewise_path,
    piecewise_ray_bound,
    separation_constant,
)

coord = st.floats(-3, 3)
height = st.floats(-2.5, 2.5).map(math.exp)
points = st.builds(Point, coord, height)


def test_dist_vertical_axis():
    assert dist(I, Point(0, 2)) == pytest.approx(math.log(2), abs=1e-15)


def test_dist_same_point():
    p = Point(0.3, 0.7)
    assert dist(p, p) == 0.0


def test_dist_matches_arc_length_integral():
    # frozen from quadrature of |dz|/y along the circle centred 0.5 through i and 1+i
    assert dist(I, Point(1, 1)) == pytest.approx(0.9624236501192067, abs=1e-12)


def test_dist_tiny_separation_keeps_precision():
    p, q = Point(0.0, 1e-8), Point(1e-20, 1e-8)
    assert dist(p, q) == pytest.approx(1e-12, rel=1e-6)


def test_point_rejects_lower_half_plane():
    with pytest.raises(RangeError):
        Point(0.0, 0.0)
    with pytest.raises(RangeError):
        Point(0.0, math.inf)


def test_apply_translation_identity_and_dilation():
    assert apply(Isometry(1, 1, 0, 1), I) == Point(1, 1)
    p = Point(-0.4, 2.5)
    assert apply(Isometry.identity(), p) == p
    q = apply(Isometry(2, 0, 0, 0.5), I)
    assert (q.x, q.y) == pytest.approx((0.0, 4.0))


def test_isometry_rejects_singular():
    with pytest.raises(RangeError):
        Isometry(1, 1, 1, 1)


def test_geodesic_point_vertical_and_start():
    p = geodesic_point(I, Point(0, 4), math.log(2))
    assert (p.x, p.y) == pytest.approx((0.0, 2.0))
    a, b = Point(0.2, 0.5), Point(1.0, 3.0)
    p = geodesic_point(a, b, 0.0)
    assert (p.x, p.y) == pytest.approx((a.x, a.y), abs=1e-14)


def test_geodesic_point_midpoint_near_boundary():
    a, b = Point(-1.0, 1e-4), Point(1.0, 1e-4)
    m = geodesic_point(a, b, dist(a, b) / 2)
    assert abs(dist(a, m) - dist(m, b)) < 1e-9


def test_geodesic_point_coincident_raises():
    with pytest.raises(DegenerateSegmentError):
        geodesic_point(I, I, 0.0)


def test_angle_at_trivial_cases():
    assert angle_at(I, Point(0, 2), Point(0, 0.5)) == pytest.approx(math.pi)
    assert angle_at(I, Point(0, 2), Point(0, 2)) == 0.0


@settings(max_examples=200, deadline=None)
@given(points, points, points)
def test_angle_matches_law_of_cosines(v, p, q):
    b, c = dist(v, p), dist(v, q)
    if min(b, c, dist(p, q)) < 1e-3 or max(b, c) > 8:
        return
    th = angle_at(v, p, q)
    lhs = math.cosh(dist(p, q))
    rhs = math.cosh(b) * math.cosh(c) - math.sinh(b) * math.sinh(c) * math.cos(th)
    assert lhs == pytest.approx(rhs, rel=1e-8, abs=1e-8)


def test_law_of_cosines_side_cases():
    assert law_of_cosines_side(1.2, 0.7, math.pi) == pytest.approx(1.9)
    assert law_of_cosines_side(1.3, 0.0, 0.4) == pytest.approx(1.3)


def test_law_of_cosines_right_angle():
    # frozen from a right triangle at i with legs along the axis and the unit circle,
    # hypotenuse measured by arc-length quadrature; equals acosh(cosh(1)^2)
    assert law_of_cosines_side(1.0, 1.0, math.pi / 2) == pytest.approx(1.513374006596508, abs=1e-12)


def test_separation_constant_values():
    assert separation_constant(math.pi / 2) == pytest.approx(math.log(4))
    assert separation_constant(math.pi) == pytest.approx(math.log(2))
    with pytest.raises(RangeError):
        separation_constant(0.0)


@settings(max_examples=300, deadline=None)
@given(points, st.floats(0.01, 6), st.floats(0.01, 6), st.floats(0.3, math.pi), st.floats(0, 2 * math.pi))
def test_angle_separation_inequality(y, a, b, alpha, heading):
    x = geodesic_flow(UnitTangent(y, heading), a).base
    z = geodesic_flow(UnitTangent(y, heading + alpha), b).base
    assert dist(x, z) >= a + b - separation_constant(alpha) - 1e-9


def test_fellow_travel_common_origin_identical():
    s = GeodesicSegment(I, Point(0, 5))
    ft = fellow_travel_bound(s, s, 1.0)
    assert ft.bound >= 0 and ft.deviation == pytest.approx(0.0, abs=1e-12)


def test_fellow_travel_bound_value_and_samples():
    Q, L, t = 1.0, 10.0, 5.0
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(200):
        h = rng.uniform(0, 2 * math.pi)
        p = Point(rng.uniform(-1, 1), math.exp(rng.uniform(-1, 1)))
        q1 = geodesic_flow(UnitTangent(p, h), L).base
        # second endpoint on the sphere of radius Q about q1, at distance >= L from p
        q2 = geodesic_flow(UnitTangent(q1, rng.uniform(0, 2 * math.pi)), Q).base
        if dist(p, q2) < L:
            continue
        ft = fellow_travel_bound(GeodesicSegment(p, q1), GeodesicSegment(p, q2), t, Q=Q)
        # e^Q e^(t - L) = e^1 e^(5 - 10)
        assert ft.bound == pytest.approx(math.exp(-4))
        worst = max(worst, ft.deviation)
    assert 0.0 < worst <= math.exp(-4)


def test_fellow_travel_windows():
    s = GeodesicSegment(I, Point(0, 5))
    with pytest.raises(WindowError):
        fellow_travel_bound(s, s, -0.1)
    far = GeodesicSegment(Point(5, 1), Point(5, 2))
    with pytest.raises(WindowError):
        fellow_travel_bound(s, far, 1.0, Q=2.0)


def test_classify_isometry_types():
    c = classify_isometry(Isometry(1, 1, 0, 1))
    assert c.kind == "parabolic" and c.fixed == (math.inf,)
    c = classify_isometry(Isometry(2, 0, 0, 0.5))
    assert c.kind == "hyperbolic" and c.translation_length == pytest.approx(math.log(4))
    assert c.fixed[1] == math.inf
    c = classify_isometry(Isometry(0, 1, -1, 0))
    assert c.kind == "elliptic"
    assert (c.fixed[0].x, c.fixed[0].y) == pytest.approx((0.0, 1.0))
    with pytest.raises(IdentityError):
        classify_isometry(Isometry.identity())


def test_piecewise_bound_single_segment_and_two():
    p = PiecewiseRayParams((10.0, 10.0), (math.pi / 2,), math.pi / 2, C=math.log(4))
    assert piecewise_ray_bound(p, 1).lower_bound == 10.0
    b = piecewise_ray_bound(p, 2).lower_bound
    assert b == pytest.approx(20 - math.log(4))
    nodes = piecewise_path(UnitTangent(I, 0.5), (10.0, 10.0), (math.pi / 2,))
    assert dist(nodes[0], nodes[-1]) >= b


def test_piecewise_bound_rejects_sharp_angle():
    p = PiecewiseRayParams((5.0, 5.0), (0.1,), 0.5)
    with pytest.raises(ConstraintError):
        piecewise_ray_bound(p, 2)


def test_piecewise_random_paths_in_coordinates():
    # short paths only: beyond total length ~30 the node coordinates underflow float precision
    rng = np.random.default_rng(11)
    alpha = 0.8
    C = separation_constant(2 * alpha / 3)
    for _ in range(1000):
        n = int(rng.integers(1, 4))
        lengths = tuple(rng.uniform(2 * C, 2 * C + 1, n))
        angles = tuple(rng.uniform(alpha, math.pi, n - 1))
        turns = tuple((math.pi - a) * rng.choice([-1, 1]) for a in angles)
        nodes = piecewise_path(UnitTangent(I, rng.uniform(0, 2 * math.pi)), lengths, turns)
        bound = piecewise_ray_bound(PiecewiseRayParams(lengths, angles, alpha, L_min=2 * C), n)
        assert dist(nodes[0], nodes[-1]) >= bound.lower_bound - 1e-9
        if n > 1:
            assert angle_at(nodes[-2], nodes[0], nodes[-1]) >= bound.angle_certificate - 1e-6


def test_piecewise_random_paths_by_trigonometry():
    rng = np.random.default_rng(12)
    for _ in range(1000):
        alpha = rng.uniform(0.3, math.pi)
        C = separation_constant(2 * alpha / 3)
        n = int(rng.integers(1, 7))
        lengths = [float(v) for v in rng.uniform(2 * C, 2 * C + 4, n)]
        inter = [float(v) for v in rng.uniform(alpha, math.pi, n - 1)]
        signs = [float(v) for v in rng.choice([-1.0, 1.0], n - 1)]
        bound = piecewise_ray_bound(PiecewiseRayParams(tuple(lengths), tuple(inter), alpha, L_min=2 * C), n)
        chord, node_angles = _walk(lengths, inter, signs)
        assert chord >= bound.lower_bound - 1e-9
        assert all(a >= bound.angle_certificate - 1e-6 for a in node_angles)


def test_trig_walk_matches_coordinates():
    rng = np.random.default_rng(13)
    for _ in range(200):
        n = int(rng.integers(2, 4))
        lengths = [float(v) for v in rng.uniform(0.5, 4, n)]
        inter = [float(v) for v in rng.uniform(0.3, math.pi, n - 1)]
        signs = [float(v) for v in rng.choice([-1.0, 1.0], n - 1)]
        turns = [s * (math.pi - a) for s, a in zip(signs, inter)]
        nodes = piecewise_path(UnitTangent(I, rng.uniform(0, 2 * math.pi)), lengths, turns)
        chord, node_angles = _walk(lengths, inter, signs)
        assert chord == pytest.approx(dist(nodes[0], nodes[-1]), abs=1e-9)
        assert node_angles[-1] == pytest.approx(angle_at(nodes[-2], nodes[0], nodes[-1]), abs=1e-7)


def _corner_to_chord(l1, l2, gamma):
    # distance from the corner of a two-segment path to its chord, by hyperbolic trigonometry:
    # the altitude when both base angles are acute, else the nearer endpoint
    c = math.acosh(math.cosh(l1) * math.cosh(l2) - math.sinh(l1) * math.sinh(l2) * math.cos(gamma))
    if math.cosh(l1) * math.cosh(c) < math.cosh(l2):
        return l1
    if math.cosh(l2) * math.cosh(c) < math.cosh(l1):
        return l2
    return math.asinh(math.sinh(l1) * math.sinh(l2) * math.sin(gamma) / math.sinh(c))


@settings(max_examples=60, deadline=None)
@given(st.floats(0.5, 60), st.floats(0.5, 60), st.floats(0.2, 2.9), st.sampled_from([-1, 1]))
def test_chord_deviation_two_segments(l1, l2, gamma, sign):
    got = piecewise_chord_deviation([l1, l2], [sign * (math.pi - gamma)], samples_per_unit=16)
    assert got == pytest.approx(_corner_to_chord(l1, l2, gamma), abs=2e-3)


def test_chord_deviation_straight_path():
    assert piecewise_chord_deviation([20.0, 30.0, 25.0], [0.0, 0.0]) == pytest.approx(0.0, abs=1e-9)


def test_chord_deviation_matches_coordinates_on_short_paths():
    rng = np.random.default_rng(3)
    for _ in range(3):
        lengths, turns = list(rng.uniform(0.5, 1.5, 3)), list(rng.uniform(-2, 2, 2))
        nodes = piecewise_path(UnitTangent(I, math.pi / 2), lengths, turns)
        path = [geodesic_point(p, q, t) for p, q in zip(nodes, nodes[1:]) for t in np.linspace(0, dist(p, q), 300)]
        chord = [geodesic_point(nodes[0], nodes[-1], t) for t in np.linspace(0, dist(nodes[0], nodes[-1]), 300)]
        dm = np.array([[dist(p, g) for g in chord] for p in path])
        want = max(dm.min(axis=0).max(), dm.min(axis=1).max())
        assert piecewise_chord_deviation(lengths, turns, samples_per_unit=300) == pytest.approx(want, abs=1e-3)
