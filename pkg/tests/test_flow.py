import math

import numpy as np
import pytest

from horolab.errors import RangeError
from horolab.excursion import CompactSpec, make_cover
from horolab.flow import (
    DynBallQuery,
    QuotientReducer,
    Thresholds,
    axis_ray,
    classify_samples,
    classify_trajectory,
    d1,
    dyn_ball_contains,
    dynball_shadow_inclusion_check,
    flow_point,
    time_in_compact_fraction,
    trajectory,
    word_ray,
)
from horolab.hgeom import I, Isometry, Point, UnitTangent, classify_isometry, direction_to_ideal, dist

UP = UnitTangent(I, math.pi / 2)


def test_flow_point_vertical_and_zero():
    v = flow_point(UP, 1.0)
    assert (v.base.x, v.base.y) == pytest.approx((0.0, math.e))
    assert v.theta == pytest.approx(math.pi / 2)
    assert flow_point(UP, 0.0) == UP


def test_flow_point_horizontal_tends_to_one():
    v = flow_point(UnitTangent(I, 0.0), 20.0)
    # unit semicircle parametrisation: (tanh t, sech t)
    assert (v.base.x, v.base.y) == pytest.approx((math.tanh(20.0), 1 / math.cosh(20.0)), rel=1e-9)


def test_time_in_compact_upward_parabolic(parabolic):
    cover = make_cover(parabolic, 12.0, 1.0)
    # d(e^t i, {n + i}) = t, so the ray is inside for t <= 1 out of T = 10
    f = time_in_compact_fraction(UP, 10.0, CompactSpec(I, 1.0), cover)
    assert abs(f - 0.10) <= 0.05


def test_time_in_compact_axis_is_one(hyperbolic):
    cover = make_cover(hyperbolic, 12.0, 1.0)
    assert time_in_compact_fraction(UP, 20.0, CompactSpec(I, 1.0), cover) == 1.0


def test_time_in_compact_monotone_in_rho(gamma2):
    cover = make_cover(gamma2, 8.0, 1.0)
    v = UnitTangent(I, 0.7)
    fr = [time_in_compact_fraction(v, 15.0, CompactSpec(I, r), cover) for r in (0.1, 0.25, 0.5, 1.0)]
    assert all(b >= a for a, b in zip(fr, fr[1:]))


def test_trajectory_rejects_bad_horizon(gamma2):
    with pytest.raises(RangeError):
        trajectory(UP, 0.0, make_cover(gamma2, 5.0, 1.0))


def test_classify_upward_parabolic_divergent(parabolic):
    cover = make_cover(parabolic, 12.0, 1.0)
    rep = classify_trajectory(UP, [10.0, 20.0, 30.0], [0.5, 1.0], cover)
    assert rep.verdict == "divergent-like"


def test_classify_axis_recurrent(gamma2):
    red = QuotientReducer(make_cover(gamma2, 7.0, 1.0))
    ray = axis_ray(Isometry(5, 2, 2, 1), I, 85.0, red)
    rep = classify_samples(ray.t, ray.min_orbit_dist, [25.0, 37.0, 61.0, 85.0], [0.1, 0.25])
    assert rep.verdict == "recurrent-like"
    assert rep.fractions[0.25][-1][1] >= Thresholds().theta_rec


def test_axis_ray_rejects_parabolic(gamma2):
    red = QuotientReducer(make_cover(gamma2, 7.0, 1.0))
    with pytest.raises(RangeError):
        axis_ray(Isometry(1, 2, 0, 1), I, 10.0, red)


def test_word_ray_matches_plain_trajectory(gamma2):
    # at short horizons the local-frame ray and the coordinate trajectory agree
    cover = make_cover(gamma2, 7.0, 1.0)
    red = QuotientReducer(cover)
    M = Isometry(5, 2, 2, 1)
    ray = word_ray(I, [M, M], red)
    xi = classify_isometry(M).fixed[1]
    tr = trajectory(UnitTangent(I, direction_to_ideal(I, xi)), 8.0, cover, resolve=1.0, reducer=red)
    m = np.interp(tr.t, ray.t, ray.min_orbit_dist)
    ok = (tr.min_orbit_dist <= 0.9) & (tr.t <= ray.t[-1])
    # both are slope-one zigzags sampled on slightly different grids
    assert np.max(np.abs(m[ok] - tr.min_orbit_dist[ok])) <= 0.05


def test_dyn_ball_identity_and_separated():
    assert dyn_ball_contains(DynBallQuery(UP, UP, 5.0, 0.3))
    r = 0.3
    far = UnitTangent(Point(0.0, math.exp(2 * r)), math.pi / 2)
    assert d1(UP, far) == pytest.approx(2 * r)
    assert not dyn_ball_contains(DynBallQuery(UP, far, 5.0, r))


def test_dyn_ball_forward_asymptotic():
    r = 0.4
    rng = np.random.default_rng(8)
    for _ in range(50):
        # same forward endpoint infinity, horizontal offset with base distance <= r/2
        dx = rng.uniform(-1, 1) * 2 * math.sinh(r / 4)
        w = UnitTangent(Point(dx, 1.0), math.pi / 2)
        assert dist(I, w.base) <= r / 2
        assert dyn_ball_contains(DynBallQuery(UP, w, 10.0, r))


def test_dyn_ball_query_validation():
    with pytest.raises(RangeError):
        DynBallQuery(UP, UP, 0.0, 1.0)


def test_inclusion_check_T0_and_T5():
    rep0 = dynball_shadow_inclusion_check(UP, 0.0, 0.2, 200, seed=1)
    assert rep0.passed
    rep = dynball_shadow_inclusion_check(UP, 5.0, 0.2, 1000, seed=1)
    assert rep.violated == 0 and rep.verified == 1000


def test_inclusion_radius_shrinks_with_T():
    radii = [dynball_shadow_inclusion_check(UP, T, 0.5, 10, seed=2, C=1.0).visual_radius for T in (0, 1, 3, 6)]
    assert all(b < a for a, b in zip(radii, radii[1:]))
