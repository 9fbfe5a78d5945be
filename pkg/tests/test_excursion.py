import math

import numpy as np
import pytest

from horolab.errors import CoverageError, RangeError
from horolab.excursion import (
    CompactSpec,
    estimate_delta_K,
    estimate_delta_inf,
    excursion_profile,
    filter_S_alpha,
    gamma_K_mask,
    gamma_K_membership,
    kr_window,
    make_cover,
)
from horolab.hgeom import I, Isometry, Point
from horolab.orbit import Budget, OrbitElement, enumerate_ball


def shift(n: int) -> OrbitElement:
    return OrbitElement((1,) * n, Isometry(1, n, 0, 1), Point(n, 1), math.acosh(1 + n * n / 2))


@pytest.fixture(scope="module")
def pcover(parabolic):
    return make_cover(parabolic, 12.0, 1.0)


def test_short_element_fully_inside(pcover):
    assert excursion_profile(shift(1), CompactSpec(I, 1.0), pcover).fraction_inside == 1.0


def test_identity_profile(pcover):
    e = OrbitElement((), Isometry.identity(), I, 0.0)
    assert excursion_profile(e, CompactSpec(I, 1.0), pcover).fraction_inside == 1.0


def test_shift_64_fraction(pcover):
    # frozen from the semicircle closed form: 42 of 168 grid samples lie within 1 of {n + i}
    p = excursion_profile(shift(64), CompactSpec(I, 1.0), pcover)
    assert p.fraction_inside == pytest.approx(0.25, abs=1e-12)
    assert 0 <= p.first_exit <= p.last_entry <= shift(64).distance


def test_fraction_monotone_in_padding(pcover):
    for n in (5, 17, 40, 64):
        fr = [excursion_profile(shift(n), CompactSpec(I, 0.5, pad), pcover).fraction_inside
              for pad in (0.0, 0.25, 0.5, 1.0)]
        assert all(b >= a for a, b in zip(fr, fr[1:]))


def test_cover_too_small_raises(parabolic):
    small = make_cover(parabolic, 3.0, 1.0)
    with pytest.raises(CoverageError):
        excursion_profile(shift(64), CompactSpec(I, 1.0), small)


def test_s_alpha_no_filter(gamma2):
    ball = enumerate_ball(gamma2, 10**9, 7.0, 1.0)
    cover = make_cover(gamma2, 6.0, 1.0)
    sa = filter_S_alpha(ball, CompactSpec(I, 0.5), 1.0, 3.0, cover)
    assert len(sa.indices) == int(np.sum(ball.distance >= 3.0))


def test_s_alpha_parabolic_cofinite(parabolic, pcover):
    ball = enumerate_ball(parabolic, 10**9, math.acosh(1 + 256 ** 2 / 2) + 1e-9, 1.0)
    cover = make_cover(parabolic, 9.0, 1.0)
    sa = filter_S_alpha(ball, CompactSpec(I, 1.0), 0.3, 0.0, cover)
    passed = sorted({abs(round(ball[int(i)].image.x)) for i in sa.indices})
    # frozen from the closed-form profile over |n| <= 256: exactly |n| >= 32 pass
    assert passed == list(range(32, 257))


def test_s_alpha_schottky_large_rho_empty(schottky):
    ball = enumerate_ball(schottky, 10**9, 12.0, 1.0)
    cover = make_cover(schottky, 8.0, 1.0)
    sa = filter_S_alpha(ball, CompactSpec(I, 1.5), 0.3, 0.0, cover)
    assert np.all(sa.distance < 6.0)


def test_s_alpha_rejects_alpha():
    with pytest.raises(RangeError):
        filter_S_alpha([], CompactSpec(I, 1.0), 0.0, 0.0, None)


def test_gamma_K_parabolic(pcover):
    k = CompactSpec(I, 1.0)
    # shift 1 has length 0.96 <= 2 Delta = 4: empty interior window, member vacuously
    assert gamma_K_membership(shift(1), k, pcover)
    assert gamma_K_membership(shift(64), k, pcover)


def test_gamma_K_rejects_segment_through_orbit(gamma2):
    # a^k b^m passes through the orbit point a^k.o in its interior
    cover = make_cover(gamma2, 12.0, 1.0)
    g = gamma2.word_matrix((1, 1, 1, 2, 2, 2))
    L = math.acosh(1 + ((g(I).x) ** 2 + (g(I).y - 1) ** 2) / (2 * g(I).y))
    e = OrbitElement((1, 1, 1, 2, 2, 2), g, g(I), L)
    assert not gamma_K_membership(e, CompactSpec(I, 0.5), cover)


def test_gamma_K_vacuous_for_short(gamma2):
    cover = make_cover(gamma2, 6.0, 1.0)
    ball = enumerate_ball(gamma2, 10**9, 4.0, 1.0)
    mask = gamma_K_mask(ball, CompactSpec(I, 1.0), cover)
    assert np.all(mask[ball.distance <= 2.0])


def test_gamma_K_schottky_stabilises(schottky):
    k = CompactSpec(I, 1.5)
    counts = []
    for R in (10.0, 12.0, 14.0, 16.0):
        ball = enumerate_ball(schottky, 10**9, R, 1.0)
        cover = make_cover(schottky, 0.5 * R + 1.5, 1.0)
        counts.append(int(gamma_K_mask(ball, k, cover).sum()))
    assert len(set(counts)) == 1


def test_delta_K_parabolic(parabolic):
    est = estimate_delta_K(parabolic, CompactSpec(I, 1.0), Budget(16.0, slack=1.0))
    assert abs(est.value - 0.5) <= 0.07


def test_delta_inf_schottky_and_cyclic(schottky, hyperbolic):
    di = estimate_delta_inf(schottky, [0.5, 1.0, 1.5], Budget(14.0, slack=1.0))
    assert di.extrapolated <= 0.05
    di = estimate_delta_inf(hyperbolic, [0.5, 1.0], Budget(200.0, slack=1.0))
    assert di.extrapolated <= 0.02


def test_delta_inf_rejects_unsorted(gamma2):
    with pytest.raises(RangeError):
        estimate_delta_inf(gamma2, [1.0, 0.5], Budget(8.0))


def test_kr_window_identity():
    k = CompactSpec(I, 1.0)
    w = kr_window(shift(64), Isometry.identity(), k)
    assert w.head == pytest.approx((0.0, 4 * k.Delta + math.log(2)))
    w2 = kr_window(shift(128), Isometry.identity(), k)
    assert w.head == w2.head
    assert w.tail[1] - w.tail[0] == pytest.approx(w2.tail[1] - w2.tail[0])


def test_kr_window_contains_inside_samples(pcover):
    # samples of [i, 64 + i] within 0.4 of the orbit sit in the head or the tail
    e = shift(64)
    w = kr_window(e, Isometry.identity(), CompactSpec(I, 1.0), pcover)
    L = e.distance
    c, R = 32.0, math.hypot(32.0, 1.0)
    a0 = math.atan2(1.0, -c)
    for t in np.arange(0.0, L, 0.05):
        a = 2 * math.atan(math.tan(a0 / 2) * math.exp(-t))
        x, y = c + R * math.cos(a), R * math.sin(a)
        if pcover.near(np.array([x]), np.array([y]), 0.4)[0]:
            assert w.head[0] <= t <= w.head[1] or w.tail[0] <= t <= w.tail[1]
