import math

import numpy as np
import pytest

from horolab.errors import CapacityError, RangeError
from horolab.hgeom import Isometry
from horolab.orbit import (
    Budget,
    GroupSpec,
    annulus_counts,
    compress_word,
    enumerate_ball,
    estimate_delta,
    excursion_annulus,
    excursion_family,
    expand_word,
    find_cusps,
    parabolic_powers,
    poincare_partial,
)

TRIVIAL = GroupSpec("trivial", ())


def test_trivial_group_ball():
    ball = enumerate_ball(TRIVIAL, 5, 10.0)
    assert len(ball) == 1 and ball[0].distance == 0.0 and ball.word(0) == ()


def test_parabolic_ball_closed_form(parabolic):
    ball = enumerate_ball(parabolic, 3, 100.0)
    assert len(ball) == 7
    shifts = sorted(round(e.image.x) for e in ball)
    assert shifts == [-3, -2, -1, 0, 1, 2, 3]
    for e in ball:
        n = e.image.x
        assert e.distance == pytest.approx(math.acosh(1 + n * n / 2), abs=1e-12)


def test_ball_sorted_by_distance(gamma2):
    ball = enumerate_ball(gamma2, 6, 8.0)
    assert np.all(np.diff(ball.distance) >= 0)
    assert ball.distance.max() <= 8.0


@pytest.mark.parametrize("L", [1, 2, 3, 4, 5, 6])
def test_schottky_words_do_not_collide(schottky, L):
    ball = enumerate_ball(schottky, L, 1e9)
    lengths = np.array([len(ball.word(i)) for i in range(len(ball))])
    assert int(np.sum(lengths == L)) == 4 * 3 ** (L - 1)


def test_ball_capacity_error(gamma2):
    with pytest.raises(CapacityError):
        enumerate_ball(gamma2, 100, 12.0, max_elements=1000)


def test_negative_word_length_rejected(gamma2):
    with pytest.raises(RangeError):
        enumerate_ball(gamma2, -1, 5.0)


def test_word_roundtrip():
    w = (1, 1, -2, -2, -2, 1)
    assert compress_word(w) == ((1, 2), (-2, 3), (1, 1))
    assert expand_word(compress_word(w)) == w


def test_word_matrix_matches_product(gamma2):
    a, b = gamma2.generators[0][1], gamma2.generators[1][1]
    assert gamma2.word_matrix((1, -2)) == a @ b.inverse()
    assert gamma2.format_word((1, 1, -2)) == "a^2*b^-1"


def test_annulus_counts_trivial():
    c = annulus_counts(enumerate_ball(TRIVIAL, 1, 5.0), 5.0)
    assert c[0] == 1 and c[1:].sum() == 0


def test_annulus_counts_linear_orbit(hyperbolic):
    ball = enumerate_ball(hyperbolic, 10**6, 20.0)
    c = annulus_counts(ball, 20.0)
    expect = np.zeros(21, dtype=int)
    for n in range(-14, 15):
        d = abs(n) * math.log(4)
        if d < 21:
            expect[int(d)] += 1
    assert list(c) == list(expect)


def test_annulus_counts_parabolic_growth(parabolic):
    ball = enumerate_ball(parabolic, 10**9, 18.0)
    c = annulus_counts(ball, 18.0).astype(float)
    ratios = c[9:17] / c[8:16]
    assert np.all(np.abs(ratios / math.exp(0.5) - 1) < 0.2)


def test_poincare_partial_values(hyperbolic):
    assert poincare_partial(enumerate_ball(TRIVIAL, 1, 3.0), 0.7) == 1.0
    ball = enumerate_ball(hyperbolic, 20, 1e9)
    assert poincare_partial(ball, 0.0) == len(ball) == 41
    want = 1 + 2 * sum(4 ** (-0.1 * n) for n in range(1, 21))
    assert poincare_partial(ball, 0.1) == pytest.approx(want, rel=1e-12)
    with pytest.raises(RangeError):
        poincare_partial(ball, -1.0)


def test_delta_parabolic(parabolic):
    est = estimate_delta(parabolic, Budget(14.0, slack=1.0))
    assert abs(est.value - 0.5) <= 0.05


def test_delta_hyperbolic_cyclic(hyperbolic):
    # linear growth leaves a log R / R bias in the cumulative fit, so the radius is large
    est = estimate_delta(hyperbolic, Budget(200.0, slack=1.0))
    assert abs(est.value) <= 0.02


def test_find_cusps_gamma2(gamma2):
    ball = enumerate_ball(gamma2, 10**9, 6.0, 1.0)
    fixed = {cu.fixed_point for cu in find_cusps(ball, 3.0)}
    assert {math.inf, 0.0} <= fixed


def test_parabolic_powers_match_products():
    P = Isometry(1, 2, 0, 1)
    ns = np.array([-3, 0, 2, 5])
    got = parabolic_powers(P, ns)
    for n, row in zip(ns, got):
        M = Isometry.identity()
        for _ in range(abs(int(n))):
            M = M @ (P if n > 0 else P.inverse())
        assert Isometry(*row) == M


def test_excursion_annulus_matches_full_family(gamma2):
    ball = enumerate_ball(gamma2, 10**9, 6.0, 1.0)
    full = excursion_family(ball, 13.0)
    ann = excursion_annulus(ball, 12.0, 13.0, per_triple=None)
    want = np.sort(full.distance[(full.distance >= 12.0) & (full.distance < 13.0)])
    assert len(ann) == len(want)
    assert np.allclose(np.sort(ann.distance), want, atol=1e-9)


def test_deep_diagonal_powers_stay_distinct(hyperbolic):
    ball = enumerate_ball(hyperbolic, 40, 1e9)
    assert len(ball) == 81
