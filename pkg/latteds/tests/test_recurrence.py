import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from latteds.exceptions import ArgumentError, ManifoldInconclusive
from latteds.models import RecurrenceParams
from latteds.recurrence import (
    bound2,
    boundall,
    check_ricatti_bounds,
    classify,
    differential_H,
    fixed_point_differential,
    iterate_G,
    manifold_by_pullback,
    map_H,
    recurrence_rows,
    stable_manifold,
    to_compact,
)


def params(dim, lam, eps):
    return RecurrenceParams(dim=dim, lambda_rec=lam, eps_rec=eps)


def test_saddle_is_a_fixed_point():
    orbit = iterate_G(1.0, 1, params(1, 1.0, 1.0), 50)
    assert orbit.G == [1.0] * 51
    assert not orbit.diverged


def test_orbit_above_saddle_escapes():
    orbit = iterate_G(2.0, 1, params(1, 1.0, 1.0), 50)
    assert orbit.G[1] == 5.0
    assert all(b > a for a, b in zip(orbit.G, orbit.G[1:]))
    assert orbit.diverged


def test_orbit_below_saddle_drops():
    orbit = iterate_G(0.5, 1, params(1, 1.0, 1.0), 200)
    assert orbit.G[1] == -0.25
    assert max(orbit.G[1:]) < 0
    assert min(orbit.G) > -2


def test_iterate_rejects_bad_start():
    with pytest.raises(ArgumentError):
        iterate_G(1.0, 0, params(1, 1.0, 1.0), 5)


def test_compact_coordinates():
    assert to_compact(4, 32.0, 2) == (0.75, 8.0)


@pytest.mark.parametrize("sign", [1, -1])
def test_map_fixed_points(sign):
    p = params(2, 4.0, 1.0)
    g = sign * p.saddle
    assert map_H(1.0, g, p) == (1.0, g)


@given(
    dim=st.integers(1, 3),
    lam=st.floats(0.1, 4.0),
    eps=st.floats(0.1, 4.0),
    g0=st.floats(-3.0, 3.0),
    r0=st.integers(1, 50),
)
@settings(max_examples=80, deadline=None)
def test_map_follows_the_recurrence_step_by_step(dim, lam, eps, g0, r0):
    p = params(dim, lam, eps)
    orbit = iterate_G(g0 * r0 ** (dim - 1), r0, p, 6)
    for k in range(len(orbit.r) - 1):
        s, g = to_compact(orbit.r[k], orbit.G[k], dim)
        expected = to_compact(orbit.r[k + 1], orbit.G[k + 1], dim)
        image = map_H(s, g, p)
        scale = 1.0 + abs(g) + lam + eps * g * g
        assert image[0] == pytest.approx(expected[0], rel=1e-12)
        assert image[1] == pytest.approx(expected[1], rel=1e-9, abs=1e-12 * scale)


def test_map_at_origin():
    p = params(3, 1.0, 0.5)
    s, g = map_H(0.0, 2.0, p)
    assert s == 0.5
    assert g == pytest.approx((2.0 - 1.0 + 0.5 * 4.0) / 4)
    with pytest.raises(ArgumentError):
        map_H(1.5, 0.0, p)


def test_fixed_point_differential_matches_finite_differences():
    p = params(2, 1.0, 0.25)
    for sign in (1, -1):
        numeric = differential_H(1.0, sign * p.saddle, p)
        assert np.allclose(numeric, fixed_point_differential(p, sign), atol=1e-6)


@pytest.mark.parametrize("lam, eps, expected", [(1.0, 1.0, 1.0), (4.0, 1.0, 2.0), (1.0, 4.0, 0.5)])
@pytest.mark.parametrize("r", [1, 5, 20])
def test_one_dimensional_manifold_is_the_saddle(lam, eps, expected, r):
    sample = stable_manifold(r, params(1, lam, eps), tol=1e-8)
    assert abs(sample.g_s - expected) <= 1e-8
    assert sample.width <= 1e-8


def test_bisection_agrees_with_pullback():
    p = params(2, 1.0, 0.01)
    pulled = manifold_by_pullback(p, [1, 2, 8])
    for r, g in pulled.items():
        assert stable_manifold(r, p, tol=1e-9).g_s == pytest.approx(g, rel=1e-6)


def test_manifold_decreases_in_two_and_three_dimensions():
    for dim in (2, 3):
        heights = manifold_by_pullback(params(dim, 1.0, 0.01), range(1, 21))
        values = [heights[r] for r in range(1, 21)]
        assert all(b < a for a, b in zip(values, values[1:]))


def test_classification_is_monotone():
    p = params(2, 1.0, 0.01)
    g_s = manifold_by_pullback(p, [3])[3]
    assert classify(g_s * 1.01, 3, p, 1e-8) == "above"
    assert classify(g_s * 0.99, 3, p, 1e-8) == "below"


def test_exhausted_budget_is_inconclusive():
    with pytest.raises(ManifoldInconclusive) as error:
        stable_manifold(1, params(2, 1.0, 1e-4), budget=2)
    lo, hi = error.value.bracket
    assert lo < hi


def test_general_bound_value():
    assert boundall(4, params(3, 1.0, 0.01)) == pytest.approx(2 * 1.25 * 4 / 0.01 + 10 * 16)
    assert boundall(7, params(1, 4.0, 1.0)) == pytest.approx(2.0)


def test_logarithmic_bound_value():
    assert bound2(10, params(2, 1.0, 1e-4)) == pytest.approx(12 / (1e-4 * math.log(50)))
    assert bound2(10, params(2, 1.0, 1e-2)) is None


@pytest.mark.parametrize("dim", [1, 2, 3])
def test_bounds_hold_on_the_manifold(dim):
    reports = check_ricatti_bounds(params(dim, 1.0, 0.01), range(1, 9), method="pullback")
    assert all(report.satisfied is not False for report in reports)
    assert any(report.satisfied for report in reports)


def test_small_eps_reaches_the_logarithmic_regime():
    reports = check_ricatti_bounds(params(2, 1.0, 1e-4), [10], method="pullback")
    kinds = {report.kind: report for report in reports}
    assert kinds["ricatti2"].bound == pytest.approx(3.067e4, rel=1e-3)
    assert kinds["ricatti2"].satisfied


def test_rows():
    rows = recurrence_rows(params(2, 1.0, 0.25), 4, method="pullback")
    assert [row[0] for row in rows] == [1, 2, 3, 4]
    assert all(row[-1] for row in rows)
    with pytest.raises(ArgumentError):
        recurrence_rows(params(2, 1.0, 0.25), 4, method="newton")
