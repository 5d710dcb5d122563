from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from charpoint_lab.errors import JetOrderError
from charpoint_lab.expr import parse_surface
from charpoint_lab.jet import MAX_ORDER, Jet, compose_1d


def test_monomial_jet():
    jet = parse_surface("x^2*y").jet(0.0, 0.0, 3)
    expected = np.zeros((4, 4))
    expected[2, 1] = 1.0
    assert np.array_equal(jet.coeffs * _mask(3), expected)


def _mask(d):
    i, j = np.indices((d + 1, d + 1))
    return (i + j <= d).astype(float)


def test_quadratic_jet():
    jet = parse_surface("(x^2+y^2)/2").jet(0.0, 0.0, 2, value=True)
    assert jet[2, 0] == 0.5 and jet[0, 2] == 0.5
    assert jet[1, 1] == 0.0 and jet[1, 0] == 0.0 and jet[0, 1] == 0.0 and jet.value == 0.0


def test_flat_derivatives_shrink_towards_zero():
    # every derivative of exp(-1/s^2) tends to 0 as s -> 0
    surf = parse_surface("flat(x)")
    for d in (1, 2, 3):
        vals = [abs(float(surf.jet(s, 0.0, d)[d, 0])) for s in (0.2, 0.1, 0.05)]
        assert vals[0] > vals[1] > vals[2]
        assert vals[2] < 1e-100


def test_order_cap():
    with pytest.raises(JetOrderError):
        parse_surface("x").jet(0.0, 0.0, MAX_ORDER + 1)


def test_compose_polynomial():
    outer = Jet.from_univariate([0.0, 0.0, 1.0, 0.0, 0.0])  # t^2 at t = 0
    inner = Jet.from_univariate([0.0, 1.0, 1.0, 0.0, 0.0])  # s + s^2
    out = compose_1d(outer, inner)
    assert np.allclose(out.coeffs, [0.0, 0.0, 1.0, 2.0, 1.0], atol=0, rtol=0)


def test_compose_exponential():
    outer = Jet.from_univariate([1.0, 1.0, 0.5])
    inner = Jet.from_univariate([0.0, 1.0, 0.0])
    assert np.array_equal(compose_1d(outer, inner).coeffs, [1.0, 1.0, 0.5])


def test_compose_order_mismatch():
    with pytest.raises(JetOrderError):
        compose_1d(Jet.from_univariate([1.0, 1.0]), Jet.from_univariate([0.0, 1.0, 0.0]), order=4)


def _random_jet(rng, d=4):
    return Jet(rng.normal(size=(d + 1, d + 1)) * _mask(d), d, 2)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1))
def test_ring_axioms(seed):
    rng = np.random.default_rng(seed)
    a, b, c = (_random_jet(rng) for _ in range(3))
    lhs, rhs = (a * b) * c, a * (b * c)
    scale = np.abs(lhs.coeffs).max() + 1.0
    assert np.allclose(lhs.coeffs, rhs.coeffs, rtol=0, atol=1e-12 * scale)
    lhs, rhs = a * (b + c), a * b + a * c
    assert np.allclose(lhs.coeffs, rhs.coeffs, rtol=0, atol=1e-12 * scale)
    assert np.allclose((a * b).coeffs, (b * a).coeffs, rtol=0, atol=1e-12 * scale)


def test_reciprocal_inverts():
    rng = np.random.default_rng(3)
    a = _random_jet(rng)
    a.coeffs[0, 0] = 2.5
    one = a * a.reciprocal()
    expected = np.zeros_like(one.coeffs)
    expected[0, 0] = 1.0
    assert np.allclose(one.coeffs, expected, atol=1e-12)


@pytest.mark.parametrize("text", ["sin(x*y) + x^3", "exp(x - y^2)/(2 + cos(x))", "atan(x + 2*y)*sqrt(3 + x)"])
def test_second_derivatives_match_five_point_differences(text):
    surf = parse_surface(text)
    x0, y0, h = 0.31, -0.42, 1e-3

    def g(x, y):
        return float(surf.jet(x, y, 0, value=True).value)

    jet = surf.jet(x0, y0, 2)
    w = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / (12 * h)
    offs = np.arange(-2, 3) * h
    gx = sum(wi * g(x0 + o, y0) for wi, o in zip(w, offs))
    gy = sum(wi * g(x0, y0 + o) for wi, o in zip(w, offs))
    w2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / (12 * h * h)
    gxx = sum(wi * g(x0 + o, y0) for wi, o in zip(w2, offs))
    gyy = sum(wi * g(x0, y0 + o) for wi, o in zip(w2, offs))
    gxy = sum(wi * wj * g(x0 + oi, y0 + oj) for wi, oi in zip(w, offs) for wj, oj in zip(w, offs))
    assert jet.partial((1, 0)) == pytest.approx(gx, rel=1e-6)
    assert jet.partial((0, 1)) == pytest.approx(gy, rel=1e-6)
    assert jet.partial((2, 0)) == pytest.approx(gxx, rel=1e-6)
    assert jet.partial((0, 2)) == pytest.approx(gyy, rel=1e-6)
    assert jet.partial((1, 1)) == pytest.approx(gxy, rel=1e-6)


@pytest.mark.parametrize("text", ["sin(x)*exp(y) + x^5*y", "antider_x(cos(x*y)) + flat(y - 0.1)"])
def test_truncation_consistency(text):
    surf = parse_surface(text)
    hi = surf.jet(0.2, 0.35, 8)
    for d in (0, 1, 3, 5):
        lo = surf.jet(0.2, 0.35, d)
        got = hi.truncate(d).coeffs
        assert np.allclose(got[~np.isnan(got)], lo.coeffs[~np.isnan(lo.coeffs)], rtol=1e-13, atol=1e-15)


def test_partial_scales_by_factorials():
    jet = parse_surface("x^3*y^2").jet(0.0, 0.0, 5)
    assert jet.partial((3, 2)) == math.factorial(3) * math.factorial(2)


def test_batched_evaluation_matches_scalar():
    surf = parse_surface("x*y/2 + x^2*y + sin(y)")
    xs, ys = np.array([0.1, -0.4, 0.7]), np.array([0.3, 0.2, -0.9])
    batch = surf.jet(xs, ys, 3)
    for i in range(3):
        assert np.allclose(batch.coeffs[..., i], surf.jet(xs[i], ys[i], 3).coeffs, equal_nan=True)
