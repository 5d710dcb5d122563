from __future__ import annotations

import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from charpoint_lab.charlocus import (
    MILDLY_DEGENERATE,
    NON_ISOLATED,
    NONDEGENERATE,
    NOT_MILDLY_DEGENERATE,
    CriticalCurveRecord,
    CurveSample,
    characteristic_jacobian_fd,
    classify,
    find_characteristic_points,
    hessian_at,
    is_degenerate,
    kernel_frame,
    require_order,
    rotate_surface,
    rotate_to_normal_form,
    trace_critical_curve,
    xi_order,
)
from charpoint_lab.errors import NotCharacteristic, NotDegenerate, OrderAmbiguous, WindowBoundaryWarning
from charpoint_lab.expr import parse_surface
from charpoint_lab.geometry import FrameModel, horizontal_data

HEIS = FrameModel()
K2 = "x*y/2 + x^2*y"
COUNTEREXAMPLE = "x*y/2 + y^2/2 + antider_x(flat(x))"


def _f(v) -> str:
    return repr(float(v))


def degenerate_cubic(rng, center=(0.0, 0.0)):
    """Random cubic with a degenerate characteristic point at ``center``."""
    g20 = rng.choice([-1, 1]) * rng.uniform(0.3, 2.0)
    g11 = rng.uniform(-1.5, 1.5)
    g02 = (g11 ** 2 - 0.25) / g20
    cubic = rng.normal(size=4)
    x0, y0 = center
    X, Y = f"(x - ({_f(x0)}))", f"(y - ({_f(y0)}))"
    text = (f"{_f(g20 / 2)}*{X}^2 + {_f(g11)}*{X}*{Y} + {_f(g02 / 2)}*{Y}^2"
            f" + {_f(cubic[0])}*{X}^3 + {_f(cubic[1])}*{X}^2*{Y} + {_f(cubic[2])}*{X}*{Y}^2 + {_f(cubic[3])}*{Y}^3"
            f" - {_f(y0 / 2)}*{X} + {_f(x0 / 2)}*{Y}")
    return parse_surface(text), (g20, g11, g02)


def synthetic_curve(xi, ratio=0.5, x_max=0.25, n=40):
    samples = []
    for i in range(n):
        for s in (1, -1):
            x = s * x_max * ratio ** i
            v = xi(x)
            samples.append(CurveSample(x, x, 0.0, v, 8 * np.finfo(float).eps * abs(v)))
    return CriticalCurveRecord(samples)


# ---------------------------------------------------------------- location

@pytest.mark.parametrize("text", ["(x^2+y^2)/2", "0"])
def test_single_point(text):
    search = find_characteristic_points(HEIS, parse_surface(text))
    assert [(p.x, p.y) for p in search] == [(0.0, 0.0)]
    assert search.points[0].isolated


def test_segment_is_non_isolated():
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        search = find_characteristic_points(HEIS, parse_surface("x*y/2"))
    assert len(search) > 10
    assert all(abs(p.y) < 1e-12 for p in search)
    assert not any(p.isolated for p in search)
    assert len(search.clusters()) == 1
    assert any(issubclass(w.category, WindowBoundaryWarning) for w in caught)


def test_residual_and_offset_point():
    surf = parse_surface("(x - 0.3)^2 + (y + 0.2)^2 + 0.1*x - 0.15*y")
    search = find_characteristic_points(HEIS, surf)
    for p in search:
        hd = horizontal_data(HEIS, surf, (p.x, p.y))
        assert abs(float(hd.X1u)) + abs(float(hd.X2u)) <= 1e-10


def test_degenerate_root_is_resolved_exactly():
    (p,) = find_characteristic_points(HEIS, parse_surface(K2)).points
    assert (p.x, p.y) == (0.0, 0.0)


def test_grid_minimum():
    with pytest.raises(ValueError):
        find_characteristic_points(HEIS, parse_surface("0"), grid_n=8)


# ---------------------------------------------------------------- Hessian

def test_hessian_examples():
    rec = hessian_at(HEIS, parse_surface("(x^2+y^2)/2"), (0.0, 0.0))
    assert np.allclose(rec.hessian, [[-1, 0.5], [-0.5, -1]], atol=1e-15)
    assert rec.det == pytest.approx(1.25, abs=1e-12)
    assert rec.classification == NONDEGENERATE
    rec = hessian_at(HEIS, parse_surface("0"), (0.0, 0.0))
    assert np.allclose(rec.hessian, [[0, 0.5], [-0.5, 0]], atol=1e-15)
    assert rec.det == pytest.approx(0.25, abs=1e-12)
    rec = hessian_at(HEIS, parse_surface(K2), (0.0, 0.0))
    assert np.allclose(rec.hessian, [[0, 0], [-1, 0]], atol=1e-15)
    assert rec.det == 0.0 and is_degenerate(rec)


def test_not_characteristic():
    with pytest.raises(NotCharacteristic):
        hessian_at(HEIS, parse_surface("0"), (0.5, 0.0))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1))
def test_degeneracy_identity(seed):
    rng = np.random.default_rng(seed)
    g20, g11, g02 = rng.uniform(-2, 2, 3)
    surf = parse_surface(f"{_f(g20 / 2)}*x^2 + {_f(g11)}*x*y + {_f(g02 / 2)}*y^2")
    rec = hessian_at(HEIS, surf, (0.0, 0.0))
    assert rec.det == pytest.approx(g20 * g02 - g11 ** 2 + 0.25, abs=1e-13)
    assert rec.det_identity_residual < 1e-13


# ---------------------------------------------------------------- kernel frame and normal form

def test_kernel_frame_examples():
    rec = hessian_at(HEIS, parse_surface(K2), (0.0, 0.0))
    N, T, theta = kernel_frame(rec)
    assert N == (1.0, 0.0) and T == (-0.0, 1.0) and theta == 0.0
    with pytest.raises(NotDegenerate):
        kernel_frame(hessian_at(HEIS, parse_surface("0"), (0.0, 0.0)))


@pytest.mark.parametrize("alpha", [-2.0, 0.0, 0.7, 3.0])
def test_normal_form_input_has_kernel_x(alpha):
    surf = parse_surface(f"x*y/2 + {_f(alpha / 2)}*y^2 + x^3*y")
    rec = hessian_at(HEIS, surf, (0.0, 0.0))
    N, _, _ = kernel_frame(rec)
    assert N[0] == pytest.approx(1.0, abs=1e-15) and N[1] == pytest.approx(0.0, abs=1e-15)
    _, a = rotate_to_normal_form(surf, rec)
    assert a == pytest.approx(alpha, abs=1e-14)


def test_kernel_rotates_with_surface():
    phi = 0.9
    surf = rotate_surface(parse_surface(K2), phi)
    rec = hessian_at(HEIS, surf, (0.0, 0.0))
    N, _, _ = kernel_frame(rec)
    assert abs(abs(N[0] * math.cos(phi) + N[1] * math.sin(phi)) - 1.0) < 1e-12


def test_normal_form_round_trip():
    surf = rotate_surface(parse_surface(K2), math.pi / 6)
    rec = hessian_at(HEIS, surf, (0.0, 0.0))
    nf, alpha = rotate_to_normal_form(surf, rec)
    j = nf.jet(0.0, 0.0, 2)
    assert abs(alpha) < 1e-9 and abs(float(j[1, 1]) - 0.5) < 1e-9 and abs(float(j[2, 0])) < 1e-9


def test_counterexample_normal_form():
    surf = parse_surface(COUNTEREXAMPLE)
    rec = hessian_at(HEIS, surf, (0.0, 0.0))
    nf, alpha = rotate_to_normal_form(surf, rec)
    assert alpha == 1.0
    for p in [(0.3, -0.2), (-0.6, 0.5)]:
        assert np.allclose(nf.jet(*p, 4).coeffs, surf.jet(*p, 4).coeffs, rtol=1e-13, atol=1e-15, equal_nan=True)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1))
def test_normal_form_cancellation(seed):
    rng = np.random.default_rng(seed)
    center = tuple(rng.uniform(-0.3, 0.3, 2))
    surf, _ = degenerate_cubic(rng, center)
    rec = hessian_at(HEIS, surf, center)
    assert is_degenerate(rec)
    nf, _ = rotate_to_normal_form(surf, rec)
    j = nf.jet(0.0, 0.0, 2)
    assert abs(float(j[2, 0])) < 1e-9
    assert abs(float(j[1, 1]) - 0.5) < 1e-9


# ---------------------------------------------------------------- critical curve and xi

def test_k2_curve():
    surf = parse_surface(K2)
    curve = trace_critical_curve(HEIS, surf)
    for s in curve.samples:
        assert s.y == 0.0
        assert s.xi == pytest.approx(-s.x ** 2, rel=1e-14)
    assert not curve.non_isolated


def test_counterexample_curve():
    curve = trace_critical_curve(HEIS, parse_surface(COUNTEREXAMPLE))
    for s in curve.samples:
        expected = -math.exp(-1.0 / s.x ** 2)
        assert s.y == pytest.approx(expected, rel=1e-12, abs=1e-300)
        assert abs(s.xi) == pytest.approx(-expected, rel=1e-10, abs=1e-300)


def test_quadratic_normal_form_curve_is_non_isolated():
    curve = trace_critical_curve(HEIS, parse_surface("x*y/2 + 0.8*y^2"))
    assert curve.non_isolated


def test_exact_order_k2():
    est = xi_order(None, parse_surface(K2), "exact")
    assert (est.k, est.c0) == (2, -1.0)


@pytest.mark.parametrize("k", [2, 3, 4, 5, 6])
def test_numeric_order_synthetic(k):
    est = xi_order(synthetic_curve(lambda x: x ** k * (1 + x / 2)), mode="numeric")
    assert est.k == k and est.c0 == pytest.approx(1.0, rel=1e-3)


def test_numeric_order_infinite():
    curve = synthetic_curve(lambda x: math.exp(-1.0 / x ** 2))
    est = xi_order(curve, mode="numeric")
    assert not est.finite and est.k is None and est.max_slope > 12


def test_ambiguous_order_raises():
    curve = synthetic_curve(lambda x: x ** 2 * (1 + 0.5 * math.sin(1 / abs(x))), n=12)
    est = xi_order(curve, mode="numeric")
    assert est.ambiguous
    with pytest.raises(OrderAmbiguous):
        require_order(est)


@pytest.mark.parametrize("ratio, x_max", [(0.5, 0.25), (0.6, 0.1), (0.3, 0.4)])
def test_order_is_independent_of_the_sample_ladder(ratio, x_max):
    surf = parse_surface("x*y/2 + x^3*y")
    curve = trace_critical_curve(HEIS, surf, x_max=x_max, ratio=ratio, n_samples=30)
    assert xi_order(curve, surf, "numeric").k == 3


@pytest.mark.parametrize("lam", [0.25, 0.5, 2.0])
def test_order_is_invariant_under_dilation(lam):
    # the image of z = g under (x, y, z) -> (lam x, lam y, lam^2 z)
    surf = parse_surface(f"x*y/2 + ({_f(1 / lam)})*x^2*y")
    rec = classify(HEIS, surf, (0.0, 0.0), mode="numeric")
    assert rec.classification == MILDLY_DEGENERATE and rec.order_k == 2


# ---------------------------------------------------------------- classification

def test_classify_examples():
    assert classify(HEIS, parse_surface("(x^2+y^2)/2"), (0.0, 0.0)).classification == NONDEGENERATE
    rec = classify(HEIS, parse_surface(K2), (0.0, 0.0))
    assert rec.classification == MILDLY_DEGENERATE and rec.order_k == 2 and rec.xi_leading == -1.0
    rec = classify(HEIS, parse_surface(COUNTEREXAMPLE), (0.0, 0.0))
    assert rec.classification == NOT_MILDLY_DEGENERATE and rec.max_slope > 12


@pytest.mark.parametrize("text", ["x*y/2", "x*y/2 + x^3"])
def test_classify_non_isolated(text):
    rec = classify(HEIS, parse_surface(text), (0.0, 0.0))
    assert rec.classification == NON_ISOLATED and not rec.isolated


@pytest.mark.parametrize("angle", [0.7, -2.0])
def test_classify_rotated(angle):
    rec = classify(HEIS, rotate_surface(parse_surface("x*y/2 + x^3*y"), angle), (0.0, 0.0), mode="exact")
    assert rec.classification == MILDLY_DEGENERATE and rec.order_k == 3


def test_nt_identities():
    for text in (K2, COUNTEREXAMPLE, "x*y/2 + 0.3*y^2 + x^5*y"):
        rec = classify(HEIS, parse_surface(text), (0.0, 0.0))
        assert abs(rec.NTu) < 1e-8 and abs(rec.TNu + 1.0) < 1e-8


@pytest.mark.parametrize("theta", np.linspace(-3.0, 3.0, 7))
def test_det_invariance_under_frame_rotation(theta):
    for text in ("(x^2+y^2)/2", "0", "x^2 - 3*y^2 + x*y^3"):
        surf = parse_surface(text)
        a = hessian_at(HEIS, surf, (0.0, 0.0))
        b = hessian_at(HEIS.rotated(theta), surf, (0.0, 0.0))
        assert b.det == pytest.approx(a.det, rel=1e-9)


@pytest.mark.parametrize("text", ["(x^2+y^2)/2", "0", "x^2 - 3*y^2 + x*y^3"])
def test_jacobian_identity(text):
    surf = parse_surface(text)
    rec = hessian_at(HEIS, surf, (0.0, 0.0))
    J = characteristic_jacobian_fd(HEIS, surf, (0.0, 0.0))
    assert np.linalg.det(J) == pytest.approx(rec.det, rel=1e-9)


def test_accumulation_tangent_in_kernel():
    surf = parse_surface("x*y/2")
    for x in (0.0, 0.3, -0.6):
        rec = hessian_at(HEIS, surf, (x, 0.0))
        N, _, _ = kernel_frame(rec)
        assert abs(N[1]) < 1e-14  # the segment y = 0 runs along N = (1, 0)
