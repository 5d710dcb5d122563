from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from charpoint_lab.errors import DomainError, ParseError
from charpoint_lab.expr import (
    eval_point,
    parse_expression,
    parse_surface,
    split_bilinear,
    to_text,
)
from charpoint_lab.jet import expression_jet

COUNTEREXAMPLE = "x*y/2 + y^2/2 + antider_x(flat(x))"


def test_top_level_add():
    node = parse_surface("x*y/2 + x^2*y").g
    assert node.kind == "add"
    assert node.children[1].kind == "mul"


def test_counterexample_tree():
    node = parse_surface(COUNTEREXAMPLE).g
    kinds = {n.kind for n in _walk(node)}
    assert "antider_x" in kinds
    assert any(n.kind == "call" and n.name == "flat" for n in _walk(node))


def _walk(node):
    yield node
    for c in node.children:
        yield from _walk(c)


@pytest.mark.parametrize("text, offset", [("x*", 2), ("(x+y", 4), ("x + 1.5e", 7), ("x ^ 2.5", 4)])
def test_syntax_error_offset(text, offset):
    with pytest.raises(ParseError) as info:
        parse_expression(text)
    assert info.value.offset == offset


def test_unknown_identifier():
    with pytest.raises(ParseError, match="unknown"):
        parse_expression("tan(x)")


def test_z_rejected_in_surfaces():
    with pytest.raises(ParseError):
        parse_surface("x + z")


def test_chained_power_is_a_syntax_error():
    with pytest.raises(ParseError):
        parse_expression("2^3^2")


def test_power_binds_tighter_than_unary_minus():
    assert eval_point(parse_surface("-x^2"), (3.0, 0.0)) == -9.0


@pytest.mark.parametrize("text", [
    "x*y/2 + x^2*y",
    COUNTEREXAMPLE,
    "-(x - y)^3 / (1 + x^2)",
    "sin(x)*cos(y) - exp(-x)^2 + atan(x*y) + sqrt(2 + x) + log(3 - y)",
    "x - (y - x) - -x",
    "(2^3)^2",
    "1e-3*x/(y/2)",
])
def test_round_trip(text):
    node = parse_expression(text)
    assert parse_expression(to_text(node)) == node


def test_eval_examples():
    assert eval_point(parse_surface("(x^2+y^2)/2"), (1.0, 1.0)) == 1.0
    assert eval_point(parse_surface("flat(x)"), (0.0, 0.3)) == 0.0
    oracle = integrate.quad(lambda t: math.exp(-1.0 / t ** 2), 0.0, 0.5, epsabs=1e-15, epsrel=1e-13)[0]
    value = eval_point(parse_surface("antider_x(flat(x))"), (0.5, 0.0))
    assert value == pytest.approx(oracle, rel=1e-10, abs=1e-15)


def test_domain_errors_are_located():
    with pytest.raises(DomainError):
        eval_point(parse_surface("log(x)"), (-1.0, 0.0))
    with pytest.raises(DomainError):
        eval_point(parse_surface("1/x"), (0.0, 0.0))


def test_split_bilinear():
    c, rest = split_bilinear(parse_expression("x*y/2 + x^2*y - 0.25*y*x"))
    assert c == pytest.approx(0.25)
    for p in [(0.3, -0.7), (1.1, 0.4)]:
        assert eval_point(parse_surface(to_text(rest)), p) == pytest.approx(p[0] ** 2 * p[1])


_BUILTIN_CASES = [
    ("sin(x*y)", (0.4, -0.8)),
    ("cos(x - y)", (0.9, 0.2)),
    ("exp(x + y^2)", (-0.3, 0.5)),
    ("log(2 + x*y)", (0.6, 0.7)),
    ("sqrt(1 + x^2 + y)", (0.2, 0.4)),
    ("atan(3*x - y)", (0.1, -0.5)),
    ("flat(x + y)", (0.3, 0.2)),
    ("antider_x(cos(x*y))", (0.7, 0.9)),
]


@pytest.mark.parametrize("text, p", _BUILTIN_CASES)
def test_first_derivatives_match_central_differences(text, p):
    surf = parse_surface(text)
    jet = surf.jet(p[0], p[1], 1)
    h = 1e-6
    fx = (eval_point(surf, (p[0] + h, p[1])) - eval_point(surf, (p[0] - h, p[1]))) / (2 * h)
    fy = (eval_point(surf, (p[0], p[1] + h)) - eval_point(surf, (p[0], p[1] - h))) / (2 * h)
    assert float(jet[1, 0]) == pytest.approx(fx, rel=1e-6, abs=1e-9)
    assert float(jet[0, 1]) == pytest.approx(fy, rel=1e-6, abs=1e-9)


@pytest.mark.parametrize("order", [1, 4, 9, 16])
def test_flat_jets_vanish_at_zero(order):
    jet = parse_surface("flat(x)").jet(0.0, 0.3, order, value=True)
    assert np.all(jet.coeffs == 0.0)


def test_antider_x_chain_rule_is_exact():
    surf = parse_surface("antider_x(sin(x*y) + flat(x))")
    x, y = 0.45, -1.3
    jet = surf.jet(x, y, 2)
    expected = math.sin(x * y) + math.exp(-1.0 / x ** 2)
    assert float(jet[1, 0]) == pytest.approx(expected, rel=4e-16, abs=0)


def test_space_expression_jet():
    jet = expression_jet(parse_expression("x*z + y^2", ("x", "y", "z")), (1.0, 2.0, 3.0), 2)
    assert float(jet.value) == 7.0
    assert float(jet[1, 0, 1]) == 1.0


@settings(max_examples=60, deadline=None)
@given(a=st.floats(-3, 3), b=st.floats(-3, 3), n=st.integers(0, 5))
def test_round_trip_random_polynomials(a, b, n):
    text = f"{a!r}*x^{n} - ({b!r})*y*x + {a * b!r}"
    node = parse_expression(text)
    assert parse_expression(to_text(node)) == node
