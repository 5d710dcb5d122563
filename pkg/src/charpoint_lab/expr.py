"""Expression trees for surface-defining functions.

Grammar (whitespace insignificant)::

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := atom ['^' integer] | '-' factor
    atom   := number | variable | ident '(' expr ')' | '(' expr ')'

``^`` binds tighter than unary minus, so ``-x^2`` is ``-(x^2)``.  Only
integer exponents are accepted, which keeps every jet computation exact.
"""

from __future__ import annotations

import functools
import math
import re
from dataclasses import dataclass, field

from scipy import integrate

from .errors import DomainError, ParseError, QuadratureToleranceError

BUILTINS = ("sin", "cos", "exp", "log", "sqrt", "atan", "flat")
IDENTIFIERS = BUILTINS + ("antider_x",)
SURFACE_VARIABLES = ("x", "y")
SPACE_VARIABLES = ("x", "y", "z")

ANTIDER_TOL = 1e-12


@dataclass(frozen=True)
class ExprNode:
    """Immutable expression node.

    ``kind`` is one of constant, var, add, sub, mul, div, pow, neg, call,
    antider_x.  ``name`` holds the variable or builtin name, ``value`` the
    constant, ``exponent`` the integer power.  ``pos`` is the byte offset in
    the source text and does not take part in equality.
    """

    kind: str
    children: tuple[ExprNode, ...] = ()
    value: float | None = None
    name: str | None = None
    exponent: int | None = None
    pos: int = field(default=0, compare=False, repr=False)

    def __str__(self) -> str:
        return to_text(self)


def const(value: float) -> ExprNode:
    return ExprNode("constant", value=float(value))


def var(name: str) -> ExprNode:
    return ExprNode("var", name=name)


# ---------------------------------------------------------------- parsing

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    i = 0
    n = len(text)
    while i < n:
        if text[i].isspace():
            i += 1
            continue
        m = _TOKEN_RE.match(text, i)
        if m is None or m.end() == i:
            raise ParseError(f"unexpected character {text[i]!r}", _byte_offset(text, i))
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), _byte_offset(text, start)))
        i = m.end()
    tokens.append(("end", "", _byte_offset(text, n)))
    return tokens


def _byte_offset(text: str, char_index: int) -> int:
    return len(text[:char_index].encode("utf-8"))


class _Parser:
    def __init__(self, text: str, variables: tuple[str, ...]):
        self.tokens = _tokenize(text)
        self.i = 0
        self.variables = variables

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, text, pos = self.take()
        if text != value or kind != "op":
            found = "end of input" if kind == "end" else repr(text)
            raise ParseError(f"expected {value!r}, found {found}", pos)

    def parse(self) -> ExprNode:
        node = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected token {text!r}", pos)
        return node

    def expr(self) -> ExprNode:
        node = self.term()
        while True:
            kind, text, pos = self.peek()
            if kind == "op" and text in "+-":
                self.take()
                rhs = self.term()
                node = ExprNode("add" if text == "+" else "sub", (node, rhs), pos=pos)
            else:
                return node

    def term(self) -> ExprNode:
        node = self.factor()
        while True:
            kind, text, pos = self.peek()
            if kind == "op" and text in "*/":
                self.take()
                rhs = self.factor()
                node = ExprNode("mul" if text == "*" else "div", (node, rhs), pos=pos)
            else:
                return node

    def factor(self) -> ExprNode:
        kind, text, pos = self.peek()
        if kind == "op" and text == "-":
            self.take()
            return ExprNode("neg", (self.factor(),), pos=pos)
        node = self.atom()
        kind, text, pos = self.peek()
        if kind == "op" and text == "^":
            self.take()
            return ExprNode("pow", (node,), exponent=self.integer(), pos=pos)
        return node

    def integer(self) -> int:
        kind, text, pos = self.take()
        sign = 1
        if kind == "op" and text == "-":
            sign = -1
            kind, text, pos = self.take()
        if kind != "number":
            found = "end of input" if kind == "end" else repr(text)
            raise ParseError(f"expected integer exponent, found {found}", pos)
        if not text.isdigit():
            raise ParseError(f"non-integer exponent {text!r}", pos)
        return sign * int(text)

    def atom(self) -> ExprNode:
        kind, text, pos = self.take()
        if kind == "number":
            return ExprNode("constant", value=float(text), pos=pos)
        if kind == "ident":
            if text in self.variables:
                return ExprNode("var", name=text, pos=pos)
            if text not in IDENTIFIERS:
                raise ParseError(f"unknown identifier {text!r}", pos)
            self.expect("(")
            arg = self.expr()
            self.expect(")")
            if text == "antider_x":
                return ExprNode("antider_x", (arg,), pos=pos)
            return ExprNode("call", (arg,), name=text, pos=pos)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(text)
        raise ParseError(f"unexpected {found}", pos)


def parse_expression(text: str, variables: tuple[str, ...] = SURFACE_VARIABLES) -> ExprNode:
    """Parse ``text`` into an expression tree over ``variables``."""
    return _Parser(text, variables).parse()


# ---------------------------------------------------------------- printing

_PREC = {"add": 1, "sub": 1, "mul": 2, "div": 2, "neg": 3, "pow": 4}


def _prec(node: ExprNode) -> int:
    return _PREC.get(node.kind, 5)


def to_text(node: ExprNode) -> str:
    """Print ``node`` so that re-parsing yields a structurally identical tree."""
    k = node.kind
    if k == "constant":
        return repr(node.value)
    if k == "var":
        return node.name
    if k == "call":
        return f"{node.name}({to_text(node.children[0])})"
    if k == "antider_x":
        return f"antider_x({to_text(node.children[0])})"
    if k == "neg":
        child = node.children[0]
        inner = to_text(child)
        return f"-{inner}" if _prec(child) >= 3 else f"-({inner})"
    if k == "pow":
        base = node.children[0]
        inner = to_text(base)
        if _prec(base) < 5 or (base.kind == "constant" and base.value < 0):
            inner = f"({inner})"
        return f"{inner}^{node.exponent}"
    lhs, rhs = node.children
    p = _PREC[k]
    left = to_text(lhs)
    if _prec(lhs) < p:
        left = f"({left})"
    right = to_text(rhs)
    # '-' and '/' are left-associative: equal precedence on the right needs parentheses
    if _prec(rhs) < p or (_prec(rhs) == p and rhs.kind in ("add", "sub", "mul", "div")):
        right = f"({right})"
    sym = {"add": "+", "sub": "-", "mul": "*", "div": "/"}[k]
    return f"{left} {sym} {right}"


# ---------------------------------------------------------------- queries

def walk(node: ExprNode):
    yield node
    for child in node.children:
        yield from walk(child)


def uses_variable(node: ExprNode, name: str) -> bool:
    return any(n.kind == "var" and n.name == name for n in walk(node))


def is_analytic(node: ExprNode) -> bool:
    """True when the tree contains no ``flat`` call (everything else is real-analytic)."""
    return not any(n.kind == "call" and n.name == "flat" for n in walk(node))


def substitute(node: ExprNode, mapping: dict[str, ExprNode]) -> ExprNode:
    """Replace variables by expressions.  ``antider_x`` bodies must not depend on a remapped x."""
    if node.kind == "var":
        return mapping.get(node.name, node)
    if node.kind == "antider_x" and "x" in mapping:
        raise ValueError("cannot substitute x inside antider_x")
    if not node.children:
        return node
    children = tuple(substitute(c, mapping) for c in node.children)
    return ExprNode(node.kind, children, node.value, node.name, node.exponent, node.pos)


def _monomial(node: ExprNode):
    """(coefficient, deg_x, deg_y) when ``node`` is a constant times x^i y^j, else None."""
    k = node.kind
    if k == "constant":
        return node.value, 0, 0
    if k == "var":
        return (1.0, 1, 0) if node.name == "x" else (1.0, 0, 1) if node.name == "y" else None
    if k == "neg":
        m = _monomial(node.children[0])
        return None if m is None else (-m[0], m[1], m[2])
    if k == "pow":
        m = _monomial(node.children[0])
        if m is None or node.exponent < 0:
            return None
        return m[0] ** node.exponent, m[1] * node.exponent, m[2] * node.exponent
    if k in ("mul", "div"):
        a, b = (_monomial(c) for c in node.children)
        if a is None or b is None:
            return None
        if k == "mul":
            return a[0] * b[0], a[1] + b[1], a[2] + b[2]
        if b[1] or b[2] or b[0] == 0.0:
            return None
        return a[0] / b[0], a[1], a[2]
    return None


def split_bilinear(node: ExprNode) -> tuple[float, ExprNode]:
    """Write ``node`` as c*x*y + rest, collecting top-level additive x*y terms.

    Lets the horizontal gradient cancel the contact term x/2 exactly instead
    of subtracting two nearly equal floats.
    """
    terms: list[tuple[float, ExprNode]] = []

    def collect(n: ExprNode, sign: float):
        if n.kind == "add":
            collect(n.children[0], sign)
            collect(n.children[1], sign)
        elif n.kind == "sub":
            collect(n.children[0], sign)
            collect(n.children[1], -sign)
        else:
            terms.append((sign, n))

    collect(node, 1.0)
    c = 0.0
    rest = None
    for sign, term in terms:
        m = _monomial(term)
        if m is not None and m[1] == 1 and m[2] == 1:
            c += sign * m[0]
            continue
        if rest is None:
            rest = term if sign > 0 else ExprNode("neg", (term,))
        else:
            rest = ExprNode("add" if sign > 0 else "sub", (rest, term))
    return c, const(0.0) if rest is None else rest


# ---------------------------------------------------------------- evaluation

def flat(s: float) -> float:
    return 0.0 if s == 0.0 else math.exp(-1.0 / (s * s))


def _call(name: str, a: float, pos: int) -> float:
    if name == "log":
        if a <= 0:
            raise DomainError(f"log of non-positive value {a!r}", pos)
        return math.log(a)
    if name == "sqrt":
        if a < 0:
            raise DomainError(f"sqrt of negative value {a!r}", pos)
        return math.sqrt(a)
    if name == "flat":
        return flat(a)
    try:
        return getattr(math, name)(a)
    except OverflowError as exc:
        raise DomainError(f"{name} overflow at {a!r}", pos) from exc


def evaluate(node: ExprNode, env: dict[str, float]) -> float:
    """Evaluate ``node`` at a point given as a variable -> value mapping."""
    k = node.kind
    if k == "constant":
        return node.value
    if k == "var":
        return env[node.name]
    if k == "neg":
        return -evaluate(node.children[0], env)
    if k == "call":
        return _call(node.name, evaluate(node.children[0], env), node.pos)
    if k == "pow":
        base = evaluate(node.children[0], env)
        if base == 0.0 and node.exponent < 0:
            raise DomainError("zero raised to a negative power", node.pos)
        try:
            return base ** node.exponent
        except OverflowError as exc:
            raise DomainError("power overflow", node.pos) from exc
    if k == "antider_x":
        return antider_value(node.children[0], env)
    a = evaluate(node.children[0], env)
    b = evaluate(node.children[1], env)
    if k == "add":
        return a + b
    if k == "sub":
        return a - b
    if k == "mul":
        return a * b
    if b == 0.0:
        raise DomainError("division by zero", node.pos)
    return a / b


def antider_value(body: ExprNode, env: dict[str, float]) -> float:
    """x -> integral of ``body`` over [0, x] at fixed remaining variables."""
    x = env["x"]
    if x == 0.0:
        return 0.0

    def integrand(tau):
        local = dict(env)
        local["x"] = tau
        return evaluate(body, local)

    value, err = integrate.quad(integrand, 0.0, x, epsabs=ANTIDER_TOL, epsrel=ANTIDER_TOL, limit=200)
    if not err <= max(ANTIDER_TOL, ANTIDER_TOL * abs(value)):
        raise QuadratureToleranceError(
            f"antider_x quadrature error {err:.3g} exceeds {ANTIDER_TOL:g} at x={x!r}"
        )
    return value


# ---------------------------------------------------------------- surfaces

@dataclass(frozen=True)
class SurfaceModel:
    """Graph surface z = g(x, y) over a rectangular analysis window."""

    g: ExprNode
    provenance: str = ""
    window: tuple[float, float, float, float] = (-1.0, 1.0, -1.0, 1.0)

    @property
    def analytic(self) -> bool:
        return is_analytic(self.g)

    @functools.cached_property
    def bilinear_split(self) -> tuple[float, SurfaceModel]:
        """(c, r) with g = c*x*y + r."""
        c, rest = split_bilinear(self.g)
        return c, SurfaceModel(rest, self.provenance, self.window)

    def jet(self, x, y, order: int, value: bool = False):
        """Jet of g at the point(s) (x, y); see :func:`charpoint_lab.jet.jet_of`."""
        from .jet import jet_of

        return jet_of(self, (x, y), order, value=value)

    def __call__(self, x: float, y: float) -> float:
        return eval_point(self, (x, y))


def parse_surface(text: str, window=(-1.0, 1.0, -1.0, 1.0)) -> SurfaceModel:
    x0, x1, y0, y1 = (float(v) for v in window)
    if not (x0 < x1 and y0 < y1):
        raise ValueError(f"empty window {window!r}")
    return SurfaceModel(parse_expression(text, SURFACE_VARIABLES), text, (x0, x1, y0, y1))


def eval_point(model: SurfaceModel, p) -> float:
    """g(p), with antider_x nodes integrated to 1e-12."""
    x, y = float(p[0]), float(p[1])
    value = evaluate(model.g, {"x": x, "y": y})
    if not math.isfinite(value):
        raise DomainError(f"non-finite surface value at {p!r}")
    return value
