
import pytest
import sympy as sp

from nhfields.expr import canon
from nhfields.grammar import ExprSyntaxError, parse_expr, render_expr

SYMS = {n: sp.Symbol(n) for n in ("x", "y", "y_t", "y2")}


def resolve(name):
    if name not in SYMS:
        raise KeyError(name)
    return SYMS[name]


def p(text):
    return parse_expr(text, resolve)


def test_precedence():
    x, y = SYMS["x"], SYMS["y"]
    assert p("1 + 2*x^2") == 1 + 2 * x**2
    assert p("-x^2") == -(x**2)
    assert p("2^3^2") == 2**9
    assert p("(x + y)/2") == (x + y) / 2
    assert p("x**2") == x**2


def test_literals_are_exact():
    assert p("0.25") == sp.Rational(1, 4)
    assert p("1e-3") == sp.Rational(1, 1000)
    assert p(".5") == sp.Rational(1, 2)


def test_functions_and_constants():
    x = SYMS["x"]
    assert p("sin(2*pi*x)") == sp.sin(2 * sp.pi * x)
    assert p("exp(x) + cos(x)") == sp.exp(x) + sp.cos(x)


@pytest.mark.parametrize("text", ["1 +", "x y", "(x", "sin(x", "x^y", "2 ^ 0.5", "@"])
def test_syntax_errors(text):
    with pytest.raises(ExprSyntaxError):
        p(text)


def test_error_position():
    with pytest.raises(ExprSyntaxError) as info:
        p("x + (y * )")
    assert info.value.pos == 9


@pytest.mark.parametrize("text", ["y_t^2/2 - y2*y_t", "sin(2*pi*x)/2 + 1/4", "-(x - y)^3", "x^-2"])
def test_render_round_trip(text):
    e = p(text)
    assert canon(p(render_expr(e)) - e) == 0 or sp.simplify(p(render_expr(e)) - e) == 0
