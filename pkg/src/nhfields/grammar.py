"""Infix expression grammar for model files.

``+ - * / ^`` with the usual precedence (``^`` right-associative and binding
tighter than unary minus), integer exponents, decimal and scientific
literals read as exact rationals, the functions ``sin cos exp`` and the
constant ``pi``.  Identifiers are resolved by a caller-supplied callback.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import sympy as sp

FUNCTIONS = {"sin": sp.sin, "cos": sp.cos, "exp": sp.exp}
CONSTANTS = {"pi": sp.pi}

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z][A-Za-z0-9_]*)|(?P<op>\*\*|[-+*/^(),]))"
)


class ExprSyntaxError(ValueError):
    """Parse or resolution failure at character offset ``pos``."""

    def __init__(self, message: str, pos: int, length: int = 1):
        super().__init__(message)
        self.message = message
        self.pos = pos
        self.length = max(length, 1)


@dataclass
class _Tok:
    kind: str
    text: str
    pos: int


def tokenize(text: str) -> list[_Tok]:
    toks = []
    i = 0
    while i < len(text):
        if text[i:].strip() == "":
            break
        m = _TOKEN.match(text, i)
        if not m or m.end() == i:
            j = i
            while j < len(text) and text[j].isspace():
                j += 1
            raise ExprSyntaxError(f"unexpected character {text[j]!r}", j)
        kind = m.lastgroup
        start = m.start(kind)
        val = m.group(kind)
        if kind == "op" and val == "**":
            val = "^"
        toks.append(_Tok(kind, val, start))
        i = m.end()
    toks.append(_Tok("end", "", len(text)))
    return toks


Resolver = Callable[[str], sp.Basic]

_BINARY = {"+": 10, "-": 10, "*": 20, "/": 20, "^": 40}
_UNARY = 30


class _Parser:
    def __init__(self, text: str, resolve: Resolver):
        self.text = text
        self.toks = tokenize(text)
        self.i = 0
        self.resolve = resolve

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def next(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text: str) -> _Tok:
        t = self.next()
        if t.text != text:
            found = t.text or "end of input"
            raise ExprSyntaxError(f"expected {text!r}, found {found!r}", t.pos, len(t.text))
        return t

    def parse(self) -> sp.Expr:
        if self.peek().kind == "end":
            raise ExprSyntaxError("empty expression", 0)
        e = self.expr(0)
        t = self.peek()
        if t.kind != "end":
            raise ExprSyntaxError(f"unexpected {t.text!r}", t.pos, len(t.text))
        return e

    def expr(self, rbp: int) -> sp.Expr:
        left = self.prefix()
        while True:
            t = self.peek()
            lbp = _BINARY.get(t.text) if t.kind == "op" else None
            if lbp is None or lbp <= rbp:
                break
            self.next()
            if t.text == "^":
                right = self.expr(lbp - 1)
                if not (right.is_Integer):
                    raise ExprSyntaxError("exponent must be an integer constant", t.pos)
                left = left**right
            else:
                right = self.expr(lbp)
                if t.text == "+":
                    left = left + right
                elif t.text == "-":
                    left = left - right
                elif t.text == "*":
                    left = left * right
                else:
                    if right == 0:
                        raise ExprSyntaxError("division by literal zero", t.pos)
                    left = left / right
        return left

    def prefix(self) -> sp.Expr:
        t = self.next()
        if t.kind == "num":
            return sp.Rational(Fraction(t.text))
        if t.kind == "op" and t.text == "-":
            return -self.expr(_UNARY)
        if t.kind == "op" and t.text == "+":
            return self.expr(_UNARY)
        if t.kind == "op" and t.text == "(":
            e = self.expr(0)
            self.expect(")")
            return e
        if t.kind == "name":
            if self.peek().text == "(":
                if t.text not in FUNCTIONS:
                    raise ExprSyntaxError(f"unknown function {t.text!r}", t.pos, len(t.text))
                self.next()
                arg = self.expr(0)
                self.expect(")")
                return FUNCTIONS[t.text](arg)
            if t.text in CONSTANTS:
                return CONSTANTS[t.text]
            try:
                return self.resolve(t.text)
            except ExprSyntaxError:
                raise
            except (NameError, ValueError, KeyError) as exc:
                msg = exc.args[0] if exc.args else str(exc)
                raise ExprSyntaxError(str(msg), t.pos, len(t.text)) from None
        found = t.text or "end of input"
        raise ExprSyntaxError(f"unexpected {found!r}", t.pos, len(t.text))


def parse_expr(text: str, resolve: Resolver) -> sp.Expr:
    """Parse ``text``; identifiers go through ``resolve`` (which may raise)."""
    return _Parser(text, resolve).parse()


def render_expr(e) -> str:
    """Render in the same grammar (``^`` for powers); round-trips through parse_expr."""
    s = sp.sstr(sp.sympify(e), order="lex")
    return s.replace("**", "^")
