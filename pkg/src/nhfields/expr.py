"""Exact scalar calculus over first- and second-order jet coordinates.

Scalar expressions are plain sympy expressions.  A :class:`JetChart` owns the
coordinate symbols of ``Y -> X`` and ``J^1``, plus the symmetric second-jet
symbols used by total derivatives and Euler-Lagrange residuals.
"""

from __future__ import annotations

import itertools
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import sympy as sp

ScalarExpr = sp.Expr

_ANALYTIC = (sp.sin, sp.cos, sp.exp)


class ChartNameError(NameError):
    """A name that is not a coordinate (or bound parameter) of the chart."""


class JetOrderError(ValueError):
    """An expression has higher jet order than an operation allows."""


class EvaluationError(ArithmeticError):
    """Evaluation hit a pole or produced a non-real value."""


class JetChart:
    """Adapted coordinates ``(x^mu, y^a, y^a_mu)`` and second jets ``y^a_{mu nu}``.

    Coordinates of order <= 1 are indexed in a fixed total order: base
    coordinates, then fibre coordinates, then first jets ordered by
    ``(a, mu)``.  Differential-form monomials use the same order.
    """

    def __init__(self, base_names: Sequence[str], fibre_names: Sequence[str]):
        base_names = list(base_names)
        fibre_names = list(fibre_names)
        if len(base_names) < 1:
            raise ValueError("a chart needs at least one base coordinate")
        if len(fibre_names) < 1:
            raise ValueError("a chart needs at least one fibre coordinate")
        self.base_names = base_names
        self.fibre_names = fibre_names
        self.n = len(base_names) - 1
        self.m = len(fibre_names)

        self.jet_names = {
            (a, mu): f"{fibre_names[a]}_{base_names[mu]}"
            for a in range(self.m)
            for mu in range(self.n + 1)
        }
        self.second_jet_names = {}
        for a in range(self.m):
            for mu, nu in itertools.combinations_with_replacement(range(self.n + 1), 2):
                self.second_jet_names[(a, mu, nu)] = (
                    f"{fibre_names[a]}_{base_names[mu]}{base_names[nu]}"
                )

        names = base_names + fibre_names + list(self.jet_names.values())
        all_names = names + list(self.second_jet_names.values())
        if len(set(all_names)) != len(all_names):
            raise ValueError(f"chart names are not distinct: {all_names}")

        self.base = [sp.Symbol(s) for s in base_names]
        self.fibre = [sp.Symbol(s) for s in fibre_names]
        self._jets = {k: sp.Symbol(v) for k, v in self.jet_names.items()}
        self._second = {k: sp.Symbol(v) for k, v in self.second_jet_names.items()}
        # coords in the fixed total order
        self.coords = self.base + self.fibre + [
            self._jets[(a, mu)] for a in range(self.m) for mu in range(self.n + 1)
        ]
        self.index = {s: i for i, s in enumerate(self.coords)}
        self.by_name = {s.name: s for s in self.coords}
        self.by_name.update({s.name: s for s in self._second.values()})
        self.second_jets = frozenset(self._second.values())

    @property
    def dim(self) -> int:
        return len(self.coords)

    @property
    def base_dim(self) -> int:
        return self.n + 1

    @property
    def fibre_dim(self) -> int:
        return self.m

    def jet(self, a: int, mu: int) -> sp.Symbol:
        return self._jets[(a, mu)]

    def second_jet(self, a: int, mu: int, nu: int) -> sp.Symbol:
        mu, nu = sorted((mu, nu))
        return self._second[(a, mu, nu)]

    def base_index(self, mu: int) -> int:
        return mu

    def fibre_index(self, a: int) -> int:
        return self.n + 1 + a

    def jet_index(self, a: int, mu: int) -> int:
        return self.n + 1 + self.m + a * (self.n + 1) + mu

    def symbol(self, name: str | sp.Symbol) -> sp.Symbol:
        """Resolve a coordinate name (any order up to two)."""
        key = name.name if isinstance(name, sp.Symbol) else name
        try:
            return self.by_name[key]
        except KeyError:
            raise ChartNameError(f"unknown coordinate {key!r}") from None

    def order(self, e: ScalarExpr) -> int:
        """Highest jet order of a chart coordinate occurring in ``e``."""
        syms = sp.sympify(e).free_symbols
        if syms & self.second_jets:
            return 2
        if syms & set(self._jets.values()):
            return 1
        return 0

    def __eq__(self, other):
        return (
            isinstance(other, JetChart)
            and self.base_names == other.base_names
            and self.fibre_names == other.fibre_names
        )

    def __hash__(self):
        return hash((tuple(self.base_names), tuple(self.fibre_names)))

    def __repr__(self):
        return f"JetChart(base={self.base_names}, fibres={self.fibre_names})"


def _has_symbolic_denominator(e: sp.Expr) -> bool:
    for p in e.atoms(sp.Pow):
        if p.exp.is_negative and p.base.free_symbols:
            return True
    return False


def canon(e) -> ScalarExpr:
    """Canonical form on the polynomial/rational fragment.

    Polynomials are fully expanded; rational functions become a cancelled
    quotient of expanded polynomials.  Idempotent.
    """
    e = sp.sympify(e)
    if e.is_Atom:
        return e
    if _has_symbolic_denominator(e):
        num, den = sp.fraction(sp.cancel(sp.together(e)))
        num, den = sp.expand(num), sp.expand(den)
        if den == 1:
            return num
        return num / den
    return sp.expand(e)


def _poly_term_diff(term: sp.Expr, x: sp.Symbol):
    factors = []
    hit = False
    for f in sp.Mul.make_args(term):
        b, p = f.as_base_exp()
        if b == x:
            if not p.is_Integer:
                return None
            hit = True
            factors.append(p * b ** (p - 1))
        elif b.is_Symbol or b.is_Number:
            factors.append(f)
        else:
            return None
    return sp.Mul(*factors) if hit else sp.Integer(0)


def diff(e, x: sp.Symbol) -> sp.Expr:
    """Partial derivative, with a fast path for expanded polynomials.

    The result is not canonicalized.
    """
    e = sp.sympify(e)
    if not e.has(x):
        return sp.Integer(0)
    out = []
    for t in sp.Add.make_args(e):
        d = _poly_term_diff(t, x)
        if d is None:
            return sp.diff(e, x)
        out.append(d)
    return sp.Add(*out)


def is_analytic(e: sp.Expr) -> bool:
    """True when ``e`` contains sin/cos/exp, outside the canonical fragment."""
    return any(e.atoms(f) for f in _ANALYTIC)


def partial(e, c, chart: JetChart | None = None) -> ScalarExpr:
    """Exact partial derivative with respect to a chart coordinate."""
    if chart is not None:
        c = chart.symbol(c)
    elif isinstance(c, str):
        c = sp.Symbol(c)
    return canon(diff(sp.sympify(e), c))


def total_derivative(e, mu: int, chart: JetChart) -> ScalarExpr:
    """``D_mu e`` for an expression of order <= 1; the result may hold second jets."""
    e = sp.sympify(e)
    if chart.order(e) > 1:
        raise JetOrderError(f"total derivative of a second-order expression: {e}")
    out = diff(e, chart.base[mu])
    for a in range(chart.m):
        out += chart.jet(a, mu) * diff(e, chart.fibre[a])
        for nu in range(chart.n + 1):
            out += chart.second_jet(a, mu, nu) * diff(e, chart.jet(a, nu))
    return canon(out)


def _as_symbol(k) -> sp.Basic:
    return sp.Symbol(k) if isinstance(k, str) else k


def substitute(e, bindings: Mapping) -> ScalarExpr:
    """Simultaneous substitution followed by canonicalization."""
    rep = {_as_symbol(k): sp.sympify(v) for k, v in bindings.items()}
    return canon(sp.sympify(e).xreplace(rep))


def _exact(v):
    if isinstance(v, (int, Fraction)):
        return sp.Rational(v.numerator, v.denominator) if isinstance(v, Fraction) else sp.Integer(v)
    if isinstance(v, sp.Rational):
        return v
    return None


def evaluate(e, point: Mapping) -> Fraction | float:
    """Evaluate at a point; exact when every binding is rational.

    Raises :class:`EvaluationError` at a pole and :class:`ChartNameError`
    for a symbol left unbound.
    """
    e = sp.sympify(e)
    exact = True
    rep = {}
    for k, v in point.items():
        q = _exact(v)
        if q is None:
            exact = False
            q = sp.Float(float(v), 30)
        rep[_as_symbol(k)] = q
    missing = e.free_symbols - set(rep)
    if missing:
        names = ", ".join(sorted(s.name for s in missing))
        raise ChartNameError(f"unbound symbol(s): {names}")
    try:
        val = e.xreplace(rep)
    except ZeroDivisionError as exc:  # pragma: no cover - sympy returns zoo instead
        raise EvaluationError(str(exc)) from None
    if val.has(sp.zoo, sp.nan, sp.oo, -sp.oo):
        raise EvaluationError(f"division by zero evaluating {e}")
    if exact and val.is_Rational:
        return Fraction(int(val.p), int(val.q))
    val = val.evalf(30)
    if not val.is_real:
        if val.is_number and sp.im(val) == 0:
            val = sp.re(val)
        else:
            raise EvaluationError(f"non-real value {val}")
    return float(val)


def is_zero(e, rng=None, trials: int = 32, sampler=None) -> bool:
    """Decide ``e == 0``.

    Structural on the canonical fragment.  Expressions with sin/cos/exp fall
    back to evaluation at ``trials`` random rational points (exact where
    possible, tolerance 1e-12 otherwise).
    """
    c = canon(e)
    if c == 0:
        return True
    if not is_analytic(c):
        return False
    import random

    rng = rng or random.Random(0)
    syms = sorted(c.free_symbols, key=lambda s: s.name)
    done = 0
    attempts = 0
    while done < trials and attempts < 20 * trials:
        attempts += 1
        pt = {s: Fraction(rng.randint(-40, 40), rng.randint(1, 9)) for s in syms}
        try:
            v = evaluate(c, pt)
        except EvaluationError:
            continue
        done += 1
        if abs(v) > 1e-12:
            return False
    return True


def free_coordinates(e, chart: JetChart) -> list[sp.Symbol]:
    return [s for s in chart.coords if s in sp.sympify(e).free_symbols]


def linear_coefficients(e, unknowns: Iterable[sp.Basic]) -> tuple[dict, ScalarExpr]:
    """Split an expression affine in ``unknowns`` into coefficients and rest.

    Raises ``ValueError`` if ``e`` is not affine in them.
    """
    unknowns = list(unknowns)
    e = canon(e)
    coeffs = {}
    zero = {u: 0 for u in unknowns}
    for u in unknowns:
        c = canon(diff(e, u))
        if any(c.has(v) for v in unknowns):
            raise ValueError(f"expression is not affine in {u}")
        if c != 0:
            coeffs[u] = c
    rest = canon(e.xreplace(zero))
    return coeffs, rest


def _pivot_key(e: sp.Expr):
    return (0 if e.is_number else 1, sp.count_ops(e))


def solve_linear(equations: Sequence, unknowns: Sequence) -> tuple[dict, list]:
    """Exact Gauss-Jordan elimination on ``equations == 0``, affine in ``unknowns``.

    Unknowns left without a pivot are set to zero.  Returns the solution and
    the canonical leftovers of rows without a pivot (all zero iff the system
    is consistent).  Pivots are chosen among structurally nonzero entries,
    constants first.
    """
    unknowns = list(unknowns)
    rows = []
    for eq in equations:
        coeffs, rest = linear_coefficients(eq, unknowns)
        rows.append([coeffs.get(u, sp.Integer(0)) for u in unknowns] + [-rest])
    used = set()
    pivots = {}
    for col in range(len(unknowns)):
        cands = [r for r in range(len(rows)) if r not in used and rows[r][col] != 0]
        if not cands:
            continue
        p = min(cands, key=lambda r: _pivot_key(rows[r][col]))
        used.add(p)
        pivots[col] = p
        piv = rows[p][col]
        rows[p] = [canon(v / piv) for v in rows[p]]
        for r in range(len(rows)):
            if r != p and rows[r][col] != 0:
                f = rows[r][col]
                rows[r] = [canon(a - f * b) for a, b in zip(rows[r], rows[p])]
    solution = {u: sp.Integer(0) for u in unknowns}
    for col, p in pivots.items():
        solution[unknowns[col]] = rows[p][-1]
    leftover = [rows[r][-1] for r in range(len(rows)) if r not in used]
    return solution, [c for c in leftover if c != 0]
