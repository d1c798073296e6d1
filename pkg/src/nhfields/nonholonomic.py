"""Nonholonomic constraints: constraint forms, the ideal they generate,
constrained field equations and elimination of the multipliers."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import sympy as sp

from .expr import JetChart, canon, evaluate, linear_coefficients, solve_linear, total_derivative
from .forms import Connection, DiffForm, exterior_d, s_star, wedge
from .variational import (
    Lagrangian,
    PreconditionError,
    ddw_residual,
    euler_lagrange,
    gamma_symbols,
    trace_equations,
)


class ConstraintError(ValueError):
    pass


class SubbundleViolation(ConstraintError):
    """The constraint forms are linearly dependent at a point."""


class EliminationError(ArithmeticError):
    pass


def random_rational(rng: random.Random, lo: int = -5, hi: int = 5, den: int = 7) -> Fraction:
    return Fraction(rng.randint(lo * den, hi * den), rng.randint(1, den))


class ConstraintSet:
    """``phi^alpha = 0`` with designated leading jets, affine in those jets."""

    def __init__(self, chart: JetChart, functions: Sequence, leading: Sequence | None = None,
                 seed: int = 0):
        self.chart = chart
        self.functions = [canon(f) for f in functions]
        for f in self.functions:
            if chart.order(f) > 1:
                raise ConstraintError(f"constraint has second jets: {f}")
        self._seed = seed
        self._leading = None if leading is None else self._check_leading(leading)
        self._restriction = None
        self._forms = None

    def _check_leading(self, leading):
        chart = self.chart
        out = [chart.symbol(s) for s in leading]
        if len(out) != len(self.functions):
            raise ConstraintError("need one leading jet per constraint")
        jets = set(chart.coords[chart.n + 1 + chart.m:])
        for s in out:
            if s not in jets:
                raise ConstraintError(f"leading coordinate {s} is not a first jet")
        return out

    @property
    def leading(self) -> list[sp.Symbol]:
        if self._leading is None:
            self._leading = select_leading(self.chart, self.functions, self._seed)
        return self._leading

    @property
    def k(self) -> int:
        return len(self.functions)

    def jacobian(self) -> sp.Matrix:
        return sp.Matrix(self.k, self.k, lambda i, j: canon(sp.diff(self.functions[i], self.leading[j])))

    def restriction(self) -> dict:
        """Leading jets solved from ``phi = 0``."""
        if self._restriction is None:
            if self.k == 0:
                self._restriction = {}
            else:
                for f in self.functions:
                    try:
                        linear_coefficients(f, self.leading)
                    except ValueError:
                        raise ConstraintError(f"constraint not affine in leading jets: {f}") from None
                if canon(self.jacobian().det(method="berkowitz")) == 0:
                    raise ConstraintError("Jacobian of the constraints in the leading jets is singular")
                sol, leftover = solve_linear(self.functions, self.leading)
                self._restriction = sol
        return self._restriction

    def restrict(self, e) -> sp.Expr:
        return canon(sp.sympify(e).xreplace(self.restriction()))

    def sample_point(self, rng: random.Random, attempts: int = 50) -> dict:
        """Random rational point on C (exact)."""
        ch = self.chart
        lead = set(self.leading)
        rest = self.restriction()
        for _ in range(attempts):
            pt = {s: random_rational(rng) for s in ch.coords if s not in lead}
            try:
                for s in self.leading:
                    pt[s] = evaluate(rest[s], pt)
                J = self.jacobian()
                if self.k and evaluate(canon(J.det(method="berkowitz")), _complete(J.det(), pt)) == 0:
                    continue
            except ArithmeticError:
                continue
            return {s: pt[s] for s in ch.coords}
        raise ConstraintError("could not sample a regular point on C")

    def forms(self) -> list[DiffForm]:
        if self._forms is None:
            self._forms = [s_star(exterior_d(DiffForm.function(self.chart, f))) for f in self.functions]
        return self._forms


def _complete(e, pt):
    e = sp.sympify(e)
    return {s: pt.get(s, 0) for s in e.free_symbols}


def select_leading(chart: JetChart, functions: Sequence, seed: int = 0) -> list[sp.Symbol]:
    """Greedy pivoting on the jet Jacobian at a random rational point.

    Constant pivots are preferred, then the largest magnitude; ties go to
    the later coordinate in chart order.
    """
    jets = chart.coords[chart.n + 1 + chart.m:]
    rng = random.Random(seed)
    pt = {s: random_rational(rng) for s in chart.coords}
    rows = [[canon(sp.diff(f, j)) for j in jets] for f in functions]
    vals = []
    for row in rows:
        vals.append([Fraction(evaluate(e, _complete(e, pt))) if e != 0 else Fraction(0) for e in row])
    chosen = []
    M = [list(v) for v in vals]
    for r in range(len(functions)):
        best = None
        for c in range(len(jets)):
            if c in chosen or M[r][c] == 0:
                continue
            key = (rows[r][c].is_number, abs(M[r][c]), c)
            if best is None or key > best[0]:
                best = (key, c)
        if best is None:
            raise SubbundleViolation(f"constraint {functions[r]} has no admissible leading jet")
        c = best[1]
        chosen.append(c)
        for r2 in range(r + 1, len(functions)):
            f = M[r2][c] / M[r][c]
            M[r2] = [a - f * b for a, b in zip(M[r2], M[r])]
    return [jets[c] for c in chosen]


def linear_constraints(chart: JetChart, A: Sequence[Sequence], B: Sequence[Sequence],
                       leading: Sequence | None = None) -> ConstraintSet:
    """``phi^alpha_mu = A^alpha_a y^a_mu + B^alpha_mu``, one function per (alpha, mu)."""
    funcs = []
    for alpha, row in enumerate(A):
        for e in list(row) + list(B[alpha]):
            if chart.order(sp.sympify(e)) > 0:
                raise ConstraintError("linear constraint coefficients must not depend on jets")
        for mu in range(chart.n + 1):
            f = sum((sp.sympify(row[a]) * chart.jet(a, mu) for a in range(chart.m)), sp.Integer(0))
            funcs.append(f + sp.sympify(B[alpha][mu]))
    return ConstraintSet(chart, funcs, leading)


def constraint_forms(C: ConstraintSet, test_points: Sequence[Mapping] | None = None,
                     rng: random.Random | None = None, samples: int = 5) -> list[DiffForm]:
    """``Phi^alpha = S*(d phi^alpha)``, checked for pointwise independence."""
    if C.k == 0:
        return []
    forms = C.forms()
    for a, F in enumerate(forms):
        if F.is_zero():
            raise SubbundleViolation(f"constraint form of {C.functions[a]} vanishes identically")
    if test_points is None:
        rng = rng or random.Random(0)
        test_points = [C.sample_point(rng) for _ in range(samples)]
    for pt in test_points:
        r = forms_rank(forms, pt)
        if r < C.k:
            raise SubbundleViolation(f"constraint forms dependent at {_fmt_point(pt)} (rank {r} < {C.k})")
    return forms


def forms_rank(forms: Sequence[DiffForm], point: Mapping) -> int:
    monos = sorted({m for F in forms for m in F.terms})
    M = sp.Matrix(
        [[sp.Rational(evaluate(F.terms.get(m, 0), _complete(F.terms.get(m, 0), point))) for m in monos] for F in forms]
    )
    return M.rank()


def _fmt_point(pt):
    return "{" + ", ".join(f"{k}={v}" for k, v in pt.items()) + "}"


@dataclass
class Decomposition:
    """``eta = sum lambda_k B_k + remainder``."""

    ok: bool
    coefficients: dict
    remainder: DiffForm


def _decompose(eta: DiffForm, basis: dict) -> Decomposition:
    lam = {k: sp.Dummy(f"lam{i}") for i, k in enumerate(basis)}
    monos = sorted(set(eta.terms) | {m for B in basis.values() for m in B.terms})
    eqs = []
    for m in monos:
        e = eta.terms.get(m, sp.Integer(0))
        for k, B in basis.items():
            e -= lam[k] * B.terms.get(m, 0)
        eqs.append(e)
    sol, _ = solve_linear(eqs, list(lam.values()))
    coeffs = {k: sol[lam[k]] for k in basis}
    rem = eta
    for k, B in basis.items():
        if coeffs[k] != 0:
            rem = rem - coeffs[k] * B
    return Decomposition(rem.is_zero(), coeffs, rem)


def ideal_decompose(eta: DiffForm, forms: Sequence[DiffForm]) -> Decomposition:
    """Match a degree-(n+2) form against ``lambda_{alpha mu} dx^mu ^ Phi^alpha``.

    Coefficients are keyed by ``(alpha, mu)``; combinations that vanish
    identically get coefficient zero.
    """
    if not forms:
        return Decomposition(eta.is_zero(), {}, eta)
    ch = eta.chart
    basis = {}
    for alpha, F in enumerate(forms):
        for mu in range(ch.n + 1):
            basis[(alpha, mu)] = wedge(DiffForm.basis(ch, mu), F)
    return _decompose(eta, basis)


def span_decompose(eta: DiffForm, forms: Sequence[DiffForm]) -> Decomposition:
    """Match a degree-(n+1) form against the span of the ``Phi^alpha``."""
    if not forms:
        return Decomposition(eta.is_zero(), {}, eta)
    return _decompose(eta, dict(enumerate(forms)))


def multiplier_symbols(C: ConstraintSet) -> dict:
    ch = C.chart
    return {
        (alpha, mu): sp.Symbol(f"lam{alpha + 1}_{ch.base_names[mu]}")
        for alpha in range(C.k)
        for mu in range(ch.n + 1)
    }


@dataclass
class ConstrainedEquations:
    residuals: list
    constraints: list
    multipliers: dict


def constraint_force(C: ConstraintSet, lam: Mapping) -> list[sp.Expr]:
    """``f_a = lambda_{alpha mu} d phi^alpha / d y^a_mu``."""
    ch = C.chart
    out = []
    for a in range(ch.m):
        f = sp.Integer(0)
        for (alpha, mu), l in lam.items():
            f += l * sp.diff(C.functions[alpha], ch.jet(a, mu))
        out.append(canon(f))
    return out


def constrained_el(L: Lagrangian, C: ConstraintSet) -> ConstrainedEquations:
    lam = multiplier_symbols(C)
    EL = euler_lagrange(L)
    force = constraint_force(C, lam)
    res = [canon(r - f) for r, f in zip(EL, force)]
    return ConstrainedEquations(res, list(C.functions), lam)


@dataclass
class MultiplierSolution:
    multipliers: dict
    force: list
    accelerations: dict
    admissibility: sp.Matrix
    admissibility_det: sp.Expr


def eliminate_multipliers(L: Lagrangian, C: ConstraintSet, time: int = 0) -> MultiplierSolution:
    """Closed-form multipliers and accelerations.

    Spatial multipliers are fixed to zero; the time multipliers solve the
    linear system from ``D_t phi^alpha = 0`` after inserting the constrained
    accelerations.
    """
    ch = L.chart
    EL = euler_lagrange(L)
    acc = [ch.second_jet(a, time, time) for a in range(ch.m)]
    W = sp.Matrix(ch.m, ch.m, lambda a, b: canon(sp.diff(EL[a], acc[b])))
    Wdet = canon(W.det(method="berkowitz"))
    if Wdet == 0:
        raise EliminationError("time block of the Hessian is singular")
    lam_all = multiplier_symbols(C)
    lam_t = {k: v for k, v in lam_all.items() if k[1] == time}
    dphi = sp.Matrix(C.k, ch.m, lambda alpha, a: canon(sp.diff(C.functions[alpha], ch.jet(a, time))))
    if C.k:
        A = (dphi * W.inv(method="LU") * dphi.T).applyfunc(canon)
        Adet = canon(A.det(method="berkowitz"))
        if Adet == 0:
            bad = [alpha + 1 for alpha in range(C.k) if all(A[alpha, j] == 0 for j in range(C.k))]
            names = ", ".join(f"phi{b}" for b in (bad or range(1, C.k + 1)))
            raise EliminationError(f"admissibility matrix singular in block {names}")
    else:
        A = sp.zeros(0, 0)
        Adet = sp.Integer(1)
    force = constraint_force(C, lam_t)
    eqs = [canon(r - f) for r, f in zip(EL, force)]
    eqs += [total_derivative(phi, time, ch) for phi in C.functions]
    unknowns = acc + list(lam_t.values())
    sol, leftover = solve_linear(eqs, unknowns)
    if leftover:  # pragma: no cover - square nonsingular system
        raise EliminationError(f"inconsistent elimination: {leftover}")
    mult = {k: (sol[v] if k in lam_t else sp.Integer(0)) for k, v in lam_all.items()}
    accel = {a: sol[acc[a]] for a in range(ch.m)}
    force_val = [canon(f.xreplace({v: sol[v] for v in lam_t.values()})) for f in force]
    return MultiplierSolution(mult, force_val, accel, A, Adet)


@dataclass
class ConstrainedDDWSolution:
    """Semi-holonomic connections solving the constrained DDW conditions on C.

    ``solved`` expresses the pure time components ``G^a_tt``, the time
    multipliers and the tangency-fixed components through the remaining
    (free) Gamma symbols and the coordinates of C.
    """

    chart: JetChart
    constraints: ConstraintSet
    unknowns: dict
    multipliers: dict
    solved: dict
    trace: list

    @property
    def free_symbols(self) -> list:
        return [s for s in self.unknowns.values() if s not in self.solved]

    def reduce(self, e) -> sp.Expr:
        e = sp.sympify(e).xreplace(self.solved)
        return self.constraints.restrict(e)

    def connection(self, free_values: Mapping | None = None) -> Connection:
        vals = {s: sp.sympify(v) for s, v in (free_values or {}).items()}
        g2 = {}
        for k, s in self.unknowns.items():
            if s in self.solved:
                g2[k] = canon(self.solved[s].xreplace(vals))
            else:
                g2[k] = vals.get(s, s)
        return Connection(self.chart, g2)


def tangency_equations(h: Connection, C: ConstraintSet) -> dict:
    """``h(d/dx^mu)(phi^alpha)`` keyed by ``(alpha, mu)``."""
    out = {}
    for mu in range(C.chart.n + 1):
        H = h.horizontal(mu)
        for alpha, phi in enumerate(C.functions):
            out[(alpha, mu)] = H(phi)
    return out


def solve_constrained_ddw(L: Lagrangian, C: ConstraintSet, time: int = 0) -> ConstrainedDDWSolution:
    ch = L.chart
    G = gamma_symbols(ch)
    h = Connection(ch, G)
    trace = trace_equations(h, L)
    lam_all = multiplier_symbols(C)
    lam_t = {k: v for k, v in lam_all.items() if k[1] == time}
    force = constraint_force(C, lam_t)
    eqs = [C.restrict(t - f) for t, f in zip(trace, force)]
    tang = tangency_equations(h, C)
    eqs += [C.restrict(e) for e in tang.values()]
    unknowns = [G[(a, time, time)] for a in range(ch.m)] + list(lam_t.values())
    for alpha, s in enumerate(C.leading):
        a, nu = _jet_position(ch, s)
        for mu in range(ch.n + 1):
            g = G[(a, mu, nu)]
            if g not in unknowns:
                unknowns.append(g)
    sol, leftover = solve_linear(eqs, unknowns)
    if leftover:
        raise EliminationError(f"constrained DDW conditions inconsistent: {leftover}")
    return ConstrainedDDWSolution(ch, C, G, lam_all, sol, trace)


def _jet_position(ch: JetChart, s: sp.Symbol) -> tuple[int, int]:
    for (a, mu), name in ch.jet_names.items():
        if name == s.name:
            return a, mu
    raise ConstraintError(f"{s} is not a first jet")


@dataclass
class ConstrainedDDWVerdict:
    ideal_ok: bool
    tangency_ok: bool
    multipliers: dict
    remainder: DiffForm
    tangency: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.ideal_ok and self.tangency_ok


def constrained_ddw_check(h: Connection, L: Lagrangian, C: ConstraintSet) -> ConstrainedDDWVerdict:
    """Ideal membership of the DDW residual and tangency of ``h`` to C, on C.

    The recovered coefficients satisfy ``residual = lambda dx^mu ^ Phi^alpha``;
    with the conventions here they are the negatives of the multipliers of
    the constrained Euler-Lagrange equations.
    """
    if not h.semi_holonomic:
        raise PreconditionError("constrained DDW check needs a semi-holonomic connection")
    R = ddw_residual(h, L).map_coefficients(C.restrict)
    dec = ideal_decompose(R, C.forms())
    tang = {k: C.restrict(v) for k, v in tangency_equations(h, C).items()}
    bad = {k: v for k, v in tang.items() if v != 0}
    return ConstrainedDDWVerdict(dec.ok, not bad, dec.coefficients, dec.remainder, bad)
