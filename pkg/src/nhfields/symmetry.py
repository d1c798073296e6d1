"""Vertical symmetries, momentum maps and the Noether / momentum-equation checks."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import sympy as sp

from .expr import EvaluationError, JetChart, canon, evaluate, linear_coefficients
from .forms import (
    Connection,
    DiffForm,
    NotVerticalError,
    VectorField,
    contract,
    d_h,
    is_vertical_on_y,
    lie_bracket,
    lie_derivative,
    prolong,
    volume_form,
)
from .nonholonomic import ConstraintSet, random_rational, solve_constrained_ddw
from .variational import DDWSolveError, Lagrangian, cartan_form, gamma_symbols, solve_ddw

LIFTS = ("prolonged", "verbatim")


class UnsupportedLiftError(ValueError):
    pass


class LiftDisagreement(AssertionError):
    pass


class InfinitesimalAction:
    """Named vertical generators ``xi_i`` on Y."""

    def __init__(self, chart: JetChart, generators: Mapping[str, VectorField],
                 structure_constants: Mapping | None = None):
        self.chart = chart
        self.generators = dict(generators)
        for name, X in self.generators.items():
            if not is_vertical_on_y(X):
                raise NotVerticalError(f"generator {name} is not vertical on Y: {X.render()}")
        self.structure_constants = dict(structure_constants or {})
        for (i, j), coeffs in self.structure_constants.items():
            lhs = lie_bracket(self.generators[i], self.generators[j])
            rhs = VectorField(chart)
            for k, c in coeffs.items():
                rhs = rhs + self.generators[k] * c
            if lhs != rhs:
                raise ValueError(f"[{i}, {j}] does not match the structure constants")

    @property
    def names(self) -> list[str]:
        return list(self.generators)

    def __getitem__(self, name: str) -> VectorField:
        return self.generators[name]

    def combination(self, coefficients: Mapping[str, sp.Expr]) -> VectorField:
        out = VectorField(self.chart)
        for name, c in coefficients.items():
            out = out + self.generators[name] * c
        return out


@dataclass
class MomentumComponent:
    form: DiffForm
    generator: VectorField


@dataclass
class GeneratorInvariance:
    lagrangian: sp.Expr
    cartan: DiffForm
    constraints: list

    @property
    def ok(self) -> bool:
        return self.lagrangian == 0 and self.cartan.is_zero() and all(c == 0 for c in self.constraints)

    def failures(self) -> list[str]:
        out = []
        if self.lagrangian != 0:
            out.append(f"xi(L) = {self.lagrangian}")
        if not self.cartan.is_zero():
            out.append(f"L_xi Theta = {self.cartan.render()}")
        for a, c in enumerate(self.constraints):
            if c != 0:
                out.append(f"xi(phi{a + 1}) = {c} on C")
        return out


@dataclass
class InvarianceVerdict:
    generators: dict

    @property
    def ok(self) -> bool:
        return all(g.ok for g in self.generators.values())

    @property
    def failing(self) -> list[str]:
        return [n for n, g in self.generators.items() if not g.ok]


def check_invariance(L: Lagrangian, C: ConstraintSet | None, act: InfinitesimalAction) -> InvarianceVerdict:
    Theta = cartan_form(L)
    out = {}
    for name, xi in act.generators.items():
        X = prolong(xi)
        res_L = X(L.density)
        res_T = lie_derivative(X, Theta)
        res_C = [C.restrict(X(phi)) for phi in C.functions] if C is not None else []
        out[name] = GeneratorInvariance(res_L, res_T, res_C)
    return InvarianceVerdict(out)


def momentum_component(L: Lagrangian, xi: VectorField) -> MomentumComponent:
    """``J_xi = i_{xi^(1)} Theta_L``."""
    if not is_vertical_on_y(xi):
        raise NotVerticalError(f"momentum needs a vertical field on Y: {xi.render()}")
    return MomentumComponent(contract(prolong(xi), cartan_form(L)), xi)


def g_e_fiber(point: Mapping, act: InfinitesimalAction, C: ConstraintSet) -> list[dict]:
    """Basis of the admissible Lie algebra elements at a point of C.

    Each element maps generator names to rationals, normalized so the first
    nonzero entry is 1.
    """
    names = act.names
    if C.k == 0:
        return [{n: Fraction(int(n == m)) for n in names} for m in names]
    for phi in C.functions:
        if evaluate(phi, _bind(phi, point)) != 0:
            raise ValueError("point is not on C")
    rows = {}
    for alpha, F in enumerate(C.forms()):
        for j, name in enumerate(names):
            G = contract(prolong(act[name]), F) if F.degree else DiffForm(act.chart, 0)
            for mono, c in G.terms.items():
                row = rows.setdefault((alpha, mono), [sp.Integer(0)] * len(names))
                row[j] = sp.Rational(evaluate(c, _bind(c, point)))
    if not rows:
        M = sp.zeros(1, len(names))
    else:
        M = sp.Matrix(list(rows.values()))
    basis = []
    for v in M.nullspace():
        first = next(x for x in v if x != 0)
        v = v / first
        basis.append({n: Fraction(int(x.p), int(x.q)) for n, x in zip(names, v)})
    return basis


def _bind(e, point):
    return {s: point.get(s, 0) for s in sp.sympify(e).free_symbols}


class GESection:
    """A section ``sum c_i xi_i`` of the admissible algebra bundle."""

    def __init__(self, act: InfinitesimalAction, coefficients: Mapping[str, sp.Expr], name: str = "section"):
        self.action = act
        self.name = name
        self.coefficients = {k: canon(sp.sympify(v)) for k, v in coefficients.items()}
        for k in self.coefficients:
            if k not in act.generators:
                raise KeyError(f"unknown generator {k!r} in section {name}")

    @property
    def chart(self) -> JetChart:
        return self.action.chart

    @property
    def factors_through_y(self) -> bool:
        return all(self.chart.order(c) == 0 for c in self.coefficients.values())

    def field_on_y(self) -> VectorField:
        return self.action.combination(self.coefficients)

    def lift(self, kind: str = "prolonged") -> VectorField:
        """The induced field on J^1.

        ``prolonged`` is the first prolongation of ``sum c_i xi_i``;
        ``verbatim`` multiplies the prolonged generators pointwise by ``c_i``.
        """
        if kind == "prolonged":
            if not self.factors_through_y:
                raise UnsupportedLiftError(f"section {self.name} has jet-dependent coefficients")
            return prolong(self.field_on_y())
        if kind == "verbatim":
            out = VectorField(self.chart)
            for n, c in self.coefficients.items():
                out = out + prolong(self.action[n]) * c
            return out
        raise ValueError(f"unknown lift {kind!r}")

    def membership_residuals(self, C: ConstraintSet) -> list[DiffForm]:
        """``i_xi Phi^alpha`` restricted to C; all zero for a valid section."""
        X = self.lift("verbatim")
        return [contract(X, F).map_coefficients(C.restrict) for F in C.forms()]

    def is_valid(self, C: ConstraintSet) -> bool:
        return all(r.is_zero() for r in self.membership_residuals(C))


def nh_momentum(L: Lagrangian, section: GESection, lift: str = "prolonged") -> MomentumComponent:
    """``i_xi~ Theta_L``; both lifts are computed and required to agree."""
    Theta = cartan_form(L)
    J_v = contract(section.lift("verbatim"), Theta)
    if section.factors_through_y:
        J_p = contract(section.lift("prolonged"), Theta)
        if J_p != J_v:
            raise LiftDisagreement(f"lifts contract differently for section {section.name}")
    X = section.lift(lift)
    return MomentumComponent(J_v, X)


@dataclass
class ResidualVerdict:
    """Outcome of a reduction plus exact sampling."""

    ok: bool
    residual: DiffForm
    reduced: dict
    samples: int = 0
    sample_ok: bool = True
    counterexample: dict | None = None
    reduction_conclusive: bool = True
    extra: dict = field(default_factory=dict)


def _random_point(chart: JetChart, rng: random.Random) -> dict:
    return {s: random_rational(rng) for s in chart.coords}


def _reduce_affine(R: DiffForm, unknowns: Sequence, reduce) -> tuple[dict, bool]:
    reduced = {}
    conclusive = True
    for mono, c in R.terms.items():
        try:
            linear_coefficients(c, unknowns)
        except ValueError:
            conclusive = False
        r = reduce(c)
        if r != 0:
            reduced[mono] = r
    return reduced, conclusive


def noether_residual(L: Lagrangian, xi: VectorField, rng: random.Random | None = None,
                     samples: int = 100) -> ResidualVerdict:
    """``d_h J_xi`` modulo the De Donder-Weyl trace equations, plus sampling."""
    rng = rng or random.Random(0)
    ch = L.chart
    J = momentum_component(L, xi).form
    G = gamma_symbols(ch)
    R = d_h(Connection(ch, G), J)
    try:
        sol = solve_ddw(L)
    except DDWSolveError:
        sol = None
    if sol is None:
        reduced = {m: c for m, c in R.terms.items()}
        conclusive = False
        particular = {}
    else:
        reduced, conclusive = _reduce_affine(R, list(G.values()), sol.reduce)
        particular = sol.particular
    ok_sample, bad, done = _sample_connections(R, ch, G, particular, rng, samples, point_fn=_random_point)
    ok = (not reduced) if conclusive else ok_sample
    return ResidualVerdict(ok and ok_sample, R, reduced, done, ok_sample, bad, conclusive)


def _sample_connections(R: DiffForm, ch: JetChart, G: Mapping, solved: Mapping, rng, samples,
                        point_fn) -> tuple[bool, dict | None, int]:
    done = 0
    attempts = 0
    while done < samples and attempts < 10 * samples + 10:
        attempts += 1
        pt = point_fn(ch, rng)
        vals = dict(pt)
        for s in G.values():
            if s not in solved:
                vals[s] = random_rational(rng)
        try:
            for s, e in solved.items():
                vals[s] = evaluate(e, _bind(e, vals))
            for mono, c in R.terms.items():
                v = evaluate(c, _bind(c, vals))
                if v != 0:
                    return False, {str(k): str(x) for k, x in vals.items()}, done + 1
        except EvaluationError:
            continue
        done += 1
    return True, None, done


def momentum_equation_residual(L: Lagrangian, C: ConstraintSet, section: GESection,
                               lift: str = "prolonged", rng: random.Random | None = None,
                               samples: int = 100) -> ResidualVerdict:
    """``d_h J^nh - L_xi~(L mu)`` on C modulo the constrained DDW conditions."""
    rng = rng or random.Random(0)
    ch = L.chart
    X = section.lift(lift)
    J = nh_momentum(L, section, lift).form
    G = gamma_symbols(ch)
    rhs = lie_derivative(X, L.density * volume_form(ch))
    R = d_h(Connection(ch, G), J) - rhs
    sol = solve_constrained_ddw(L, C)
    reduced, conclusive = _reduce_affine(R, list(G.values()), sol.reduce)
    solved = {s: e for s, e in sol.solved.items() if s in set(G.values())}

    def on_c(chart, rng_):
        return C.sample_point(rng_)

    ok_sample, bad, done = _sample_connections(R, ch, G, solved, rng, samples, point_fn=on_c)
    ok = (not reduced) if conclusive else ok_sample
    rhs_text = rhs.render()
    return ResidualVerdict(ok and ok_sample, R, reduced, done, ok_sample, bad, conclusive,
                           {"rhs": rhs_text, "lift": lift})
