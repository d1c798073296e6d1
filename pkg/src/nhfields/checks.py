"""Randomized structural verification suites for the jet-bundle identities.

Each suite draws rational polynomial data from a seeded generator and
requires exact (canonical-form) equality.
"""

from __future__ import annotations

import itertools
import random
import time
from dataclasses import dataclass, field

import sympy as sp

from .expr import JetChart
from .forms import (
    Connection,
    DiffForm,
    VectorField,
    VectorValuedForm,
    contract,
    d_vv,
    fn_bracket,
    insert_vv,
    lie_derivative,
    prolong,
    volume_form,
)
from .variational import Lagrangian, cartan_form

LEMMA_CHARTS = [(0, 1), (1, 1), (1, 2), (2, 1)]

BASE_NAMES = ["t", "x", "z"]


def as_chart(c) -> JetChart:
    return c if isinstance(c, JetChart) else standard_chart(*c)


def standard_chart(n: int, m: int) -> JetChart:
    fibres = ["y"] if m == 1 else [f"y{a + 1}" for a in range(m)]
    return JetChart(BASE_NAMES[: n + 1], fibres)


@dataclass
class CheckResult:
    name: str
    passed: bool
    trials: int
    elapsed: float
    failures: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "trials": self.trials,
            "failures": self.failures,
        }


def random_polynomial(rng: random.Random, symbols, degree: int = 3, terms: int = 4,
                      coeff: int = 5) -> sp.Expr:
    out = sp.Integer(0)
    symbols = list(symbols)
    for _ in range(terms):
        c = sp.Integer(rng.randint(-coeff, coeff))
        mono = sp.Mul(*[rng.choice(symbols) for _ in range(rng.randint(0, degree))])
        out += c * mono
    return sp.expand(out)


def random_lagrangian(chart: JetChart, rng: random.Random, degree: int = 3) -> Lagrangian:
    return Lagrangian(chart, random_polynomial(rng, chart.coords, degree))


def random_vertical_field(chart: JetChart, rng: random.Random, degree: int = 2) -> VectorField:
    ys = chart.base + chart.fibre
    return VectorField(chart, {chart.fibre_index(a): random_polynomial(rng, ys, degree, 3) for a in range(chart.m)})


def random_vector_field(chart: JetChart, rng: random.Random, size: int = 3) -> VectorField:
    return VectorField(chart, {rng.randrange(chart.dim): random_polynomial(rng, chart.coords, 2, 2, 3)
                               for _ in range(size)})


def random_vv_one_form(chart: JetChart, rng: random.Random, size: int = 3) -> VectorValuedForm:
    terms = {}
    for _ in range(size):
        key = ((rng.randrange(chart.dim),), rng.randrange(chart.dim))
        terms[key] = random_polynomial(rng, chart.coords, 2, 2, 3)
    return VectorValuedForm(chart, 1, terms)


def random_form(chart: JetChart, rng: random.Random, degree: int, size: int = 3) -> DiffForm:
    monos = list(itertools.combinations(range(chart.dim), degree))
    terms = {I: random_polynomial(rng, chart.coords, 2, 2, 3) for I in rng.sample(monos, min(size, len(monos)))}
    return DiffForm(chart, degree, terms)


def cartan_identity_residual(L: Lagrangian, h: Connection) -> DiffForm:
    """``i_h Theta_L - n Theta_L - L mu``; zero for semi-holonomic ``h``."""
    Theta = cartan_form(L)
    n = L.chart.n
    return insert_vv(h.projector(), Theta) - n * Theta - L.density * volume_form(L.chart)


def bracket_vertical_defect(X: VectorField, h: Connection) -> dict:
    """Components of ``[X^(1), h]`` on ``dx^mu (x) d/dy^a``."""
    ch = X.chart
    B = fn_bracket(prolong(X), h.projector())
    out = {}
    for mu in range(ch.n + 1):
        for a in range(ch.m):
            c = B.component((mu,), ch.fibre_index(a))
            if c != 0:
                out[(mu, a)] = c
    return out


def _suite(name, trials, body) -> CheckResult:
    t0 = time.perf_counter()
    failures = []
    for k in range(trials):
        msg = body(k)
        if msg:
            failures.append({"trial": k, **msg})
    return CheckResult(name, not failures, trials, time.perf_counter() - t0, failures)


def check_cartan_identity(trials: int = 20, seed: int = 0, charts=LEMMA_CHARTS) -> CheckResult:
    """``i_h Theta_L = n Theta_L + L mu`` for random polynomial Lagrangians of
    degree <= 3 and fully symbolic semi-holonomic ``h``; ``trials`` per chart."""
    rng = random.Random(seed)
    cases = []
    for c in charts:
        ch = as_chart(c)
        h = Connection.symbolic(ch, functional=True)
        cases += [(ch, h)] * trials

    def body(k):
        ch, h = cases[k]
        L = random_lagrangian(ch, rng)
        R = cartan_identity_residual(L, h)
        if not R.is_zero():
            return {"chart": repr(ch), "L": str(L.density), "residual": R.render()}
        return None

    return _suite("cartan_identity", len(cases), body)


def check_prolonged_bracket(trials: int = 20, seed: int = 0, charts=LEMMA_CHARTS) -> CheckResult:
    """``[X^(1), h]`` is vertical over Y and contracts to zero against Theta_L."""
    rng = random.Random(seed)
    charts = [as_chart(c) for c in charts]
    hs = [Connection.symbolic(ch, functional=True) for ch in charts]

    def body(k):
        ch = charts[k % len(charts)]
        h = hs[k % len(charts)]
        X = random_vertical_field(ch, rng)
        defect = bracket_vertical_defect(X, h)
        if defect:
            return {"chart": repr(ch), "X": X.render(), "defect": {str(k_): str(v) for k_, v in defect.items()}}
        L = random_lagrangian(ch, rng)
        R = insert_vv(fn_bracket(prolong(X), h.projector()), cartan_form(L))
        if not R.is_zero():
            return {"chart": repr(ch), "X": X.render(), "L": str(L.density), "residual": R.render()}
        return None

    return _suite("prolonged_bracket", trials, body)


def appendix_identities(X: VectorField, h: VectorValuedForm, a: DiffForm) -> dict:
    """Residuals of the insertion/Lie-derivative/bracket identities (all zero)."""
    B = fn_bracket(X, h)
    if a.degree >= 2:
        r1 = contract(X, insert_vv(h, a)) - insert_vv(h, contract(X, a)) - contract(h.apply(X), a)
    else:
        r1 = contract(X, insert_vv(h, a)) - contract(h.apply(X), a)
    r2 = insert_vv(h, lie_derivative(X, a)) - lie_derivative(X, insert_vv(h, a)) + insert_vv(B, a)
    r3 = lie_derivative(X, d_vv(h, a)) - d_vv(h, lie_derivative(X, a)) - d_vv(B, a)
    return {"insertion": r1, "lie": r2, "derivation": r3}


def check_appendix(trials: int = 200, seed: int = 0, chart: JetChart | None = None) -> CheckResult:
    rng = random.Random(seed)
    ch = chart or standard_chart(1, 1)

    def body(k):
        X = random_vector_field(ch, rng)
        h = random_vv_one_form(ch, rng)
        a = random_form(ch, rng, rng.randint(1, 3))
        res = appendix_identities(X, h, a)
        bad = {k_: v.render() for k_, v in res.items() if not v.is_zero()}
        if bad:
            return {"X": X.render(), "h": h.render(), "alpha": a.render(), **bad}
        return None

    return _suite("appendix_identities", trials, body)
