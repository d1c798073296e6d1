"""Exterior and Frolicher-Nijenhuis calculus on J^1 in the coordinate basis.

Forms are stored fully expanded: a monomial is a strictly increasing tuple of
coordinate indices of the chart (base, fibre, then first jets), mapped to a
canonical scalar coefficient.  Vector-valued forms store the same monomials
paired with the index of a coordinate vector field.
"""

from __future__ import annotations

import itertools
from collections import defaultdict
from typing import Iterable, Mapping

import sympy as sp

from .expr import JetChart, canon, diff
from .grammar import render_expr


class FormError(ValueError):
    pass


class DegreeError(FormError):
    """Operation applied to a form of the wrong degree."""


class NotVerticalError(FormError):
    """Vector field is not a vertical field on Y with order-0 coefficients."""


class UnsupportedDegreeError(FormError, NotImplementedError):
    """Bracket requested outside the (vector field, vector-valued 1-form) case."""


def _sort_sign(idx: Iterable[int]) -> tuple[int, tuple[int, ...]]:
    """Sign of the sorting permutation and the sorted tuple; sign 0 on repeats."""
    idx = list(idx)
    if len(set(idx)) != len(idx):
        return 0, ()
    sign = 1
    # insertion sort counting transpositions
    for i in range(1, len(idx)):
        j = i
        while j > 0 and idx[j - 1] > idx[j]:
            idx[j - 1], idx[j] = idx[j], idx[j - 1]
            sign = -sign
            j -= 1
    return sign, tuple(idx)


def _collect(acc: Mapping) -> dict:
    out = {}
    for k, v in acc.items():
        c = canon(v)
        if c != 0:
            out[k] = c
    return out


class DiffForm:
    """A differential form of fixed degree with canonical coefficients."""

    __slots__ = ("chart", "degree", "terms")

    def __init__(self, chart: JetChart, degree: int, terms: Mapping | None = None):
        self.chart = chart
        self.degree = degree
        acc = defaultdict(lambda: sp.Integer(0))
        for mono, c in (terms or {}).items():
            if len(mono) != degree:
                raise DegreeError(f"monomial {mono} in a {degree}-form")
            sign, key = _sort_sign(mono)
            if sign:
                acc[key] += sign * sp.sympify(c)
        self.terms = _collect(acc)

    @classmethod
    def _raw(cls, chart, degree, terms):
        obj = cls.__new__(cls)
        obj.chart, obj.degree, obj.terms = chart, degree, terms
        return obj

    @classmethod
    def function(cls, chart: JetChart, f) -> "DiffForm":
        return cls(chart, 0, {(): f})

    @classmethod
    def basis(cls, chart: JetChart, coord) -> "DiffForm":
        i = coord if isinstance(coord, int) else chart.index[chart.symbol(coord)]
        return cls(chart, 1, {(i,): 1})

    def is_zero(self) -> bool:
        return not self.terms

    def coefficient(self, *coords) -> sp.Expr:
        """Coefficient of ``d c1 ^ ... ^ d ck`` (names, symbols or indices), signed."""
        idx = [c if isinstance(c, int) else self.chart.index[self.chart.symbol(c)] for c in coords]
        sign, key = _sort_sign(idx)
        return sign * self.terms.get(key, sp.Integer(0))

    def map_coefficients(self, fn) -> "DiffForm":
        return DiffForm(self.chart, self.degree, {k: fn(v) for k, v in self.terms.items()})

    def __add__(self, other):
        other = _as_form(other, self.chart, self.degree)
        if other.degree != self.degree:
            raise DegreeError("adding forms of different degrees")
        acc = defaultdict(lambda: sp.Integer(0), self.terms)
        for k, v in other.terms.items():
            acc[k] += v
        return DiffForm._raw(self.chart, self.degree, _collect(acc))

    __radd__ = __add__

    def __neg__(self):
        return DiffForm._raw(self.chart, self.degree, {k: -v for k, v in self.terms.items()})

    def __sub__(self, other):
        return self + (-_as_form(other, self.chart, self.degree))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, f):
        if isinstance(f, DiffForm):
            return wedge(self, f)
        f = sp.sympify(f)
        return DiffForm._raw(
            self.chart, self.degree, _collect({k: f * v for k, v in self.terms.items()})
        )

    def __rmul__(self, f):
        return self.__mul__(f)

    def __xor__(self, other):
        return wedge(self, other)

    def __eq__(self, other):
        if isinstance(other, (int, sp.Expr)) and other == 0:
            return self.is_zero()
        return (
            isinstance(other, DiffForm)
            and self.chart == other.chart
            and (self.degree == other.degree or (self.is_zero() and other.is_zero()))
            and self.terms == other.terms
        )

    def __hash__(self):
        return hash((self.degree, frozenset(self.terms.items())))

    def render(self) -> str:
        return render_form(self)

    def __repr__(self):
        return f"DiffForm<{self.degree}>({self.render()})"


def _as_form(x, chart, degree) -> DiffForm:
    if isinstance(x, DiffForm):
        return x
    x = sp.sympify(x)
    if x == 0:
        return DiffForm(chart, degree)
    if degree != 0:
        raise DegreeError("only zero can be added to a form of positive degree")
    return DiffForm.function(chart, x)


def render_form(a: DiffForm) -> str:
    """Canonical text: monomials in basis order, coefficient first."""
    if not a.terms:
        return "0"
    names = [s.name for s in a.chart.coords]
    parts = []
    for mono in sorted(a.terms, key=lambda m: m):
        c = render_expr(a.terms[mono])
        if not mono:
            parts.append(f"({c})")
        else:
            parts.append(f"({c})*" + "^".join("d" + names[i] for i in mono))
    return " + ".join(parts)


class VectorField:
    """Vector field on J^1 with components on the coordinate vector fields."""

    __slots__ = ("chart", "comps")

    def __init__(self, chart: JetChart, comps: Mapping | None = None):
        self.chart = chart
        out = {}
        for k, v in (comps or {}).items():
            i = k if isinstance(k, int) else chart.index[chart.symbol(k)]
            c = canon(sp.sympify(v) + out.get(i, 0))
            if c != 0:
                out[i] = c
            else:
                out.pop(i, None)
        self.comps = out

    def component(self, coord) -> sp.Expr:
        i = coord if isinstance(coord, int) else self.chart.index[self.chart.symbol(coord)]
        return self.comps.get(i, sp.Integer(0))

    def __call__(self, f) -> sp.Expr:
        f = sp.sympify(f)
        coords = self.chart.coords
        return canon(sum((c * diff(f, coords[i]) for i, c in self.comps.items()), sp.Integer(0)))

    def __add__(self, other: "VectorField"):
        comps = dict(self.comps)
        for k, v in other.comps.items():
            comps[k] = comps.get(k, 0) + v
        return VectorField(self.chart, comps)

    def __neg__(self):
        return VectorField(self.chart, {k: -v for k, v in self.comps.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, f):
        f = sp.sympify(f)
        return VectorField(self.chart, {k: f * v for k, v in self.comps.items()})

    __rmul__ = __mul__

    def __eq__(self, other):
        return isinstance(other, VectorField) and self.chart == other.chart and self.comps == other.comps

    def __hash__(self):
        return hash(frozenset(self.comps.items()))

    def is_zero(self) -> bool:
        return not self.comps

    def render(self) -> str:
        if not self.comps:
            return "0"
        names = [s.name for s in self.chart.coords]
        return " + ".join(f"({render_expr(self.comps[i])})*d/d{names[i]}" for i in sorted(self.comps))

    def __repr__(self):
        return f"VectorField({self.render()})"


def lie_bracket(X: VectorField, Y: VectorField) -> VectorField:
    comps = {}
    for j in set(X.comps) | set(Y.comps):
        comps[j] = X(Y.component(j)) - Y(X.component(j))
    return VectorField(X.chart, comps)


class VectorValuedForm:
    """Sum of terms ``c * dI (x) d/dc_j`` of a common form degree."""

    __slots__ = ("chart", "degree", "terms")

    def __init__(self, chart: JetChart, degree: int, terms: Mapping | None = None):
        self.chart = chart
        self.degree = degree
        acc = defaultdict(lambda: sp.Integer(0))
        for (mono, j), c in (terms or {}).items():
            if len(mono) != degree:
                raise DegreeError(f"monomial {mono} in a vector-valued {degree}-form")
            sign, key = _sort_sign(mono)
            if sign:
                acc[(key, j)] += sign * sp.sympify(c)
        self.terms = _collect(acc)

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[DiffForm, VectorField]]) -> "VectorValuedForm":
        pairs = list(pairs)
        if not pairs:
            raise ValueError("empty decomposition; use the constructor for zero")
        chart = pairs[0][0].chart
        degree = pairs[0][0].degree
        acc = defaultdict(lambda: sp.Integer(0))
        for w, X in pairs:
            if w.degree != degree:
                raise DegreeError("decomposable terms of different degrees")
            for mono, c in w.terms.items():
                for j, x in X.comps.items():
                    acc[(mono, j)] += c * x
        return cls(chart, degree, acc)

    @classmethod
    def from_vector_field(cls, X: VectorField) -> "VectorValuedForm":
        return cls(X.chart, 0, {((), j): c for j, c in X.comps.items()})

    def as_vector_field(self) -> VectorField:
        if self.degree != 0:
            raise DegreeError("only degree-0 vector-valued forms are vector fields")
        return VectorField(self.chart, {j: c for (_, j), c in self.terms.items()})

    def component(self, form_coords: tuple, vec_coord) -> sp.Expr:
        ch = self.chart
        idx = [c if isinstance(c, int) else ch.index[ch.symbol(c)] for c in form_coords]
        j = vec_coord if isinstance(vec_coord, int) else ch.index[ch.symbol(vec_coord)]
        sign, key = _sort_sign(idx)
        return sign * self.terms.get((key, j), sp.Integer(0))

    def apply(self, X: VectorField) -> VectorField:
        """``h(X)`` for a vector-valued 1-form."""
        if self.degree != 1:
            raise DegreeError("apply() needs a vector-valued 1-form")
        comps = defaultdict(lambda: sp.Integer(0))
        for ((i,), j), c in self.terms.items():
            x = X.comps.get(i)
            if x is not None:
                comps[j] += c * x
        return VectorField(self.chart, comps)

    def compose(self, other: "VectorValuedForm") -> "VectorValuedForm":
        """``(self o other)(v) = self(other(v))`` for 1-forms."""
        if self.degree != 1 or other.degree != 1:
            raise DegreeError("composition needs vector-valued 1-forms")
        acc = defaultdict(lambda: sp.Integer(0))
        for ((i,), k), c in other.terms.items():
            for ((k2,), j), d in self.terms.items():
                if k2 == k:
                    acc[((i,), j)] += c * d
        return VectorValuedForm(self.chart, 1, acc)

    def __add__(self, other):
        acc = defaultdict(lambda: sp.Integer(0), self.terms)
        for k, v in other.terms.items():
            acc[k] += v
        return VectorValuedForm(self.chart, self.degree, acc)

    def __neg__(self):
        return VectorValuedForm(self.chart, self.degree, {k: -v for k, v in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __eq__(self, other):
        return (
            isinstance(other, VectorValuedForm)
            and self.chart == other.chart
            and self.terms == other.terms
            and (self.degree == other.degree or not self.terms)
        )

    def __hash__(self):
        return hash((self.degree, frozenset(self.terms.items())))

    def is_zero(self) -> bool:
        return not self.terms

    def render(self) -> str:
        if not self.terms:
            return "0"
        names = [s.name for s in self.chart.coords]
        parts = []
        for mono, j in sorted(self.terms):
            form = "^".join("d" + names[i] for i in mono) or "1"
            parts.append(f"({render_expr(self.terms[(mono, j)])})*{form}(x)d/d{names[j]}")
        return " + ".join(parts)

    def __repr__(self):
        return f"VectorValuedForm<{self.degree}>({self.render()})"


# -- exterior algebra -------------------------------------------------------


def wedge(a: DiffForm, b: DiffForm) -> DiffForm:
    """Graded-commutative product; exceeding the chart dimension gives zero."""
    deg = a.degree + b.degree
    acc = defaultdict(lambda: sp.Integer(0))
    if deg <= a.chart.dim:
        for I, c in a.terms.items():
            for J, d in b.terms.items():
                sign, key = _sort_sign(I + J)
                if sign:
                    acc[key] += sign * c * d
    return DiffForm._raw(a.chart, deg, _collect(acc))


def _depends(c: sp.Expr, x: sp.Symbol) -> bool:
    return c.has(x)


def exterior_d(a: DiffForm) -> DiffForm:
    coords = a.chart.coords
    acc = defaultdict(lambda: sp.Integer(0))
    for I, c in a.terms.items():
        for i, x in enumerate(coords):
            if i in I or not _depends(c, x):
                continue
            dc = diff(c, x)
            sign, key = _sort_sign((i,) + I)
            acc[key] += sign * dc
    return DiffForm._raw(a.chart, a.degree + 1, _collect(acc))


def _contract_terms(j: int, x, terms, acc):
    for I, c in terms.items():
        if j in I:
            p = I.index(j)
            acc[I[:p] + I[p + 1:]] += (-1) ** p * x * c


def contract(v: VectorField, a: DiffForm) -> DiffForm:
    """Interior product ``i_v a``."""
    if a.degree == 0:
        raise DegreeError("cannot contract a vector field into a 0-form")
    acc = defaultdict(lambda: sp.Integer(0))
    for j, x in v.comps.items():
        _contract_terms(j, x, a.terms, acc)
    return DiffForm._raw(a.chart, a.degree - 1, _collect(acc))


def lie_derivative(v: VectorField, a: DiffForm) -> DiffForm:
    """Cartan formula ``i_v d a + d i_v a``."""
    out = contract(v, exterior_d(a))
    if a.degree > 0:
        out = out + exterior_d(contract(v, a))
    return out


def insert_vv(K: VectorValuedForm, a: DiffForm) -> DiffForm:
    """``i_K a``: for ``K = w (x) X`` this is ``w ^ i_X a``.

    For a vector-valued 1-form this agrees with
    ``(i_h a)(v_0..v_k) = sum_i (-1)^i a(h(v_i), v_0, .., ^v_i, .., v_k)``.
    """
    if a.degree == 0:
        raise DegreeError("insertion into a 0-form")
    acc = defaultdict(lambda: sp.Integer(0))
    for (I, j), c in K.terms.items():
        inner = defaultdict(lambda: sp.Integer(0))
        _contract_terms(j, c, a.terms, inner)
        for J, d in inner.items():
            sign, key = _sort_sign(I + J)
            if sign:
                acc[key] += sign * d
    return DiffForm._raw(a.chart, a.degree + K.degree - 1, _collect(acc))


def d_vv(K: VectorValuedForm, a: DiffForm) -> DiffForm:
    """``d_K = i_K d - (-1)^(r-1) d i_K``; the Lie derivative when ``r = 0``."""
    r = K.degree
    out = insert_vv(K, exterior_d(a))
    if a.degree > 0:
        inner = insert_vv(K, a)
        if inner.degree >= 0:
            out = out - (-1) ** (r - 1) * exterior_d(inner)
    return out


def d_h(h: "Connection | VectorValuedForm", a: DiffForm) -> DiffForm:
    """``i_h d - d i_h`` (``i_h`` of a function is zero)."""
    K = h.projector() if isinstance(h, Connection) else h
    if K.degree != 1:
        raise DegreeError("d_h needs a vector-valued 1-form")
    return d_vv(K, a)


def fn_bracket(X: VectorField, h: VectorValuedForm) -> VectorValuedForm:
    """``[X, h] = L_X h`` for a vector-valued 1-form ``h``."""
    if isinstance(h, Connection):
        h = h.projector()
    if h.degree != 1:
        raise UnsupportedDegreeError(
            f"bracket only implemented for a vector field and a vector-valued 1-form, got degree {h.degree}"
        )
    coords = X.chart.coords
    acc = defaultdict(lambda: sp.Integer(0))
    dX = {
        (j, k): diff(x, coords[k])
        for j, x in X.comps.items()
        for k in range(len(coords))
        if x.has(coords[k])
    }
    for ((i,), j), c in h.terms.items():
        acc[((i,), j)] += X(c)
        # - h^k_i d_k X^j
        for (jj, k), dx in dX.items():
            if k == j:
                acc[((i,), jj)] -= c * dx
        # + h^j_k d_i X^k   (this term has form index i, from h's form index k)
    for ((k,), j), c in h.terms.items():
        for (kk, i), dx in dX.items():
            if kk == k:
                acc[((i,), j)] += c * dx
    return VectorValuedForm(X.chart, 1, acc)


def form_value(a: DiffForm, vectors: list[VectorField]) -> sp.Expr:
    """``a(v_1, .., v_k)`` with the determinant convention."""
    if len(vectors) != a.degree:
        raise DegreeError("need exactly degree-many vectors")
    total = sp.Integer(0)
    for I, c in a.terms.items():
        M = sp.Matrix([[v.component(i) for v in vectors] for i in I])
        total += c * (M.det() if I else 1)
    return canon(total)


# -- jet-bundle structures ------------------------------------------------


def contact_form(chart: JetChart, a: int) -> DiffForm:
    """``theta^a = dy^a - y^a_nu dx^nu``."""
    terms = {(chart.fibre_index(a),): 1}
    for nu in range(chart.n + 1):
        terms[(nu,)] = -chart.jet(a, nu)
    return DiffForm(chart, 1, terms)


def volume_form(chart: JetChart) -> DiffForm:
    return DiffForm(chart, chart.n + 1, {tuple(range(chart.n + 1)): 1})


def dnx(chart: JetChart, mu: int) -> DiffForm:
    """``d^n x_mu = d/dx^mu _| d^(n+1) x``."""
    return contract(VectorField(chart, {mu: 1}), volume_form(chart))


def vertical_endomorphism(chart: JetChart) -> VectorValuedForm:
    """``S = theta^a ^ d^n x_mu (x) d/dy^a_mu`` summed over a and mu."""
    acc = defaultdict(lambda: sp.Integer(0))
    for a in range(chart.m):
        th = contact_form(chart, a)
        for mu in range(chart.n + 1):
            w = wedge(th, dnx(chart, mu))
            for I, c in w.terms.items():
                acc[(I, chart.jet_index(a, mu))] += c
    return VectorValuedForm(chart, chart.n + 1, acc)


def s_star(beta: DiffForm) -> DiffForm:
    """Adjoint of the vertical endomorphism on one-forms."""
    if beta.degree != 1:
        raise DegreeError("s_star takes a one-form")
    S = vertical_endomorphism(beta.chart)
    acc = defaultdict(lambda: sp.Integer(0))
    for (I, j), c in S.terms.items():
        b = beta.terms.get((j,))
        if b is not None:
            acc[I] += b * c
    return DiffForm(beta.chart, beta.chart.n + 1, acc)


def is_vertical_on_y(X: VectorField) -> bool:
    ch = X.chart
    fib = {ch.fibre_index(a) for a in range(ch.m)}
    jets = set(ch.coords[ch.n + 1 + ch.m:])
    return all(i in fib and not (x.free_symbols & jets) and ch.order(x) == 0 for i, x in X.comps.items())


def prolong(X: VectorField) -> VectorField:
    """First prolongation of a vertical vector field on Y."""
    ch = X.chart
    if not is_vertical_on_y(X):
        raise NotVerticalError(f"not a vertical field on Y: {X.render()}")
    comps = dict(X.comps)
    for a in range(ch.m):
        Xa = X.component(ch.fibre_index(a))
        if Xa == 0:
            continue
        for mu in range(ch.n + 1):
            c = diff(Xa, ch.base[mu])
            for b in range(ch.m):
                c += diff(Xa, ch.fibre[b]) * ch.jet(b, mu)
            comps[ch.jet_index(a, mu)] = c
    return VectorField(ch, comps)


class Connection:
    """Jet-field with horizontal projector
    ``h = dx^mu (x) (d/dx^mu + G^a_mu d/dy^a + G^a_{mu nu} d/dy^a_nu)``.

    ``gamma2[(a, mu, nu)]`` is the coefficient of ``dx^mu (x) d/dy^a_nu``.
    """

    def __init__(self, chart: JetChart, gamma2: Mapping, gamma1: Mapping | None = None,
                 semi_holonomic: bool = True):
        self.chart = chart
        self.semi_holonomic = semi_holonomic
        if semi_holonomic:
            self.gamma1 = {(a, mu): chart.jet(a, mu) for a in range(chart.m) for mu in range(chart.n + 1)}
        else:
            if gamma1 is None:
                raise ValueError("non-semi-holonomic connection needs gamma1")
            self.gamma1 = {k: sp.sympify(v) for k, v in gamma1.items()}
        self.gamma2 = {}
        for a in range(chart.m):
            for mu in range(chart.n + 1):
                for nu in range(chart.n + 1):
                    self.gamma2[(a, mu, nu)] = sp.sympify(gamma2.get((a, mu, nu), 0))
        self._projector = None

    @classmethod
    def symbolic(cls, chart: JetChart, functional: bool = True, prefix: str = "G",
                 semi_holonomic: bool = True) -> "Connection":
        """Connection with every ``G^a_{mu nu}`` an unknown.

        ``functional=True`` makes each unknown an undefined function of all
        order <= 1 coordinates; otherwise a plain symbol.
        """
        g2 = {}
        for (a, mu, nu) in itertools.product(range(chart.m), range(chart.n + 1), range(chart.n + 1)):
            name = gamma_name(chart, a, mu, nu, prefix)
            g2[(a, mu, nu)] = sp.Function(name)(*chart.coords) if functional else sp.Symbol(name)
        g1 = None
        if not semi_holonomic:
            g1 = {}
            for a, mu in itertools.product(range(chart.m), range(chart.n + 1)):
                name = f"{prefix}_{chart.fibre_names[a]}_{chart.base_names[mu]}"
                g1[(a, mu)] = sp.Function(name)(*chart.coords) if functional else sp.Symbol(name)
        return cls(chart, g2, g1, semi_holonomic)

    def unknowns(self) -> list:
        """Non-coordinate atoms appearing in the coefficients (symbols or function calls)."""
        coords = set(self.chart.coords)
        out = []
        for v in list(self.gamma2.values()) + list(self.gamma1.values()):
            for atom in v.atoms(sp.Symbol, sp.core.function.AppliedUndef):
                if isinstance(atom, sp.Symbol) and atom in coords:
                    continue
                if atom not in out:
                    out.append(atom)
        return out

    def horizontal(self, mu: int) -> VectorField:
        """``h(d/dx^mu)``."""
        ch = self.chart
        comps = {mu: 1}
        for a in range(ch.m):
            comps[ch.fibre_index(a)] = self.gamma1[(a, mu)]
            for nu in range(ch.n + 1):
                comps[ch.jet_index(a, nu)] = self.gamma2[(a, mu, nu)]
        return VectorField(ch, comps)

    def projector(self) -> VectorValuedForm:
        if self._projector is None:
            terms = {}
            for mu in range(self.chart.n + 1):
                for j, c in self.horizontal(mu).comps.items():
                    terms[((mu,), j)] = c
            self._projector = VectorValuedForm(self.chart, 1, terms)
        return self._projector

    def substitute(self, bindings: Mapping) -> "Connection":
        rep = {(sp.Symbol(k) if isinstance(k, str) else k): sp.sympify(v) for k, v in bindings.items()}
        g2 = {k: canon(v.xreplace(rep)) for k, v in self.gamma2.items()}
        g1 = None if self.semi_holonomic else {k: canon(v.xreplace(rep)) for k, v in self.gamma1.items()}
        return Connection(self.chart, g2, g1, self.semi_holonomic)

    def __repr__(self):
        return f"Connection({self.projector().render()})"


def gamma_name(chart: JetChart, a: int, mu: int, nu: int, prefix: str = "G") -> str:
    return f"{prefix}_{chart.fibre_names[a]}_{chart.base_names[mu]}{chart.base_names[nu]}"
