import itertools
import random

import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from nhfields.checks import (
    random_form,
    random_lagrangian,
    random_polynomial,
    random_vector_field,
    random_vertical_field,
    random_vv_one_form,
    standard_chart,
)
from nhfields.expr import canon
from nhfields.forms import (
    Connection,
    DegreeError,
    DiffForm,
    NotVerticalError,
    UnsupportedDegreeError,
    VectorField,
    VectorValuedForm,
    contact_form,
    contract,
    d_h,
    d_vv,
    dnx,
    exterior_d,
    fn_bracket,
    form_value,
    insert_vv,
    lie_derivative,
    prolong,
    s_star,
    vertical_endomorphism,
    volume_form,
    wedge,
)
from nhfields.variational import Lagrangian, cartan_form

from conftest import syms, wave_density


def dd(ch, name):
    return DiffForm.basis(ch, name)


def vf(ch, **comps):
    return VectorField(ch, comps)


def test_wedge_examples(wave_chart):
    ch = wave_chart
    dt, dx = dd(ch, "t"), dd(ch, "x")
    assert wedge(dt, dx).coefficient("t", "x") == 1
    assert wedge(dx, dt) == -wedge(dt, dx)
    th = contact_form(ch, 0)
    assert wedge(th, th).is_zero()
    y = ch.symbol("y")
    assert wedge(y * dt, dx) == y * wedge(dt, dx)


def test_exterior_d_examples(wave_chart):
    ch = wave_chart
    y = ch.symbol("y")
    dt, dx, dy = dd(ch, "t"), dd(ch, "x"), dd(ch, "y")
    assert exterior_d(y * dt) == wedge(dy, dt)
    assert exterior_d(wedge(dt, dx)).is_zero()
    dth = exterior_d(contact_form(ch, 0))
    expected = -wedge(dd(ch, "y_t"), dt) - wedge(dd(ch, "y_x"), dx)
    assert dth == expected


def test_exterior_d_theta_pointwise(wave_chart, rng):
    ch = wave_chart
    dth = exterior_d(contact_form(ch, 0))
    for _ in range(10):
        u = VectorField(ch, {i: rng.randint(-3, 3) for i in range(ch.dim)})
        v = VectorField(ch, {i: rng.randint(-3, 3) for i in range(ch.dim)})
        ut, ux, uyt, uyx = (u.component(c) for c in ("t", "x", "y_t", "y_x"))
        vt, vx, vyt, vyx = (v.component(c) for c in ("t", "x", "y_t", "y_x"))
        direct = -(uyt * vt - vyt * ut) - (uyx * vx - vyx * ux)
        assert form_value(dth, [u, v]) == direct


def test_contract_examples(wave_chart):
    ch = wave_chart
    dt, dx, dy = dd(ch, "t"), dd(ch, "x"), dd(ch, "y")
    assert contract(vf(ch, y=1), wedge(dy, dx)) == dx
    assert contract(vf(ch, t=1), contact_form(ch, 0)) == DiffForm.function(ch, -ch.symbol("y_t"))
    vol = volume_form(ch)
    assert contract(vf(ch, t=1), vol) == dx
    assert contract(vf(ch, x=1), vol) == -dt
    assert dnx(ch, 0) == dx and dnx(ch, 1) == -dt
    with pytest.raises(DegreeError):
        contract(vf(ch, t=1), DiffForm.function(ch, 1))


def test_lie_derivative_examples(wave_chart):
    ch = wave_chart
    y = ch.symbol("y")
    dt, dx, dy = dd(ch, "t"), dd(ch, "x"), dd(ch, "y")
    assert lie_derivative(vf(ch, y=1), wedge(dy, dx)).is_zero()
    assert lie_derivative(vf(ch, y=1), y * wedge(dt, dx)) == wedge(dt, dx)
    L = Lagrangian(ch, wave_density(ch))
    assert lie_derivative(prolong(vf(ch, y=1)), cartan_form(L)).is_zero()


def test_insert_vv_examples(wave_chart):
    ch = wave_chart
    h = Connection.symbolic(ch)
    vol = volume_form(ch)
    assert insert_vv(h.projector(), vol) == 2 * vol
    assert insert_vv(h.projector(), dd(ch, "t")) == dd(ch, "t")
    flat = Connection(ch, {})
    yt, yx = syms(ch, "y_t", "y_x")
    assert insert_vv(flat.projector(), dd(ch, "y")) == yt * dd(ch, "t") + yx * dd(ch, "x")
    with pytest.raises(DegreeError):
        insert_vv(h.projector(), DiffForm.function(ch, 1))


def _basis_vectors(ch):
    return [VectorField(ch, {i: 1}) for i in range(ch.dim)]


@pytest.mark.parametrize("n,m", [(0, 1), (1, 1), (0, 2)])
def test_insert_vv_matches_pointwise_definition(n, m):
    """``(i_h a)(v_0..v_k) = sum_i (-1)^i a(h(v_i), v_0, .., ^v_i, .., v_k)`` on all basis tuples."""
    ch = standard_chart(n, m)
    r = random.Random(7 + n + m)
    basis = _basis_vectors(ch)
    for deg in range(1, min(ch.dim, 3) + 1):
        h = random_vv_one_form(ch, r, size=4)
        a = random_form(ch, r, deg, size=4)
        ih = insert_vv(h, a)
        for tup in itertools.combinations(range(ch.dim), deg):
            vs = [basis[i] for i in tup]
            expected = sp.Integer(0)
            for i, v in enumerate(vs):
                rest = vs[:i] + vs[i + 1:]
                expected += (-1) ** i * form_value(a, [h.apply(v)] + rest)
            assert canon(form_value(ih, vs) - expected) == 0


def test_d_h_examples(wave_chart):
    ch = wave_chart
    h = Connection.symbolic(ch)
    yt, yx = syms(ch, "y_t", "y_x")
    y = DiffForm.function(ch, ch.symbol("y"))
    assert d_h(h, y) == yt * dd(ch, "t") + yx * dd(ch, "x")
    assert d_h(h, DiffForm.function(ch, 3)).is_zero()
    assert d_h(h, volume_form(ch)).is_zero()


def test_fn_bracket_examples(wave_chart, rng):
    ch = wave_chart
    flat = Connection(ch, {(0, 0, 0): 2, (0, 1, 1): -1})
    assert fn_bracket(vf(ch, y=1), flat.projector()).is_zero()
    h = Connection.symbolic(ch)
    X = prolong(vf(ch, y=ch.symbol("y")))
    B = fn_bracket(X, h.projector())
    for mu in range(2):
        assert B.component((mu,), "y") == 0
    for _ in range(5):
        a = random_form(ch, rng, rng.randint(1, 3))
        lhs = lie_derivative(X, d_h(h, a)) - d_h(h, lie_derivative(X, a))
        assert lhs == d_vv(B, a)
    with pytest.raises(UnsupportedDegreeError):
        fn_bracket(vf(ch, y=1), vertical_endomorphism(ch))


def test_vertical_endomorphism_examples():
    ch = standard_chart(1, 1)
    th = contact_form(ch, 0)
    dt, dx = dd(ch, "t"), dd(ch, "x")
    expected = VectorValuedForm.from_pairs([(wedge(th, dx), vf(ch, y_t=1)), (-wedge(th, dt), vf(ch, y_x=1))])
    assert vertical_endomorphism(ch) == expected
    mech = standard_chart(0, 1)
    S0 = vertical_endomorphism(mech)
    assert S0 == VectorValuedForm.from_pairs([(contact_form(mech, 0), vf(mech, y_t=1))])
    for mu in range(2):
        assert insert_vv(vertical_endomorphism(ch), dd(ch, ch.base_names[mu])).is_zero()


def test_s_star_examples(field3_chart):
    ch = standard_chart(1, 1)
    th = contact_form(ch, 0)
    assert s_star(dd(ch, "y_t")) == wedge(th, dd(ch, "x"))
    assert s_star(dd(ch, "y")).is_zero()
    c3 = field3_chart
    y2, y1t, y3t = syms(c3, "y2", "y1_t", "y3_t")
    phi = exterior_d(DiffForm.function(c3, y3t - y2 * y1t))
    dx = dd(c3, "x")
    expected = -y2 * wedge(contact_form(c3, 0), dx) + wedge(contact_form(c3, 2), dx)
    assert s_star(phi) == expected
    with pytest.raises(DegreeError):
        s_star(volume_form(ch))


def test_prolong_examples(field3_chart):
    ch = standard_chart(1, 1)
    y, yt, yx = syms(ch, "y", "y_t", "y_x")
    assert prolong(vf(ch, y=1)) == vf(ch, y=1)
    assert prolong(vf(ch, y=y)) == vf(ch, y=y, y_t=yt, y_x=yx)
    c3 = field3_chart
    y2, y2t, y2x = syms(c3, "y2", "y2_t", "y2_x")
    assert prolong(vf(c3, y3=y2)) == vf(c3, y3=y2, y3_t=y2t, y3_x=y2x)
    with pytest.raises(NotVerticalError):
        prolong(vf(ch, t=1))
    with pytest.raises(NotVerticalError):
        prolong(vf(ch, y=yt))


def test_connection_projector_properties(rng):
    for n, m in [(0, 1), (1, 1), (1, 2), (2, 1)]:
        ch = standard_chart(n, m)
        h = Connection.symbolic(ch)
        P = h.projector()
        assert P.compose(P) == P
        for a in range(m):
            assert insert_vv(P, contact_form(ch, a)).is_zero()


CHART = standard_chart(1, 1)
seeds = st.integers(min_value=0, max_value=10**6)


def test_d_squared_zero_bulk():
    r = random.Random(99)
    for k in range(200):
        ch = standard_chart(*[(0, 1), (1, 1), (1, 2)][k % 3])
        deg = r.randint(0, min(ch.dim - 1, 3))
        a = random_form(ch, r, deg) if deg else DiffForm.function(ch, random_polynomial(r, ch.coords))
        assert exterior_d(exterior_d(a)).is_zero()


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(1, 3), st.integers(1, 3))
def test_antiderivation(seed, p, q):
    r = random.Random(seed)
    v = random_vector_field(CHART, r)
    a = random_form(CHART, r, p)
    b = random_form(CHART, r, q)
    lhs = contract(v, wedge(a, b))
    rhs = wedge(contract(v, a), b) + (-1) ** p * wedge(a, contract(v, b))
    assert lhs == rhs


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(1, 3), st.integers(1, 3))
def test_wedge_graded_commutative(seed, p, q):
    r = random.Random(seed)
    a = random_form(CHART, r, p)
    b = random_form(CHART, r, q)
    assert wedge(a, b) == (-1) ** (p * q) * wedge(b, a)


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_prolonged_bracket_vertical(seed):
    r = random.Random(seed)
    ch = standard_chart(1, 2)
    X = random_vertical_field(ch, r)
    B = fn_bracket(prolong(X), Connection.symbolic(ch).projector())
    for mu in range(ch.n + 1):
        for a in range(ch.m):
            assert B.component((mu,), ch.fibre_index(a)) == 0
    L = random_lagrangian(ch, r)
    assert insert_vv(B, cartan_form(L)).is_zero()
