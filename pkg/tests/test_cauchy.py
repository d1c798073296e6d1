import math

import numpy as np
import pytest
import sympy as sp

from nhfields.cauchy import (
    CauchyState,
    EvolutionError,
    FieldSystem,
    Slicing,
    conservation_report,
    evolve,
    functional,
    holonomy_defect,
    induced_lagrangian,
    initial_state,
    read_trajectory,
    time_derivative,
    write_trajectory,
)
from nhfields.expr import JetChart
from nhfields.forms import DiffForm
from nhfields.symmetry import momentum_component
from nhfields.forms import VectorField
from nhfields.variational import Lagrangian

from conftest import syms, wave_density


def wave_system(chart, N):
    return FieldSystem(Lagrangian(chart, wave_density(chart)), None, Slicing(1, N))


def standing(system, t=0.0):
    x = system.slicing.coordinates()[0]
    y = np.sin(2 * np.pi * x) * np.cos(2 * np.pi * t)
    yt = -2 * np.pi * np.sin(2 * np.pi * x) * np.sin(2 * np.pi * t)
    return CauchyState.from_fields(system.slicing, t, y[None], yt[None])


def test_slicing_basics():
    s = Slicing(2, 4)
    assert s.shape == (4, 4) and s.nodes == 16 and s.weight == 1 / 16
    assert s.integrate(1.0) == pytest.approx(1.0)
    p = Slicing(0, 1)
    assert p.shape == () and p.nodes == 1 and p.weight == 1 and p.integrate(3.0) == 3.0


def test_central_differences_second_order():
    errs = []
    for N in (32, 64):
        s = Slicing(1, N)
        x = s.coordinates()[0]
        errs.append(np.max(np.abs(s.d1(np.sin(2 * np.pi * x), 0) - 2 * np.pi * np.cos(2 * np.pi * x))))
    assert 3.8 < errs[0] / errs[1] < 4.2


def test_functional_examples(wave_chart):
    ch = wave_chart
    system = wave_system(ch, 32)
    yt, yx = syms(ch, "y_t", "y_x")
    dt, dx = DiffForm.basis(ch, "t"), DiffForm.basis(ch, "x")
    s = CauchyState.from_fields(system.slicing, 0.0, np.zeros((1, 32)), np.ones((1, 32)))
    assert functional(yt * dx, system, s) == pytest.approx(1.0, abs=1e-14)
    assert functional(yt * dx + yx * dt, system, s) == pytest.approx(1.0, abs=1e-14)
    assert abs(functional(yt * dx, wave_system(ch, 128), standing(wave_system(ch, 128)))) <= 1e-12
    with pytest.raises(ValueError):
        functional(DiffForm.function(ch, 1), system, s)


def test_induced_lagrangian_examples(wave_chart):
    ch = wave_chart
    one = FieldSystem(Lagrangian(ch, 1), None, Slicing(1, 16))
    s = CauchyState.from_fields(one.slicing, 0.0, np.zeros((1, 16)), np.zeros((1, 16)))
    assert induced_lagrangian(one, s) == pytest.approx(1.0)
    errs = []
    for N in (32, 64, 128):
        sys_ = wave_system(ch, N)
        errs.append(abs(induced_lagrangian(sys_, standing(sys_)) + math.pi**2))
    assert errs[2] < 1e-2
    assert 3.5 < errs[0] / errs[1] < 4.5 and 3.5 < errs[1] / errs[2] < 4.5
    mech = JetChart(["t"], ["x"])
    ms = FieldSystem(Lagrangian(mech, mech.symbol("x_t") ** 2 / 2 + mech.symbol("x")), None, Slicing(0, 1))
    st = CauchyState.from_fields(ms.slicing, 0.0, np.array([2.0]), np.array([3.0]))
    assert induced_lagrangian(ms, st) == pytest.approx(6.5)


def test_initial_state_rejects_time_dependence(wave_chart):
    system = wave_system(wave_chart, 8)
    x, y = syms(wave_chart, "x", "y")
    initial_state(system, [sp.sin(2 * sp.pi * x)], [0])
    with pytest.raises(ValueError):
        initial_state(system, [y], [0])


def test_evolve_wave_short(wave_chart):
    system = wave_system(wave_chart, 32)
    traj = evolve(system, standing(system), 1e-3, 10, store_every=3)
    assert [round(t, 12) for t in traj.times] == [0.0, 0.003, 0.006, 0.009, 0.01]
    assert len(traj.diagnostics) == len(traj.states)
    assert all(d["holonomy_defect"] == 0 for d in traj.diagnostics)
    assert holonomy_defect(system.slicing, traj.states[-1]) == 0


def test_evolve_reports_blowup(wave_chart):
    ch = wave_chart
    y = ch.symbol("y")
    L = Lagrangian(ch, wave_density(ch) + y**4)
    system = FieldSystem(L, None, Slicing(1, 8))
    s0 = CauchyState.from_fields(system.slicing, 0.0, np.full((1, 8), 10.0), np.zeros((1, 8)))
    with pytest.raises(EvolutionError):
        evolve(system, s0, 1.0, 50)


def test_time_derivative():
    t = np.linspace(0, 1, 11)
    f = 3 * t**2 - t
    assert np.allclose(time_derivative(t, f), 6 * t - 1)
    assert np.isnan(time_derivative(t[:2], f[:2])).all()


def test_trajectory_csv_round_trip(wave_chart, tmp_path):
    system = wave_system(wave_chart, 16)
    traj = evolve(system, standing(system), 1e-3, 4, store_every=2)
    path = tmp_path / "traj.csv"
    write_trajectory(traj, wave_chart, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,node,y,y_t"
    assert len(lines) == 1 + 3 * 16
    back = read_trajectory(path, wave_chart, system.slicing)
    for a, b in zip(traj.states, back.states):
        assert a.t == b.t and np.array_equal(a.y, b.y) and np.array_equal(a.yt, b.yt)
    with pytest.raises(ValueError):
        read_trajectory(path, wave_chart, Slicing(1, 8))


def test_conservation_report_columns(wave_chart):
    system = wave_system(wave_chart, 32)
    traj = evolve(system, standing(system), 1e-3, 20)
    J = momentum_component(system.L, VectorField(wave_chart, {"y": 1})).form
    table = conservation_report(traj, system, {"xi": J}, {"s": (J, sp.Integer(0))})
    assert table.columns == ["t", "J_xi", "Jnh_s", "dJnh_dt", "rhs", "residual"]
    assert len(table.rows) == 21
    assert np.max(np.abs(table.column("residual"))) < 1e-10
    two = conservation_report(traj, system, {}, {"a": (J, 0), "b": (J, 0)})
    assert "residual_a" in two.columns and "rhs_b" in two.columns
