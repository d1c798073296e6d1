"""Space-time splitting on a flat unit torus, grid Cauchy data, induced
functionals and method-of-lines evolution of the (constrained) field equations."""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import sympy as sp

from .expr import JetChart
from .forms import DiffForm
from .nonholonomic import ConstraintSet, eliminate_multipliers
from .variational import Lagrangian


class EvolutionError(ArithmeticError):
    pass


@dataclass(frozen=True)
class Slicing:
    """Time is base coordinate 0; space is the unit torus ``[0,1)^n`` with ``N`` nodes per axis."""

    n: int
    N: int

    @property
    def h(self) -> float:
        return 1.0 / self.N

    @property
    def shape(self) -> tuple:
        return (self.N,) * self.n

    @property
    def weight(self) -> float:
        return self.h ** self.n

    @property
    def nodes(self) -> int:
        return self.N ** self.n

    def coordinates(self) -> list[np.ndarray]:
        axes = [np.arange(self.N) * self.h] * self.n
        return list(np.meshgrid(*axes, indexing="ij")) if self.n else []

    def integrate(self, f) -> float:
        """Equal-weight rule on the torus (pairwise summation)."""
        f = np.broadcast_to(np.asarray(f, dtype=float), self.shape)
        return float(np.sum(f) * self.weight)

    def d1(self, u: np.ndarray, axis: int) -> np.ndarray:
        """Second-order central difference along spatial ``axis`` (0-based) of the trailing grid axes."""
        ax = u.ndim - self.n + axis
        return (np.roll(u, -1, ax) - np.roll(u, 1, ax)) / (2 * self.h)

    def d2(self, u: np.ndarray, i: int, j: int) -> np.ndarray:
        if i == j:
            ax = u.ndim - self.n + i
            return (np.roll(u, -1, ax) - 2 * u + np.roll(u, 1, ax)) / self.h**2
        return self.d1(self.d1(u, i), j)


@dataclass
class CauchyState:
    """Samples of ``y^a``, ``y^a_t`` and the spatial jets ``y^a_i`` (shape ``(m, n, *grid)``)."""

    t: float
    y: np.ndarray
    yt: np.ndarray
    yx: np.ndarray

    @classmethod
    def from_fields(cls, slicing: Slicing, t: float, y, yt) -> "CauchyState":
        y = np.asarray(y, dtype=float)
        yt = np.asarray(yt, dtype=float)
        return cls(t, y, yt, spatial_jets(slicing, y))


def spatial_jets(slicing: Slicing, y: np.ndarray) -> np.ndarray:
    m = y.shape[0]
    out = np.empty((m, slicing.n) + slicing.shape)
    for i in range(slicing.n):
        out[:, i] = slicing.d1(y, i)
    return out


def holonomy_defect(slicing: Slicing, s: CauchyState) -> float:
    if slicing.n == 0:
        return 0.0
    return float(np.max(np.abs(s.yx - spatial_jets(slicing, s.y))))


@dataclass
class Trajectory:
    slicing: Slicing
    dt: float
    store_every: int
    states: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])


class FieldSystem:
    """Numeric evaluation of a Lagrangian field theory with optional constraints on a slicing."""

    def __init__(self, L: Lagrangian, C: ConstraintSet | None, slicing: Slicing):
        ch = L.chart
        if slicing.n != ch.n:
            raise ValueError("slicing dimension does not match the chart")
        self.chart = ch
        self.L = L
        self.C = C if C is not None else ConstraintSet(ch, [])
        self.slicing = slicing
        self._args = list(ch.coords) + sorted(ch.second_jets, key=lambda s: s.name)
        self._solution = None
        self._acc = None
        self._phi = self.compile(self.C.functions) if self.C.k else None
        self._compiled = {}

    @property
    def multipliers(self):
        """Closed-form multipliers and accelerations, eliminated on first use."""
        if self._solution is None:
            self._solution = eliminate_multipliers(self.L, self.C)
        return self._solution

    def compile(self, exprs: Sequence):
        """Vectorized evaluator of order <= 2 expressions on a state."""
        fn = sp.lambdify(self._args, list(exprs), modules="numpy")

        def run(state_vals):
            out = fn(*state_vals)
            return [np.broadcast_to(np.asarray(v, dtype=float), self.slicing.shape) for v in out]

        return run

    def values(self, t: float, y: np.ndarray, yt: np.ndarray, second: bool = True) -> list:
        """Arguments for compiled functions, in ``self._args`` order."""
        ch, sl = self.chart, self.slicing
        shape = sl.shape
        vals = {ch.base[0]: np.full(shape, t)}
        for i, X in enumerate(sl.coordinates()):
            vals[ch.base[i + 1]] = X
        yx = [[sl.d1(y[a], i) for i in range(sl.n)] for a in range(ch.m)]
        for a in range(ch.m):
            vals[ch.fibre[a]] = y[a]
            vals[ch.jet(a, 0)] = yt[a]
            for i in range(sl.n):
                vals[ch.jet(a, i + 1)] = yx[a][i]
        zero = np.zeros(shape)
        for (a, mu, nu) in ch.second_jet_names:
            s = ch.second_jet(a, mu, nu)
            if not second or (mu == 0 and nu == 0):
                vals[s] = zero
            elif mu == 0:
                vals[s] = sl.d1(yt[a], nu - 1)
            else:
                vals[s] = sl.d2(y[a], mu - 1, nu - 1)
        return [vals[s] for s in self._args]

    def state_values(self, s: CauchyState) -> dict:
        return dict(zip(self._args, self.values(s.t, s.y, s.yt)))

    def acceleration(self, t, y, yt) -> np.ndarray:
        if self._acc is None:
            sol = self.multipliers
            self._acc = self.compile([sol.accelerations[a] for a in range(self.chart.m)])
        return np.array(self._acc(self.values(t, y, yt)))

    def constraint_defect(self, s: CauchyState) -> float:
        if self._phi is None:
            return 0.0
        return float(max(np.max(np.abs(v)) for v in self._phi(self.values(s.t, s.y, s.yt))))

    def diagnostics(self, s: CauchyState) -> dict:
        return {
            "constraint_defect": self.constraint_defect(s),
            "holonomy_defect": holonomy_defect(self.slicing, s),
        }


def evolve(system: FieldSystem, state0: CauchyState, dt: float, steps: int, store_every: int = 1) -> Trajectory:
    """Classical RK4 on ``(y, y_t)``; spatial jets are recomputed from ``y``.

    Stores the initial state and every ``store_every``-th step.
    """
    if store_every < 1:
        raise ValueError("store_every must be positive")
    sl = system.slicing
    traj = Trajectory(sl, dt, store_every)

    def store(s):
        traj.states.append(s)
        traj.diagnostics.append(system.diagnostics(s))

    y, v, t = state0.y.copy(), state0.yt.copy(), float(state0.t)
    store(CauchyState.from_fields(sl, t, y, v))
    f = system.acceleration
    with np.errstate(over="raise", invalid="raise", divide="raise"):
        for k in range(1, steps + 1):
            try:
                a1 = f(t, y, v)
                a2 = f(t + dt / 2, y + dt / 2 * v, v + dt / 2 * a1)
                v2 = v + dt / 2 * a1
                a3 = f(t + dt / 2, y + dt / 2 * v2, v + dt / 2 * a2)
                v3 = v + dt / 2 * a2
                a4 = f(t + dt, y + dt * v3, v + dt * a3)
                v4 = v + dt * a3
            except FloatingPointError as exc:
                raise EvolutionError(f"floating point failure at step {k} (t={t:.6g}): {exc}") from None
            y = y + dt / 6 * (v + 2 * v2 + 2 * v3 + v4)
            v = v + dt / 6 * (a1 + 2 * a2 + 2 * a3 + a4)
            t = state0.t + k * dt
            if not (np.all(np.isfinite(y)) and np.all(np.isfinite(v))):
                bad = np.argwhere(~np.isfinite(v) | ~np.isfinite(y))[0]
                raise EvolutionError(f"non-finite state at step {k} (t={t:.6g}), node {tuple(bad[1:])}")
            if k % store_every == 0 or k == steps:
                store(CauchyState.from_fields(sl, t, y, v))
    return traj


def pullback_top(form: DiffForm, system: FieldSystem, s: CauchyState) -> np.ndarray:
    """Coefficient of ``dx^1 ^ .. ^ dx^n`` in the pullback of a degree-n form along the state."""
    ch, sl = system.chart, system.slicing
    n = sl.n
    if form.degree != n:
        raise ValueError(f"need a degree-{n} form, got degree {form.degree}")
    vals = system.state_values(s)
    if n == 0:
        return _eval(form.terms.get((), 0), vals, system)
    # spatial differential of each order <= 1 coordinate
    diffs = {}
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        diffs[i + 1] = [np.full(sl.shape, e[j]) for j in range(n)]
    for a in range(ch.m):
        diffs[ch.fibre_index(a)] = [vals[ch.jet(a, j + 1)] for j in range(n)]
        for mu in range(n + 1):
            u = vals[ch.jet(a, mu)]
            diffs[ch.jet_index(a, mu)] = [sl.d1(u, j) for j in range(n)]
    total = np.zeros(sl.shape)
    for I, c in form.terms.items():
        if 0 in I:
            continue
        rows = [diffs[i] for i in I]
        det = np.zeros(sl.shape)
        for perm in itertools.permutations(range(n)):
            term = np.full(sl.shape, _perm_sign(perm))
            for r, col in enumerate(perm):
                term = term * rows[r][col]
            det = det + term
        total = total + _eval(c, vals, system) * det
    return total


def _perm_sign(p) -> float:
    sign = 1.0
    p = list(p)
    for i in range(len(p)):
        while p[i] != i:
            j = p[i]
            p[i], p[j] = p[j], p[i]
            sign = -sign
    return sign


def _eval(e, vals: Mapping, system: FieldSystem) -> np.ndarray:
    e = sp.sympify(e)
    fn = system._compiled.get(e)
    if fn is None:
        args = sorted(e.free_symbols, key=lambda s: s.name)
        f = sp.lambdify(args, e, modules="numpy")
        fn = system._compiled[e] = (args, f)
    args, f = fn
    return np.broadcast_to(np.asarray(f(*[vals[a] for a in args]), dtype=float), system.slicing.shape)


def functional(form: DiffForm, system: FieldSystem, s: CauchyState) -> float:
    """``int_M kappa^* J`` by the equal-weight rule; pointwise value when ``n = 0``."""
    return system.slicing.integrate(pullback_top(form, system, s))


def induced_lagrangian(system: FieldSystem, s: CauchyState) -> float:
    vals = system.state_values(s)
    return system.slicing.integrate(_eval(system.L.density, vals, system))


def initial_state(system: FieldSystem, y0: Sequence, yt0: Sequence) -> CauchyState:
    """Sample expressions in the spatial coordinates (time set to 0) on the grid."""
    ch, sl = system.chart, system.slicing
    X = sl.coordinates()
    spatial = ch.base[1:]

    def sample(e):
        e = sp.sympify(e).xreplace({ch.base[0]: 0})
        extra = e.free_symbols - set(spatial)
        if extra:
            raise ValueError(f"initial data depends on {sorted(str(s) for s in extra)}")
        fn = sp.lambdify(spatial, e, modules="numpy")
        return np.broadcast_to(np.asarray(fn(*X), dtype=float), sl.shape)

    y = np.array([sample(e) for e in y0]).reshape((ch.m,) + sl.shape)
    yt = np.array([sample(e) for e in yt0]).reshape((ch.m,) + sl.shape)
    return CauchyState.from_fields(sl, 0.0, y, yt)


def time_derivative(t: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Centered differences on a uniform grid, second-order one-sided at the ends."""
    f = np.asarray(f, dtype=float)
    if len(f) < 3:
        return np.full(len(f), math.nan)
    dt = t[1] - t[0]
    out = np.empty_like(f)
    out[1:-1] = (f[2:] - f[:-2]) / (2 * dt)
    out[0] = (-3 * f[0] + 4 * f[1] - f[2]) / (2 * dt)
    out[-1] = (3 * f[-1] - 4 * f[-2] + f[-3]) / (2 * dt)
    return out


@dataclass
class ConservationTable:
    columns: list
    rows: list

    def column(self, name: str) -> np.ndarray:
        i = self.columns.index(name)
        return np.array([r[i] for r in self.rows])

    def write(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.columns)
            for r in self.rows:
                w.writerow([repr(float(v)) for v in r])


def conservation_report(traj: Trajectory, system: FieldSystem, momenta: Mapping[str, DiffForm],
                        sections: Mapping[str, tuple] | None = None) -> ConservationTable:
    """Momentum functionals and the nonholonomic momentum balance along a trajectory.

    ``sections`` maps a name to ``(J_nh form, rhs scalar)`` with the rhs the
    density ``xi~(L)`` for the prolonged lift.
    """
    if not traj.states:
        raise ValueError("empty trajectory")
    sections = dict(sections or {})
    t = traj.times
    cols = {"t": t}
    for name, J in momenta.items():
        cols[f"J_{name}"] = np.array([functional(J, system, s) for s in traj.states])
    suffix = len(sections) > 1
    for name, (Jnh, rhs) in sections.items():
        sfx = f"_{name}" if suffix else ""
        jn = np.array([functional(Jnh, system, s) for s in traj.states])
        cols[f"Jnh_{name}"] = jn
        d = time_derivative(t, jn)
        r = np.array([system.slicing.integrate(_eval(rhs, system.state_values(s), system)) for s in traj.states])
        cols[f"dJnh_dt{sfx}"] = d
        cols[f"rhs{sfx}"] = r
        cols[f"residual{sfx}"] = d - r
    order = ["t"] + [c for c in cols if c.startswith("J_")] + [c for c in cols if c.startswith("Jnh_")]
    order += [c for c in cols if c not in order]
    rows = [[cols[c][i] for c in order] for i in range(len(t))]
    return ConservationTable(order, rows)


def write_trajectory(traj: Trajectory, chart: JetChart, path) -> None:
    names = chart.fibre_names
    header = ["t", "node"] + names + [f"{a}_{chart.base_names[0]}" for a in names]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for s in traj.states:
            y = s.y.reshape(chart.m, -1)
            yt = s.yt.reshape(chart.m, -1)
            for u in range(y.shape[1]):
                w.writerow([repr(float(s.t)), u] + [repr(float(v)) for v in y[:, u]] + [repr(float(v)) for v in yt[:, u]])


def read_trajectory(path, chart: JetChart, slicing: Slicing) -> Trajectory:
    names = chart.fibre_names
    expected = ["t", "node"] + names + [f"{a}_{chart.base_names[0]}" for a in names]
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if header != expected:
            raise ValueError(f"trajectory header {header} does not match the model (expected {expected})")
        blocks: dict = {}
        order = []
        for row in r:
            t = float(row[0])
            if t not in blocks:
                blocks[t] = []
                order.append(t)
            blocks[t].append([float(v) for v in row[2:]])
    states = []
    m = chart.m
    for t in order:
        data = np.array(blocks[t])
        if data.shape[0] != slicing.nodes:
            raise ValueError(f"time {t}: {data.shape[0]} nodes, expected {slicing.nodes}")
        y = data[:, :m].T.reshape((m,) + slicing.shape)
        yt = data[:, m:].T.reshape((m,) + slicing.shape)
        states.append(CauchyState.from_fields(slicing, t, y, yt))
    dt = order[1] - order[0] if len(order) > 1 else 0.0
    return Trajectory(slicing, dt, 1, states, [])
