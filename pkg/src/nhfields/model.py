"""Sectioned plain-text model files.

Example::

    [base]
    t, x
    [fields]
    y
    [lagrangian]
    L = (y_t^2 - y_x^2)/2
    [symmetry]
    xi = [y: 1]
    [grid]
    N = 128
    dt = 1e-3
    steps = 1000
    [initial]
    y = sin(2*pi*x)
    y_t = 0

Lines starting with ``#`` are comments.  ``[constraints]`` holds
``name = expression`` lines and an optional ``leading = [jet, ...]``;
``[symmetry]`` holds generators ``name = [field: coefficient, ...]`` and
sections ``section name = [generator: coefficient, ...]``.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import sympy as sp

from .expr import ChartNameError, JetChart, canon, is_zero
from .forms import VectorField
from .grammar import ExprSyntaxError, parse_expr, render_expr
from .nonholonomic import ConstraintError, ConstraintSet
from .symmetry import GESection, InfinitesimalAction
from .variational import Lagrangian

SECTIONS = ("base", "fields", "lagrangian", "constraints", "symmetry", "grid", "initial")
GRID_KEYS = {"N": int, "dt": float, "steps": int, "store_every": int}
_IDENT = re.compile(r"[A-Za-z][A-Za-z0-9_]*$")


@dataclass
class LocatedError:
    line: int
    column: int
    message: str

    def __str__(self):
        return f"{self.line}:{self.column}: {self.message}"


class ModelError(ValueError):
    def __init__(self, errors: list[LocatedError], source: str = "<model>"):
        self.errors = errors
        self.source = source
        super().__init__("\n".join(f"{source}:{e}" for e in errors))


@dataclass
class Model:
    chart: JetChart
    lagrangian: Lagrangian
    designated: int | None = None
    constraint_names: list = field(default_factory=list)
    constraints: ConstraintSet | None = None
    declared_leading: list | None = None
    has_constraint_section: bool = False
    generators: dict = field(default_factory=dict)
    sections: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)
    initial: dict = field(default_factory=dict)
    name: str = "model"

    @property
    def k(self) -> int:
        return self.constraints.k if self.constraints is not None else 0

    @property
    def action(self) -> InfinitesimalAction:
        return InfinitesimalAction(self.chart, self.generators)

    def constraint_set(self) -> ConstraintSet:
        return self.constraints if self.constraints is not None else ConstraintSet(self.chart, [])

    def ge_sections(self) -> dict:
        act = self.action
        return {n: GESection(act, c, n) for n, c in self.sections.items()}

    def initial_data(self) -> tuple[list, list]:
        ch = self.chart
        y0 = [self.initial.get(a, sp.Integer(0)) for a in ch.fibre_names]
        yt0 = [self.initial.get(f"{a}_{ch.base_names[0]}", sp.Integer(0)) for a in ch.fibre_names]
        return y0, yt0

    def render(self) -> str:
        ch = self.chart
        out = ["[base]", ", ".join(ch.base_names), "", "[fields]", ", ".join(ch.fibre_names), ""]
        out += ["[lagrangian]", f"L = {render_expr(self.lagrangian.density)}"]
        if self.designated is not None:
            out.append(f"designated = {ch.base_names[self.designated]}")
        out.append("")
        if self.has_constraint_section:
            out.append("[constraints]")
            for n, f in zip(self.constraint_names, self.constraints.functions):
                out.append(f"{n} = {render_expr(f)}")
            if self.declared_leading is not None:
                out.append("leading = [" + ", ".join(self.declared_leading) + "]")
            out.append("")
        if self.generators or self.sections:
            out.append("[symmetry]")
            for n, X in self.generators.items():
                parts = [f"{ch.fibre_names[a]}: {render_expr(X.component(ch.fibre_index(a)))}"
                         for a in range(ch.m) if X.component(ch.fibre_index(a)) != 0]
                out.append(f"{n} = [" + ", ".join(parts) + "]")
            for n, coeffs in self.sections.items():
                parts = [f"{g}: {render_expr(c)}" for g, c in coeffs.items()]
                out.append(f"section {n} = [" + ", ".join(parts) + "]")
            out.append("")
        if self.grid:
            out.append("[grid]")
            for k in GRID_KEYS:
                if k in self.grid:
                    out.append(f"{k} = {self.grid[k]!r}")
            out.append("")
        if self.initial:
            out.append("[initial]")
            for k, e in self.initial.items():
                out.append(f"{k} = {render_expr(e)}")
            out.append("")
        return "\n".join(out).rstrip("\n") + "\n"


@dataclass
class _Line:
    no: int
    text: str
    offset: int = 0


def _split_sections(text: str, errors: list) -> dict:
    sections: dict = {}
    current = None
    for no, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.split("#", 1)[0].rstrip()
        if not stripped.strip():
            continue
        lead = len(stripped) - len(stripped.lstrip())
        s = stripped.strip()
        if s.startswith("["):
            m = re.fullmatch(r"\[\s*([A-Za-z_]+)\s*\]", s)
            if not m or m.group(1) not in SECTIONS:
                errors.append(LocatedError(no, lead + 1, f"unknown section header {s!r}"))
                current = None
                continue
            current = m.group(1)
            if current in sections:
                errors.append(LocatedError(no, lead + 1, f"duplicate section [{current}]"))
            sections[current] = {"line": no, "lines": []}
            continue
        if current is None:
            errors.append(LocatedError(no, lead + 1, "content outside a section"))
            continue
        sections[current]["lines"].append(_Line(no, s, lead))
    return sections


def _key_value(line: _Line, errors: list):
    if "=" not in line.text:
        errors.append(LocatedError(line.no, line.offset + 1, "expected 'name = value'"))
        return None
    key, val = line.text.split("=", 1)
    voff = line.offset + len(key) + 1 + (len(val) - len(val.lstrip()))
    return key.strip(), val.strip(), voff


def _name_list(line: _Line, errors: list, what: str) -> list:
    names = [s.strip() for s in line.text.split(",")]
    pos = line.offset
    out = []
    for s, piece in zip(names, line.text.split(",")):
        col = pos + (len(piece) - len(piece.lstrip())) + 1
        if not _IDENT.match(s):
            errors.append(LocatedError(line.no, col, f"invalid {what} name {s!r}"))
        elif s in out:
            errors.append(LocatedError(line.no, col, f"duplicate {what} name {s!r}"))
        else:
            out.append(s)
        pos += len(piece) + 1
    return out


class _Resolver:
    def __init__(self, allowed: dict):
        self.allowed = allowed

    def __call__(self, name: str):
        if name in self.allowed:
            return self.allowed[name]
        raise ChartNameError(f"unknown coordinate {name!r}")


def _expr(text: str, line: int, col: int, resolver, errors: list):
    try:
        return parse_expr(text, resolver)
    except ExprSyntaxError as exc:
        errors.append(LocatedError(line, col + exc.pos, exc.message))
        return None


def _bracket_items(text: str, line: int, col: int, errors: list):
    """Parse ``[key: expr, ...]`` into ``(key, expr_text, column)`` triples."""
    s = text.strip()
    if not (s.startswith("[") and s.endswith("]")):
        errors.append(LocatedError(line, col, "expected '[name: expression, ...]'"))
        return None
    body = s[1:-1]
    items = []
    depth = 0
    start = 0
    pieces = []
    for i, ch in enumerate(body):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif ch == "," and depth == 0:
            pieces.append((start, body[start:i]))
            start = i + 1
    if body.strip():
        pieces.append((start, body[start:]))
    for off, piece in pieces:
        pcol = col + 1 + off + (len(piece) - len(piece.lstrip()))
        if ":" not in piece:
            # bare name list (used for ``leading``)
            items.append((piece.strip(), None, pcol))
            continue
        k, v = piece.split(":", 1)
        vcol = col + 1 + off + len(k) + 1 + (len(v) - len(v.lstrip()))
        items.append((k.strip(), v.strip(), pcol, vcol))
    return items


def parse_model(text: str, source: str = "<model>", name: str | None = None) -> Model:
    """Parse a model, collecting every located error before raising :class:`ModelError`."""
    errors: list[LocatedError] = []
    secs = _split_sections(text, errors)
    for req in ("base", "fields", "lagrangian"):
        if req not in secs:
            errors.append(LocatedError(1, 1, f"missing section [{req}]"))
    if errors and any(r not in secs for r in ("base", "fields")):
        raise ModelError(errors, source)

    def names(sec, what):
        lines = secs[sec]["lines"]
        if len(lines) != 1:
            errors.append(LocatedError(secs[sec]["line"], 1, f"[{sec}] needs exactly one line of names"))
            return []
        return _name_list(lines[0], errors, what)

    base = names("base", "base coordinate")
    fibres = names("fields", "field")
    try:
        chart = JetChart(base, fibres)
    except ValueError as exc:
        errors.append(LocatedError(secs["fields"]["line"], 1, str(exc)))
        raise ModelError(errors, source) from None

    coords = dict(chart.by_name)
    order1 = {k: v for k, v in coords.items() if v not in chart.second_jets}
    resolve_all = _Resolver(coords)
    resolve_y = _Resolver({s.name: s for s in chart.base + chart.fibre})
    resolve_space = _Resolver({s.name: s for s in chart.base[1:]})

    model_kw: dict = {}
    density = None
    seen_l = False
    if "lagrangian" in secs:
        for line in secs["lagrangian"]["lines"]:
            kv = _key_value(line, errors)
            if kv is None:
                continue
            key, val, col = kv
            if key in ("L", "lagrangian"):
                if seen_l:
                    errors.append(LocatedError(line.no, line.offset + 1, "duplicate Lagrangian"))
                    continue
                seen_l = True
                e = _expr(val, line.no, col + 1, resolve_all, errors)
                if e is not None:
                    bad = sorted(s.name for s in e.free_symbols if s in chart.second_jets)
                    if bad:
                        pos = val.find(bad[0])
                        errors.append(LocatedError(line.no, col + 1 + max(pos, 0),
                                                   f"Lagrangian must be first order; found second jet {bad[0]}"))
                    else:
                        density = e
            elif key == "designated":
                if val not in base:
                    errors.append(LocatedError(line.no, col + 1, f"unknown base coordinate {val!r}"))
                else:
                    model_kw["designated"] = base.index(val)
            else:
                errors.append(LocatedError(line.no, line.offset + 1, f"unknown key {key!r} in [lagrangian]"))
        if not seen_l:
            errors.append(LocatedError(secs["lagrangian"]["line"], 1, "missing 'L = ...'"))

    cnames, cfuncs, leading = [], [], None
    if "constraints" in secs:
        for line in secs["constraints"]["lines"]:
            kv = _key_value(line, errors)
            if kv is None:
                continue
            key, val, col = kv
            if key == "leading":
                items = _bracket_items(val, line.no, col + 1, errors)
                if items is None:
                    continue
                leading = []
                for it in items:
                    if it[1] is not None or it[0] not in order1 or order1[it[0]] not in set(
                        chart.coords[chart.n + 1 + chart.m:]
                    ):
                        errors.append(LocatedError(line.no, it[2], f"leading entry {it[0]!r} is not a first jet"))
                    else:
                        leading.append(it[0])
                continue
            if not _IDENT.match(key):
                errors.append(LocatedError(line.no, line.offset + 1, f"invalid constraint name {key!r}"))
                continue
            if key in cnames or key in coords:
                errors.append(LocatedError(line.no, line.offset + 1, f"duplicate name {key!r}"))
                continue
            e = _expr(val, line.no, col + 1, resolve_all, errors)
            if e is None:
                continue
            bad = sorted(s.name for s in e.free_symbols if s in chart.second_jets)
            if bad:
                errors.append(LocatedError(line.no, col + 1 + max(val.find(bad[0]), 0),
                                           f"constraint must be first order; found second jet {bad[0]}"))
                continue
            cnames.append(key)
            cfuncs.append(e)

    generators, sections = {}, {}
    if "symmetry" in secs:
        for line in secs["symmetry"]["lines"]:
            kv = _key_value(line, errors)
            if kv is None:
                continue
            key, val, col = kv
            is_section = key.startswith("section ")
            nm = key[len("section "):].strip() if is_section else key
            if not _IDENT.match(nm):
                errors.append(LocatedError(line.no, line.offset + 1, f"invalid name {nm!r}"))
                continue
            if nm in generators or nm in sections or nm in coords:
                errors.append(LocatedError(line.no, line.offset + 1, f"duplicate name {nm!r}"))
                continue
            items = _bracket_items(val, line.no, col + 1, errors)
            if items is None:
                continue
            comps = {}
            for it in items:
                if it[1] is None:
                    errors.append(LocatedError(line.no, it[2], "expected 'name: expression'"))
                    continue
                k, etext, kcol, vcol = it
                if is_section:
                    if k not in generators:
                        errors.append(LocatedError(line.no, kcol, f"unknown generator {k!r}"))
                        continue
                    e = _expr(etext, line.no, vcol, resolve_all, errors)
                else:
                    if k not in fibres:
                        errors.append(LocatedError(line.no, kcol, f"unknown field {k!r}"))
                        continue
                    e = _expr(etext, line.no, vcol, resolve_y, errors)
                if e is None:
                    continue
                if k in comps:
                    errors.append(LocatedError(line.no, kcol, f"duplicate entry {k!r}"))
                    continue
                comps[k] = e
            if is_section:
                sections[nm] = comps
            else:
                generators[nm] = VectorField(chart, comps)

    grid = {}
    if "grid" in secs:
        for line in secs["grid"]["lines"]:
            kv = _key_value(line, errors)
            if kv is None:
                continue
            key, val, col = kv
            if key not in GRID_KEYS:
                errors.append(LocatedError(line.no, line.offset + 1, f"unknown grid key {key!r}"))
                continue
            try:
                v = GRID_KEYS[key](val) if GRID_KEYS[key] is float else int(val)
            except ValueError:
                errors.append(LocatedError(line.no, col + 1, f"invalid value for {key}: {val!r}"))
                continue
            if v <= 0:
                errors.append(LocatedError(line.no, col + 1, f"{key} must be positive"))
                continue
            grid[key] = v

    initial = {}
    allowed_init = set(fibres) | {f"{a}_{base[0]}" for a in fibres}
    if "initial" in secs:
        for line in secs["initial"]["lines"]:
            kv = _key_value(line, errors)
            if kv is None:
                continue
            key, val, col = kv
            if key not in allowed_init:
                errors.append(LocatedError(line.no, line.offset + 1, f"initial data for unknown name {key!r}"))
                continue
            if key in initial:
                errors.append(LocatedError(line.no, line.offset + 1, f"duplicate initial data {key!r}"))
                continue
            e = _expr(val, line.no, col + 1, resolve_space, errors)
            if e is not None:
                initial[key] = e

    if errors:
        raise ModelError(errors, source)

    L = Lagrangian(chart, density)
    C = None
    if "constraints" in secs:
        try:
            C = ConstraintSet(chart, cfuncs, leading)
            if C.k:
                C.leading  # noqa: B018 - resolve auto-selection now to report failures at load
        except ConstraintError as exc:
            errors.append(LocatedError(secs["constraints"]["line"], 1, str(exc)))
    model = Model(
        chart, L, model_kw.get("designated"), cnames, C, leading, "constraints" in secs,
        generators, sections, grid, initial, name or "model",
    )
    if C is not None and C.k and initial:
        bad = _initial_violation(model)
        if bad:
            errors.append(LocatedError(secs["initial"]["line"], 1, bad))
    if errors:
        raise ModelError(errors, source)
    return model


def _initial_violation(model: Model) -> str | None:
    """Check that the initial data satisfy the constraints at t = 0."""
    ch = model.chart
    y0, yt0 = model.initial_data()
    rep = {ch.base[0]: sp.Integer(0)}
    for a in range(ch.m):
        rep[ch.fibre[a]] = y0[a]
        rep[ch.jet(a, 0)] = yt0[a]
        for mu in range(1, ch.n + 1):
            rep[ch.jet(a, mu)] = sp.diff(y0[a], ch.base[mu])
    for nm, phi in zip(model.constraint_names, model.constraints.functions):
        e = canon(phi.xreplace(rep))
        if not is_zero(e, random.Random(0)):
            return f"initial data violate constraint {nm}: {e}"
    return None


def bundled_models() -> list[str]:
    root = resources.files("nhfields") / "models"
    return sorted(p.name for p in root.iterdir() if p.name.endswith(".nhf"))


def locate_model(path: str) -> Path:
    p = Path(path)
    if p.exists():
        return p
    root = resources.files("nhfields") / "models"
    for cand in (path, f"{path}.nhf"):
        q = root / cand
        if q.is_file():
            return Path(str(q))
    raise FileNotFoundError(f"model file not found: {path}")


def load_model(path: str) -> Model:
    p = locate_model(path)
    return parse_model(p.read_text(), str(p), p.stem)


__all__ = [
    "LocatedError",
    "Model",
    "ModelError",
    "bundled_models",
    "load_model",
    "locate_model",
    "parse_model",
]
