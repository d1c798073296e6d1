"""Derivation and verification reports for a model (JSON-serializable dicts)."""

from __future__ import annotations

import hashlib
import json
import random

import numpy as np

from .cauchy import (
    FieldSystem,
    Slicing,
    Trajectory,
    conservation_report,
    evolve,
    functional,
    initial_state,
    pullback_top,
)
from .checks import (
    bracket_vertical_defect,
    cartan_identity_residual,
    check_appendix,
    check_cartan_identity,
    check_prolonged_bracket,
)
from .forms import Connection, DiffForm
from .grammar import render_expr
from .model import Model
from .nonholonomic import (
    ConstraintError,
    ConstraintSet,
    EliminationError,
    constrained_el,
    constraint_forms,
    eliminate_multipliers,
    solve_constrained_ddw,
)
from .symmetry import (
    GESection,
    LIFTS,
    check_invariance,
    momentum_component,
    momentum_equation_residual,
    nh_momentum,
    noether_residual,
)
from .variational import (
    DDWSolveError,
    accelerations,
    cartan_form,
    euler_lagrange,
    hessian,
    multisymplectic_form,
    solve_ddw,
)

PIPELINES = ("auto", "constrained", "unconstrained")
LEMMAS = ("3.1", "3.2", "A.1", "noether", "momentum")
LEMMA_NAMES = {
    "3.1": "cartan_identity",
    "3.2": "prolonged_bracket",
    "A.1": "appendix_identities",
    "noether": "noether",
    "momentum": "momentum_equation",
}


def seed_for(seed: int, name: str) -> int:
    """Independent deterministic seed per check."""
    return int(hashlib.sha256(f"{seed}/{name}".encode()).hexdigest()[:16], 16)


def is_constrained(model: Model, pipeline: str) -> bool:
    if pipeline not in PIPELINES:
        raise ValueError(f"unknown pipeline {pipeline!r}")
    if pipeline == "auto":
        return model.has_constraint_section
    return pipeline == "constrained"


def constraints_for(model: Model, pipeline: str) -> ConstraintSet | None:
    return model.constraint_set() if is_constrained(model, pipeline) else None


def _r(e) -> str:
    return render_expr(e)


def dumps(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def derive_report(model: Model, pipeline: str = "auto") -> dict:
    ch = model.chart
    L = model.lagrangian
    C = constraints_for(model, pipeline)
    H = hessian(L)
    rep: dict = {
        "chart": {"base": ch.base_names, "fields": ch.fibre_names},
        "lagrangian": _r(L.density),
        "hessian": {"determinant": _r(H.determinant), "regular": bool(H.regular)},
        "cartan_form": cartan_form(L).render(),
        "multisymplectic_form": multisymplectic_form(L).render(),
    }
    if C is None:
        eqs = euler_lagrange(L)
        try:
            acc = accelerations(L)
            rep["accelerations"] = {ch.second_jet_names[(a, 0, 0)]: _r(acc[a]) for a in range(ch.m)}
        except DDWSolveError as exc:
            rep["accelerations"] = {"error": str(exc)}
    else:
        eqs = constrained_el(L, C).residuals
        try:
            sol = eliminate_multipliers(L, C)
            rep["accelerations"] = {ch.second_jet_names[(a, 0, 0)]: _r(sol.accelerations[a]) for a in range(ch.m)}
        except EliminationError as exc:
            rep["accelerations"] = {"error": str(exc)}
            sol = None
    rep["field_equations"] = {ch.fibre_names[a]: _r(e) for a, e in enumerate(eqs)}
    try:
        dd = solve_ddw(L, model.designated)
        rep["ddw"] = {
            "trace": [_r(t) for t in dd.trace],
            "designated": ch.base_names[dd.designated],
            "particular": {str(k): _r(v) for k, v in dd.particular.items()},
        }
    except DDWSolveError as exc:
        rep["ddw"] = {"error": str(exc)}
    act = model.action
    rep["momenta"] = {n: momentum_component(L, X).form.render() for n, X in act.generators.items()}
    inv = check_invariance(L, C, act)
    rep["invariance"] = {n: {"ok": g.ok, "failures": g.failures()} for n, g in inv.generators.items()}
    if model.sections:
        Cs = C if C is not None else ConstraintSet(ch, [])
        secs = {}
        for n, s in model.ge_sections().items():
            entry = {"verbatim_lift": s.lift("verbatim").render(), "J_nh": nh_momentum(L, s, "verbatim").form.render(),
                     "valid": s.is_valid(Cs)}
            if s.factors_through_y:
                entry["prolonged_lift"] = s.lift("prolonged").render()
            secs[n] = entry
        rep["sections"] = secs
    if C is not None and C.k:
        cons = {
            "functions": {n: _r(f) for n, f in zip(model.constraint_names, C.functions)},
            "leading": [s.name for s in C.leading],
        }
        try:
            cons["forms"] = [F.render() for F in constraint_forms(C, rng=random.Random(0))]
        except ConstraintError as exc:
            cons["forms"] = {"error": str(exc)}
        if sol is not None:
            cons["multipliers"] = {
                f"lam{a + 1}_{ch.base_names[mu]}": _r(v) for (a, mu), v in sol.multipliers.items()
            }
            cons["admissibility_det"] = _r(sol.admissibility_det)
            try:
                cd = solve_constrained_ddw(L, C)
                cons["constrained_ddw"] = {str(k): _r(v) for k, v in cd.solved.items()}
            except EliminationError as exc:
                cons["constrained_ddw"] = {"error": str(exc)}
        rep["constraints"] = cons
    return rep


def _verdict_dict(v) -> dict:
    d = {
        "ok": bool(v.ok),
        "residual": v.residual.render(),
        "remainder": DiffForm(v.residual.chart, v.residual.degree, v.reduced).render(),
        "samples": v.samples,
        "reduction_conclusive": v.reduction_conclusive,
    }
    if v.counterexample:
        d["counterexample"] = v.counterexample
    return d


def _lemma_entries(result, label) -> dict:
    d = result.as_dict()
    d["label"] = label
    return d


def check_report(model: Model, lemmas=LEMMAS, trials: int = 20, seed: int = 0,
                 lift: str = "both", pipeline: str = "auto") -> dict:
    """Run the requested checks; ``report["passed"]`` is the overall verdict.

    Verbatim-lift momentum verdicts are informational and never fail the run.
    """
    ch = model.chart
    L = model.lagrangian
    C = constraints_for(model, pipeline)
    lemmas = list(dict.fromkeys(LEMMAS if "all" in lemmas else lemmas))
    out: dict = {"checks": {}, "trials": trials, "seed": seed}
    passed = True

    if "3.1" in lemmas:
        res = check_cartan_identity(trials, seed_for(seed, "3.1"), charts=[ch])
        own = cartan_identity_residual(L, Connection.symbolic(ch, functional=True))
        d = _lemma_entries(res, "3.1")
        d["model_lagrangian_ok"] = own.is_zero()
        d["passed"] = res.passed and own.is_zero()
        out["checks"][LEMMA_NAMES["3.1"]] = d
        passed &= d["passed"]
    if "3.2" in lemmas:
        res = check_prolonged_bracket(trials, seed_for(seed, "3.2"), charts=[ch])
        h = Connection.symbolic(ch, functional=True)
        gen_ok = {}
        for n, X in model.generators.items():
            ok = not bracket_vertical_defect(X, h)
            gen_ok[n] = ok
        d = _lemma_entries(res, "3.2")
        d["generators_ok"] = gen_ok
        d["passed"] = res.passed and all(gen_ok.values())
        out["checks"][LEMMA_NAMES["3.2"]] = d
        passed &= d["passed"]
    if "A.1" in lemmas:
        res = check_appendix(trials, seed_for(seed, "A.1"), chart=ch)
        d = _lemma_entries(res, "A.1")
        out["checks"][LEMMA_NAMES["A.1"]] = d
        passed &= d["passed"]
    if "noether" in lemmas:
        inv = check_invariance(L, C, model.action)
        entries = {}
        for n, X in model.generators.items():
            g = inv.generators[n]
            rng = random.Random(seed_for(seed, f"noether/{n}"))
            if C is None:
                v = noether_residual(L, X, rng, trials)
            else:
                s = GESection(model.action, {n: 1}, n)
                if not s.is_valid(C):
                    entries[n] = {"ok": True, "skipped": "generator is not a section of the admissible algebra on C"}
                    continue
                v = momentum_equation_residual(L, C, s, "prolonged", rng, trials)
            e = _verdict_dict(v)
            e["invariance"] = {"ok": g.ok, "failures": g.failures()}
            e["ok"] = bool(v.ok and g.ok)
            entries[n] = e
            passed &= e["ok"]
        out["checks"]["noether"] = {"label": "noether", "generators": entries,
                                    "passed": all(e["ok"] for e in entries.values())}
    if "momentum" in lemmas and model.sections:
        Cs = C if C is not None else ConstraintSet(ch, [])
        lifts = LIFTS if lift == "both" else (lift,)
        entries = {}
        for n, s in model.ge_sections().items():
            e = {"valid": s.is_valid(Cs)}
            for lk in lifts:
                if lk == "prolonged" and not s.factors_through_y:
                    e[lk] = {"ok": False, "error": "section coefficients depend on jets"}
                    continue
                rng = random.Random(seed_for(seed, f"momentum/{n}/{lk}"))
                v = momentum_equation_residual(L, Cs, s, lk, rng, trials)
                e[lk] = _verdict_dict(v)
                e[lk]["rhs"] = v.extra["rhs"]
            e["ok"] = e["valid"] and (e.get("prolonged", {"ok": True})["ok"])
            entries[n] = e
            passed &= e["ok"]
        out["checks"]["momentum_equation"] = {"label": "momentum", "sections": entries,
                                              "passed": all(e["ok"] for e in entries.values())}
    out["passed"] = bool(passed)
    return out


def summary_lines(report: dict) -> list[str]:
    lines = []
    for name, d in report["checks"].items():
        tag = "PASS" if d["passed"] else "FAIL"
        if name == "noether":
            for g, e in d["generators"].items():
                t = "PASS" if e["ok"] else "FAIL"
                extra = ""
                if "skipped" in e:
                    t, extra = "SKIP", f" ({e['skipped']})"
                elif not e["ok"]:
                    why = list(e["invariance"]["failures"])
                    if e["remainder"] != "0":
                        why.append(f"remainder {e['remainder']}")
                    extra = " (" + "; ".join(why) + ")"
                lines.append(f"{t} noether generator {g}{extra}")
        elif name == "momentum_equation":
            for s, e in d["sections"].items():
                for lk in LIFTS:
                    if lk in e:
                        ok = e[lk]["ok"]
                        t = "PASS" if ok else ("INFO" if lk == "verbatim" else "FAIL")
                        extra = "" if ok else f" (remainder {e[lk].get('remainder', e[lk].get('error'))})"
                        lines.append(f"{t} momentum section {s} [{lk} lift]{extra}")
                if not e["valid"]:
                    lines.append(f"FAIL momentum section {s} is not admissible on C")
        else:
            lines.append(f"{tag} {d['label']} {name} ({d['trials']} trials)")
    return lines


def simulate(model: Model, pipeline: str = "auto", N: int | None = None, dt: float | None = None,
             steps: int | None = None, store_every: int | None = None) -> tuple[FieldSystem, Trajectory]:
    ch = model.chart
    g = model.grid
    N = N or g.get("N", 64)
    if ch.n == 0:
        N = 1
    dt = dt or g.get("dt", 1e-3)
    steps = steps if steps is not None else g.get("steps", 100)
    store_every = store_every or g.get("store_every", 1)
    system = FieldSystem(model.lagrangian, constraints_for(model, pipeline), Slicing(ch.n, N))
    s0 = initial_state(system, *model.initial_data())
    return system, evolve(system, s0, dt, steps, store_every)


def conservation(model: Model, system: FieldSystem, traj: Trajectory):
    L = model.lagrangian
    momenta = {n: momentum_component(L, X).form for n, X in model.generators.items()}
    sections = {}
    for n, s in model.ge_sections().items():
        X = s.lift("prolonged") if s.factors_through_y else s.lift("verbatim")
        sections[n] = (nh_momentum(L, s, "verbatim").form, X(L.density))
    return conservation_report(traj, system, momenta, sections)


def relative_drift(values, scale: float) -> float:
    """``max_t |J(t) - J(0)|`` relative to ``scale`` (or absolute when the scale vanishes)."""
    values = np.asarray(values, dtype=float)
    d = float(np.max(np.abs(values - values[0])))
    return d / scale if scale > 0 else d


def drift_scale(form, system: FieldSystem, traj: Trajectory) -> float:
    """``max(|J(0)|, max_t int |kappa^* J|)``, the normalization for drift."""
    j0 = abs(functional(form, system, traj.states[0]))
    mass = max(system.slicing.integrate(np.abs(pullback_top(form, system, s))) for s in traj.states)
    return max(j0, mass)
