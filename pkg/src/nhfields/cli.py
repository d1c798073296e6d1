"""Command line: ``nhfields {derive,check,simulate,report} MODEL``.

Exit codes: 0 pass, 1 verification or numerical failure, 2 usage or model error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import reports
from .cauchy import EvolutionError, Slicing, read_trajectory, write_trajectory
from .model import ModelError, load_model

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _lemma_list(text: str) -> list[str]:
    items = [s.strip() for s in text.split(",") if s.strip()]
    aliases = {v: k for k, v in reports.LEMMA_NAMES.items()}
    allowed = set(reports.LEMMAS) | set(aliases) | {"all"}
    for s in items:
        if s not in allowed:
            raise argparse.ArgumentTypeError(f"unknown lemma {s!r} (choose from {', '.join(sorted(allowed))})")
    return [aliases.get(s, s) for s in items]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("model", help="model file, or the name of a bundled model")
    common.add_argument("--seed", type=int, default=0, help="seed for randomized checks")
    common.add_argument("--out", help="output path")
    common.add_argument("--threads", type=int, default=1, help="worker threads (computations run single-threaded)")
    common.add_argument("--pipeline", choices=reports.PIPELINES, default="auto",
                        help="use the constrained or unconstrained pipeline (auto: constrained iff the model "
                             "has a [constraints] section)")

    p = _Parser(prog="nhfields", description="Covariant and nonholonomic field theory on jet bundles.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("derive", parents=[common], help="derive field equations, forms and momenta (JSON)")
    c = sub.add_parser("check", parents=[common], help="verify lemmas, Noether and the momentum equation")
    c.add_argument("--lemmas", type=_lemma_list, default=["all"],
                   help="comma-separated subset of 3.1,3.2,A.1,noether,momentum,all "
                        "(or cartan_identity,prolonged_bracket,appendix_identities,momentum_equation)")
    c.add_argument("--trials", type=int, default=20, help="random trials and samples per check")
    c.add_argument("--lift", choices=("prolonged", "verbatim", "both"), default="both")
    s = sub.add_parser("simulate", parents=[common], help="evolve the initial data and write a trajectory CSV")
    s.add_argument("--dt", type=float)
    s.add_argument("--steps", type=int)
    s.add_argument("--grid", type=int, help="nodes per spatial axis")
    s.add_argument("--store-every", type=int)
    r = sub.add_parser("report", parents=[common], help="conservation table from a trajectory CSV")
    r.add_argument("trajectory", help="CSV written by simulate")
    r.add_argument("--grid", type=int, help="nodes per spatial axis (default: inferred from the CSV)")
    return p


def _write(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_derive(args, model) -> int:
    _write(reports.dumps(reports.derive_report(model, args.pipeline)), args.out)
    return EXIT_OK


def cmd_check(args, model) -> int:
    if args.trials < 1:
        print("nhfields: error: --trials must be positive", file=sys.stderr)
        return EXIT_USAGE
    rep = reports.check_report(model, args.lemmas, args.trials, args.seed, args.lift, args.pipeline)
    lines = reports.summary_lines(rep)
    if args.out:
        Path(args.out).write_text(reports.dumps(rep))
        print("\n".join(lines))
    else:
        print("\n".join(lines))
        sys.stdout.write(reports.dumps(rep))
    return EXIT_OK if rep["passed"] else EXIT_FAIL


def cmd_simulate(args, model) -> int:
    for k in ("dt", "steps", "grid", "store_every"):
        v = getattr(args, k)
        if v is not None and v <= 0:
            print(f"nhfields: error: --{k.replace('_', '-')} must be positive", file=sys.stderr)
            return EXIT_USAGE
    system, traj = reports.simulate(model, args.pipeline, args.grid, args.dt, args.steps, args.store_every)
    out = args.out or "traj.csv"
    write_trajectory(traj, model.chart, out)
    cd = max(d["constraint_defect"] for d in traj.diagnostics)
    hd = max(d["holonomy_defect"] for d in traj.diagnostics)
    print(f"wrote {out}: {len(traj.states)} stored states x {system.slicing.nodes} nodes; "
          f"max|phi| = {cd:.3e}, holonomy defect = {hd:.3e}")
    return EXIT_OK


def _infer_grid(path: str, chart) -> int:
    if chart.n == 0:
        return 1
    with open(path) as fh:
        next(fh)
        first = None
        count = 0
        for line in fh:
            t = line.split(",", 1)[0]
            if first is None:
                first = t
            elif t != first:
                break
            count += 1
    N = round(count ** (1.0 / chart.n))
    if N**chart.n != count:
        raise ValueError(f"{count} nodes per time level is not a square grid in {chart.n} dimensions")
    return N


def cmd_report(args, model) -> int:
    from .cauchy import FieldSystem

    N = args.grid or _infer_grid(args.trajectory, model.chart)
    sl = Slicing(model.chart.n, N)
    system = FieldSystem(model.lagrangian, reports.constraints_for(model, args.pipeline), sl)
    traj = read_trajectory(args.trajectory, model.chart, sl)
    table = reports.conservation(model, system, traj)
    out = args.out or "conservation.csv"
    table.write(out)
    print(f"wrote {out}: {len(table.rows)} rows")
    for c in table.columns:
        if c.startswith("J_") or c.startswith("Jnh_"):
            v = table.column(c)
            print(f"{c}: max |change| = {float(np.max(np.abs(v - v[0]))):.3e}")
        elif c.startswith("residual"):
            print(f"{c}: max |value| = {float(np.max(np.abs(table.column(c)))):.3e}")
    return EXIT_OK


COMMANDS = {"derive": cmd_derive, "check": cmd_check, "simulate": cmd_simulate, "report": cmd_report}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        model = load_model(args.model)
    except FileNotFoundError as exc:
        print(f"nhfields: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ModelError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args, model)
    except EvolutionError as exc:
        print(f"nhfields {args.command}: evolve: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (ValueError, ArithmeticError) as exc:
        print(f"nhfields {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE if isinstance(exc, ValueError) else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
