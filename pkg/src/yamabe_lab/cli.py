"""Command-line surface.

    yamabe-lab <subcommand> --scenario <path> --out <dir> [--threads N]
               [--grid N] [--tol X]

Subcommands: oracle (evaluate closed forms), solve (one domain), exhaust
(full schedule), probe (reuse cached fields), report (summarize + assert).
Exit codes: 0 success, 2 assertion failure, 3 missing inputs, 4 solver
failure.
"""

import argparse
import dataclasses
import os
import sys

import numpy as np

from . import oracles, radial, reports
from .domain import BallExclusion, DomainSpec, TubeExclusion
from .conformal import Background
from .errors import MissingReport, SchemaError, YamabeLabError
from .scenario import load_scenario

EXIT_OK = 0
EXIT_ASSERT = 2
EXIT_MISSING = 3
EXIT_SOLVER = 4


def _parser():
    p = argparse.ArgumentParser(prog="yamabe-lab",
                                description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("oracle", "solve", "exhaust", "probe", "report"):
        sp = sub.add_parser(name)
        sp.add_argument("--scenario", required=True)
        sp.add_argument("--out", required=True)
        sp.add_argument("--threads", type=int, default=None)
        sp.add_argument("--grid", type=int, default=None)
        sp.add_argument("--tol", type=float, default=None)
    return p


def _load(args):
    if not os.path.exists(args.scenario):
        print(f"scenario file not found: {args.scenario}", file=sys.stderr)
        raise SystemExit(EXIT_MISSING)
    try:
        scn = load_scenario(args.scenario)
    except SchemaError as exc:
        print("scenario schema violations:", file=sys.stderr)
        for v in exc.violations:
            print(f"  {v}", file=sys.stderr)
        raise SystemExit(EXIT_MISSING)
    if args.grid is not None or args.tol is not None:
        params = scn.params
        kw = {}
        if args.grid is not None:
            kw["grid_radial"] = args.grid
            kw["grid_axisym"] = (args.grid, args.grid)
        if args.tol is not None:
            kw["tol"] = args.tol
        scn.params = dataclasses.replace(params, **kw)
    if args.threads is not None:
        os.environ["YAMABE_LAB_THREADS"] = str(args.threads)
    return scn


def _oracle_spec(scn):
    o = scn.oracle
    kind = o.get("kind")
    n = scn.n
    if kind == "exterior_ball":
        return oracles.exterior_ball(n, np.asarray(o.get("center", [0.0] * n)),
                                     float(o["radius"]))
    if kind == "poincare_ball":
        return oracles.poincare_ball(n, float(o.get("radius", 1.0)))
    if kind == "half_space":
        return oracles.half_space(n)
    if kind == "tube_complement":
        return oracles.tube_complement(n, int(o["k"]))
    if kind == "green_pole":
        return oracles.green_pole(n, np.asarray(o["pole"]),
                                  float(o.get("coefficient", 1.0)))
    if kind == "multipole":
        return oracles.multipole(n, np.asarray(o["poles"]),
                                 np.asarray(o["coefficients"]))
    raise SchemaError([f"oracle.kind: unknown kind {kind!r}"])


def _cmd_oracle(scn, out_dir):
    spec = _oracle_spec(scn)
    pts = scn.oracle.get("points", [])
    if not pts:
        print("no oracle.points configured", file=sys.stderr)
        return EXIT_MISSING
    os.makedirs(out_dir, exist_ok=True)
    lines = ["point,u,v,residual"]
    for pt in pts:
        x = np.asarray(pt, dtype=float)
        u = oracles.oracle_u(spec, x)
        v = oracles.oracle_v(spec, x)
        res = oracles.oracle_residual(spec, x)
        print(f"x={pt}  u={u!r}  v={v!r}  residual={res!r}")
        lines.append(f"\"{pt}\",{u!r},{v!r},{res!r}")
    with open(os.path.join(out_dir, "oracle.csv"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return EXIT_OK


def _cmd_solve(scn, out_dir):
    os.makedirs(os.path.join(out_dir, "fields"), exist_ok=True)
    bg = Background(scn.background if scn.background == "flat" else "flat",
                    scn.n)
    r0 = scn.radii[0] if scn.radii else scn.r0
    if scn.schedule_kind == "tube":
        dom = DomainSpec(bg, (TubeExclusion(scn.tube_k, r0),),
                         r0 * 64.0)
    else:
        dom = DomainSpec(bg, (BallExclusion(np.zeros(scn.n), r0),),
                         scn.truncation)
    fld = radial.solve_radial(dom, scn.params)
    key = reports.scenario_key(scn, 0, "single")
    path = os.path.join(out_dir, "fields", f"single_{key}.bin")
    reports.save_field(path, fld, key)
    print(f"converged: residual={fld.residual!r} iters={fld.newton_iters} "
          f"nodes={len(fld.geometry.nodes)}")
    print(f"field cached at {path}")
    return EXIT_OK


def main(argv=None):
    args = _parser().parse_args(argv)
    scn = _load(args)
    try:
        if args.command == "oracle":
            return _cmd_oracle(scn, args.out)
        if args.command == "solve":
            return _cmd_solve(scn, args.out)
        if args.command == "exhaust":
            summary = reports.run_scenario(scn, args.out, solve=True)
            print(f"wrote {os.path.join(args.out, 'run.csv')}")
            for pid, v in summary["verdicts"].items():
                print(f"probe {pid}: {v}")
            return EXIT_OK
        if args.command == "probe":
            try:
                summary = reports.run_scenario(scn, args.out, solve=False)
            except MissingReport:
                print("no cached fields; run `exhaust` first", file=sys.stderr)
                return EXIT_MISSING
            for pid, v in summary["verdicts"].items():
                print(f"probe {pid}: {v}")
            return EXIT_OK
        if args.command == "report":
            try:
                text, ok = reports.report(scn, args.out)
            except MissingReport as exc:
                print(f"missing report: {exc}", file=sys.stderr)
                return EXIT_MISSING
            print(text)
            return EXIT_OK if ok else EXIT_ASSERT
    except MissingReport as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_MISSING
    except YamabeLabError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
