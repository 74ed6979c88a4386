"""Command line front end.

    pdegensol list                  families and their shapes
    pdegensol show 3.7              one family in full
    pdegensol verify 3.1 3.2 ...    randomized verification (default: all)
    pdegensol sample 3.1 --grid t=0.2:1.2:9 --grid x=0.2:1.2:9 -o w.csv

Exit codes: 0 all verified PASS, 1 any FAIL, 2 unknown family id,
3 any INDETERMINATE (and no FAIL), 4 I/O or internal error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .catalog import family_ids, get_family
from .expr_core import to_text
from .numeric import EvalContext, IndexSet, JetBatch, NumericConfig, eval_batch
from .verifier import draw_scenario, verify_family, HINTS, SamplingHints


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="pdegensol",
        description="verify closed-form general solutions of nonlinear PDEs")
    sub = ap.add_subparsers(dest="cmd", required=True)

    sub.add_parser("list", help="list the catalog")

    sp = sub.add_parser("show", help="print one family in full")
    sp.add_argument("id")

    vp = sub.add_parser("verify", help="randomized residual verification")
    vp.add_argument("ids", nargs="*",
                    help="family ids; empty or the word 'all' means "
                         "the whole catalog")
    vp.add_argument("--seed", type=int, default=1)
    vp.add_argument("--scenarios", type=int, default=5)
    vp.add_argument("--points", type=int, default=20)
    vp.add_argument("--tol", type=float, default=None,
                    help="override the per-family residual tolerance")
    vp.add_argument("--xcheck-tol", type=float, default=1e-4)
    vp.add_argument("--base-shift", type=float, default=0.0,
                    help="shift every integral base point by this amount")
    vp.add_argument("--set", dest="overrides", action="append", default=[],
                    metavar="PARAM=VALUE",
                    help="pin a parameter (repeatable)")
    vp.add_argument("--probe-branches", action="store_true",
                    help="also try the mirrored implicit-root branch")
    vp.add_argument("--threads", type=int, default=None)
    vp.add_argument("--json", dest="as_json", nargs="?", const=True,
                    default=None, metavar="PATH",
                    help="emit report records as JSON, to PATH if given")

    gp = sub.add_parser(
        "sample",
        help="tabulate one sampled solution on a rectangular grid")
    gp.add_argument("id")
    gp.add_argument("--grid", action="append", default=[],
                    metavar="VAR=LO:HI:COUNT",
                    help="grid for one variable (others default to 5 "
                         "points over the sample box)")
    gp.add_argument("--seed", type=int, default=1)
    gp.add_argument("-o", "--out", default=None,
                    help="CSV path; a .scenario.json sidecar records the "
                         "drawn parameters and functions")
    return ap


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.cmd == "list":
            return _cmd_list()
        if args.cmd == "show":
            return _cmd_show(args)
        if args.cmd == "verify":
            return _cmd_verify(args)
        if args.cmd == "sample":
            return _cmd_sample(args)
        return 4
    except KeyError as exc:
        print(f"unknown family id: {exc.args[0]}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


def _cmd_list() -> int:
    print(f"{'id':6} {'order':5} {'vars':4} {'depth':5}  summary")
    for fid in family_ids():
        fam = get_family(fid)
        print(f"{fid:6} {fam.order:5} {len(fam.variables):4} "
              f"{fam.sol_depth:5}  {fam.describe()}")
    return 0


def _cmd_show(args) -> int:
    fam = get_family(args.id)
    print(f"family {fam.family_id}: {fam.describe()}")
    print(f"  variables:  {', '.join(fam.variables)}")
    if fam.parameters:
        print(f"  parameters: {', '.join(fam.parameters)}")
    if fam.functions:
        fs = ", ".join(f"{n}/{a}" for n, a in sorted(fam.functions.items()))
        print(f"  functions:  {fs}")
    if fam.constraints:
        print(f"  constraints: {' ; '.join(fam.constraints)}")
    print(f"  pde:      {to_text(fam.pde)} = 0")
    print(f"  solution: w = {to_text(fam.solution)}")
    if fam.note:
        print(f"  note: {fam.note}")
    return 0


def _parse_overrides(pairs):
    out = {}
    for item in pairs:
        name, _, val = item.partition("=")
        if not _ or not name:
            raise ValueError(f"bad --set {item!r}, expected PARAM=VALUE")
        out[name] = float(val)
    return out


def _cmd_verify(args) -> int:
    if not args.ids or args.ids == ["all"]:
        ids = family_ids()
    else:
        ids = args.ids
    for fid in ids:
        get_family(fid)  # surface unknown ids before any work
    overrides = _parse_overrides(args.overrides) or None
    kw = dict(
        n_scenarios=args.scenarios,
        n_points=args.points,
        seed=args.seed,
        xcheck_tol=args.xcheck_tol,
        base_shift=args.base_shift,
        param_overrides=overrides,
        probe_branches=args.probe_branches,
    )
    if args.tol is not None:
        kw["tol_rel"] = args.tol

    threads = args.threads
    if threads is None:
        import os

        threads = int(os.environ.get("PDEGENSOL_THREADS", "1"))
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as ex:
            futs = [ex.submit(verify_family, fid, **kw) for fid in ids]
            reports = [f.result() for f in futs]
    else:
        reports = [verify_family(fid, **kw) for fid in ids]

    if args.as_json:
        payload = json.dumps([r.to_dict() for r in reports], indent=2,
                             sort_keys=True)
        if args.as_json is True:
            print(payload)
        else:
            with open(args.as_json, "w") as fh:
                fh.write(payload + "\n")
    else:
        for r in reports:
            stamp = (f"{r.family:6} {r.verdict:13} "
                     f"max rel {r.max_rel_residual:9.2e}  "
                     f"xcheck {r.xcheck_max_dev:9.2e}  "
                     f"({r.wall_time_s:6.2f}s)")
            print(stamp)
            for note in r.notes:
                print(f"       note: {note}")
            if r.branch_probe:
                print(f"       branch probe: {r.branch_probe}")
        npass = sum(r.verdict == "PASS" for r in reports)
        print(f"{npass}/{len(reports)} PASS")

    verdicts = {r.verdict for r in reports}
    if "FAIL" in verdicts:
        return 1
    if "INDETERMINATE" in verdicts:
        return 3
    return 0


def _parse_grid(pairs, fam):
    ranges = {}
    for item in pairs:
        name, _, spec = item.partition("=")
        parts = spec.split(":")
        if not _ or len(parts) != 3:
            raise ValueError(
                f"bad --grid {item!r}, expected VAR=LO:HI:COUNT")
        if name not in fam.variables:
            raise ValueError(f"{fam.family_id} has no variable {name!r}")
        lo, hi, cnt = float(parts[0]), float(parts[1]), int(parts[2])
        if cnt < 1:
            raise ValueError("grid count must be >= 1")
        ranges[name] = np.linspace(lo, hi, cnt)
    hints = HINTS.get(fam.family_id, SamplingHints())
    for v in fam.variables:
        ranges.setdefault(v, np.linspace(hints.box[0], hints.box[1], 5))
    return [ranges[v] for v in fam.variables]


def _function_dict(fi):
    d = {
        "name": fi.name,
        "arity": fi.arity,
        "coeffs": [[list(exps), c] for exps, c in fi.coeffs],
    }
    if fi.sin_amp:
        d.update(sin_amp=fi.sin_amp, sin_freq=fi.sin_freq,
                 sin_phase=fi.sin_phase)
    return d


def _cmd_sample(args) -> int:
    fam = get_family(args.id)
    axes = _parse_grid(args.grid, fam)
    cfg = NumericConfig()
    rng = np.random.default_rng(
        np.random.SeedSequence([args.seed,
                                int.from_bytes(fam.family_id.encode(),
                                               "big")]))
    scn = draw_scenario(fam, rng, 0, 8, cfg)

    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    nv = len(fam.variables)
    iset0 = IndexSet(fam.variables, {(0,) * nv})
    env = {
        v: JetBatch.variable(iset0, v, pts[:, i].copy())
        for i, v in enumerate(fam.variables)
    }
    ctx = EvalContext(iset0, scn, cfg)
    w = eval_batch(fam.solution, env, ctx, len(pts)).value()
    n_bad = int((~np.isfinite(w)).sum())

    scen_doc = {
        "family": fam.family_id,
        "seed": args.seed,
        "parameters": {k: float(v) for k, v in
                       sorted(scn.parameters.items())},
        "functions": {k: _function_dict(v) for k, v in
                      sorted(scn.functions.items())},
        "base_points": dict(sorted(scn.base_points.items())),
    }

    header = list(fam.variables) + ["w"]
    rows = ([f"{x:.10g}" for x in pts[i]] + [f"{w[i]:.17g}"]
            for i in range(len(pts)))
    if args.out:
        out = Path(args.out)
        with out.open("w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(header)
            wr.writerows(rows)
        side = out.with_suffix(".scenario.json")
        side.write_text(json.dumps(scen_doc, indent=2, sort_keys=True))
        print(f"wrote {len(pts)} rows to {out} "
              f"({n_bad} outside the solution's domain), scenario in {side}")
    else:
        print("# scenario: " + json.dumps(scen_doc, sort_keys=True))
        wr = csv.writer(sys.stdout)
        wr.writerow(header)
        wr.writerows(rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
