"""Full-catalog verification with per-family progress lines.

Thin wrapper over the library verifier for interactive runs: prints each
family's verdict as it lands (slowest families stand out), then a summary.
`--json PATH` additionally dumps the report records.

    python scripts/verify_all.py
    python scripts/verify_all.py 3.7 3.8 --scenarios 2 --points 8
    python scripts/verify_all.py --seed 7 --json /tmp/reports.json
"""

from __future__ import annotations

import argparse
import json
import sys
import time

sys.path.insert(0, "src")

from pdegensol.catalog import family_ids
from pdegensol.verifier import verify_family


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("ids", nargs="*", help="family ids (default: all)")
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--scenarios", type=int, default=5)
    ap.add_argument("--points", type=int, default=20)
    ap.add_argument("--base-shift", type=float, default=0.0)
    ap.add_argument("--probe-branches", action="store_true")
    ap.add_argument("--json", dest="json_path", default=None)
    args = ap.parse_args(argv)

    ids = args.ids or family_ids()
    reports = []
    t0 = time.monotonic()
    for fid in ids:
        r = verify_family(
            fid,
            n_scenarios=args.scenarios,
            n_points=args.points,
            seed=args.seed,
            base_shift=args.base_shift,
            probe_branches=args.probe_branches,
        )
        reports.append(r)
        line = (f"{r.family:6} {r.verdict:13} max rel {r.max_rel_residual:9.2e}"
                f"  xcheck {r.xcheck_max_dev:9.2e}  {r.wall_time_s:6.2f}s")
        print(line, flush=True)
        for note in r.notes:
            print(f"       note: {note}")
        if r.branch_probe:
            print(f"       branch probe: {r.branch_probe}")

    wall = time.monotonic() - t0
    npass = sum(r.verdict == "PASS" for r in reports)
    worst = max((r.max_rel_residual for r in reports), default=float("nan"))
    print(f"\n{npass}/{len(reports)} PASS, worst rel {worst:.2e}, "
          f"{wall:.1f}s total")

    if args.json_path:
        with open(args.json_path, "w") as fh:
            json.dump([r.to_dict() for r in reports], fh, indent=2,
                      sort_keys=True)
            fh.write("\n")
        print(f"wrote {args.json_path}")

    bad = {r.verdict for r in reports} - {"PASS"}
    return 1 if "FAIL" in bad else (3 if bad else 0)


if __name__ == "__main__":
    sys.exit(main())
