"""Command line: ``bsvherald run|verify|presets|scenarios``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .bundle import run
from .compute import RunError
from .scenario import Scenario, ScenarioError, available_presets, bundled_dir, find_scenario
from .verify import VerifyError, verify


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bsvherald", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)

    r = sub.add_parser("run", help="run a scenario file or bundled scenario name")
    r.add_argument("scenario")
    r.add_argument("--out", type=Path, default=None, help="bundle directory (default: out/<name>)")
    r.add_argument("--jobs", type=int, default=None, help="worker processes (default: all cores)")
    r.add_argument("--preset", default=None, help="full-sim preset: fast, paper or a named preset")

    v = sub.add_parser("verify", help="check a bundle against an expectations file")
    v.add_argument("bundle", type=Path)
    v.add_argument("expectations")
    v.add_argument("--report", type=Path, default=None, help="write the JSON report here")

    p = sub.add_parser("presets", help="numerical presets")
    p.add_argument("action", choices=["list"])

    s = sub.add_parser("scenarios", help="bundled scenarios")
    s.add_argument("action", choices=["list"])
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.cmd == "run":
            sc = Scenario.load(find_scenario(args.scenario))
            out = run(sc, args.out or Path("out") / sc.name, jobs=args.jobs, preset=args.preset)
            print(out)
            return 0
        if args.cmd == "verify":
            rep = verify(args.bundle, args.expectations)
            for line in rep.lines():
                print(line)
            if args.report:
                args.report.write_text(json.dumps(rep.to_json(), indent=2, default=str) + "\n")
            return 0 if rep.passed else 1
        if args.cmd == "presets":
            for name, p in sorted(available_presets().items()):
                flag = "  [long-running]" if p["long_running"] else ""
                print(f"{name:16s} dt={p['dt']:g} n_max={p['n_max']}{flag}")
            return 0
        for f in sorted(bundled_dir().glob("*.scenario")):
            sc = Scenario.load(f)
            budget = f"{sc.budget_seconds:g} s" if sc.budget_seconds else "-"
            print(f"{sc.name:12s} {sc.model:10s} budget {budget:8s} {sc.description}")
        return 0
    except (ScenarioError, VerifyError, RunError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
