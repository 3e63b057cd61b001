"""Command line: ``cbsa run | validate | discharge | batch``.

Exit codes: 0 all checked properties held, 2 a property was violated,
3 the scenario failed to parse, validate or discharge.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from .outputs import emit_outputs
from .properties import CHECKS, run_scenario
from .scenario import ParseError, ValidationError, load_scenario, shipped
from .system import DischargeError, discharge_report

OK, VIOLATION, INVALID = 0, 2, 3


def _resolve(name: str) -> Path:
    p = Path(name)
    if p.exists() or p.suffix:
        return p
    return shipped(name)


def _checks(text: str) -> tuple[str, ...]:
    items = tuple(c.strip().lower() for c in text.split(",") if c.strip())
    bad = set(items) - set(CHECKS)
    if bad:
        raise argparse.ArgumentTypeError(f"unknown check(s): {', '.join(sorted(bad))}")
    return items


def _out_root(arg) -> Path:
    if arg:
        return Path(arg)
    return Path(os.environ.get("CBSA_OUT_DIR", "cbsa_out"))


def run_one(path, ticks=None, seed=None, out=None, plot=True, checks=CHECKS, fail_fast=False,
            out_is_root=False) -> tuple[int, str]:
    """Run one scenario file; returns (exit code, one-line report)."""
    try:
        s = load_scenario(path)
    except (ParseError, ValidationError, OSError) as exc:
        return INVALID, f"{path}: {exc}"
    if seed is not None:
        s = replace(s, seed=seed)
    try:
        res = run_scenario(s, ticks=ticks, checks=checks, fail_fast=fail_fast)
    except DischargeError as exc:
        return INVALID, f"{s.name}: {exc}"
    if out is None:
        out_dir = _out_root(None) / s.name
    else:
        out_dir = Path(out) / s.name if out_is_root else Path(out)
    emit_outputs(res, out_dir, plot)
    status = "PASS" if res.ok else "FAIL"
    line = (f"{s.name}: {status} ticks={res.ticks} targets={len(res.visits)}/{len(s.targets)} "
            f"switches={len(res.switches)} violations={len(res.violations)} -> {out_dir}")
    for v in res.violations[:5]:
        line += f"\n  [{v.prop}] tick {v.tick}: {v.message}"
    return (OK if res.ok else VIOLATION), line


def _batch_job(args):
    return run_one(*args)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="cbsa", description="Component-based Simplex rover simulator and checker")
    sub = ap.add_subparsers(dest="cmd", required=True)

    r = sub.add_parser("run", help="simulate one scenario and check properties")
    r.add_argument("scenario", help="scenario JSON path or shipped name (e.g. paper_fig3)")
    r.add_argument("--ticks", type=int, default=None, help="tick budget (default: scenario max_ticks)")
    r.add_argument("--seed", type=int, default=None)
    r.add_argument("--out", default=None, help="output directory (default: $CBSA_OUT_DIR/<name>)")
    r.add_argument("--no-plot", action="store_true", help="write the trace CSV only")
    r.add_argument("--check", type=_checks, default=CHECKS, help="comma list from es,cf,mc")
    r.add_argument("--fail-fast", action="store_true", help="abort at the first violation")

    v = sub.add_parser("validate", help="parse and validate a scenario")
    v.add_argument("scenario")

    d = sub.add_parser("discharge", help="static assume-guarantee discharge check")
    d.add_argument("scenario")

    b = sub.add_parser("batch", help="run every scenario in a directory")
    b.add_argument("dir")
    b.add_argument("--parallel", type=int, default=1)
    b.add_argument("--out", default=None)
    b.add_argument("--no-plot", action="store_true")
    b.add_argument("--check", type=_checks, default=CHECKS)
    b.add_argument("--fail-fast", action="store_true")

    a = ap.parse_args(argv)

    if a.cmd == "run":
        code, line = run_one(_resolve(a.scenario), a.ticks, a.seed, a.out, not a.no_plot, a.check, a.fail_fast)
        print(line)
        return code

    if a.cmd == "validate":
        try:
            s = load_scenario(_resolve(a.scenario))
        except ValidationError as exc:
            print("INVALID")
            for p in exc.problems:
                print(f"  {p}")
            return INVALID
        except (ParseError, OSError) as exc:
            print(f"PARSE ERROR: {exc}")
            return INVALID
        print(f"{s.name}: valid ({s.mode}, {len(s.obstacles)} obstacles, {len(s.targets)} targets)")
        return OK

    if a.cmd == "discharge":
        try:
            s = load_scenario(_resolve(a.scenario))
        except (ParseError, ValidationError, OSError) as exc:
            print(exc)
            return INVALID
        rep = discharge_report(s)
        print(rep)
        return OK if rep.passed else INVALID

    files = sorted(Path(a.dir).glob("*.json"))
    if not files:
        print(f"no scenarios in {a.dir}")
        return INVALID
    root = _out_root(a.out)
    jobs = [(f, None, None, root, not a.no_plot, a.check, a.fail_fast, True) for f in files]
    if a.parallel > 1:
        with ProcessPoolExecutor(max_workers=a.parallel) as pool:
            results = list(pool.map(_batch_job, jobs))
    else:
        results = [_batch_job(j) for j in jobs]
    worst = OK
    for code, line in results:
        print(line)
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    sys.exit(main())
