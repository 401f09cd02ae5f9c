"""Command-line entry point: ``sfcosim run | analyze | compare | report``."""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from importlib import resources

import numpy as np

from .network import NetworkError
from .orchestrator import INTERFACES, CosimRun, ScheduleError, scenario_hash
from .results import ResultError, compare, read_csv, spectrum_report, write_results
from .scenario_io import ScenarioError, parse, serialize
from .spectral import EspritConfig, SampleWindow, SpectralError, analyze
from .wavelink import LinkError

BUNDLED = {"two-area": "two_area.scn"}


def _read_scenario_text(ref: str) -> str:
    if ref in BUNDLED:
        return resources.files("sfcosim").joinpath("data", BUNDLED[ref]).read_text("utf-8")
    with open(ref, encoding="utf-8") as fh:
        return fh.read()


def _column(path: str, column: str, stride: int = 1):
    rs = read_csv(path)
    if column not in rs:
        raise ResultError(f"{path}: no column {column!r} (have {', '.join(rs.names())})")
    t, x = rs[column]
    if np.iscomplexobj(x):
        raise ResultError(f"{path}: column {column!r} is complex; pick a real series")
    if stride < 1:
        raise ResultError(f"stride must be >= 1, got {stride}")
    # keep the last sample so the phase reference stays at the end of the record
    return t[::-1][::stride][::-1], x[::-1][::stride][::-1]


def cmd_run(args) -> int:
    text = _read_scenario_text(args.scenario)
    sc = parse(text)
    subs = []
    for s in sc.subsystems:
        dt = s.dt
        if s.kind == "emt" and args.dt_micro is not None:
            dt = args.dt_micro
        if s.kind == "sfemt" and args.dt_macro is not None:
            dt = args.dt_macro
        subs.append(replace(s, dt=dt))
    sc = replace(sc, subsystems=subs)
    if args.t_end is not None:
        sc = replace(sc, t_end=args.t_end)
    interface = args.interface or sc.interface
    rs = CosimRun(sc, interface, parallel=args.parallel).run()
    rs.meta["scenario_hash"] = scenario_hash(serialize(sc))
    rs.meta["scenario"] = args.scenario
    paths = write_results(rs, args.out)
    print(f"{interface}: {len(paths)} series written to {args.out}")
    return 0


def cmd_analyze(args) -> int:
    t, x = _column(args.csv, args.column, args.stride)
    if x.size < args.window:
        raise ResultError(f"{args.csv}: {x.size} samples, window needs {args.window}")
    dt = float(np.median(np.diff(t)))
    est = analyze(SampleWindow(x[-args.window:], dt, float(t[-1])),
                  EspritConfig(args.threshold, args.max_order))
    print(f"{'f_Hz':>14} {'amplitude':>14} {'phase_rad':>12}")
    for c in est.components:
        print(f"{c.f:14.6f} {c.a:14.6g} {c.phi:12.6f}")
    print(f"model order {est.order_m}, phases referenced to t = {est.t_ref!r} s")
    return 0


def cmd_compare(args) -> int:
    ref = read_csv(args.ref)
    test = read_csv(args.test)
    m = compare(ref, test, args.column, args.test_column, args.t_start)
    print(json.dumps(m, indent=2))
    return 0


def cmd_report(args) -> int:
    t, x = _column(args.csv, args.column, args.stride)
    rep = spectrum_report(t, x, args.window, args.mode, EspritConfig(args.threshold),
                          args.period)
    print(rep.table())
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sfcosim", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a scenario and write one CSV per recorder")
    r.add_argument("--scenario", required=True,
                   help=f"scenario file, or a bundled name ({', '.join(BUNDLED)})")
    r.add_argument("--out", required=True, help="output directory")
    r.add_argument("--interface", choices=INTERFACES)
    r.add_argument("--dt-micro", type=float, help="step of the EMT subsystems (s)")
    r.add_argument("--dt-macro", type=float, help="step of the shifted-frequency subsystems (s)")
    r.add_argument("--t-end", type=float, help="override the simulated horizon (s)")
    r.add_argument("--parallel", action="store_true", help="advance subsystems in threads")
    r.set_defaults(func=cmd_run)

    a = sub.add_parser("analyze", help="sinusoidal components of a CSV column")
    a.add_argument("--csv", required=True)
    a.add_argument("--column", required=True)
    a.add_argument("--window", type=int, default=101, help="odd sample count")
    a.add_argument("--threshold", type=float, default=1e-8,
                   help="relative singular-value threshold for the model order")
    a.add_argument("--stride", type=int, default=1, help="use every N-th sample")
    a.add_argument("--max-order", type=int, help="cap on the number of sinusoids")
    a.set_defaults(func=cmd_analyze)

    c = sub.add_parser("compare", help="error metrics of a test CSV against a reference")
    c.add_argument("--ref", required=True)
    c.add_argument("--test", required=True)
    c.add_argument("--column", required=True)
    c.add_argument("--test-column", help="column name in the test file, if different")
    c.add_argument("--t-start", type=float, default=0.0)
    c.set_defaults(func=cmd_compare)

    s = sub.add_parser("report", help="component table plus negative-frequency content")
    s.add_argument("--csv", required=True)
    s.add_argument("--column", required=True)
    s.add_argument("--window", type=int, default=101)
    s.add_argument("--stride", type=int, default=1, help="use every N-th sample")
    s.add_argument("--mode", choices=("esprit", "delay"), default="esprit")
    s.add_argument("--threshold", type=float, default=1e-8)
    s.add_argument("--period", type=float, default=0.02, help="fundamental period (s)")
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioError, ScheduleError, NetworkError, SpectralError, LinkError,
            ResultError, OSError) as exc:
        print(f"sfcosim {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
