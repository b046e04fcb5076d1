"""Command-line interface: run scenarios, verify identities, sweep parameters.

Exit codes: 0 success, 1 verification-check failure, 2 configuration error,
3 numeric failure (divergence or domain error).
"""

from __future__ import annotations

import argparse
import concurrent.futures
import os
import sys
import time

from . import engine, traceio, verify
from .errors import BlowUpError, ConfigError, DomainError, NpregError, NumericError
from .scenarios import apply_overrides, load_scenario, parse_override, preset_names

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

DEFAULT_PLOT_SERIES = ("e", "y", "u")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="npreg",
        description="Internal-model output regulation with nonparametric steady-state learning.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate a scenario and write trace/metrics/plot data")
    run.add_argument("scenario", help=f"preset name ({', '.join(preset_names())}) or YAML file")
    run.add_argument("--set", dest="overrides", action="append", default=[],
                     metavar="KEY.PATH=VALUE", help="override a scenario key (repeatable)")
    run.add_argument("--out", default=".", help="output directory (default: current)")
    run.add_argument("--backend", default="auto", choices=("auto", "compiled", "pure"))
    run.add_argument("--tol", type=float, default=0.05, help="settle tolerance for metrics")
    run.add_argument("--tail-window", type=float, default=20.0,
                     help="tail window (s) for RMS metrics")

    ver = sub.add_parser("verify", help="run verification suites and print a pass/fail table")
    ver.add_argument("suites", nargs="*", default=[],
                     help=f"suites to run (default: all of {', '.join(verify.SUITES)})")
    ver.add_argument("--seed", type=int, default=0, help="seed for randomized checks")

    sweep = sub.add_parser("sweep", help="run a cartesian grid of scenario variants")
    sweep.add_argument("scenario", help="preset name or YAML file")
    sweep.add_argument("--grid", action="append", default=[], required=True,
                       metavar="KEY.PATH=V1,V2,...", help="grid axis (repeatable)")
    sweep.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY.PATH=VALUE", help="fixed override applied to every point")
    sweep.add_argument("--workers", type=int, default=1, help="concurrent scenario runs")
    sweep.add_argument("--out", default=".", help="output directory")
    sweep.add_argument("--tol", type=float, default=0.05)
    sweep.add_argument("--tail-window", type=float, default=20.0)
    return parser


def cmd_run(args) -> int:
    scen = apply_overrides(load_scenario(args.scenario), args.overrides)
    os.makedirs(args.out, exist_ok=True)
    t0 = time.perf_counter()
    trace = engine.simulate(scen, backend=args.backend)
    elapsed = time.perf_counter() - t0
    m = engine.metrics(trace, tol=args.tol, tail_window=args.tail_window,
                       a_true=scen.regulator.a_true)

    trace_path = os.path.join(args.out, f"{scen.name}_trace.csv")
    traceio.write_csv(trace, trace_path)
    report = traceio.format_metrics_report(
        scen.name, m, args.tol, args.tail_window,
        extra={
            "samples": len(trace),
            "backend": engine.backend_name(args.backend),
            "wall_time_s": f"{elapsed:.3f}",
        },
    )
    metrics_path = os.path.join(args.out, f"{scen.name}_metrics.txt")
    with open(metrics_path, "w", encoding="utf-8") as fh:
        fh.write(report)
    series = [s for s in DEFAULT_PLOT_SERIES if s in trace.columns]
    series += [c for c in trace.column_names if c.startswith("ahat")]
    traceio.emit_plot(trace, series, args.out, scen.name)

    sys.stdout.write(report)
    print(f"wrote {trace_path}, {metrics_path}, and plot data")
    return EXIT_OK


def cmd_verify(args) -> int:
    names = args.suites or None
    try:
        results, ok = verify.run_suites(names, seed=args.seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    width = max(len(f"{r.suite}/{r.name}") for r in results)
    for r in results:
        mark = "PASS" if r.passed else "FAIL"
        print(f"{mark}  {f'{r.suite}/{r.name}':<{width}}  {r.detail}")
    n_fail = sum(not r.passed for r in results)
    print(f"{len(results) - n_fail}/{len(results)} checks passed")
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def _parse_grid(grid_args) -> list[tuple[str, list]]:
    axes = []
    for item in grid_args:
        path, value = parse_override(item)
        key = ".".join(path)
        if isinstance(value, list):
            values = value
        elif isinstance(value, str) and "," in value:
            values = [parse_override(f"x={v}")[1] for v in value.split(",")]
        elif value is None:
            values = []
        else:
            values = [value]
        axes.append((key, values))
    return axes


def _sweep_point(source: str, fixed: list[str], assignment: list[tuple[str, object]],
                 tol: float, tail_window: float) -> dict:
    row = {key: val for key, val in assignment}
    try:
        scen = apply_overrides(load_scenario(source), list(fixed))
        scen = apply_overrides(scen, [(tuple(k.split(".")), v) for k, v in assignment])
        trace = engine.simulate(scen)
        m = engine.metrics(trace, tol=tol, tail_window=tail_window,
                           a_true=scen.regulator.a_true)
        row.update(
            status="ok",
            settle_time="" if m.settle_time is None else repr(m.settle_time),
            tail_rms=repr(m.tail_rms),
            max_abs_e=repr(m.max_abs_e),
            a_err_final="" if m.a_err_final is None else repr(m.a_err_final),
        )
    except NpregError as exc:
        row.update(status=f"error: {exc}", settle_time="", tail_rms="",
                   max_abs_e="", a_err_final="")
    return row


def cmd_sweep(args) -> int:
    scen0 = apply_overrides(load_scenario(args.scenario), args.overrides)  # validate early
    axes = _parse_grid(args.grid)
    keys = [k for k, _ in axes]

    points: list[list[tuple[str, object]]] = [[]]
    for key, values in axes:
        points = [p + [(key, v)] for p in points for v in values]
    if any(not values for _, values in axes):
        points = []

    os.makedirs(args.out, exist_ok=True)
    out_path = os.path.join(args.out, f"{scen0.name}_sweep.csv")
    header = keys + ["status", "settle_time", "tail_rms", "max_abs_e", "a_err_final"]

    rows = []
    if points:
        if args.workers > 1:
            with concurrent.futures.ProcessPoolExecutor(max_workers=args.workers) as pool:
                futures = [
                    pool.submit(_sweep_point, args.scenario, args.overrides, p,
                                args.tol, args.tail_window)
                    for p in points
                ]
                rows = [f.result() for f in futures]
        else:
            rows = [
                _sweep_point(args.scenario, args.overrides, p, args.tol, args.tail_window)
                for p in points
            ]

    with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(str(row.get(k, "")) for k in header) + "\n")
    print(f"wrote {out_path} ({len(rows)} points)")
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "verify":
            return cmd_verify(args)
        return cmd_sweep(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (BlowUpError, DomainError, NumericError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
