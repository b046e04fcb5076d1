"""Trace serialization: CSV with round-trip-exact floats, plot-data emission.

CSV numbers are written with ``repr``, i.e. the shortest decimal string that
parses back to the identical double, so a written trace re-reads bit-for-bit.
Plot output is data-only: one ``<base>_<series>.xy`` file of ``t value``
pairs per requested series plus a small text index, consumable by any
plotting tool.
"""

from __future__ import annotations

import os

import numpy as np

from .engine import Metrics, Trace


def write_csv(trace: Trace, path) -> None:
    names = trace.column_names
    cols = [trace.column(n) for n in names]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(["t"] + names) + "\n")
        for i in range(len(trace)):
            row = [repr(float(trace.times[i]))]
            row += [repr(float(c[i])) for c in cols]
            fh.write(",".join(row) + "\n")


def read_csv(path, name: str | None = None) -> Trace:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        names = header.split(",")
        if names[0] != "t":
            raise ValueError(f"{path}: expected leading 't' column, got {names[0]!r}")
        rows = [line.strip() for line in fh if line.strip()]
    data = np.array([[float(v) for v in line.split(",")] for line in rows])
    if data.size == 0:
        data = data.reshape(0, len(names))
    if name is None:
        name = os.path.splitext(os.path.basename(path))[0]
    columns = {col: data[:, j + 1] for j, col in enumerate(names[1:])}
    return Trace(name=name, times=data[:, 0], columns=columns)


def emit_plot(trace: Trace, series, out_dir, base: str | None = None) -> list[str]:
    """Write (t, value) pair files for the named series; returns the paths."""
    base = base or trace.name
    os.makedirs(out_dir, exist_ok=True)
    written = []
    for s in series:
        if s not in trace.columns:
            raise ValueError(f"trace has no series {s!r}")
        path = os.path.join(out_dir, f"{base}_{s}.xy")
        col = trace.column(s)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for t, v in zip(trace.times, col):
                fh.write(f"{float(t)!r} {float(v)!r}\n")
        written.append(path)
    index = os.path.join(out_dir, f"{base}_plots.txt")
    with open(index, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"plot data for trace {trace.name!r}\n")
        for s, p in zip(series, written):
            fh.write(f"{s}: {os.path.basename(p)} (columns: t {s})\n")
    written.append(index)
    return written


def format_metrics_report(name: str, m: Metrics, tol: float, tail_window: float,
                          extra: dict | None = None) -> str:
    lines = [f"scenario: {name}"]
    settle = "never" if m.settle_time is None else f"{m.settle_time:.6g} s"
    lines.append(f"settle_time(|e| < {tol:g}): {settle}")
    lines.append(f"tail_rms(e, last {tail_window:g} s): {m.tail_rms:.6g}")
    lines.append(f"max_abs_e: {m.max_abs_e:.6g}")
    if m.a_err_final is not None:
        lines.append(f"a_err_final (vs nominal annihilator): {m.a_err_final:.6g}")
    for key, val in (extra or {}).items():
        lines.append(f"{key}: {val}")
    return "\n".join(lines) + "\n"
