"""Fixed-step closed-loop integration, trace capture, and convergence metrics.

Integration is classical fourth-order Runge-Kutta at a fixed step; there is
no adaptive stepping, so identical scenarios produce bit-identical traces.
Two backends implement the same loop:

``compiled``
    The Cython kernel in ``npreg._kernel``; structure-exploiting C loops over
    the whole closed-loop field.  Selected automatically when the extension
    is available.

``pure``
    A plain-Python loop over :func:`npreg.regulator.closed_loop_rhs`.  Always
    available; used as the fallback and as the reference the kernel is tested
    against.

A divergence guard aborts any run whose state leaves ``|x| <= 1e8``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import regulator
from .errors import BlowUpError, DomainError
from .scenarios import Scenario

try:
    from . import _kernel
except ImportError:  # pragma: no cover - exercised only without the extension
    _kernel = None

HAVE_COMPILED = _kernel is not None
BLOWUP_LIMIT = 1e8

_KIND_IDS = {"duffing": 0, "cstr": 1, "bioreactor": 2}
_PARAM_ORDER = {
    "duffing": ("c1", "c2", "c3"),
    "cstr": ("gamma", "beta", "B", "Da"),
    "bioreactor": ("D", "Y", "alpha", "beta", "mu_m", "Km", "KI", "xm"),
}
_MODE_IDS = {"none": 0, "learned": 1, "oracle": 2}


def backend_name(backend: str = "auto") -> str:
    """Resolve a backend request to the backend that will actually run."""
    if backend == "auto":
        return "compiled" if HAVE_COMPILED else "pure"
    if backend not in ("compiled", "pure"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "compiled" and not HAVE_COMPILED:
        raise RuntimeError("compiled kernel is not available; rebuild the extension")
    return backend


def rk4_step(rhs, state, t: float, h: float):
    """One classical Runge-Kutta step of ``y' = rhs(t, y)``."""
    if not h > 0:
        raise ValueError("step size must be positive")
    k1 = rhs(t, state)
    k2 = rhs(t + 0.5 * h, state + (0.5 * h) * k1)
    k3 = rhs(t + 0.5 * h, state + (0.5 * h) * k2)
    k4 = rhs(t + h, state + h * k3)
    return state + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@dataclass
class Trace:
    """Sampled closed-loop time series with named columns."""

    name: str
    times: np.ndarray
    columns: dict  # column name -> 1-D array, in the CSV column order

    def column(self, name: str) -> np.ndarray:
        return self.columns[name]

    @property
    def column_names(self) -> list[str]:
        return list(self.columns)

    def __len__(self) -> int:
        return self.times.size


def initial_state(scen: Scenario) -> np.ndarray:
    rt = regulator.make_runtime(scen.plant, scen.regulator, scen.exo_sigma)
    lay = rt.layout
    state = np.zeros(lay.dim)
    state[lay.exo] = scen.exo_v0
    state[lay.plant] = scen.x0
    if lay.filt is not None:
        state[lay.filt] = scen.xhat0
    state[lay.eta] = scen.eta0
    state[lay.ahat] = scen.ahat0
    if lay.khat is not None:
        state[lay.khat] = scen.regulator.khat0
    return state


def _sample_steps(n_steps: int, every: int) -> np.ndarray:
    steps = list(range(0, n_steps + 1, every))
    if steps[-1] != n_steps:
        steps.append(n_steps)
    return np.asarray(steps, dtype=np.int64)


def _column_names(scen: Scenario) -> list[str]:
    reg = scen.regulator
    names = ["v1", "v2"]
    names += [f"x{i + 1}" for i in range(scen.plant.n_state)]
    names += ["y", "e"]
    if reg.r >= 2:
        names += [f"xhat{i + 1}" for i in range(reg.r)]
    names += [f"eta{i + 1}" for i in range(2 * reg.n)]
    names += [f"ahat{i + 1}" for i in range(reg.n)]
    if reg.adaptive:
        names.append("khat")
    names.append("u")
    return names


def _assemble_trace(scen: Scenario, rt, times, states, us) -> Trace:
    lay = rt.layout
    y = states[:, lay.plant][:, scen.plant.y_index]
    if scen.plant.reference == "v1":
        y_ref = states[:, 0]
    else:
        y_ref = np.full(len(times), float(scen.plant.reference))
    cols: dict = {}
    cols["v1"] = states[:, 0]
    cols["v2"] = states[:, 1]
    for i in range(scen.plant.n_state):
        cols[f"x{i + 1}"] = states[:, lay.plant.start + i]
    cols["y"] = y
    cols["e"] = y - y_ref
    if lay.filt is not None:
        for i in range(scen.regulator.r):
            cols[f"xhat{i + 1}"] = states[:, lay.filt.start + i]
    for i in range(2 * scen.regulator.n):
        cols[f"eta{i + 1}"] = states[:, lay.eta.start + i]
    for i in range(scen.regulator.n):
        cols[f"ahat{i + 1}"] = states[:, lay.ahat.start + i]
    if lay.khat is not None:
        cols["khat"] = states[:, lay.khat]
    cols["u"] = us
    return Trace(name=scen.name, times=times, columns=cols)


def _simulate_pure(scen: Scenario, rt, n_steps: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    h = scen.step
    lay = rt.layout
    sample_at = _sample_steps(n_steps, scen.sample_every)
    states = np.empty((sample_at.size, lay.dim))
    us = np.empty(sample_at.size)
    times = sample_at * h

    def rhs(t, y):
        return regulator.closed_loop_rhs(y, rt)

    state = initial_state(scen)
    out = 0
    for k in range(n_steps + 1):
        if k == sample_at[out]:
            states[out] = state
            us[out] = regulator.control_input(state, rt)
            out += 1
            if out == sample_at.size:
                break
        t = k * h
        try:
            state = rk4_step(rhs, state, t, h)
        except DomainError as exc:
            raise DomainError(f"{exc} (during step starting at t = {t:.6g})", t=t) from exc
        bad = not np.all(np.isfinite(state)) or float(np.max(np.abs(state))) > BLOWUP_LIMIT
        if bad:
            raise BlowUpError(
                f"state exceeded {BLOWUP_LIMIT:g} after t = {t:.6g}", t_last=t
            )
    return times, states, us


def _simulate_compiled(scen: Scenario, rt, n_steps: int):
    lay = rt.layout
    reg = scen.regulator
    kind = _KIND_IDS[scen.plant.kind]
    params = np.array([scen.plant.params[k] for k in _PARAM_ORDER[scen.plant.kind]])
    sample_at = _sample_steps(n_steps, scen.sample_every)
    a_true = reg.a_true if reg.a_true is not None else np.zeros(reg.n)
    ref_is_v1 = scen.plant.reference == "v1"
    status, t_fail, states, us = _kernel.integrate(
        initial_state(scen),
        kind,
        params,
        int(scen.plant.y_index),
        float(reg.b),
        int(reg.r),
        reg.lam if reg.lam is not None else np.zeros(0),
        1 if reg.adaptive else 0,
        float(reg.k_star),
        float(reg.rho.c0),
        float(reg.rho.c1),
        float(reg.k_a),
        reg.m_coeffs,
        int(reg.n),
        float(reg.delta),
        _MODE_IDS[reg.mapping_mode],
        np.asarray(a_true, dtype=float),
        float(scen.exo_sigma),
        1 if ref_is_v1 else 0,
        0.0 if ref_is_v1 else float(scen.plant.reference),
        float(scen.step),
        int(n_steps),
        sample_at,
        float(BLOWUP_LIMIT),
    )
    if status == 1:
        raise BlowUpError(f"state exceeded {BLOWUP_LIMIT:g} after t = {t_fail:.6g}", t_last=t_fail)
    if status == 2:
        raise DomainError(f"plant domain error (during step starting at t = {t_fail:.6g})", t=t_fail)
    times = sample_at * scen.step
    return times, states, us


def _kernel_fits(scen: Scenario) -> bool:
    return scen.regulator.n <= 16 and scen.regulator.r <= 2 and scen.plant.kind in _KIND_IDS


def simulate(scen: Scenario, backend: str = "auto") -> Trace:
    """Integrate a scenario over ``[0, horizon]`` and return its sampled trace."""
    which = backend_name(backend)
    if which == "compiled" and backend == "auto" and not _kernel_fits(scen):
        which = "pure"
    rt = regulator.make_runtime(scen.plant, scen.regulator, scen.exo_sigma)
    n_steps = int(round(scen.horizon / scen.step))
    if n_steps < 1:
        n_steps = 1
    if which == "compiled":
        times, states, us = _simulate_compiled(scen, rt, n_steps)
    else:
        times, states, us = _simulate_pure(scen, rt, n_steps)
    return _assemble_trace(scen, rt, times, states, us)


@dataclass
class Metrics:
    """Convergence summary of one trace."""

    settle_time: float | None
    tail_rms: float
    max_abs_e: float
    a_err_final: float | None = None


def metrics(trace: Trace, tol: float = 0.05, tail_window: float = 20.0, a_true=None) -> Metrics:
    """Settle time at tolerance ``tol``, RMS error over the trailing window, peak error."""
    if len(trace) == 0:
        raise ValueError("trace is empty")
    t = trace.times
    e = trace.column("e")
    abs_e = np.abs(e)

    above = np.nonzero(abs_e >= tol)[0]
    if above.size == 0:
        settle = 0.0
    elif above[-1] == len(t) - 1:
        settle = None
    else:
        settle = float(t[above[-1] + 1])

    t_end = t[-1]
    window = min(tail_window, t_end) if t_end > 0 else tail_window
    in_tail = t >= t_end - window
    tail_rms = float(np.sqrt(np.mean(e[in_tail] ** 2)))

    a_err = None
    if a_true is not None:
        a_true = np.asarray(a_true, dtype=float)
        a_end = np.array([trace.column(f"ahat{i + 1}")[-1] for i in range(a_true.size)])
        a_err = float(np.linalg.norm(a_end - a_true))
    return Metrics(
        settle_time=settle,
        tail_rms=tail_rms,
        max_abs_e=float(abs_e.max()),
        a_err_final=a_err,
    )


def window_max_abs(trace: Trace, column: str, t_lo: float, t_hi: float) -> float:
    """Peak |column| over a time window (inclusive)."""
    t = trace.times
    mask = (t >= t_lo) & (t <= t_hi)
    if not np.any(mask):
        raise ValueError(f"window [{t_lo}, {t_hi}] contains no samples")
    return float(np.max(np.abs(trace.column(column)[mask])))


def window_rms(trace: Trace, column: str, t_lo: float, t_hi: float) -> float:
    """RMS of a column over a time window (inclusive)."""
    t = trace.times
    mask = (t >= t_lo) & (t <= t_hi)
    if not np.any(mask):
        raise ValueError(f"window [{t_lo}, {t_hi}] contains no samples")
    vals = trace.column(column)[mask]
    return float(np.sqrt(np.mean(vals ** 2)))


def finite_diff_check(f, grad, points, h: float = 1e-6) -> float:
    """Largest relative deviation between ``grad`` and central differences of ``f``.

    The deviation at each point is normalized by the sup-norm of the larger of
    the two gradients there, so a uniformly-zero pair counts as exact
    agreement and a sign error shows up as an O(1) failure.
    """
    worst = 0.0
    for p in points:
        p = np.asarray(p, dtype=float)
        g = np.asarray(grad(p), dtype=float)
        fd = np.empty_like(g)
        for i in range(p.size):
            dp = np.zeros_like(p)
            dp[i] = h
            fd[i] = (f(p + dp) - f(p - dp)) / (2.0 * h)
        scale = max(float(np.max(np.abs(g))), float(np.max(np.abs(fd))))
        if scale == 0.0:
            continue
        err = float(np.max(np.abs(g - fd))) / scale
        worst = max(worst, err)
    return worst
