"""Independent brute-force verifiers for the structural claims.

These deliberately avoid the package's fast paths: linear systems are solved
by a plain Gaussian elimination written out below, and spectra are estimated
by direct discrete Fourier sums.  They exist to check, not to be fast.

Three checks live here:

* steady generator trajectories (integrate the generator, map through Q);
* constancy of the recovered coefficient vector along such trajectories,
  including detection of under-excited (near-singular Hankel) cases;
* the spectral content of a converged control signal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import engine, matrixkit
from .errors import InconclusiveOracleError, PreconditionError


def gauss_solve(a, b):
    """Partial-pivot Gaussian elimination on plain lists.

    Returns ``(x, det)``; ``x`` is ``None`` when a pivot falls below the
    absolute tolerance (the determinant is still the product of the pivots
    found so far, i.e. ~0 for a singular system).
    """
    n = len(b)
    m = [list(map(float, row)) + [float(b[i])] for i, row in enumerate(a)]
    det = 1.0
    for col in range(n):
        piv = max(range(col, n), key=lambda r: abs(m[r][col]))
        if abs(m[piv][col]) < 1e-13:
            return None, 0.0
        if piv != col:
            m[col], m[piv] = m[piv], m[col]
            det = -det
        det *= m[col][col]
        for r in range(col + 1, n):
            f = m[r][col] / m[col][col]
            if f != 0.0:
                for c in range(col, n + 1):
                    m[r][c] -= f * m[col][c]
    x = [0.0] * n
    for r in range(n - 1, -1, -1):
        s = m[r][n] - sum(m[r][c] * x[c] for c in range(r + 1, n))
        x[r] = s / m[r][r]
    return x, det


@dataclass
class SteadyTrajectory:
    """Sampled generator trajectory and its internal-model image ``theta = Q xi``."""

    times: np.ndarray
    xi: np.ndarray      # samples x n
    theta: np.ndarray   # samples x 2n
    a: np.ndarray
    m_coeffs: np.ndarray


def generator_trajectory(a, m_coeffs, xi0, horizon: float = 10.0, h: float = 1e-3,
                         sample_every: int = 50) -> SteadyTrajectory:
    """Integrate the steady-state generator and map it through the Q rows.

    Requires the generator spectrum to sit on the imaginary axis with simple
    eigenvalues (the standing assumption on exogenous dynamics).
    """
    a = np.asarray(a, dtype=float)
    phi = matrixkit.companion_from_coeffs(a)
    eig = matrixkit.spectrum(phi)
    if np.max(np.abs(eig.real)) > 1e-8:
        raise PreconditionError(
            f"generator spectrum is not on the imaginary axis (max |Re| = {np.max(np.abs(eig.real)):.3e})"
        )
    if eig.size > 1:
        dist = np.abs(eig[:, None] - eig[None, :])
        np.fill_diagonal(dist, np.inf)
        if dist.min() < 1e-8:
            raise PreconditionError("generator spectrum has repeated eigenvalues")
    q = matrixkit.q_matrix(a, m_coeffs)
    xi = np.asarray(xi0, dtype=float).copy()
    n_steps = int(round(horizon / h))
    times = [0.0]
    xis = [xi.copy()]

    def rhs(t, y):
        return phi @ y

    for k in range(1, n_steps + 1):
        xi = engine.rk4_step(rhs, xi, (k - 1) * h, h)
        if k % sample_every == 0 or k == n_steps:
            times.append(k * h)
            xis.append(xi.copy())
    xis = np.array(xis)
    thetas = xis @ q.T
    return SteadyTrajectory(
        times=np.array(times), xi=xis, theta=thetas, a=a.copy(),
        m_coeffs=np.asarray(m_coeffs, dtype=float).copy(),
    )


@dataclass
class Lemma1Report:
    """Constancy of the recovered coefficients along one steady trajectory."""

    max_dev: float
    min_abs_det: float
    max_abs_det: float
    singular_times: list

    @property
    def near_singular(self) -> bool:
        # Healthy full-excitation trajectories keep |det Theta| bounded away
        # from zero relative to its own peak; rank-deficient excitation shows
        # up as a collapse of this ratio (or as outright singular solves).
        if self.singular_times:
            return True
        if self.max_abs_det == 0.0:
            return True
        return self.min_abs_det < 1e-8 * self.max_abs_det


def lemma1_constancy(traj: SteadyTrajectory, a_true) -> Lemma1Report:
    """Solve the Hankel system independently at every sample and compare to ``a_true``.

    Uses the elementary elimination above on plain lists; no reuse of the
    package's solve path.  Singular samples are reported, not fatal.
    """
    a_true = np.asarray(a_true, dtype=float)
    n = a_true.size
    max_dev = 0.0
    min_det = math.inf
    max_det = 0.0
    singular = []
    for t, th in zip(traj.times, traj.theta):
        rows = [[th[i + j] for j in range(n)] for i in range(n)]
        rhs = [-th[n + i] for i in range(n)]
        x, det = gauss_solve(rows, rhs)
        min_det = min(min_det, abs(det))
        max_det = max(max_det, abs(det))
        if x is None:
            singular.append(float(t))
            continue
        dev = math.sqrt(sum((xi - ai) ** 2 for xi, ai in zip(x, a_true)))
        max_dev = max(max_dev, dev)
    return Lemma1Report(
        max_dev=max_dev,
        min_abs_det=0.0 if math.isinf(min_det) else min_det,
        max_abs_det=max_det,
        singular_times=singular,
    )


def naive_dft(values, dt: float):
    """Direct O(N^2) discrete Fourier transform of a real sequence.

    Returns ``(omegas, amps)`` for the nonnegative-frequency bins, where
    ``omegas`` are angular frequencies and ``amps`` the per-bin amplitudes
    (scaled so a pure cosine of amplitude A shows A at its bin).
    """
    u = np.asarray(values, dtype=float)
    n = u.size
    if n < 4:
        raise ValueError("need at least 4 samples")
    if n > 4096:
        raise ValueError("direct DFT is limited to 4096 samples")
    ks = np.arange(n // 2 + 1)
    js = np.arange(n)
    w = np.exp(-2j * math.pi * np.outer(ks, js) / n)
    coeffs = w @ u
    amps = np.abs(coeffs) / n
    amps[1:] *= 2.0  # fold the negative-frequency half
    if n % 2 == 0:
        amps[-1] /= 2.0
    omegas = 2.0 * math.pi * ks / (n * dt)
    return omegas, amps


def spectral_peaks(omegas, amps, floor_ratio: float = 1e-3):
    """Local maxima of a DFT magnitude, largest first, above a relative floor."""
    peaks = []
    top = float(np.max(amps))
    if amps[0] > amps[1] and amps[0] > floor_ratio * top:
        peaks.append((float(omegas[0]), float(amps[0])))
    for k in range(1, len(amps) - 1):
        if amps[k] >= amps[k - 1] and amps[k] > amps[k + 1] and amps[k] > floor_ratio * top:
            peaks.append((float(omegas[k]), float(amps[k])))
    peaks.sort(key=lambda p: -p[1])
    return peaks


@dataclass
class SteadyInputReport:
    """Converged control signal, its spectrum, and a coefficient cross-check."""

    times: np.ndarray
    u: np.ndarray
    omegas: np.ndarray
    amps: np.ndarray
    peaks: list
    bin_width: float
    tail_rms_e: float
    a_hat_final: np.ndarray
    a_check_final: np.ndarray | None


def steady_state_input_oracle(scen, tol: float = 0.05, window: float | None = None) -> SteadyInputReport:
    """Run a scenario to steady state and report the spectrum of its input.

    The run must have converged (RMS tracking error below ``tol`` over the
    tail window), otherwise the oracle refuses to conclude anything.  The
    returned cross-check solves the Hankel system at the final sample through
    the independent elimination path.
    """
    trace = engine.simulate(scen)
    t_end = float(trace.times[-1])
    if window is None:
        window = min(0.4 * t_end, 409.6)
    t_lo = t_end - window
    tail_rms = engine.window_rms(trace, "e", t_lo, t_end)
    if not tail_rms < tol:
        raise InconclusiveOracleError(
            f"run did not converge: tail rms(e) = {tail_rms:.4g} >= {tol}"
        )
    mask = trace.times >= t_lo
    times = trace.times[mask]
    u = trace.column("u")[mask]
    if u.size > 4096:
        times = times[-4096:]
        u = u[-4096:]
    dt = float(times[1] - times[0])
    omegas, amps = naive_dft(u, dt)
    peaks = spectral_peaks(omegas, amps)

    n = scen.regulator.n
    a_hat_final = np.array([trace.column(f"ahat{i + 1}")[-1] for i in range(n)])
    theta_final = [trace.column(f"eta{i + 1}")[-1] for i in range(2 * n)]
    rows = [[theta_final[i + j] for j in range(n)] for i in range(n)]
    rhs = [-theta_final[n + i] for i in range(n)]
    x, _ = gauss_solve(rows, rhs)
    a_check = np.array(x) if x is not None else None
    return SteadyInputReport(
        times=times,
        u=u,
        omegas=omegas,
        amps=amps,
        peaks=peaks,
        bin_width=2.0 * math.pi / (u.size * dt),
        tail_rms_e=tail_rms,
        a_hat_final=a_hat_final,
        a_check_final=a_check,
    )
