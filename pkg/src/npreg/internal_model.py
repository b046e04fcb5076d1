"""Internal-model state, the saturated output mapping, and the coefficient learner.

The internal model is the linear system ``eta' = M eta + N * drive`` whose
state, on the steady orbit, carries enough information to reconstruct the
steady-state drive signal.  Reconstruction goes through the mapping

    chi(eta, a_hat) = Gamma Xi(a_hat) col(eta_1, ..., eta_n),

a polynomial in the coefficient estimate ``a_hat`` (forward products only; no
inversion is ever needed on the control path).  ``chi_s`` is the smoothly
saturated version of ``chi``, switched off outside a ball of squared radius
``delta + 1`` so the control law stays globally well behaved.

The learner is plain gradient flow on the squared Hankel residual

    a_hat' = -k_a Theta(eta)^T [Theta(eta) a_hat + col(eta_(n+1), ..., eta_2n)],

which needs no matrix inversion and is well defined even while the Hankel
matrix is singular during transients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import matrixkit

# Saturation radius used when a scenario does not specify one.  Chosen large
# enough that nominal trajectories never activate the saturation; scenario
# presets override it when their internal-model states live on larger scales.
DEFAULT_DELTA = 1e4

# Bump values below this clamp to exactly zero; exp(-1/s) underflows long
# before the clamp matters, so the piecewise definition is preserved.
_PSI_FLOOR = 1e-300


@dataclass
class InternalModel:
    """State and matrices of the internal model ``eta' = M eta + N drive``."""

    n: int
    big_m: np.ndarray
    big_n: np.ndarray
    eta: np.ndarray

    @classmethod
    def from_m_coeffs(cls, m_coeffs, eta0=None) -> "InternalModel":
        big_m, big_n = matrixkit.mn_pair(m_coeffs)
        if not matrixkit.is_hurwitz(big_m):
            raise ValueError("internal-model matrix M must be Hurwitz")
        n = len(m_coeffs) // 2
        eta = np.zeros(2 * n) if eta0 is None else np.asarray(eta0, dtype=float).copy()
        if eta.shape != (2 * n,):
            raise ValueError(f"eta0 must have length {2 * n}")
        return cls(n=n, big_m=big_m, big_n=big_n, eta=eta)


@dataclass
class Learner:
    """Gradient-flow estimator of the generator coefficients."""

    n: int
    a_hat: np.ndarray = field(default=None)  # type: ignore[assignment]
    k_a: float = 1.0
    delta: float = DEFAULT_DELTA

    def __post_init__(self):
        if self.a_hat is None:
            self.a_hat = np.zeros(self.n)
        self.a_hat = np.asarray(self.a_hat, dtype=float)
        if self.a_hat.shape != (self.n,):
            raise ValueError(f"a_hat must have length {self.n}")
        if not self.k_a > 0:
            raise ValueError("learning gain k_a must be positive")
        if not self.delta > 0:
            raise ValueError("saturation radius delta must be positive")


def im_rhs(im: InternalModel, drive: float) -> np.ndarray:
    """Right-hand side ``M eta + N * drive`` of the internal model."""
    if not math.isfinite(drive):
        raise ValueError("drive must be finite")
    return im.big_m @ im.eta + im.big_n * drive


def bump_psi(s: float) -> float:
    """The C-infinity bump primitive: ``exp(-1/s)`` for s > 0, zero otherwise."""
    if s <= 0.0:
        return 0.0
    v = math.exp(-1.0 / s)
    return v if v >= _PSI_FLOOR else 0.0


def _bump_psi_prime(s: float) -> float:
    # d/ds exp(-1/s) = exp(-1/s) / s^2; zero on s <= 0 (and where psi clamps).
    if s <= 0.0:
        return 0.0
    v = bump_psi(s)
    return v / (s * s)


def smooth_step(s: float) -> float:
    """Smooth transition ``psi(s) / (psi(s) + psi(1-s))``: 0 for s <= 0, 1 for s >= 1."""
    pa = bump_psi(s)
    pb = bump_psi(1.0 - s)
    return pa / (pa + pb)


def _smooth_step_with_derivative(s: float) -> tuple[float, float]:
    pa = bump_psi(s)
    pb = bump_psi(1.0 - s)
    den = pa + pb
    val = pa / den
    dval = (_bump_psi_prime(s) * pb + pa * _bump_psi_prime(1.0 - s)) / (den * den)
    return val, dval


def _row_times_companion(row: np.ndarray, a: np.ndarray) -> np.ndarray:
    # row @ Phi(a) using the companion structure: column 1 of Phi is -a_1 e_n,
    # column j (j >= 2) is e_(j-1) - a_j e_n.
    n = row.size
    out = np.empty(n)
    tail = row[n - 1]
    out[0] = -tail * a[0]
    out[1:] = row[: n - 1] - tail * a[1:]
    return out


def _companion_times_col(col: np.ndarray, a: np.ndarray) -> np.ndarray:
    # Phi(a) @ col: shift up, last entry -a . col.
    n = col.size
    out = np.empty(n)
    out[: n - 1] = col[1:]
    out[n - 1] = -float(a @ col)
    return out


def _xi_first_row(a_hat: np.ndarray, m_coeffs: np.ndarray) -> np.ndarray:
    # Gamma Xi(a_hat) as a row vector, via the row recurrence r_i = e_1^T Phi^i.
    n = a_hat.size
    row = matrixkit.gamma_row(n)
    acc = m_coeffs[0] * row
    for j in range(1, 2 * n):
        row = _row_times_companion(row, a_hat)
        acc = acc + m_coeffs[j] * row
    acc = acc + _row_times_companion(row, a_hat)  # the leading Phi^(2n) term
    return acc


def chi(eta, a_hat, m_coeffs) -> float:
    """Unsaturated reconstruction ``Gamma Xi(a_hat) col(eta_1, ..., eta_n)``."""
    eta = np.asarray(eta, dtype=float)
    a_hat = np.asarray(a_hat, dtype=float)
    m_coeffs = np.asarray(m_coeffs, dtype=float)
    n = a_hat.size
    if eta.size != 2 * n or m_coeffs.size != 2 * n:
        raise ValueError("eta and m_coeffs must have length 2n for n = len(a_hat)")
    return float(_xi_first_row(a_hat, m_coeffs) @ eta[:n])


def chi_s(eta, a_hat, m_coeffs, delta: float = DEFAULT_DELTA) -> float:
    """Saturated mapping: ``chi`` scaled by the smooth cutoff of ``|col(eta, a_hat)|^2``."""
    eta = np.asarray(eta, dtype=float)
    a_hat = np.asarray(a_hat, dtype=float)
    s2 = float(eta @ eta + a_hat @ a_hat)
    gate = smooth_step(delta + 1.0 - s2)
    if gate == 0.0:
        return 0.0
    return chi(eta, a_hat, m_coeffs) * gate


def chi_s_grad(eta, a_hat, m_coeffs, delta: float = DEFAULT_DELTA) -> tuple[np.ndarray, np.ndarray]:
    """Analytic partials of :func:`chi_s` with respect to ``eta`` and ``a_hat``.

    The ``eta`` gradient is the first row of ``Xi(a_hat)`` on the first n
    coordinates (scaled by the gate) plus the gate's own norm gradient; the
    ``a_hat`` gradient differentiates the matrix polynomial term by term using
    the rank-one structure of ``d Phi / d a_j``.
    """
    val, grad_eta, grad_ahat = chi_s_value_and_grads(eta, a_hat, m_coeffs, delta)
    return grad_eta, grad_ahat


def chi_s_value_and_grads(eta, a_hat, m_coeffs, delta: float = DEFAULT_DELTA):
    """Value and both gradients of ``chi_s`` in one pass (shared with the control law)."""
    eta = np.asarray(eta, dtype=float)
    a_hat = np.asarray(a_hat, dtype=float)
    m_coeffs = np.asarray(m_coeffs, dtype=float)
    n = a_hat.size
    if eta.size != 2 * n or m_coeffs.size != 2 * n:
        raise ValueError("eta and m_coeffs must have length 2n for n = len(a_hat)")

    s2 = float(eta @ eta + a_hat @ a_hat)
    gate, dgate = _smooth_step_with_derivative(delta + 1.0 - s2)
    if gate == 0.0 and dgate == 0.0:
        return 0.0, np.zeros(2 * n), np.zeros(n)

    head = eta[:n]
    # Row powers r_i = e_1^T Phi^i and column powers q_i = Phi^i head, i = 0 .. 2n-1.
    rows = np.empty((2 * n, n))
    cols = np.empty((2 * n, n))
    rows[0] = matrixkit.gamma_row(n)
    cols[0] = head
    for i in range(1, 2 * n):
        rows[i] = _row_times_companion(rows[i - 1], a_hat)
        cols[i] = _companion_times_col(cols[i - 1], a_hat)

    w = _row_times_companion(rows[2 * n - 1], a_hat)  # e_1^T Phi^(2n)
    w = w + m_coeffs @ rows
    chi_raw = float(w @ head)

    # d(chi_raw)/d(a_hat): from d(Phi^K)/d(a_j) = -sum_i Phi^i e_n e_j^T Phi^(K-1-i),
    # so each power K contributes -sum_(i+l=K-1) alpha_i q_l with alpha_i = (Phi^i)_(1,n).
    alphas = rows[:, n - 1]
    dchi_da = np.zeros(n)
    for ell in range(2 * n):
        c = alphas[2 * n - 1 - ell]
        for j in range(ell + 2, 2 * n + 1):
            c += m_coeffs[j - 1] * alphas[j - 2 - ell]
        dchi_da -= c * cols[ell]

    dchi_deta = np.zeros(2 * n)
    dchi_deta[:n] = w

    val = chi_raw * gate
    grad_eta = dchi_deta * gate + chi_raw * dgate * (-2.0 * eta)
    grad_ahat = dchi_da * gate + chi_raw * dgate * (-2.0 * a_hat)
    return val, grad_eta, grad_ahat


def learning_rhs(learner: Learner, eta) -> np.ndarray:
    """Gradient-flow right-hand side of the coefficient estimate."""
    eta = np.asarray(eta, dtype=float)
    n = learner.n
    if eta.size != 2 * n:
        raise ValueError(f"eta must have length {2 * n}")
    th = matrixkit.hankel(eta)
    resid = th @ learner.a_hat + eta[n:]
    return -learner.k_a * (th.T @ resid)
