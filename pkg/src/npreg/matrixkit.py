"""Dense small-matrix toolkit for steady-state generator constructions.

Everything here operates on plain ``numpy`` arrays (row-major, float64 or
complex128).  All matrices arising in the regulation framework are tiny
(dimension <= 20), so dense direct methods with explicit condition checks are
used throughout; no structured or sparse representations.

Conventions
-----------
A coefficient vector ``a = (a_1, ..., a_n)`` encodes the monic polynomial

    p(s) = s^n + a_n s^(n-1) + ... + a_2 s + a_1,

and ``companion_from_coeffs(a)`` is the companion matrix with superdiagonal
identity block and bottom row ``(-a_1, ..., -a_n)``, whose characteristic
polynomial is ``p``.  The same ordering is used for the stabilizer
coefficients ``m = (m_1, ..., m_2n)``.
"""

from __future__ import annotations

import numpy as np

from .errors import (
    DegenerateGeneratorError,
    DegenerateSignalError,
    DegenerateSpectrumError,
    NumericError,
    SingularSystemError,
)

# Condition-number cutoff beyond which structural solves are refused instead
# of returning garbage.  The theory only guarantees nonsingularity on steady
# trajectories; transients can be arbitrarily close to singular.
COND_LIMIT = 1e12


def _as_matrix(m) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix entries must be finite")
    return m


def _as_square(m) -> np.ndarray:
    m = _as_matrix(m)
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    return m


def _as_vector(v, name="vector") -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} entries must be finite")
    return v


def companion_from_coeffs(a) -> np.ndarray:
    """Companion matrix of the coefficient vector ``a`` (see module docstring)."""
    a = _as_vector(a, "coefficient vector")
    n = a.size
    if n < 1:
        raise ValueError("coefficient vector must have at least one entry")
    phi = np.zeros((n, n))
    phi[:-1, 1:] = np.eye(n - 1)
    phi[-1, :] = -a
    return phi


def gamma_row(n: int) -> np.ndarray:
    """Output row (1, 0, ..., 0) selecting the first generator coordinate."""
    g = np.zeros(n)
    g[0] = 1.0
    return g


def spectrum(m) -> np.ndarray:
    """Eigenvalues of a square matrix, as a complex vector in no particular order."""
    m = _as_square(m)
    try:
        return np.linalg.eigvals(m)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK rarely fails here
        raise NumericError(f"eigenvalue iteration failed: {exc}") from exc


def is_hurwitz(m, margin: float = 0.0) -> bool:
    """True iff every eigenvalue of ``m`` has real part < -margin."""
    return bool(np.all(spectrum(m).real < -margin))


def mn_pair(m_coeffs) -> tuple[np.ndarray, np.ndarray]:
    """Internal-model pair: companion ``M`` of ``m_coeffs`` and ``N = col(0,...,0,1)``."""
    m_coeffs = _as_vector(m_coeffs, "m_coeffs")
    if m_coeffs.size < 2 or m_coeffs.size % 2 != 0:
        raise ValueError("m_coeffs must have even length >= 2")
    big_m = companion_from_coeffs(m_coeffs)
    big_n = np.zeros(m_coeffs.size)
    big_n[-1] = 1.0
    return big_m, big_n


def poles_to_coeffs(poles) -> np.ndarray:
    """Coefficients ``(m_1, ..., m_k)`` of the monic polynomial with the given roots.

    The root set must be closed under conjugation so the expanded polynomial
    is real.  Ordering matches the companion convention above, so
    ``companion_from_coeffs(poles_to_coeffs(p))`` has spectrum ``p``.
    """
    poles = np.asarray(poles, dtype=complex)
    if poles.ndim != 1 or poles.size < 1:
        raise ValueError("poles must be a nonempty 1-D sequence")
    sorted_p = np.sort_complex(poles)
    sorted_c = np.sort_complex(poles.conj())
    if not np.allclose(sorted_p, sorted_c, rtol=0.0, atol=1e-10):
        raise ValueError("pole set is not closed under conjugation")
    coeffs = np.poly(poles)  # highest power first, monic
    if np.max(np.abs(coeffs.imag)) > 1e-10:
        raise ValueError("expanded polynomial has a nonreal residue")
    return coeffs.real[1:][::-1].copy()


def xi_matrix(a, m_coeffs) -> np.ndarray:
    """Generator response matrix: the stabilizer polynomial evaluated at the companion.

    Returns ``Phi^(2n) + sum_j m_j Phi^(j-1)`` where ``Phi`` is the companion
    of ``a``, accumulated Horner-style (highest power first) to avoid forming
    the powers explicitly.
    """
    a = _as_vector(a, "coefficient vector")
    m_coeffs = _as_vector(m_coeffs, "m_coeffs")
    n = a.size
    if m_coeffs.size != 2 * n:
        raise ValueError(f"m_coeffs must have length {2 * n}, got {m_coeffs.size}")
    phi = companion_from_coeffs(a)
    eye = np.eye(n)
    xi = eye.copy()
    for c in m_coeffs[::-1]:
        xi = xi @ phi + c * eye
    return xi


def q_matrix(a, m_coeffs) -> np.ndarray:
    """Stacked rows ``Gamma Xi(a)^-1 Phi(a)^(j-1)`` for ``j = 1..2n`` (a 2n x n matrix).

    Raises :class:`DegenerateGeneratorError` when ``Xi(a)`` is too
    ill-conditioned to invert reliably.
    """
    a = _as_vector(a, "coefficient vector")
    n = a.size
    xi = xi_matrix(a, m_coeffs)
    cond = np.linalg.cond(xi)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise DegenerateGeneratorError(
            f"generator response matrix is singular (cond ~ {cond:.3e})", cond=cond
        )
    phi = companion_from_coeffs(a)
    row = np.linalg.solve(xi.T, gamma_row(n))  # Gamma Xi^-1
    rows = np.empty((2 * n, n))
    for j in range(2 * n):
        rows[j] = row
        row = row @ phi
    return rows


def sylvester_residual(big_m, q, phi, big_n, gamma) -> float:
    """Frobenius norm of ``M Q - Q Phi + N Gamma``."""
    big_m = _as_square(big_m)
    q = _as_matrix(q)
    phi = _as_square(phi)
    big_n = np.asarray(big_n, dtype=float).reshape(-1, 1)
    gamma = np.asarray(gamma, dtype=float).reshape(1, -1)
    if q.shape != (big_m.shape[0], phi.shape[0]):
        raise ValueError(f"Q has shape {q.shape}, expected {(big_m.shape[0], phi.shape[0])}")
    if big_n.shape[0] != big_m.shape[0] or gamma.shape[1] != phi.shape[0]:
        raise ValueError("N or Gamma dimensions do not conform")
    return float(np.linalg.norm(big_m @ q - q @ phi + big_n @ gamma, "fro"))


def sylvester_solve_oracle(big_m, phi, big_n, gamma) -> np.ndarray:
    """Solve ``M Q = Q Phi - N Gamma`` through the vectorized Kronecker system.

    Independent cross-check for :func:`q_matrix`: the equation is rewritten as
    ``(I (x) M - Phi^T (x) I) vec(Q) = -vec(N Gamma)`` with column-major vec
    and handed to a dense solver.  Unique solvability requires ``M`` and
    ``Phi`` to share no eigenvalues.
    """
    big_m = _as_square(big_m)
    phi = _as_square(phi)
    p = big_m.shape[0]
    n = phi.shape[0]
    big_n = np.asarray(big_n, dtype=float).reshape(-1, 1)
    gamma = np.asarray(gamma, dtype=float).reshape(1, -1)
    if big_n.shape[0] != p or gamma.shape[1] != n:
        raise ValueError("N or Gamma dimensions do not conform")
    eig_m = spectrum(big_m)
    eig_phi = spectrum(phi)
    gap = np.min(np.abs(eig_m[:, None] - eig_phi[None, :]))
    if gap < 1e-9:
        raise SingularSystemError(
            f"M and Phi share an eigenvalue (min gap {gap:.3e}); no unique solution"
        )
    k = np.kron(np.eye(n), big_m) - np.kron(phi.T, np.eye(p))
    rhs = -(big_n @ gamma).flatten(order="F")
    q = np.linalg.solve(k, rhs)
    return q.reshape((p, n), order="F")


def hankel(theta) -> np.ndarray:
    """Symmetric Hankel matrix with ``(i, j)`` entry ``theta_(i+j-1)`` (1-based)."""
    theta = _as_vector(theta, "theta")
    if theta.size < 2 or theta.size % 2 != 0:
        raise ValueError("theta must have even length >= 2")
    n = theta.size // 2
    idx = np.arange(n)
    return theta[idx[:, None] + idx[None, :]]


def solve_a(theta) -> np.ndarray:
    """Recover generator coefficients from a signal window: ``-Theta^-1 col(theta_(n+1..2n))``.

    Raises :class:`DegenerateSignalError` (carrying the condition estimate)
    when the Hankel matrix is singular or nearly so.
    """
    theta = _as_vector(theta, "theta")
    n = theta.size // 2
    th = hankel(theta)
    cond = np.linalg.cond(th)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise DegenerateSignalError(
            f"signal Hankel matrix is singular (cond ~ {cond:.3e})", cond=cond
        )
    return -np.linalg.solve(th, theta[n:])


def vandermonde_factor(a) -> tuple[np.ndarray, np.ndarray]:
    """Diagonalize the companion of ``a`` through its Vandermonde eigenbasis.

    Returns ``(P, lam)`` with ``P`` the complex Vandermonde matrix whose k-th
    column is ``(1, lam_k, ..., lam_k^(n-1))`` and ``lam`` the eigenvalue
    vector, so that ``Phi(a) = P diag(lam) P^-1``.  Requires distinct
    eigenvalues.
    """
    a = _as_vector(a, "coefficient vector")
    phi = companion_from_coeffs(a)
    lam = spectrum(phi)
    n = lam.size
    if n > 1:
        dist = np.abs(lam[:, None] - lam[None, :])
        np.fill_diagonal(dist, np.inf)
        gap = dist.min()
        if gap < 1e-8:
            raise DegenerateSpectrumError(
                f"repeated eigenvalues (min gap {gap:.3e}); Vandermonde basis is singular"
            )
    p = np.vander(lam, N=n, increasing=True).T
    recon = p @ np.diag(lam) @ np.linalg.inv(p)
    err = float(np.linalg.norm(phi - recon))
    if err > 1e-8:
        raise NumericError(f"eigen-reconstruction residual too large: {err:.3e}")
    return p, lam
