"""Verification suites: matrix identities, coefficient constancy, gradients.

Each suite returns a list of check records; nothing short-circuits, so a
failing run still reports every remaining check.  The CLI ``verify`` command
drives these, and the test suite reuses the same entry points.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import engine, internal_model, matrixkit, oracles, regulator
from .plants import duffing_true_a
from .scenarios import BIOREACTOR_M_COEFFS, CSTR_M_COEFFS, DUFFING_M_COEFFS, harmonic_ladder_coeffs


@dataclass
class CheckResult:
    suite: str
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"[{mark}] {self.suite}/{self.name}: {self.detail}"


def preset_generators() -> dict:
    """The three shipped (a, m) generator presets."""
    return {
        "duffing": (duffing_true_a(0.5), np.array(DUFFING_M_COEFFS)),
        "cstr": (harmonic_ladder_coeffs(0.5, 2), np.array(CSTR_M_COEFFS)),
        "bioreactor": (harmonic_ladder_coeffs(0.5, 3), np.array(BIOREACTOR_M_COEFFS)),
    }


def random_generator(rng: np.random.Generator, n_max: int = 5):
    """Random (a, m) pair: imaginary-axis generator + Hurwitz stabilizer coeffs.

    Frequencies are kept separated and O(1) so the response matrix stays well
    conditioned; stabilizer poles sit in a moderate left-half-plane band.
    """
    n = int(rng.integers(1, n_max + 1))
    n_osc = n // 2
    with_dc = bool(n % 2)
    while True:
        freqs = np.sort(rng.uniform(0.3, 3.0, size=n_osc))
        if n_osc < 2 or np.min(np.diff(freqs)) > 0.25:
            break
    roots = [0.0 + 0.0j] if with_dc else []
    for w in freqs:
        roots.extend([1j * w, -1j * w])
    a = matrixkit.poles_to_coeffs(roots)

    return a, random_m_coeffs(rng, n)


def random_m_coeffs(rng: np.random.Generator, n: int) -> np.ndarray:
    """Coefficients of a random Hurwitz stabilizer polynomial of degree 2n."""
    poles = []
    remaining = 2 * n
    while remaining > 0:
        re = -rng.uniform(0.4, 2.5)
        if remaining >= 2 and rng.uniform() < 0.6:
            im = rng.uniform(0.2, 2.5)
            poles.extend([re + 1j * im, re - 1j * im])
            remaining -= 2
        else:
            poles.append(re + 0.0j)
            remaining -= 1
    return matrixkit.poles_to_coeffs(poles)


def full_excitation_xi0(rng: np.random.Generator, a) -> np.ndarray:
    """Initial generator state with every modal amplitude bounded away from zero."""
    p, lam = matrixkit.vandermonde_factor(a)
    n = lam.size
    coeffs = np.zeros(n, dtype=complex)
    done = np.zeros(n, dtype=bool)
    for i in range(n):
        if done[i]:
            continue
        mag = rng.uniform(0.5, 2.0)
        if abs(lam[i].imag) < 1e-12:
            coeffs[i] = mag * rng.choice([-1.0, 1.0])
            done[i] = True
            continue
        j = int(np.argmin(np.abs(lam - lam[i].conj())))
        phase = rng.uniform(0.0, 2.0 * np.pi)
        coeffs[i] = mag * np.exp(1j * phase)
        coeffs[j] = coeffs[i].conj()
        done[i] = done[j] = True
    xi0 = (p @ coeffs).real
    return xi0


def suite_sylvester(seed: int = 0, n_random: int = 100) -> list[CheckResult]:
    """Residual of the generator matrix equation + agreement of the two solvers."""
    rng = np.random.default_rng(seed)
    out = []
    cases = [(f"preset-{k}", a, m) for k, (a, m) in preset_generators().items()]
    for i in range(n_random):
        a, m = random_generator(rng)
        cases.append((f"random-{i:03d}", a, m))

    worst_resid = 0.0
    worst_gap = 0.0
    ok = True
    for name, a, m in cases:
        n = a.size
        phi = matrixkit.companion_from_coeffs(a)
        big_m, big_n = matrixkit.mn_pair(m)
        gamma = matrixkit.gamma_row(n)
        q = matrixkit.q_matrix(a, m)
        resid = matrixkit.sylvester_residual(big_m, q, phi, big_n, gamma)
        q2 = matrixkit.sylvester_solve_oracle(big_m, phi, big_n, gamma)
        gap = float(np.max(np.abs(q - q2)))
        worst_resid = max(worst_resid, resid)
        worst_gap = max(worst_gap, gap)
        if not (resid < 1e-9 and gap < 1e-7):
            ok = False
            out.append(CheckResult("sylvester", name, False,
                                   f"residual {resid:.3e}, solver gap {gap:.3e}"))
    out.insert(0, CheckResult(
        "sylvester", f"residual<1e-9 on {len(cases)} generators", ok and worst_resid < 1e-9,
        f"worst residual {worst_resid:.3e}"))
    out.insert(1, CheckResult(
        "sylvester", "solver agreement < 1e-7", ok and worst_gap < 1e-7,
        f"worst entrywise gap {worst_gap:.3e}"))
    return out


def suite_lemma1(seed: int = 0, n_random: int = 20) -> list[CheckResult]:
    """Constancy of the recovered coefficients along steady trajectories."""
    rng = np.random.default_rng(seed)
    out = []
    worst = 0.0
    ok = True
    for i in range(n_random):
        while True:
            a, m = random_generator(rng, n_max=4)
            if a.size >= 2:
                break
        xi0 = full_excitation_xi0(rng, a)
        traj = oracles.generator_trajectory(a, m, xi0, horizon=10.0, h=1e-3, sample_every=100)
        rep = oracles.lemma1_constancy(traj, a)
        worst = max(worst, rep.max_dev)
        if rep.max_dev >= 1e-6 or rep.near_singular:
            ok = False
            out.append(CheckResult("lemma1", f"random-{i:02d}", False,
                                   f"max dev {rep.max_dev:.3e}, near_singular={rep.near_singular}"))
    out.insert(0, CheckResult(
        "lemma1", f"constancy < 1e-6 on {n_random} trajectories", ok,
        f"worst deviation {worst:.3e}"))

    # Engineered violation: silence one oscillatory mode and expect the
    # Hankel determinant to collapse.
    a = duffing_true_a(0.5)
    m = np.array(DUFFING_M_COEFFS)
    p, lam = matrixkit.vandermonde_factor(a)
    coeffs = np.zeros(4, dtype=complex)
    k = int(np.argmin(np.abs(lam - 0.5j)))
    kc = int(np.argmin(np.abs(lam + 0.5j)))
    coeffs[k] = 1.0
    coeffs[kc] = 1.0
    xi0 = (p @ coeffs).real  # only the slow mode pair is excited
    traj = oracles.generator_trajectory(a, m, xi0, horizon=10.0, h=1e-3, sample_every=100)
    rep = oracles.lemma1_constancy(traj, a)
    out.append(CheckResult(
        "lemma1", "under-excitation detected as near-singular", rep.near_singular,
        f"min |det| {rep.min_abs_det:.3e} vs max {rep.max_abs_det:.3e}"))
    return out


def _alpha1_packed(cfg, n):
    """alpha_1 as a scalar field over the packed vector (eps1, eta, a_hat, k)."""
    def f(z):
        e = float(z[0])
        eta = z[1:1 + 2 * n]
        ah = z[1 + 2 * n:1 + 3 * n]
        k = float(z[-1])
        rho = regulator.rho_eval(cfg.rho, e)
        chs = internal_model.chi_s(eta, ah, cfg.m_coeffs, cfg.delta)
        return -k * rho * e + chs

    def grad(z):
        e = float(z[0])
        eta = z[1:1 + 2 * n]
        ah = z[1 + 2 * n:1 + 3 * n]
        k = float(z[-1])
        rho = regulator.rho_eval(cfg.rho, e)
        rho_p = regulator.rho_deriv(cfg.rho, e)
        g_eta, g_ah = internal_model.chi_s_grad(eta, ah, cfg.m_coeffs, cfg.delta)
        return np.concatenate((
            [-k * (rho + rho_p * e)], g_eta, g_ah, [-rho * e],
        ))

    return f, grad


def suite_gradients(seed: int = 0, n_points: int = 100) -> list[CheckResult]:
    """Analytic partials of the saturated mapping and of alpha_1 vs finite differences."""
    rng = np.random.default_rng(seed)
    out = []

    # chi_s over (eta, a_hat), spanning inactive, transition, and saturated regions
    worst_chi = 0.0
    for i in range(n_points):
        n = int(rng.integers(1, 6))
        m = random_m_coeffs(rng, n)
        eta = rng.normal(0.0, 1.0, size=2 * n)
        ah = rng.normal(0.0, 1.0, size=n)
        s2 = float(eta @ eta + ah @ ah)
        regime = i % 3
        if regime == 0:
            delta = s2 + 5.0          # gate fully open
        elif regime == 1:
            delta = max(s2 - 0.5, 0.1)  # inside the transition band
        else:
            delta = max(s2 / 4.0, 0.05)  # deep saturation

        def f(z, n=n, m=m, delta=delta):
            return internal_model.chi_s(z[:2 * n], z[2 * n:], m, delta)

        def g(z, n=n, m=m, delta=delta):
            ge, ga = internal_model.chi_s_grad(z[:2 * n], z[2 * n:], m, delta)
            return np.concatenate((ge, ga))

        err = engine.finite_diff_check(f, g, [np.concatenate((eta, ah))])
        worst_chi = max(worst_chi, err)
    out.append(CheckResult(
        "gradients", f"chi_s partials at {n_points} states", worst_chi < 1e-5,
        f"max relative error {worst_chi:.3e}"))

    # alpha_1 over (eps1, eta, a_hat, k) on the shipped generator sizes
    from .scenarios import cstr_scenario, duffing_scenario
    worst_a1 = 0.0
    for i in range(n_points):
        scen = duffing_scenario() if i % 2 == 0 else cstr_scenario()
        cfg = scen.regulator
        n = cfg.n
        z = np.concatenate((
            rng.normal(0.0, 1.0, size=1),
            rng.normal(0.0, 3.0, size=2 * n),
            rng.normal(0.0, 1.0, size=n),
            [rng.uniform(0.5, 5.0)],
        ))
        f, g = _alpha1_packed(cfg, n)
        err = engine.finite_diff_check(f, g, [z])
        worst_a1 = max(worst_a1, err)
    out.append(CheckResult(
        "gradients", f"alpha_1 partials at {n_points} states", worst_a1 < 1e-5,
        f"max relative error {worst_a1:.3e}"))
    return out


SUITES = {
    "sylvester": suite_sylvester,
    "lemma1": suite_lemma1,
    "gradients": suite_gradients,
}


def run_suites(names=None, seed: int = 0) -> tuple[list[CheckResult], bool]:
    names = list(names) if names else list(SUITES)
    results: list[CheckResult] = []
    for name in names:
        if name not in SUITES:
            raise ValueError(f"unknown suite {name!r}; available: {', '.join(SUITES)}")
        results.extend(SUITES[name](seed=seed))
    return results, all(r.passed for r in results)
