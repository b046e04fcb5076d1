"""Brute-force oracles: generator trajectories, coefficient constancy, spectra."""

import dataclasses
import math

import numpy as np
import pytest

from npreg import matrixkit as mk
from npreg import oracles
from npreg.errors import InconclusiveOracleError, PreconditionError
from npreg.plants import duffing_true_a
from npreg.scenarios import DUFFING_M_COEFFS, cstr_scenario
from npreg.verify import full_excitation_xi0, random_generator


class TestGaussSolve:
    def test_small_system(self):
        x, det = oracles.gauss_solve([[1.0, 2.0], [2.0, 3.0]], [-3.0, -4.0])
        assert np.allclose(x, [1.0, -2.0])
        assert det == pytest.approx(-1.0)

    def test_singular_reported(self):
        x, det = oracles.gauss_solve([[1.0, 2.0], [2.0, 4.0]], [1.0, 2.0])
        assert x is None
        assert det == 0.0

    def test_matches_numpy_randomized(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            n = int(rng.integers(1, 7))
            a = rng.normal(size=(n, n))
            b = rng.normal(size=n)
            x, det = oracles.gauss_solve(a, b)
            assert np.allclose(x, np.linalg.solve(a, b), atol=1e-9)
            assert det == pytest.approx(np.linalg.det(a), rel=1e-8)


class TestGeneratorTrajectory:
    def test_harmonic_solution(self):
        traj = oracles.generator_trajectory(
            [1.0, 0.0], [2.0, 3.0, 4.0, 2.0], [1.0, 0.0], horizon=6.3, h=1e-3, sample_every=100,
        )
        for t, xi in zip(traj.times, traj.xi):
            assert abs(xi[0] - math.cos(t)) < 1e-6
            assert abs(xi[1] + math.sin(t)) < 1e-6

    def test_zero_initial_state(self):
        traj = oracles.generator_trajectory(
            [1.0, 0.0], [2.0, 3.0, 4.0, 2.0], [0.0, 0.0], horizon=1.0,
        )
        assert np.all(traj.theta == 0.0)

    def test_periodicity(self):
        traj = oracles.generator_trajectory(
            [1.0, 0.0], [2.0, 3.0, 4.0, 2.0], [1.0, 0.0],
            horizon=2 * math.pi, h=1e-3, sample_every=100,
        )
        assert abs(np.linalg.norm(traj.xi[-1]) - 1.0) < 1e-6

    def test_theta_is_q_times_xi(self):
        rng = np.random.default_rng(1)
        a, m = random_generator(rng, n_max=3)
        xi0 = full_excitation_xi0(rng, a)
        traj = oracles.generator_trajectory(a, m, xi0, horizon=2.0)
        q = mk.q_matrix(a, m)
        for xi, th in zip(traj.xi, traj.theta):
            assert np.max(np.abs(th - q @ xi)) < 1e-10

    def test_unstable_generator_rejected(self):
        with pytest.raises(PreconditionError):
            oracles.generator_trajectory([-1.0, 0.5], [2.0, 3.0, 4.0, 2.0], [1.0, 0.0])

    def test_repeated_modes_rejected(self):
        # a = (0, 0): double eigenvalue at zero
        with pytest.raises(PreconditionError):
            oracles.generator_trajectory([0.0, 0.0], [2.0, 3.0, 4.0, 2.0], [1.0, 0.0])


class TestLemma1Constancy:
    def test_duffing_generator_constancy(self):
        rng = np.random.default_rng(2)
        a = duffing_true_a(0.5)
        xi0 = full_excitation_xi0(rng, a)
        traj = oracles.generator_trajectory(a, np.array(DUFFING_M_COEFFS), xi0,
                                            horizon=10.0, h=1e-3, sample_every=100)
        rep = oracles.lemma1_constancy(traj, a)
        assert rep.max_dev < 1e-6
        assert not rep.near_singular

    def test_scalar_constant_signal(self):
        # n = 1 with a = (0): constant generator, recovered coefficient 0
        traj = oracles.generator_trajectory([0.0], [2.0, 3.0], [1.5], horizon=2.0)
        rep = oracles.lemma1_constancy(traj, [0.0])
        assert rep.max_dev < 1e-10
        assert not rep.near_singular

    def test_under_excitation_detected(self):
        a = duffing_true_a(0.5)
        p, lam = mk.vandermonde_factor(a)
        coeffs = np.zeros(4, dtype=complex)
        k = int(np.argmin(np.abs(lam - 0.5j)))
        kc = int(np.argmin(np.abs(lam + 0.5j)))
        coeffs[k] = coeffs[kc] = 1.0
        xi0 = (p @ coeffs).real
        traj = oracles.generator_trajectory(a, np.array(DUFFING_M_COEFFS), xi0, horizon=5.0)
        rep = oracles.lemma1_constancy(traj, a)
        assert rep.near_singular


class TestDft:
    def test_pure_cosine_peak(self):
        # 1.5 rad/s sits exactly on bin 12 for this dt and length
        dt = math.pi / 16
        t = np.arange(256) * dt
        u = 2.5 * np.cos(1.5 * t)
        omegas, amps = oracles.naive_dft(u, dt)
        peaks = oracles.spectral_peaks(omegas, amps)
        assert abs(peaks[0][0] - 1.5) <= 2 * math.pi / (256 * dt)
        assert peaks[0][1] == pytest.approx(2.5, rel=1e-6)

    def test_constant_signal_is_dc_peak(self):
        omegas, amps = oracles.naive_dft(np.full(256, 3.0), 0.1)
        peaks = oracles.spectral_peaks(omegas, amps)
        assert peaks[0][0] == 0.0
        assert peaks[0][1] == pytest.approx(3.0, rel=1e-9)

    def test_matches_fft(self):
        rng = np.random.default_rng(3)
        u = rng.normal(size=200)
        omegas, amps = oracles.naive_dft(u, 0.05)
        ref = np.abs(np.fft.rfft(u)) / u.size
        ref[1:] *= 2.0
        ref[-1] /= 2.0  # Nyquist bin is not mirrored for even lengths
        assert np.allclose(amps, ref, atol=1e-10)

    def test_size_limit(self):
        with pytest.raises(ValueError):
            oracles.naive_dft(np.zeros(5000), 0.1)


class TestSteadyStateInputOracle:
    def test_constant_reference_cstr_without_disturbance(self):
        # zero disturbance: the converged input is constant, a single DC peak
        scen = cstr_scenario()
        scen = dataclasses.replace(scen, exo_v0=np.zeros(2), horizon=40.0)
        rep = oracles.steady_state_input_oracle(scen, tol=0.05)
        assert rep.peaks[0][0] == 0.0
        assert rep.peaks[0][1] == pytest.approx(17.13, abs=0.5)
        others = [p for p in rep.peaks if p[0] != 0.0]
        assert all(p[1] < 0.01 * rep.peaks[0][1] for p in others)

    def test_non_converged_run_is_inconclusive(self):
        scen = cstr_scenario()
        scen = dataclasses.replace(scen, horizon=2.0)
        with pytest.raises(InconclusiveOracleError):
            oracles.steady_state_input_oracle(scen, tol=1e-4)
