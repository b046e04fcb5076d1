"""Internal-model dynamics, the saturated mapping, and the learner law."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from npreg import internal_model as im
from npreg import matrixkit as mk
from npreg.engine import finite_diff_check
from npreg.verify import random_m_coeffs

M2 = [2.0, 3.0]


def test_internal_model_requires_hurwitz():
    with pytest.raises(ValueError):
        im.InternalModel.from_m_coeffs([1.0, 0.0])  # spectrum on the imaginary axis


def test_im_rhs_equilibrium():
    model = im.InternalModel.from_m_coeffs(M2)
    assert np.array_equal(im.im_rhs(model, 0.0), [0.0, 0.0])


def test_im_rhs_drive_enters_last_component():
    model = im.InternalModel.from_m_coeffs(M2)
    assert np.array_equal(im.im_rhs(model, 1.0), [0.0, 1.0])


def test_im_rhs_matrix_product():
    model = im.InternalModel.from_m_coeffs(M2, eta0=[1.0, 0.0])
    assert np.array_equal(im.im_rhs(model, 0.0), [0.0, -2.0])


def test_im_rhs_nonfinite_drive_rejected():
    model = im.InternalModel.from_m_coeffs(M2)
    with pytest.raises(ValueError):
        im.im_rhs(model, float("nan"))


class TestBump:
    def test_negative(self):
        assert im.bump_psi(-1.0) == 0.0

    def test_unit(self):
        assert im.bump_psi(1.0) == pytest.approx(0.36787944117144233, rel=1e-12)

    def test_tiny_positive_underflows(self):
        assert im.bump_psi(0.01) < 1e-40

    def test_clamp_to_zero(self):
        assert im.bump_psi(1e-4) == 0.0  # exp(-1e4) is beyond double range


class TestSmoothStep:
    def test_midpoint(self):
        assert im.smooth_step(0.5) == pytest.approx(0.5, abs=1e-15)

    def test_left_of_support(self):
        assert im.smooth_step(-3.0) == 0.0

    def test_right_of_support(self):
        assert im.smooth_step(2.0) == 1.0

    @given(st.floats(min_value=-50.0, max_value=50.0, allow_nan=False))
    @settings(max_examples=300, deadline=None)
    def test_range(self, s):
        v = im.smooth_step(s)
        assert 0.0 <= v <= 1.0

    def test_monotone_on_grid(self):
        grid = np.linspace(-2.0, 3.0, 2001)
        vals = np.array([im.smooth_step(s) for s in grid])
        assert np.all(np.diff(vals) >= -1e-15)

    def test_range_on_a_million_samples(self):
        rng = np.random.default_rng(42)
        samples = rng.uniform(-100.0, 100.0, size=1_000_000)
        step = im.smooth_step
        assert all(0.0 <= step(float(s)) <= 1.0 for s in samples)


class TestChi:
    def test_scalar_case(self):
        # Xi([0]) with m = (2, 3) is [[2]]; the second eta entry is ignored
        assert im.chi([0.5, 7.0], [0.0], M2) == pytest.approx(1.0, abs=1e-14)

    def test_zero_eta(self):
        assert im.chi(np.zeros(8), [9.0, 0.0, 10.0, 0.0], random_m_coeffs(np.random.default_rng(0), 4)) == 0.0

    def test_linear_in_eta(self):
        rng = np.random.default_rng(1)
        n = 3
        m = random_m_coeffs(rng, n)
        a = rng.normal(size=n)
        e1, e2 = rng.normal(size=6), rng.normal(size=6)
        al, be = 1.7, -0.3
        lhs = im.chi(al * e1 + be * e2, a, m)
        rhs = al * im.chi(e1, a, m) + be * im.chi(e2, a, m)
        assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))

    def test_matches_xi_matrix(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            n = int(rng.integers(1, 7))
            m = random_m_coeffs(rng, n)
            a = rng.normal(size=n)
            eta = rng.normal(size=2 * n)
            direct = float(mk.xi_matrix(a, m)[0] @ eta[:n])
            assert im.chi(eta, a, m) == pytest.approx(direct, rel=1e-10, abs=1e-10)


class TestChiS:
    def test_equals_chi_inside_ball(self):
        rng = np.random.default_rng(3)
        n = 2
        m = random_m_coeffs(rng, n)
        eta = rng.normal(size=4)
        a = rng.normal(size=2)
        s2 = float(eta @ eta + a @ a)
        assert im.chi_s(eta, a, m, delta=2 * s2 + 1.0) == im.chi(eta, a, m)

    def test_zero_beyond_ball(self):
        rng = np.random.default_rng(4)
        n = 2
        m = random_m_coeffs(rng, n)
        eta = rng.normal(size=4) + 3.0
        a = rng.normal(size=2)
        s2 = float(eta @ eta + a @ a)
        assert im.chi_s(eta, a, m, delta=s2 / 2.0) == 0.0 or s2 / 2.0 + 1.0 > s2

    def test_midband_strictly_between(self):
        n = 1
        m = np.array(M2)
        eta = np.array([2.0, 0.0])
        a = np.array([0.0])
        s2 = 4.0
        delta = s2 - 0.5  # gate argument = 0.5, strictly inside the band
        full = im.chi(eta, a, m)
        val = im.chi_s(eta, a, m, delta=delta)
        assert 0.0 < abs(val) < abs(full)

    def test_sandwich_randomized(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            n = int(rng.integers(1, 6))
            m = random_m_coeffs(rng, n)
            eta = rng.normal(0, 2, size=2 * n)
            a = rng.normal(0, 2, size=n)
            delta = float(rng.uniform(0.5, 30.0))
            full = im.chi(eta, a, m)
            val = im.chi_s(eta, a, m, delta=delta)
            assert abs(val) <= abs(full) + 1e-12
            if eta @ eta + a @ a <= delta:
                assert val == full


class TestChiSGrad:
    def test_matches_finite_differences(self):
        rng = np.random.default_rng(6)
        for regime in range(30):
            n = int(rng.integers(1, 6))
            m = random_m_coeffs(rng, n)
            eta = rng.normal(size=2 * n)
            a = rng.normal(size=n)
            s2 = float(eta @ eta + a @ a)
            delta = [s2 + 4.0, max(s2 - 0.5, 0.1), max(s2 / 4, 0.05)][regime % 3]

            def f(z):
                return im.chi_s(z[:2 * n], z[2 * n:], m, delta)

            def g(z):
                ge, ga = im.chi_s_grad(z[:2 * n], z[2 * n:], m, delta)
                return np.concatenate((ge, ga))

            assert finite_diff_check(f, g, [np.concatenate((eta, a))]) < 1e-5

    def test_origin_gradient_is_xi_row(self):
        # at eta = 0, a = 0 the gate is fully open and its norm gradient vanishes
        n = 3
        m = random_m_coeffs(np.random.default_rng(7), n)
        g_eta, g_a = im.chi_s_grad(np.zeros(2 * n), np.zeros(n), m, delta=5.0)
        assert np.allclose(g_eta[:n], mk.xi_matrix(np.zeros(n), m)[0], atol=1e-12)
        assert np.allclose(g_eta[n:], 0.0)

    def test_deep_saturation_grads_vanish(self):
        n = 2
        m = random_m_coeffs(np.random.default_rng(8), n)
        eta = np.full(4, 3.0)
        a = np.ones(2)
        g_eta, g_a = im.chi_s_grad(eta, a, m, delta=1.0)
        assert np.all(g_eta == 0.0) and np.all(g_a == 0.0)

    def test_eta_tail_gradient_only_from_gate(self):
        # chi ignores eta_(n+1..2n); inside the ball those partials are zero
        n = 2
        m = random_m_coeffs(np.random.default_rng(9), n)
        eta = np.array([0.3, -0.2, 0.8, 1.1])
        a = np.array([0.1, -0.4])
        g_eta, _ = im.chi_s_grad(eta, a, m, delta=100.0)
        assert np.all(g_eta[n:] == 0.0)


class TestLearner:
    def test_scalar_example(self):
        learner = im.Learner(n=1, a_hat=np.array([0.0]), k_a=1.0)
        assert np.allclose(im.learning_rhs(learner, [1.0, 2.0]), [-2.0])

    def test_zero_eta(self):
        learner = im.Learner(n=3)
        assert np.array_equal(im.learning_rhs(learner, np.zeros(6)), np.zeros(3))

    def test_fixed_point_at_exact_solution(self):
        rng = np.random.default_rng(10)
        n = 3
        theta = rng.normal(size=2 * n)
        th = mk.hankel(theta)
        a = np.linalg.solve(th, -theta[n:])
        learner = im.Learner(n=n, a_hat=a, k_a=2.0)
        assert np.max(np.abs(im.learning_rhs(learner, theta))) < 1e-10

    def test_gradient_flow_descends(self):
        # explicit Euler with step below 1/(k_a |Th^T Th|) cannot increase the residual
        rng = np.random.default_rng(11)
        for _ in range(20):
            n = int(rng.integers(1, 6))
            eta = rng.normal(0, 2, size=2 * n)
            th = mk.hankel(eta)
            a_hat = rng.normal(size=n)
            k_a = float(rng.uniform(0.2, 3.0))
            learner = im.Learner(n=n, a_hat=a_hat, k_a=k_a)
            lip = np.linalg.norm(th.T @ th, 2)
            if lip == 0.0:
                continue
            step = 1.0 / (k_a * lip)

            def resid(a):
                return float(np.linalg.norm(th @ a + eta[n:]) ** 2)

            r0 = resid(a_hat)
            for _ in range(50):
                a_hat = a_hat + step * im.learning_rhs(im.Learner(n=n, a_hat=a_hat, k_a=k_a), eta)
                r1 = resid(a_hat)
                assert r1 <= r0 + 1e-12 * max(1.0, r0)
                r0 = r1

    def test_invalid_gains_rejected(self):
        with pytest.raises(ValueError):
            im.Learner(n=2, k_a=0.0)
        with pytest.raises(ValueError):
            im.Learner(n=2, delta=-1.0)
