"""Plant right-hand sides, the exosystem, and reference/error wiring."""

import math

import numpy as np
import pytest

from npreg import plants
from npreg.engine import rk4_step
from npreg.errors import DomainError


class TestExosystem:
    def test_rotation_field(self):
        ex = plants.Exosystem(sigma=1.0, v=[1.0, 0.0])
        assert np.array_equal(plants.exo_rhs(ex), [0.0, -1.0])

    def test_equilibrium(self):
        ex = plants.Exosystem(sigma=2.0, v=[0.0, 0.0])
        assert np.array_equal(plants.exo_rhs(ex), [0.0, 0.0])

    def test_norm_preserved_over_period(self):
        sigma = 0.7
        v = np.array([1.0, 2.0])
        h = 1e-3
        period = 2 * math.pi / sigma

        def rhs(t, y):
            return np.array([sigma * y[1], -sigma * y[0]])

        t = 0.0
        n0 = np.linalg.norm(v)
        while t < period:
            v = rk4_step(rhs, v, t, h)
            t += h
        assert abs(np.linalg.norm(v) - n0) < 1e-6

    def test_norm_preserved_100s(self):
        sigma = 1.0
        v = np.array([1.0, 2.0])
        h = 1e-3

        def rhs(t, y):
            return np.array([sigma * y[1], -sigma * y[0]])

        n0 = np.linalg.norm(v)
        for k in range(100_000):
            v = rk4_step(rhs, v, k * h, h)
        assert abs(np.linalg.norm(v) - n0) < 1e-6


class TestDuffing:
    def test_cancellation_point(self):
        # -1.5 + 2 - 0.5 = 0 at x = (1, 1) with no inputs
        assert np.array_equal(plants.duffing_rhs([1.0, 1.0], 0.0, 0.0), [1.0, 0.0])

    def test_origin_equilibrium(self):
        assert np.array_equal(plants.duffing_rhs([0.0, 0.0], 0.0, 0.0), [0.0, 0.0])

    def test_inputs_enter_additively(self):
        # -c1 + (-c2) - 0 + u + d with u = -0.5, d = 0.5: 0.5 remains
        out = plants.duffing_rhs([1.0, 0.0], -0.5, 0.5)
        assert np.allclose(out, [0.0, 0.5])

    def test_true_a_at_unit_sigma(self):
        assert np.array_equal(plants.duffing_true_a(1.0), [9.0, 0.0, 10.0, 0.0])

    def test_true_a_at_half_sigma(self):
        assert np.allclose(plants.duffing_true_a(0.5), [0.5625, 0.0, 2.5, 0.0])

    def test_true_a_spectrum(self):
        from npreg import matrixkit
        sigma = 0.8
        eig = matrixkit.spectrum(matrixkit.companion_from_coeffs(plants.duffing_true_a(sigma)))
        got = sorted(eig.imag)
        assert np.allclose(got, [-3 * sigma, -sigma, sigma, 3 * sigma], atol=1e-9)
        assert np.max(np.abs(eig.real)) < 1e-9

    def test_nonpositive_sigma_rejected(self):
        with pytest.raises(ValueError):
            plants.duffing_true_a(0.0)


class TestCstr:
    def test_reaction_vanishes_at_full_conversion(self):
        out = plants.cstr_rhs([1.0, 4.0], 4.0, 0.0)
        assert out[0] == -1.0

    def test_frozen_value(self):
        # -3 + 0.072 * (1 - 3) * exp(-1/0.95), fixed by independent evaluation
        out = plants.cstr_rhs([3.0, -1.0], 0.0, 0.0)
        assert out[0] == pytest.approx(-3.05025860221411, rel=1e-12)
        assert out[1] == pytest.approx(0.8979311822871194, rel=1e-12)

    def test_reaction_sign_flips_at_unit_concentration(self):
        lo = plants.cstr_rhs([0.999, 2.0], 2.0, 0.0)
        hi = plants.cstr_rhs([1.001, 2.0], 2.0, 0.0)
        react_lo = lo[0] + 0.999
        react_hi = hi[0] + 1.001
        assert react_lo > 0.0 > react_hi

    def test_exponent_pole_rejected(self):
        with pytest.raises(DomainError):
            plants.cstr_rhs([0.5, -20.0], 0.0, 0.0)

    def test_gain_is_heat_transfer_coefficient(self):
        assert plants.PlantSpec(kind="cstr", reference=10.0).b == 0.3


class TestBioreactor:
    def test_washout_structure(self):
        out = plants.bioreactor_rhs([0.0, 2.0, 5.0], 3.0, 0.0)
        assert out[0] == 0.0
        assert out[2] == pytest.approx(-0.164 * 5.0)

    def test_product_inhibition_zero(self):
        assert plants.growth_rate_mu(2.0, 50.0, 0.48) == 0.0

    def test_substrate_zero(self):
        assert plants.growth_rate_mu(0.0, 10.0, 0.48) == 0.0

    def test_frozen_growth_rate(self):
        # nominal operating point, fixed by independent evaluation
        mu = plants.growth_rate_mu(2.404, 24.87, 0.48)
        assert mu == pytest.approx(0.1499887362482863, rel=1e-12)

    def test_denominator_guard(self):
        with pytest.raises(DomainError):
            plants.growth_rate_mu(-10.0, 5.0, 0.48)

    def test_gain_is_dilution_rate(self):
        assert plants.PlantSpec(kind="bioreactor", reference=2.0).b == 0.164


class TestReferenceAndError:
    def test_duffing_tracks_exosystem(self):
        plant = plants.PlantSpec(kind="duffing", reference="v1")
        exo = plants.Exosystem(sigma=1.0, v=[1.0, 2.0])
        assert plants.reference_and_error(plant, exo, 1.0) == (1.0, 0.0)

    def test_cstr_setpoint(self):
        plant = plants.PlantSpec(kind="cstr", reference=10.0)
        exo = plants.Exosystem(sigma=0.5, v=[1.0, 0.0])
        assert plants.reference_and_error(plant, exo, 10.0) == (10.0, 0.0)

    def test_bioreactor_setpoint(self):
        plant = plants.PlantSpec(kind="bioreactor", reference=2.0)
        exo = plants.Exosystem(sigma=0.5, v=[0.05, 0.0])
        y_r, e = plants.reference_and_error(plant, exo, 2.404)
        assert y_r == 2.0
        assert e == pytest.approx(0.404)


def test_rhs_determinism():
    args_list = [
        (plants.duffing_rhs, ([1.2, -0.3], 0.7, -0.1)),
        (plants.cstr_rhs, ([0.4, 3.0], 11.0, 0.5)),
        (plants.bioreactor_rhs, ([7.0, 2.4, 24.0], 6.0, 0.02)),
    ]
    for fn, args in args_list:
        a = fn(*args)
        b = fn(*args)
        assert np.array_equal(a, b)


def test_unknown_kind_rejected():
    with pytest.raises(ValueError):
        plants.PlantSpec(kind="pendulum")


def test_unknown_param_rejected():
    with pytest.raises(ValueError):
        plants.PlantSpec(kind="duffing", params={"c9": 1.0})
