"""Integrator, trace capture, metrics, and the finite-difference checker."""

import dataclasses
import math

import numpy as np
import pytest

from npreg import engine
from npreg.engine import Trace, finite_diff_check, metrics, rk4_step
from npreg.errors import BlowUpError
from npreg.scenarios import cstr_scenario, duffing_scenario


def decay(t, y):
    return -y


class TestRk4Step:
    def test_exponential_decay_value(self):
        # 1 - h + h^2/2 - h^3/6 + h^4/24 at h = 0.1
        y = rk4_step(decay, np.array([1.0]), 0.0, 0.1)
        assert y[0] == pytest.approx(0.9048375, abs=1e-12)

    def test_zero_field(self):
        y = rk4_step(lambda t, y: np.zeros_like(y), np.array([3.0, -1.0]), 0.0, 0.5)
        assert np.array_equal(y, [3.0, -1.0])

    def test_fifth_order_local_error(self):
        # halving the step shrinks the one-step defect by about 2^5
        def one_step_err(h):
            y = rk4_step(decay, np.array([1.0]), 0.0, h)
            return abs(y[0] - math.exp(-h))

        ratio = one_step_err(0.1) / one_step_err(0.05)
        assert 25.0 < ratio < 40.0

    def test_nonpositive_step_rejected(self):
        with pytest.raises(ValueError):
            rk4_step(decay, np.array([1.0]), 0.0, 0.0)


def _trace_from_error(times, e, name="synthetic", ahat=None):
    cols = {"e": np.asarray(e, dtype=float)}
    if ahat is not None:
        for i, col in enumerate(np.asarray(ahat).T):
            cols[f"ahat{i + 1}"] = col
    return Trace(name=name, times=np.asarray(times, dtype=float), columns=cols)


class TestMetrics:
    def test_identically_zero(self):
        t = np.linspace(0, 10, 101)
        m = metrics(_trace_from_error(t, np.zeros_like(t)), tol=0.05, tail_window=5.0)
        assert m.settle_time == 0.0
        assert m.tail_rms == 0.0
        assert m.max_abs_e == 0.0

    def test_exponential_settle_time(self):
        t = np.linspace(0, 10, 10001)
        m = metrics(_trace_from_error(t, np.exp(-t)), tol=0.05, tail_window=2.0)
        assert m.settle_time == pytest.approx(2.995732273553991, abs=2e-3)

    def test_sine_tail_rms(self):
        t = np.linspace(0, 4 * math.pi, 40001)
        m = metrics(_trace_from_error(t, np.sin(t)), tol=2.0, tail_window=2 * math.pi)
        assert m.tail_rms == pytest.approx(1 / math.sqrt(2), abs=1e-3)

    def test_never_settles(self):
        t = np.linspace(0, 10, 101)
        m = metrics(_trace_from_error(t, np.ones_like(t)), tol=0.05, tail_window=5.0)
        assert m.settle_time is None

    def test_a_err_final(self):
        t = np.linspace(0, 1, 11)
        ahat = np.tile([1.0, 2.0], (11, 1))
        m = metrics(_trace_from_error(t, np.zeros_like(t), ahat=ahat),
                    tol=0.05, tail_window=0.5, a_true=[1.0, 0.0])
        assert m.a_err_final == pytest.approx(2.0)

    def test_empty_trace_rejected(self):
        with pytest.raises(ValueError):
            metrics(_trace_from_error([], []), 0.05, 1.0)


class TestFiniteDiffCheck:
    def test_quadratic_is_exact(self):
        a = np.array([[2.0, 0.5], [0.5, 1.0]])

        def f(x):
            return float(x @ a @ x)

        def g(x):
            return 2.0 * a @ x

        rng = np.random.default_rng(0)
        pts = [rng.normal(size=2) for _ in range(10)]
        assert finite_diff_check(f, g, pts) < 1e-8

    def test_wrong_gradient_detected(self):
        def f(x):
            return float(x @ x)

        def g(x):
            return -2.0 * x  # sign error

        assert finite_diff_check(f, g, [np.array([1.0, 2.0])]) > 0.5

    def test_zero_gradient_pair_passes(self):
        assert finite_diff_check(lambda x: 0.0, lambda x: np.zeros_like(x),
                                 [np.array([1.0])]) == 0.0


class TestSimulate:
    def test_divergence_guard_trips_on_weak_gain(self):
        # negligible fixed gain cannot hold the open-loop-unstable cubic
        scen = duffing_scenario(mapping_mode="none")
        scen = dataclasses.replace(
            scen,
            regulator=dataclasses.replace(
                scen.regulator, gain_mode="fixed", k_star=1e-6, mapping_mode="none",
            ),
        )
        with pytest.raises(BlowUpError) as info:
            engine.simulate(scen)
        assert info.value.t_last > 0.0

    def test_domain_error_carries_timestamp(self):
        # an over-aggressive learner shoves the substrate out of the model domain
        from npreg.errors import DomainError
        from npreg.scenarios import bioreactor_scenario
        scen = bioreactor_scenario()
        scen = dataclasses.replace(
            scen, regulator=dataclasses.replace(scen.regulator, k_a=2.0, delta=1e6))
        with pytest.raises(DomainError) as info:
            engine.simulate(scen)
        assert info.value.t > 0.0

    def test_sampling_includes_endpoints(self):
        scen = cstr_scenario()
        scen = dataclasses.replace(scen, horizon=0.25, sample_every=100)
        trace = engine.simulate(scen)
        assert trace.times[0] == 0.0
        assert trace.times[-1] == pytest.approx(0.25)
        assert len(trace) == 4  # steps 0, 100, 200, 250

    def test_column_contract_duffing(self):
        scen = dataclasses.replace(duffing_scenario(), horizon=0.01)
        trace = engine.simulate(scen)
        assert trace.column_names == (
            ["v1", "v2", "x1", "x2", "y", "e", "xhat1", "xhat2"]
            + [f"eta{i}" for i in range(1, 9)]
            + [f"ahat{i}" for i in range(1, 5)]
            + ["khat", "u"]
        )

    def test_column_contract_cstr(self):
        scen = dataclasses.replace(cstr_scenario(), horizon=0.01)
        trace = engine.simulate(scen)
        assert "xhat1" not in trace.columns
        assert trace.column_names == (
            ["v1", "v2", "x1", "x2", "y", "e"]
            + [f"eta{i}" for i in range(1, 11)]
            + [f"ahat{i}" for i in range(1, 6)]
            + ["khat", "u"]
        )

    def test_column_contract_bioreactor(self):
        from npreg.scenarios import bioreactor_scenario
        scen = dataclasses.replace(bioreactor_scenario(), horizon=0.01)
        trace = engine.simulate(scen)
        assert "khat" not in trace.columns  # fixed-gain scenario
        assert trace.column_names == (
            ["v1", "v2", "x1", "x2", "x3", "y", "e"]
            + [f"eta{i}" for i in range(1, 15)]
            + [f"ahat{i}" for i in range(1, 8)]
            + ["u"]
        )

    def test_quiescent_world_gives_constant_trace(self):
        # zero exosystem, zero states, zero reference: nothing moves
        scen = duffing_scenario()
        scen = dataclasses.replace(scen, exo_v0=np.zeros(2), x0=np.zeros(2),
                                   horizon=0.1, sample_every=100)
        trace = engine.simulate(scen)
        for col in trace.column_names:
            assert np.all(trace.column(col) == trace.column(col)[0]), col

    def test_exosystem_norm_preserved_in_closed_loop(self):
        # the oscillator embedded in the full loop keeps its energy
        scen = duffing_scenario()
        trace = engine.simulate(scen)
        norms = np.hypot(trace.column("v1"), trace.column("v2"))
        assert float(np.max(np.abs(norms - norms[0]))) < 1e-5

    def test_y_and_e_columns_consistent(self):
        scen = dataclasses.replace(cstr_scenario(), horizon=0.5)
        trace = engine.simulate(scen)
        assert np.array_equal(trace.column("y"), trace.column("x2"))
        assert np.allclose(trace.column("e"), trace.column("y") - 10.0)
