"""Exosystem and case-study plants (Duffing oscillator, CSTR, bioreactor).

Each plant is a relative-degree-1 or -2 single-output system driven by a
control ``u`` and a sinusoidal disturbance ``d``.  The disturbance is the
first component of a two-dimensional harmonic exosystem, so the simulated
world is exactly an autonomous oscillator feeding the plant; for the Duffing
scenario that same oscillator also supplies the tracking reference.

All right-hand sides are pure functions: identical inputs give bit-identical
outputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

PLANT_KINDS = ("duffing", "cstr", "bioreactor")

# Case-study parameter presets.
DUFFING_PARAMS = {"c1": 1.5, "c2": -2.0, "c3": 0.5}
CSTR_PARAMS = {"gamma": 20.0, "beta": 0.3, "B": 8.0, "Da": 0.072}
BIOREACTOR_PARAMS = {
    "D": 0.164,
    "Y": 0.4,
    "alpha": 2.2,
    "beta": 0.2,
    "mu_m": 0.48,
    "Km": 1.2,
    "KI": 22.0,
    "xm": 50.0,
}

# Per-kind constants: state dimension, output index, relative degree, and the
# name of the parameter playing the role of the high-frequency gain b.
_KIND_INFO = {
    "duffing": {"n_state": 2, "y_index": 0, "r": 2, "b_param": None},  # b = 1
    "cstr": {"n_state": 2, "y_index": 1, "r": 1, "b_param": "beta"},
    "bioreactor": {"n_state": 3, "y_index": 1, "r": 1, "b_param": "D"},
}


@dataclass
class Exosystem:
    """Harmonic oscillator ``v' = S(sigma) v`` with ``S = [[0, sigma], [-sigma, 0]]``."""

    sigma: float
    v: np.ndarray

    def __post_init__(self):
        self.v = np.asarray(self.v, dtype=float)
        if self.v.shape != (2,):
            raise ValueError("exosystem state must have length 2")

    @property
    def amplitude(self) -> float:
        return float(np.hypot(self.v[0], self.v[1]))


@dataclass
class PlantSpec:
    """Which plant to simulate and with which parameters.

    ``reference`` is either the string ``"v1"`` (track the exosystem's first
    component, Duffing case) or a constant set point.
    """

    kind: str
    params: dict = field(default_factory=dict)
    reference: object = "v1"

    def __post_init__(self):
        if self.kind not in PLANT_KINDS:
            raise ValueError(f"unknown plant kind {self.kind!r}; expected one of {PLANT_KINDS}")
        defaults = default_params(self.kind)
        unknown = set(self.params) - set(defaults)
        if unknown:
            raise ValueError(f"unknown {self.kind} parameters: {sorted(unknown)}")
        merged = dict(defaults)
        merged.update({k: float(v) for k, v in self.params.items()})
        self.params = merged
        if self.reference != "v1":
            self.reference = float(self.reference)

    @property
    def r(self) -> int:
        return _KIND_INFO[self.kind]["r"]

    @property
    def n_state(self) -> int:
        return _KIND_INFO[self.kind]["n_state"]

    @property
    def y_index(self) -> int:
        return _KIND_INFO[self.kind]["y_index"]

    @property
    def b(self) -> float:
        name = _KIND_INFO[self.kind]["b_param"]
        return 1.0 if name is None else self.params[name]

    def rhs(self, x, u: float, d: float) -> np.ndarray:
        if self.kind == "duffing":
            return duffing_rhs(x, u, d, self.params)
        if self.kind == "cstr":
            return cstr_rhs(x, u, d, self.params)
        return bioreactor_rhs(x, u, d, self.params)


def default_params(kind: str) -> dict:
    return {
        "duffing": DUFFING_PARAMS,
        "cstr": CSTR_PARAMS,
        "bioreactor": BIOREACTOR_PARAMS,
    }[kind].copy()


def exo_rhs(ex: Exosystem) -> np.ndarray:
    """Rotation field ``(sigma v_2, -sigma v_1)``; preserves ``|v|``."""
    return np.array([ex.sigma * ex.v[1], -ex.sigma * ex.v[0]])


def duffing_rhs(x, u: float, d: float, params=None) -> np.ndarray:
    """Controlled Duffing oscillator: ``x1' = x2``, ``x2' = -c1 x1 - c2 x1^3 - c3 x2 + u + d``."""
    p = DUFFING_PARAMS if params is None else params
    x1, x2 = float(x[0]), float(x[1])
    return np.array([x2, -p["c1"] * x1 - p["c2"] * x1 ** 3 - p["c3"] * x2 + u + d])


def duffing_true_a(sigma: float) -> np.ndarray:
    """Generator coefficients of the Duffing steady-state drive: ``(9 s^4, 0, 10 s^2, 0)``."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    return np.array([9.0 * sigma ** 4, 0.0, 10.0 * sigma ** 2, 0.0])


def cstr_rhs(x, u: float, d: float, params=None) -> np.ndarray:
    """Continuous stirred tank reactor with exothermic reaction and jacket input.

    ``x1`` is the reactant concentration, ``x2`` the (dimensionless)
    temperature; ``u`` is the cooling-jacket temperature and ``d`` a feed
    temperature disturbance.
    """
    p = CSTR_PARAMS if params is None else params
    x1, x2 = float(x[0]), float(x[1])
    denom = 1.0 + x2 / p["gamma"]
    if denom <= 0.0:
        raise DomainError(f"CSTR exponent pole: 1 + x2/gamma = {denom:.3e} at x2 = {x2:.6g}")
    reaction = p["Da"] * (1.0 - x1) * math.exp(x2 / denom)
    return np.array(
        [
            -x1 + reaction,
            -x2 + p["B"] * reaction + p["beta"] * (u - x2) + d,
        ]
    )


def growth_rate_mu(x2: float, x3: float, mu_m_t: float, params=None) -> float:
    """Substrate- and product-limited specific growth rate."""
    p = BIOREACTOR_PARAMS if params is None else params
    denom = p["Km"] + x2 + x2 * x2 / p["KI"]
    if denom <= 0.0:
        raise DomainError(f"growth-rate denominator nonpositive: {denom:.3e} at x2 = {x2:.6g}")
    return mu_m_t * (1.0 - x3 / p["xm"]) * x2 / denom


def bioreactor_rhs(x, u: float, d: float, params=None) -> np.ndarray:
    """Anaerobic continuous bioreactor: biomass, substrate, product.

    ``u`` is the substrate feed concentration; the disturbance perturbs the
    maximum growth rate, ``mu_m(t) = mu_m + d``.
    """
    p = BIOREACTOR_PARAMS if params is None else params
    x1, x2, x3 = float(x[0]), float(x[1]), float(x[2])
    mu = growth_rate_mu(x2, x3, p["mu_m"] + d, p)
    big_d = p["D"]
    return np.array(
        [
            -big_d * x1 + mu * x1,
            big_d * (u - x2) - mu * x2 / p["Y"],
            -big_d * x3 + (p["alpha"] * mu + p["beta"]) * x1,
        ]
    )


def reference_and_error(plant: PlantSpec, exo: Exosystem, y: float) -> tuple[float, float]:
    """Reference value and tracking error ``e = y - y_r`` for the current exosystem state."""
    y_r = float(exo.v[0]) if plant.reference == "v1" else float(plant.reference)
    return y_r, y - y_r
