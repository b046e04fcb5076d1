"""Backstepping output-feedback regulator and the assembled closed-loop field.

The controller family implemented here is the saturated-mapping backstepping
chain

    eps_1 = e,
    alpha_1 = -k rho(eps_1) eps_1 + chi_s(eta, a_hat),
    eps_2 = xhat_2 - alpha_1,
    alpha_2 = -b eps_1 - eps_2 + lam_2 xhat_1
              + (d alpha_1/d eta) . eta'
              + b (d alpha_1/d eps_1) (eps_2 - k rho(eps_1) eps_1)
              - (1/2) eps_2 (d alpha_1/d eps_1)^2
              + (d alpha_1/d a_hat) . a_hat'
              + (d alpha_1/d k) k',
    u = alpha_r,

with every partial evaluated analytically (no numerical differentiation on
the control path).  The gain ``k`` is either a fixed constant or the adaptive
estimate ``k' = rho(eps_1) eps_1^2``.  Relative degree 1 uses only the first
line; relative degree 2 uses the full chain together with the input-driven
filter ``xhat' = (A_c - lam C_c) xhat + B_c u``.

The closed-loop state is the concatenation

    [exosystem v (2), plant x, filter xhat (r >= 2 only),
     internal model eta (2n), estimate a_hat (n), gain k_hat (adaptive only)]

and ``closed_loop_rhs`` evaluates its complete time derivative.  For relative
degree >= 2 the internal model is driven by the filter state ``xhat_2``; for
relative degree 1 there is no filter and the model is driven by the control
``u`` itself, which is the signal the generator describes in that case.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import internal_model as imod
from . import matrixkit
from .errors import ConfigError
from .plants import PlantSpec


@dataclass(frozen=True)
class RhoSpec:
    """Smooth positive scaling function ``rho(e) = c0 + c1 e^2`` (with ``rho >= 1``)."""

    kind: str = "constant"
    c0: float = 1.0
    c1: float = 0.0

    def __post_init__(self):
        if self.kind not in ("constant", "quadratic"):
            raise ConfigError(f"unknown rho spec {self.kind!r}")
        if self.kind == "constant" and self.c1 != 0.0:
            raise ConfigError("constant rho must have c1 = 0")
        if self.c0 < 1.0 or self.c1 < 0.0:
            raise ConfigError("rho must satisfy rho(e) >= 1 for all e")


def rho_eval(spec: RhoSpec, eps1: float) -> float:
    """Evaluate ``rho`` at the tracking error."""
    return spec.c0 + spec.c1 * eps1 * eps1


def rho_deriv(spec: RhoSpec, eps1: float) -> float:
    return 2.0 * spec.c1 * eps1


def adaptive_gain_rhs(eps1: float, rho_spec: RhoSpec) -> float:
    """Gain adaptation law ``k_hat' = rho(eps_1) eps_1^2`` (nonnegative pointwise)."""
    return rho_eval(rho_spec, eps1) * eps1 * eps1


MAPPING_MODES = ("learned", "oracle", "none")
GAIN_MODES = ("fixed", "adaptive")


@dataclass
class RegulatorConfig:
    """Complete controller configuration for one scenario."""

    r: int
    b: float
    n: int
    m_coeffs: np.ndarray
    lam: np.ndarray | None = None
    gain_mode: str = "fixed"
    k_star: float = 1.0
    khat0: float = 0.0
    rho: RhoSpec = field(default_factory=RhoSpec)
    k_a: float = 1.0
    delta: float = imod.DEFAULT_DELTA
    mapping_mode: str = "learned"
    a_true: np.ndarray | None = None

    def __post_init__(self):
        if self.r < 1:
            raise ConfigError("relative degree must be >= 1")
        if not self.b > 0:
            raise ConfigError("high-frequency gain b must be positive")
        self.m_coeffs = np.asarray(self.m_coeffs, dtype=float)
        if self.m_coeffs.shape != (2 * self.n,):
            raise ConfigError(f"m_coeffs must have length {2 * self.n}")
        big_m, _ = matrixkit.mn_pair(self.m_coeffs)
        if not matrixkit.is_hurwitz(big_m):
            raise ConfigError("internal-model coefficients m_coeffs do not give a Hurwitz M")
        if self.r >= 2:
            if self.lam is None:
                raise ConfigError("filter gains lam are required for relative degree >= 2")
            self.lam = np.asarray(self.lam, dtype=float)
            if self.lam.shape != (self.r,):
                raise ConfigError(f"lam must have length r = {self.r}")
            if not matrixkit.is_hurwitz(filter_matrix(self.lam)):
                raise ConfigError("filter matrix A_c - lam C_c is not Hurwitz")
        else:
            self.lam = None
        if self.gain_mode not in GAIN_MODES:
            raise ConfigError(f"unknown gain mode {self.gain_mode!r}")
        if self.gain_mode == "fixed" and not self.k_star > 0:
            raise ConfigError("fixed gain k_star must be positive")
        if not self.k_a > 0:
            raise ConfigError("learning gain k_a must be positive")
        if not self.delta > 0:
            raise ConfigError("saturation radius delta must be positive")
        if self.mapping_mode not in MAPPING_MODES:
            raise ConfigError(f"unknown mapping mode {self.mapping_mode!r}")
        if self.a_true is not None:
            self.a_true = np.asarray(self.a_true, dtype=float)
            if self.a_true.shape != (self.n,):
                raise ConfigError(f"a_true must have length n = {self.n}")
        if self.mapping_mode == "oracle" and self.a_true is None:
            raise ConfigError("oracle mapping mode needs a_true")

    @property
    def adaptive(self) -> bool:
        return self.gain_mode == "adaptive"


@dataclass
class RegulatorState:
    """Controller-side state: filter, internal model, estimate, adaptive gain."""

    x_hat: np.ndarray
    eta: np.ndarray
    a_hat: np.ndarray
    k_hat: float = 0.0

    def __post_init__(self):
        self.x_hat = np.asarray(self.x_hat, dtype=float)
        self.eta = np.asarray(self.eta, dtype=float)
        self.a_hat = np.asarray(self.a_hat, dtype=float)
        for name in ("x_hat", "eta", "a_hat"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} entries must be finite")


@dataclass
class EpsilonChain:
    """Backstepping intermediates: errors, virtual controls, and the input."""

    eps: np.ndarray
    alpha: np.ndarray
    u: float


def filter_matrix(lam) -> np.ndarray:
    """The filter system matrix ``A_c - lam C_c``."""
    lam = np.asarray(lam, dtype=float)
    r = lam.size
    a = np.zeros((r, r))
    a[:-1, 1:] = np.eye(r - 1)
    a[:, 0] -= lam
    return a


def filter_rhs(x_hat, u: float, lam) -> np.ndarray:
    """Input-driven filter field ``(A_c - lam C_c) x_hat + B_c u`` (needs r >= 2)."""
    lam = np.asarray(lam, dtype=float)
    if lam.size < 2:
        raise ConfigError("the input-driven filter exists only for relative degree >= 2")
    x_hat = np.asarray(x_hat, dtype=float)
    out = np.empty_like(x_hat)
    out[:-1] = x_hat[1:]
    out[-1] = u
    out -= lam * x_hat[0]
    return out


def _mapping_terms(cfg: RegulatorConfig, eta, a_hat):
    """chi_s value and gradients according to the mapping mode.

    Returns ``(value, grad_eta, grad_ahat)`` where ``grad_ahat`` is the
    gradient with respect to the *evolving* estimate (zero in oracle mode,
    where the mapping is frozen at a_true, and in the disabled mode).
    """
    if cfg.mapping_mode == "none":
        return 0.0, np.zeros(2 * cfg.n), np.zeros(cfg.n)
    if cfg.mapping_mode == "oracle":
        val, g_eta, _ = imod.chi_s_value_and_grads(eta, cfg.a_true, cfg.m_coeffs, cfg.delta)
        return val, g_eta, np.zeros(cfg.n)
    val, g_eta, g_ahat = imod.chi_s_value_and_grads(eta, a_hat, cfg.m_coeffs, cfg.delta)
    return val, g_eta, g_ahat


def _eta_dot(m_coeffs: np.ndarray, eta: np.ndarray, drive: float) -> np.ndarray:
    # Companion M: shift-up rows plus the coefficient row; N adds the drive
    # to the last component.
    out = np.empty_like(eta)
    out[:-1] = eta[1:]
    out[-1] = -float(m_coeffs @ eta) + drive
    return out


def _learning_dot(cfg: RegulatorConfig, eta: np.ndarray, a_hat: np.ndarray) -> np.ndarray:
    th = matrixkit.hankel(eta)
    resid = th @ a_hat + eta[cfg.n:]
    return -cfg.k_a * (th.T @ resid)


def alpha_chain(e: float, state: RegulatorState, cfg: RegulatorConfig) -> EpsilonChain:
    """Evaluate the backstepping chain at the current controller state.

    Closed form covers relative degrees 1 and 2, which is every shipped
    scenario; higher relative degrees are rejected.
    """
    if cfg.r > 2:
        raise ConfigError("alpha_chain supports relative degree 1 and 2 only")
    k = state.k_hat if cfg.adaptive else cfg.k_star
    rho = rho_eval(cfg.rho, e)
    chs, g_eta, g_ahat = _mapping_terms(cfg, state.eta, state.a_hat)
    alpha1 = -k * rho * e + chs
    if cfg.r == 1:
        return EpsilonChain(np.array([e]), np.array([alpha1]), alpha1)

    xhat2 = float(state.x_hat[1])
    eps2 = xhat2 - alpha1
    eta_dot = _eta_dot(cfg.m_coeffs, state.eta, xhat2)
    a_dot = _learning_dot(cfg, state.eta, state.a_hat)
    k_dot = adaptive_gain_rhs(e, cfg.rho) if cfg.adaptive else 0.0
    da1_de = -k * (rho + rho_deriv(cfg.rho, e) * e)
    da1_dk = -rho * e
    alpha2 = (
        -cfg.b * e
        - eps2
        + cfg.lam[1] * float(state.x_hat[0])
        + float(g_eta @ eta_dot)
        + cfg.b * da1_de * (eps2 - k * rho * e)
        - 0.5 * eps2 * da1_de * da1_de
        + float(g_ahat @ a_dot)
        + da1_dk * k_dot
    )
    return EpsilonChain(np.array([e, eps2]), np.array([alpha1, alpha2]), alpha2)


@dataclass(frozen=True)
class WorldLayout:
    """Index map of the flat closed-loop state vector."""

    exo: slice
    plant: slice
    filt: slice | None
    eta: slice
    ahat: slice
    khat: int | None
    dim: int


def make_layout(n_plant: int, r: int, n: int, adaptive: bool) -> WorldLayout:
    pos = 2
    plant = slice(pos, pos + n_plant)
    pos += n_plant
    filt = None
    if r >= 2:
        filt = slice(pos, pos + r)
        pos += r
    eta = slice(pos, pos + 2 * n)
    pos += 2 * n
    ahat = slice(pos, pos + n)
    pos += n
    khat = None
    if adaptive:
        khat = pos
        pos += 1
    return WorldLayout(slice(0, 2), plant, filt, eta, ahat, khat, pos)


@dataclass
class Runtime:
    """Precompiled pieces of one scenario's closed loop."""

    plant: PlantSpec
    cfg: RegulatorConfig
    sigma: float
    layout: WorldLayout


def make_runtime(plant: PlantSpec, cfg: RegulatorConfig, sigma: float) -> Runtime:
    if plant.r != cfg.r:
        raise ConfigError(f"plant relative degree {plant.r} != regulator r {cfg.r}")
    if abs(plant.b - cfg.b) > 1e-12:
        raise ConfigError(f"plant gain b = {plant.b} != regulator b = {cfg.b}")
    layout = make_layout(plant.n_state, cfg.r, cfg.n, cfg.adaptive)
    return Runtime(plant=plant, cfg=cfg, sigma=sigma, layout=layout)


def _control(state: np.ndarray, rt: Runtime):
    """Tracking error, chain, and controller-state derivatives at one world state."""
    lay = rt.layout
    cfg = rt.cfg
    v = state[lay.exo]
    x = state[lay.plant]
    eta = state[lay.eta]
    a_hat = state[lay.ahat]
    k_hat = state[lay.khat] if lay.khat is not None else 0.0
    x_hat = state[lay.filt] if lay.filt is not None else np.zeros(0)

    y = float(x[rt.plant.y_index])
    y_r = float(v[0]) if rt.plant.reference == "v1" else float(rt.plant.reference)
    e = y - y_r

    chain = alpha_chain(e, RegulatorState(x_hat, eta, a_hat, k_hat), cfg)
    drive = float(x_hat[1]) if cfg.r >= 2 else chain.u
    eta_dot = _eta_dot(cfg.m_coeffs, eta, drive)
    a_dot = _learning_dot(cfg, eta, a_hat)
    k_dot = adaptive_gain_rhs(e, cfg.rho) if cfg.adaptive else 0.0
    return e, chain, eta_dot, a_dot, k_dot


def control_input(state: np.ndarray, rt: Runtime) -> float:
    """The control value applied at a given world state (for trace capture)."""
    _, chain, _, _, _ = _control(state, rt)
    return chain.u


def closed_loop_rhs(state, scenario_or_runtime) -> np.ndarray:
    """Time derivative of the full closed-loop state vector."""
    rt = scenario_or_runtime
    if not isinstance(rt, Runtime):
        rt = make_runtime(rt.plant, rt.regulator, rt.exo_sigma)
    state = np.asarray(state, dtype=float)
    lay = rt.layout
    if state.shape != (lay.dim,):
        raise ValueError(f"state must have length {lay.dim}, got {state.shape}")

    e, chain, eta_dot, a_dot, k_dot = _control(state, rt)
    u = chain.u
    v = state[lay.exo]
    x = state[lay.plant]

    out = np.empty(lay.dim)
    out[0] = rt.sigma * v[1]
    out[1] = -rt.sigma * v[0]
    out[lay.plant] = rt.plant.rhs(x, u, d=float(v[0]))
    if lay.filt is not None:
        out[lay.filt] = filter_rhs(state[lay.filt], u, rt.cfg.lam)
    out[lay.eta] = eta_dot
    out[lay.ahat] = a_dot
    if lay.khat is not None:
        out[lay.khat] = k_dot
    return out
