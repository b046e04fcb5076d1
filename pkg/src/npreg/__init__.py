"""Internal-model output regulation with nonparametric steady-state learning."""

from .engine import HAVE_COMPILED, Metrics, Trace, metrics, simulate
from .scenarios import (
    Scenario,
    bioreactor_scenario,
    cstr_scenario,
    duffing_scenario,
    get_scenario,
    load_scenario,
)

__version__ = "0.1.0"

__all__ = [
    "HAVE_COMPILED",
    "Metrics",
    "Scenario",
    "Trace",
    "bioreactor_scenario",
    "cstr_scenario",
    "duffing_scenario",
    "get_scenario",
    "load_scenario",
    "metrics",
    "simulate",
    "__version__",
]
