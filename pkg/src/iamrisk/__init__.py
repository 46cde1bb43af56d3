"""Simulation and calibration engine for a climate-economy assessment model
with stochastic interest rates, funded abatement cost, non-linear damage
financing and risk-measure objectives."""

from .config import ConfigError, load_config, parse_config
from .engine import CalibrationResult, SimulationConfig, Trajectory, calibrate, simulate
from .objective import ObjectiveSpec
from .policy import PolicySpec
from .rates import RateModelSpec, generate_scenarios
from .stochvar import SampleValue, Statistic, Tape, expectation, expected_shortfall

__all__ = [
    "CalibrationResult",
    "ConfigError",
    "ObjectiveSpec",
    "PolicySpec",
    "RateModelSpec",
    "SampleValue",
    "SimulationConfig",
    "Statistic",
    "Tape",
    "Trajectory",
    "calibrate",
    "expectation",
    "expected_shortfall",
    "generate_scenarios",
    "load_config",
    "parse_config",
    "simulate",
]

__version__ = "0.1.0"
