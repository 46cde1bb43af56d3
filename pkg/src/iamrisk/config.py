"""JSON configuration ingestion with strict validation.

One JSON document configures the whole engine, with camelCase keys grouped
into sections (climate, economy, costs, policy, objective, rates, initial,
calibration, experiment).  Unknown keys are an error (typo protection), and
physically inadmissible values are rejected before any computation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .climate import ClimateConfig
from .costs import CostConfig
from .economy import EconomyConfig
from .engine import CalibrationSettings, InitialState, SimulationConfig
from .objective import ObjectiveSpec
from .policy import PolicySpec
from .rates import RateModelSpec
from .stochvar import Statistic

__all__ = ["ConfigError", "ExperimentConfig", "load_config", "parse_config"]


class ConfigError(ValueError):
    """Invalid configuration, with a JSON-path diagnostic."""


@dataclass
class ExperimentConfig:
    """Sweep axes and output options for the experiment runner."""

    output_dir: str = "out"
    rate_levels: list = field(default_factory=lambda: [0.01, 0.02, 0.03, 0.04, 0.05])
    volatilities: list = field(default_factory=lambda: [0.0, 0.005, 0.01])
    quantile_levels: list = field(default_factory=lambda: [0.05, 0.1, 0.25, 0.5, 1.0])
    funding_periods: list = field(default_factory=lambda: [0.0, 5.0, 10.0, 20.0])
    horizons: list = field(default_factory=lambda: [100.0, 500.0, 2000.0])
    generation_span: float = 100.0
    es_alpha: float = 0.05
    histogram_bins: int = 40

    def __post_init__(self):
        for name in ("rate_levels", "volatilities", "quantile_levels", "funding_periods", "horizons"):
            if not getattr(self, name):
                raise ConfigError(f"experiment sweep list {name} must be non-empty")
        if any(v < 0 for v in self.volatilities):
            raise ConfigError("experiment volatilities must be non-negative")
        if any(not 0 < q <= 1 for q in self.quantile_levels):
            raise ConfigError("experiment quantile levels must lie in (0, 1]")


_SECTION_KEYS = {
    "climate": {
        "gammaTemperature": "gamma_temperature",
        "gammaCarbon": "gamma_carbon",
        "forcingPerCarbonDoubling": "forcing_per_carbon_doubling",
        "forcingExternal": "forcing_external",
        "forcingExternalTable": "forcing_external_table",
        "forcingToTemperature": "forcing_to_temperature",
        "m0Reference": "m0_reference",
        "cCperCO2": "carbon_per_co2",
        "sigma0": "emission_intensity_initial",
        "deltaSigma0": "emission_intensity_rate_initial",
        "emissionIntensityRateDecay": "emission_intensity_rate_decay",
        "externalEmissionsInitial": "external_emissions_initial",
        "externalEmissionsDecayPer5y": "external_emissions_decay_per_5y",
        "externalEmissionsTable": "external_emissions_table",
    },
    "economy": {
        "gamma": "gamma",
        "deltaCapital5y": "delta_capital_5y",
        "a0": "a0",
        "ga": "ga",
        "deltaA": "delta_a",
        "l0": "l0",
        "lInf": "l_inf",
        "gPop": "g_pop",
        "eta": "eta",
    },
    "costs": {
        "backstopPriceInitial": "backstop_price_initial",
        "backstopPriceDecayRate": "backstop_price_decay_rate",
        "theta": "theta",
        "a2": "a2",
        "fundingPeriod": "funding_period",
        "dcMode": "dc_mode",
        "dcThreshold": "dc_threshold",
        "dcStrength": "dc_strength",
        "dcPower": "dc_power",
        "fundDamages": "fund_damages",
        "dcApplyToAbatement": "dc_apply_to_abatement",
        "abatementBase": "abatement_base",
    },
    "policy": {
        "kind": "kind",
        "mu0": "mu0",
        "a0": "a0",
        "a1": "a1",
        "a2pol": "a2pol",
        "s0": "s0",
        "muTable": "mu_table",
        "sTable": "s_table",
    },
    "objective": {
        "aggregation": "aggregation",
        "statistic": "statistic",
        "p": "p",
        "generationSpan": "generation_span",
        "utilityOffset": "utility_offset",
    },
    "rates": {
        "kind": "kind",
        "r0": "r0",
        "curve": "curve",
        "meanReversion": "mean_reversion",
        "volatility": "volatility",
        "seed": "seed",
        "paths": "paths",
        "fundingSpread": "funding_spread",
    },
    "initial": {
        "temperature": "temperature",
        "carbon": "carbon",
        "capital": "capital",
    },
    "calibration": {
        "learningRate": "learning_rate",
        "beta1": "beta1",
        "beta2": "beta2",
        "maxIterations": "max_iterations",
        "gradientTolerance": "gradient_tolerance",
        "plateauIterations": "plateau_iterations",
        "multiStart": "multi_start",
    },
    "experiment": {
        "outputDir": "output_dir",
        "rateLevels": "rate_levels",
        "volatilities": "volatilities",
        "quantileLevels": "quantile_levels",
        "fundingPeriods": "funding_periods",
        "horizons": "horizons",
        "generationSpan": "generation_span",
        "esAlpha": "es_alpha",
        "histogramBins": "histogram_bins",
    },
}

_TOP_KEYS = {"horizon", "dt"} | set(_SECTION_KEYS)

_SECTION_TYPES = {
    "climate": ClimateConfig,
    "economy": EconomyConfig,
    "costs": CostConfig,
    "policy": PolicySpec,
    "objective": ObjectiveSpec,
    "rates": RateModelSpec,
    "initial": InitialState,
    "calibration": CalibrationSettings,
    "experiment": ExperimentConfig,
}


def _parse_statistic(value, path):
    if isinstance(value, str):
        if value == "expectation":
            return Statistic()
        raise ConfigError(f"{path}: unknown statistic {value!r}")
    if isinstance(value, dict):
        allowed = {"kind", "alpha", "tail"}
        unknown = set(value) - allowed
        if unknown:
            raise ConfigError(f"{path}: unknown statistic keys {sorted(unknown)}")
        try:
            return Statistic(
                kind=value.get("kind", "expected-shortfall"),
                alpha=value.get("alpha", 1.0),
                tail=value.get("tail", "left"),
            )
        except ValueError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    raise ConfigError(f"{path}: statistic must be a string or an object")


def _parse_section(name, data):
    mapping = _SECTION_KEYS[name]
    unknown = set(data) - set(mapping)
    if unknown:
        raise ConfigError(f"{name}: unknown keys {sorted(unknown)}")
    kwargs = {}
    for key, value in data.items():
        attr = mapping[key]
        if name == "objective" and key == "statistic":
            value = _parse_statistic(value, f"{name}.{key}")
        if name == "climate" and key in ("gammaTemperature", "gammaCarbon"):
            value = np.asarray(value, dtype=float)
        if key in ("forcingExternalTable", "externalEmissionsTable", "curve") and value is not None:
            value = tuple((float(t), float(v)) for t, v in value)
        if name == "initial" and key in ("temperature", "carbon"):
            value = tuple(float(v) for v in value)
        kwargs[attr] = value
    try:
        return _SECTION_TYPES[name](**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: {exc}") from exc


def parse_config(data):
    """Build (SimulationConfig, ExperimentConfig) from a parsed JSON document."""
    if not isinstance(data, dict):
        raise ConfigError("configuration root must be a JSON object")
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown top-level keys {sorted(unknown)}")
    sections = {}
    for name in _SECTION_KEYS:
        raw = data.get(name, {})
        if not isinstance(raw, dict):
            raise ConfigError(f"section {name!r} must be a JSON object")
        sections[name] = _parse_section(name, raw)
    experiment = sections.pop("experiment")
    try:
        cfg = SimulationConfig(
            horizon=float(data.get("horizon", 500.0)),
            dt=float(data.get("dt", 1.0)),
            **sections,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    _validate_policy(cfg.policy)
    return cfg, experiment


def _validate_policy(policy):
    if isinstance(policy.s0, (int, float)) and not 0.0 <= float(policy.s0) <= 1.0:
        raise ConfigError(f"policy: savings rate s0 must lie in [0, 1], got {policy.s0}")
    for name in ("mu_table", "s_table"):
        table = getattr(policy, name)
        if table is not None:
            vals = [float(v) for v in table]
            if any(not 0.0 <= v <= 1.0 for v in vals):
                raise ConfigError(f"policy: {name} entries must lie in [0, 1]")


def load_config(path):
    """Parse and validate a JSON config file.

    JSON syntax errors surface with line/column diagnostics.
    """
    try:
        with open(path) as handle:
            data = json.load(handle)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return parse_config(data)
