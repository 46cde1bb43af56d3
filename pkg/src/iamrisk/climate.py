"""Temperature and carbon-cycle dynamics with arbitrary Euler time steps,
plus emission intensity and emissions.

States evolve as ``X(t_{i+1}) = X(t_i) + f(t_i) dt_i`` with annualised
fluxes; a single 5-year Euler step reproduces the classical transition-matrix
formulation.  The default generator matrices are derived from the published
5-year transitions via ``Gamma = (P5 - I)/5``; the carbon generator has
zero column sums, so total carbon is conserved up to injected emissions.

Forcing is returned in the raw configured units; the loading of forcing
into the atmospheric temperature is scaled by ``forcing_to_temperature``
(the heat-uptake response per year, c1/5 by default, the same coefficient
that scales the temperature transition rows).  With the raw forcing
constants this calibrates the equilibrium warming per carbon doubling to
3.1 K.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .stochvar import SampleValue, lincomb, log

__all__ = [
    "ClimateConfig",
    "ClimateState",
    "forcing",
    "step_temperature",
    "step_carbon",
    "emission_intensity",
    "external_emissions",
    "total_emission",
]

_LN2 = math.log(2.0)

# 5-year transition coefficients behind the generator defaults.  The heat
# uptake c1 runs at twice the DICE-2016R table value: the 2016 transient is
# too sluggish against two-box energy-balance fits, and the faster response
# reproduces the reported policy-sensitivity latency.  Equilibrium warming
# per carbon doubling stays at 3.1 K.
_C1, _C3, _C4 = 0.201, 0.088, 0.025
_T2X = 3.1
_FORCING_PER_DOUBLING = 3.6813
_LAM = _FORCING_PER_DOUBLING / _T2X

_B12, _B23 = 0.12, 0.007
_MATEQ, _MUEQ, _MLEQ = 588.0, 360.0, 1720.0
_B21 = _B12 * _MATEQ / _MUEQ
_B32 = _B23 * _MUEQ / _MLEQ


def _default_gamma_temperature():
    p5 = np.array(
        [
            [1.0 - _C1 * _LAM - _C1 * _C3, _C1 * _C3],
            [_C4, 1.0 - _C4],
        ]
    )
    return (p5 - np.eye(2)) / 5.0


def _default_gamma_carbon():
    p5 = np.array(
        [
            [1.0 - _B12, _B21, 0.0],
            [_B12, 1.0 - _B21 - _B23, _B32],
            [0.0, _B23, 1.0 - _B32],
        ]
    )
    return (p5 - np.eye(3)) / 5.0


@dataclass
class ClimateConfig:
    """Climate constants; all overridable via the JSON config.

    ``external_emissions_table``, when given, replaces the parametric
    land-use path (initial level decaying by a fixed factor per 5 years).
    """

    gamma_temperature: np.ndarray = field(default_factory=_default_gamma_temperature)
    gamma_carbon: np.ndarray = field(default_factory=_default_gamma_carbon)
    forcing_per_carbon_doubling: float = _FORCING_PER_DOUBLING
    forcing_external: float = 1.0
    forcing_external_table: tuple = None
    forcing_to_temperature: float = _C1 / 5.0
    m0_reference: float = 588.0
    carbon_per_co2: float = 12.0 / 44.0
    emission_intensity_initial: float = 38.85 / 105.5
    emission_intensity_rate_initial: float = 0.0152
    emission_intensity_rate_decay: float = -math.log(1.0 - 0.001) / 5.0
    external_emissions_initial: float = 2.6
    external_emissions_decay_per_5y: float = 0.115
    external_emissions_table: tuple = None

    def __post_init__(self):
        self.gamma_temperature = np.asarray(self.gamma_temperature, dtype=float)
        self.gamma_carbon = np.asarray(self.gamma_carbon, dtype=float)
        if self.gamma_temperature.shape != (2, 2):
            raise ValueError("temperature generator must be 2x2")
        if self.gamma_carbon.shape != (3, 3):
            raise ValueError("carbon generator must be 3x3")
        if not np.isfinite(self.gamma_temperature).all() or not np.isfinite(self.gamma_carbon).all():
            raise ValueError("generator entries must be finite")
        if self.m0_reference <= 0.0:
            raise ValueError("reference carbon concentration must be positive")
        if self.emission_intensity_initial <= 0.0:
            raise ValueError("initial emission intensity must be positive")


@dataclass
class ClimateState:
    """Temperature 2-vector (atmosphere, land/ocean) in K above pre-industrial
    and carbon 3-vector (atmosphere, upper ocean, lower ocean) in GtC."""

    temperature: tuple
    carbon: tuple

    def __post_init__(self):
        self.temperature = tuple(_to_sample(v) for v in self.temperature)
        self.carbon = tuple(_to_sample(v) for v in self.carbon)
        if len(self.temperature) != 2:
            raise ValueError("temperature vector must have dimension 2")
        if len(self.carbon) != 3:
            raise ValueError("carbon vector must have dimension 3")


def _to_sample(v):
    return v if isinstance(v, SampleValue) else SampleValue(v)


def forcing(m_at, t, cfg):
    """Raw temperature forcing: doubling constant times log2 of the
    atmospheric carbon ratio, plus the external part."""
    m_at = _to_sample(m_at)
    samples = m_at.samples
    bad = samples <= 0.0 if isinstance(samples, float) else bool((samples <= 0.0).any())
    if bad:
        raise ValueError("atmospheric carbon must be positive for the forcing")
    rel = log(m_at * (1.0 / cfg.m0_reference))
    return lincomb([(cfg.forcing_per_carbon_doubling / _LN2, rel)], external_forcing(t, cfg))


def external_forcing(t, cfg):
    if cfg.forcing_external_table is not None:
        times = [p[0] for p in cfg.forcing_external_table]
        vals = [p[1] for p in cfg.forcing_external_table]
        return float(np.interp(t, times, vals))
    return cfg.forcing_external


def step_temperature(state, f, dt, cfg):
    """One Euler step of the temperature vector.

    The forcing loads only into the atmospheric component, scaled by
    ``forcing_to_temperature``.
    """
    if dt <= 0.0:
        raise ValueError("time step must be positive")
    g = cfg.gamma_temperature
    t0, t1 = state.temperature
    f = _to_sample(f)
    load = cfg.forcing_to_temperature
    new0 = lincomb([(1.0 + g[0, 0] * dt, t0), (g[0, 1] * dt, t1), (load * dt, f)])
    new1 = lincomb([(g[1, 0] * dt, t0), (1.0 + g[1, 1] * dt, t1)])
    return (new0, new1)


def step_carbon(state, e, dt, cfg):
    """One Euler step of the carbon vector; emissions (GtCO2/year) convert
    to GtC and load only into the atmosphere box."""
    if dt <= 0.0:
        raise ValueError("time step must be positive")
    g = cfg.gamma_carbon
    m = state.carbon
    e = _to_sample(e)
    rows = []
    for i in range(3):
        terms = []
        for j in range(3):
            coef = (1.0 if i == j else 0.0) + g[i, j] * dt
            if coef != 0.0:
                terms.append((coef, m[j]))
        if i == 0:
            terms.append((cfg.carbon_per_co2 * dt, e))
        rows.append(lincomb(terms))
    return tuple(rows)


def emission_intensity(t, t_next, sigma_prev, cfg):
    """Recursive update of the emission intensity (GtCO2 per 10^12 USD).

    The decline rate itself decays exponentially in time; the update uses
    the rate at the left endpoint of the step.
    """
    if t_next <= t:
        raise ValueError("t_next must exceed t")
    rate = cfg.emission_intensity_rate_initial * math.exp(-cfg.emission_intensity_rate_decay * t)
    return sigma_prev * math.exp(-rate * (t_next - t))


def external_emissions(t, cfg):
    """Land-use emissions in GtCO2/year at time t."""
    if cfg.external_emissions_table is not None:
        times = [p[0] for p in cfg.external_emissions_table]
        vals = [p[1] for p in cfg.external_emissions_table]
        return float(np.interp(t, times, vals))
    return cfg.external_emissions_initial * (1.0 - cfg.external_emissions_decay_per_5y) ** (t / 5.0)


def total_emission(sigma, mu, gdp, t, cfg):
    """Industrial emissions ``sigma * (1 - mu) * GDP`` plus the external part."""
    mu = _to_sample(mu)
    gdp = _to_sample(gdp)
    unabated = lincomb([(-1.0, mu)], 1.0)
    industrial = unabated * gdp
    return lincomb([(sigma, industrial)], external_emissions(t, cfg))
