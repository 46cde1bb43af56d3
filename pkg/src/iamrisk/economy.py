"""Capital, productivity, population, GDP, the consumption/investment split
and population-weighted CRRA utility.

Productivity and population follow deterministic paths and stay plain
floats; capital, GDP and consumption ride the sample-value carrier so the
pipeline stays differentiable and per-path where the policy is stochastic.
A 5-year step reproduces the classical single-step formulas exactly;
investment enters capital as an annualised rate scaled by dt so arbitrary
grids stay dimensionally consistent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .stochvar import SampleValue, lincomb, maximum

__all__ = [
    "EconomyConfig",
    "EconomyState",
    "step_capital",
    "gdp",
    "step_productivity",
    "step_population",
    "split_consumption_investment",
    "utility",
]

CONSUMPTION_FLOOR = 1e-6  # fraction of GDP; keeps utility defined on bankrupt paths


@dataclass
class EconomyConfig:
    gamma: float = 0.3
    delta_capital_5y: float = 1.0 - 0.9**5
    a0: float = 5.115
    ga: float = 0.076
    delta_a: float = 0.005
    l0: float = 7403.0
    l_inf: float = 11500.0
    g_pop: float = 0.134
    eta: float = 1.45

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("output elasticity must lie in (0, 1)")
        if not 0.0 <= self.delta_capital_5y < 1.0:
            raise ValueError("5-year capital depreciation must lie in [0, 1)")
        if self.eta <= 0.0 or self.eta == 1.0:
            raise ValueError("elasticity of marginal utility must be positive and != 1")


@dataclass
class EconomyState:
    capital: SampleValue
    productivity: float
    population: float
    gdp: SampleValue = None


def _to_sample(v):
    return v if isinstance(v, SampleValue) else SampleValue(v)


def step_capital(k, investment, dt, cfg):
    """``(1 - delta5)^(dt/5) * K + I * dt`` with annualised investment."""
    if dt <= 0.0:
        raise ValueError("time step must be positive")
    keep = (1.0 - cfg.delta_capital_5y) ** (dt / 5.0)
    return lincomb([(keep, _to_sample(k)), (dt, _to_sample(investment))])


def gdp(capital, productivity, population, cfg):
    """Cobb-Douglas output ``A * K^gamma * (L/1000)^(1-gamma)``."""
    k = _to_sample(capital)
    scale = productivity * (population / 1000.0) ** (1.0 - cfg.gamma)
    return lincomb([(scale, k ** cfg.gamma)])


def step_productivity(a, t, dt, cfg):
    """Divide by the decaying growth factor, exponent dt/5."""
    if dt <= 0.0:
        raise ValueError("time step must be positive")
    growth = cfg.ga * math.exp(-cfg.delta_a * t)
    if growth >= 1.0:
        raise ValueError(f"productivity growth factor >= 1 at t={t}")
    return a / (1.0 - growth) ** (dt / 5.0)


def step_population(l, dt, cfg):
    """Converge towards the asymptotic population with a per-step exponent
    proportional to dt (``g_pop * dt/5``)."""
    if dt <= 0.0:
        raise ValueError("time step must be positive")
    return l * (cfg.l_inf / l) ** (cfg.g_pop * dt / 5.0)


def split_consumption_investment(gdp_value, total_cost, savings_rate):
    """Split net output ``GDP - C`` into consumption and investment.

    Returns (consumption, investment); consumption is the raw share, so
    consumption + investment + cost reproduces GDP exactly.  A negative net
    output (bankrupt economy) is the caller's to flag; see
    :func:`utility_consumption_floor`.
    """
    g = _to_sample(gdp_value)
    c = _to_sample(total_cost)
    s = _to_sample(savings_rate)
    net = lincomb([(1.0, g), (-1.0, c)])
    investment = s * net
    consumption = lincomb([(1.0, net), (-1.0, investment)])
    return consumption, investment


def utility_consumption_floor(consumption, gdp_value):
    """Consumption floored at a tiny fraction of GDP so utility stays defined
    on extreme candidate policies."""
    floor = lincomb([(CONSUMPTION_FLOOR, _to_sample(gdp_value))])
    return maximum(_to_sample(consumption), floor)


def utility(consumption, population, cfg):
    """Population-weighted CRRA utility of per-capita consumption.

    Consumption is in 10^12 USD/year and population in millions, so
    per-capita consumption is in thousands of USD per year.
    """
    c = _to_sample(consumption)
    samples = c.samples
    if isinstance(samples, float):
        if samples <= 0.0:
            raise ValueError(f"consumption must be positive for the utility (value {samples})")
    else:
        bad = samples <= 0.0
        if bad.any():
            idx = int(np.flatnonzero(bad)[0])
            raise ValueError(f"consumption must be positive for the utility on path {idx} (value {samples[idx]})")
    if population <= 0.0:
        raise ValueError("population must be positive")
    per_capita = lincomb([(1000.0 / population, c)])
    one_minus_eta = 1.0 - cfg.eta
    return lincomb([(population / one_minus_eta, per_capita**one_minus_eta)], -population / one_minus_eta)
