"""Abatement cost, damage fraction, funded abatement and non-linear
default-compensation of damage cost.

Abatement cost incurred at t may be funded over a fixed period: the amount
is accrued with the model forward rate locked at t and becomes due at
maturity.  Amounts that would mature beyond the final flow time are accrued
to the final grid point over the shortened period instead, so the optimizer
cannot hide cost past the horizon; simple forward accrual equals the
inverse bond price, which keeps the funding net-present-value neutral under
deterministic rates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .rates import forward_rate
from .stochvar import SampleValue, lincomb, maximum

__all__ = [
    "CostConfig",
    "CostBreakdown",
    "FundingLedger",
    "abatement_cost_rate",
    "damage_fraction",
    "fund_abatement",
    "default_compensation",
    "total_cost_at",
]

DC_MODES = ("none", "numeraire-relative", "gdp-relative")


@dataclass
class CostConfig:
    backstop_price_initial: float = 550.0 / 1000.0
    backstop_price_decay_rate: float = -math.log(1.0 - 0.025) / 5.0
    theta: float = 2.6
    a2: float = 0.00236
    funding_period: float = 0.0
    dc_mode: str = "none"
    dc_threshold: float = 0.03
    dc_strength: float = 200.0
    dc_power: float = 2.0
    fund_damages: bool = False
    dc_apply_to_abatement: bool = False
    abatement_base: str = "gross-emissions"

    def __post_init__(self):
        if self.theta <= 1.0:
            raise ValueError("abatement exponent must exceed 1")
        if self.abatement_base not in ("unabated-emissions", "gross-emissions"):
            raise ValueError(f"unknown abatement cost base {self.abatement_base!r}")
        if self.a2 < 0.0:
            raise ValueError("damage coefficient must be non-negative")
        if self.funding_period < 0.0:
            raise ValueError("funding period must be non-negative")
        if self.dc_mode not in DC_MODES:
            raise ValueError(f"unknown default-compensation mode {self.dc_mode!r}")
        if self.dc_mode != "none" and self.dc_threshold <= 0.0:
            raise ValueError("default-compensation threshold must be positive")


@dataclass
class CostBreakdown:
    """Cost components at one time step, each annualised (10^12 USD/year).

    ``abatement_incurred`` is generated at t; ``abatement_due`` matures at t
    after funding; ``total = abatement_due + damage`` on every path.
    """

    abatement_incurred: SampleValue
    abatement_due: SampleValue
    damage: SampleValue
    total: SampleValue


def _to_sample(v):
    return v if isinstance(v, SampleValue) else SampleValue(v)


def abatement_cost_rate(mu, t, cfg):
    """Cost per abated emission: decaying backstop price times mu^theta/theta."""
    mu = _to_sample(mu)
    s = mu.samples
    lo = s if isinstance(s, float) else float(s.min())
    hi = s if isinstance(s, float) else float(s.max())
    if lo < -1e-12 or hi > 1.0 + 1e-12:
        raise ValueError(f"abatement fraction outside [0, 1]: range [{lo}, {hi}]")
    price = cfg.backstop_price_initial * math.exp(-cfg.backstop_price_decay_rate * t) / cfg.theta
    return lincomb([(price, mu**cfg.theta)])


def damage_fraction(t_at, cfg):
    """Saturating damage share of GDP: a2 T^2 / (1 + a2 T^2)."""
    t_at = _to_sample(t_at)
    quad = lincomb([(cfg.a2, t_at * t_at)])
    return quad / lincomb([(1.0, quad)], 1.0)


def fund_abatement(c_mu, t, scenarios, cfg, final_time=None):
    """Accrue the incurred abatement cost with the forward rate locked at t.

    Returns ``(maturity, amount_due)``.  With a zero funding period the cost
    passes through unchanged.  ``final_time`` caps the maturity at the last
    flow grid point.
    """
    c_mu = _to_sample(c_mu)
    maturity = t + cfg.funding_period
    if final_time is not None:
        maturity = min(maturity, final_time)
    span = maturity - t
    if span <= 0.0:
        return maturity, c_mu
    fr = forward_rate(scenarios, t, span)
    factor = 1.0 + fr.samples * span
    return maturity, lincomb([(factor, c_mu)])


def compensation_factor_values(x, cfg):
    """DC*(x) on raw samples: 1 below the threshold, then a power penalty
    on the relative excess."""
    excess = maximum(lincomb([(1.0 / cfg.dc_threshold, _to_sample(x))], -1.0), 0.0)
    return lincomb([(cfg.dc_strength, excess**cfg.dc_power)], 1.0)


def default_compensation(c_d_raw, numeraire, gdp_value, cfg, abatement_due=None):
    """Effective damage cost ``C_D = C_D_raw * DC*(x)``.

    The renormalised size x is the damage cost relative to the numeraire
    (numeraire-relative mode), or the total cost -- maturing abatement plus
    raw damage -- per GDP (gdp-relative mode, which penalises pathways with
    large total cost per GDP).  The factor always multiplies the damage cost
    only.
    """
    c_d_raw = _to_sample(c_d_raw)
    if cfg.dc_mode == "none":
        return c_d_raw
    if cfg.dc_mode == "numeraire-relative":
        x = c_d_raw / _to_sample(numeraire)
    else:
        burden = c_d_raw if abatement_due is None else c_d_raw + _to_sample(abatement_due)
        x = burden / _to_sample(gdp_value)
    return c_d_raw * compensation_factor_values(x, cfg)


class FundingLedger:
    """Funded amounts keyed by the grid index at which they mature.

    Confined to one simulation run.
    """

    def __init__(self, n_steps):
        self._due = [[] for _ in range(n_steps)]

    def add(self, step, amount):
        self._due[step].append(amount)

    def due_at(self, step):
        return list(self._due[step])


def total_cost_at(step, ledger, damage, incurred):
    """Combine funded amounts maturing now with the effective damage cost."""
    due = ledger.due_at(step)
    if not due:
        abatement_due = SampleValue(0.0)
    elif len(due) == 1:
        abatement_due = due[0]
    else:
        abatement_due = lincomb([(1.0, a) for a in due])
    total = lincomb([(1.0, abatement_due), (1.0, damage)])
    return CostBreakdown(
        abatement_incurred=_to_sample(incurred),
        abatement_due=abatement_due,
        damage=_to_sample(damage),
        total=total,
    )
