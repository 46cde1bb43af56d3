"""Abatement and savings-rate policy families.

Three parametric families share the clipped-ramp form
``mu(t) = clip(mu0 + speed * t, [mu0, 1])`` where the abatement speed is a
constant (reduced) or a linear/quadratic function of the current short rate
(the stochastic kinds, which make the whole pipeline per-path).  The
free-form family carries one abatement and one savings value per grid step;
the calibration squashes those through a logistic so the optimizer works on
unconstrained parameters.

Clipping below at mu0 covers the degenerate branch where the effective
speed turns negative on some paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .stochvar import SampleValue, lincomb, maximum, minimum

__all__ = [
    "PolicySpec",
    "AbatementSummary",
    "evaluate_policy",
    "time_to_full_abatement",
]

KINDS = ("reduced", "free-form", "stochastic-linear", "stochastic-quadratic")


@dataclass
class PolicySpec:
    """Parameterization of the abatement path mu(t[, path]) and savings rate.

    Fields may hold plain floats or recorded sample values, so the same
    evaluation code serves simulation and gradient-based calibration.
    """

    kind: str = "reduced"
    mu0: float = 0.03
    a0: object = 0.0097
    a1: object = 0.0
    a2pol: object = 0.0
    s0: object = 0.25
    mu_table: list = None
    s_table: list = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown policy kind {self.kind!r}")
        if not 0.0 <= self.mu0 <= 1.0:
            raise ValueError("initial abatement must lie in [0, 1]")


@dataclass
class AbatementSummary:
    """Time of full abatement per path; infinite where never reached."""

    t_full_abatement: SampleValue


def _to_sample(v):
    return v if isinstance(v, SampleValue) else SampleValue(v)


def _clip_unit(x, lo=0.0, hi=1.0):
    return minimum(maximum(x, lo), hi)


def evaluate_policy(spec, t, r_t=None, step=None):
    """Evaluate (mu, s) at time t, per path where the policy reads the rate.

    ``step`` indexes the free-form tables; stochastic kinds require ``r_t``.
    Both outputs are clipped into [0, 1] (abatement additionally from below
    at mu0).
    """
    if t < 0.0:
        raise ValueError("time must be non-negative")
    if spec.kind == "free-form":
        if spec.mu_table is None or spec.s_table is None:
            raise ValueError("free-form policy requires mu and s tables")
        if step is None:
            raise ValueError("free-form policy evaluation requires the step index")
        if step >= len(spec.mu_table) or step >= len(spec.s_table):
            raise ValueError(f"free-form table shorter than grid (step {step})")
        mu = _clip_unit(_to_sample(spec.mu_table[step]))
        s = _clip_unit(_to_sample(spec.s_table[step]))
        return mu, s

    a0 = _to_sample(spec.a0)
    if spec.kind == "reduced":
        speed = a0
    else:
        if r_t is None:
            raise ValueError("stochastic policy evaluation requires the short rate")
        r = _to_sample(r_t)
        terms = [(1.0, a0), (1.0, _to_sample(spec.a1) * r)]
        if spec.kind == "stochastic-quadratic":
            terms.append((1.0, _to_sample(spec.a2pol) * (r * r)))
        speed = lincomb(terms)
    ramp = lincomb([(t, speed)], spec.mu0)
    mu = minimum(maximum(ramp, spec.mu0), 1.0)
    s = _clip_unit(_to_sample(spec.s0))
    return mu, s


def logistic(x):
    """Squash an unconstrained parameter into (0, 1)."""
    from .stochvar import exp

    return 1.0 / (exp(-_to_sample(x)) + 1.0)


def logit(p):
    if not 0.0 < p < 1.0:
        raise ValueError("logit argument must lie in (0, 1)")
    return math.log(p / (1.0 - p))


def time_to_full_abatement(spec, scenarios):
    """First grid time with mu = 1, per path; +inf where never reached.

    For the reduced family this matches the analytic ``(1 - mu0)/a0`` within
    one grid step.
    """
    grid = scenarios.grid
    n_paths = scenarios.paths if scenarios.is_stochastic else 1
    hit = np.full(n_paths, np.inf)
    for i, t in enumerate(grid[:-1]):
        mu, _ = evaluate_policy(spec, float(t), scenarios.short_rate[i], step=i)
        vals = mu.to_array(n_paths) if n_paths > 1 else np.array([mu.samples if not mu.is_stochastic else float(mu.samples[0])])
        newly = (vals >= 1.0 - 1e-12) & np.isinf(hit)
        hit[newly] = t
    if n_paths == 1:
        return AbatementSummary(SampleValue(float(hit[0])))
    return AbatementSummary(SampleValue(hit))
