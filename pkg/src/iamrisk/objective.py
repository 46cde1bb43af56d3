"""Welfare aggregation and the statistic applied to it.

The classical objective discounts the per-time utilities with the
stochastic discount factor N(0)/N(t) and sums them with the step weights;
the result is a random variable, and the objective applies a statistic
(expectation or a tail mean) to it.  The alternative aggregation takes a
p-norm (0 < p <= 1) over the discounted generational average welfare,
which prefers evenly distributed welfare across time; p = 1 with a zero
generation span recovers the classical objective.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .stochvar import SampleValue, Statistic, lincomb

__all__ = [
    "ObjectiveSpec",
    "WelfareSeries",
    "aggregate_welfare",
    "generational_average_welfare",
    "objective_aggregate",
    "objective_value",
]

AGGREGATIONS = ("classical-discounted", "p-norm")


@dataclass
class ObjectiveSpec:
    aggregation: str = "classical-discounted"
    statistic: Statistic = field(default_factory=Statistic)
    p: float = 1.0
    generation_span: float = 0.0
    utility_offset: float = 0.0

    def __post_init__(self):
        if self.aggregation not in AGGREGATIONS:
            raise ValueError(f"unknown aggregation {self.aggregation!r}")
        if not 0.0 < self.p <= 1.0:
            raise ValueError(f"p must lie in (0, 1], got {self.p}")
        if self.generation_span < 0.0:
            raise ValueError("generation span must be non-negative")


@dataclass
class WelfareSeries:
    """Per-time utilities, their discounted values and the aggregate sum."""

    per_time: list
    discounted: list
    aggregate: SampleValue
    grid: np.ndarray


def aggregate_welfare(v, scenarios, grid=None):
    """Discount per-time utilities and sum with the step weights.

    ``v`` holds one utility per grid interval (the left endpoints carry the
    flows); the terminal grid point carries no weight.
    """
    grid = scenarios.grid if grid is None else np.asarray(grid, dtype=float)
    if len(v) != grid.shape[0] - 1:
        raise ValueError(f"got {len(v)} utilities for {grid.shape[0] - 1} grid intervals")
    dts = np.diff(grid)
    discounted = []
    terms = []
    for i, vi in enumerate(v):
        vi = vi if isinstance(vi, SampleValue) else SampleValue(vi)
        df = 1.0 / scenarios.numeraire[i].samples
        di = lincomb([(df, vi)])
        discounted.append(di)
        terms.append((float(dts[i]), di))
    aggregate = lincomb(terms)
    return WelfareSeries(per_time=list(v), discounted=discounted, aggregate=aggregate, grid=grid)


def generational_average_welfare(series, scenarios, generation_span):
    """Backward window average of discounted welfare.

    At each time t the utilities at grid points inside ``(t - span, t]`` are
    discounted back to t with N(t)/N(s), weighted by their step lengths and
    divided by the covered window mass (truncated at time zero).  A zero
    span returns the per-time utilities unchanged.
    """
    if generation_span < 0.0:
        raise ValueError("generation span must be non-negative")
    per_time = series.per_time
    if generation_span == 0.0:
        return list(per_time)
    grid = series.grid
    dts = np.diff(grid)
    numeraire = [n.samples for n in scenarios.numeraire]
    out = []
    for i in range(len(per_time)):
        t_i = grid[i]
        terms = []
        mass = 0.0
        for j in range(i, -1, -1):
            if grid[j] <= t_i - generation_span:
                break
            w = float(dts[j])
            terms.append((w * numeraire[i] / numeraire[j], per_time[j]))
            mass += w
        out.append(lincomb([(c / mass, x) for c, x in terms]))
    return out


def objective_aggregate(spec, series, scenarios):
    """The per-path random variable the statistic is applied to."""
    if spec.aggregation == "classical-discounted":
        return series.aggregate
    averaged = generational_average_welfare(series, scenarios, spec.generation_span)
    grid = series.grid
    dts = np.diff(grid)
    terms = []
    for i, x in enumerate(averaged):
        df = 1.0 / scenarios.numeraire[i].samples
        entry = lincomb([(df, x)], spec.utility_offset)
        samples = entry.samples
        low = samples if isinstance(samples, float) else float(np.min(samples))
        if low <= 0.0:
            raise ValueError(
                f"p-norm aggregation needs positive entries; discounted welfare at "
                f"t={grid[i]} reaches {low} (consider a utility offset)"
            )
        terms.append((float(dts[i]), entry**spec.p))
    return lincomb(terms) ** (1.0 / spec.p)


def objective_value(spec, series, scenarios):
    """Scalar objective: the statistic of the aggregated welfare."""
    return spec.statistic.evaluate(objective_aggregate(spec, series, scenarios))
