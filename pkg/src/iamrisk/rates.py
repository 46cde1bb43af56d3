"""Interest-rate scenario generation: deterministic curves and a one-factor
Gaussian short-rate model, with numeraire, discount factors and forward
rates derived from model bond prices.

The numeraire accrues with the left-endpoint short rate over each grid
step, ``N(t_{i+1}) = N(t_i) * exp(r(t_i) dt_i)``, consistent with the Euler
convention of the state dynamics.  The short-rate model uses the exact
Gaussian transition per step and is fitted to the initial curve, so
zero-bond prices admit the usual affine closed form.  Short rates may go
negative; there is no flooring.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .stochvar import SampleValue

__all__ = [
    "RateModelSpec",
    "RateScenarioSet",
    "generate_scenarios",
    "discount_factor",
    "forward_rate",
    "effective_rate_curve",
]

KINDS = ("constant", "deterministic-curve", "hull-white")


@dataclass(frozen=True)
class RateModelSpec:
    """Configuration of the rate model.

    ``curve`` is a table of (time, instantaneous rate) pairs interpolated
    linearly; when absent the initial curve is flat at ``r0``.  ``funding_spread``
    is a reserved hook and must stay zero.
    """

    kind: str = "constant"
    r0: float = 0.018
    curve: tuple = None
    mean_reversion: float = 0.1
    volatility: float = 0.0
    seed: int = 1
    paths: int = 5000
    funding_spread: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown rate model kind {self.kind!r}")
        if self.volatility < 0.0:
            raise ValueError("volatility must be non-negative")
        if self.mean_reversion < 0.0:
            raise ValueError("mean reversion must be non-negative")
        if self.paths < 1:
            raise ValueError("paths must be at least 1")
        if self.funding_spread != 0.0:
            raise ValueError("funding spreads are a reserved hook and not implemented")
        if self.curve is not None:
            pts = tuple((float(t), float(r)) for t, r in self.curve)
            times = [t for t, _ in pts]
            if sorted(times) != times:
                raise ValueError("curve times must be increasing")
            object.__setattr__(self, "curve", pts)

    # -- initial curve ----------------------------------------------------

    def curve_rate(self, t):
        """Instantaneous rate of the initial curve at time t."""
        if self.curve is None:
            return self.r0
        times = [p[0] for p in self.curve]
        rates = [p[1] for p in self.curve]
        return float(np.interp(t, times, rates))

    def curve_integral(self, t):
        """``int_0^t r(s) ds`` of the initial curve (exact for the linear table)."""
        if self.curve is None:
            return self.r0 * t
        times = np.array([p[0] for p in self.curve])
        rates = np.array([p[1] for p in self.curve])
        grid = np.unique(np.concatenate([times[(times > 0) & (times < t)], [0.0, t]]))
        vals = np.interp(grid, times, rates)
        trapezoid = getattr(np, "trapezoid", np.trapz)
        return float(trapezoid(vals, grid))

    def initial_bond_price(self, t):
        """Zero-bond price P(0, t) implied by the initial curve."""
        return math.exp(-self.curve_integral(t))


@dataclass
class RateScenarioSet:
    """Simulated short-rate and numeraire paths on a time grid.

    ``short_rate[i]`` and ``numeraire[i]`` hold r(t_i) and N(t_i); N(0) = 1
    on every path and N stays strictly positive.
    """

    grid: np.ndarray
    short_rate: list
    numeraire: list
    spec: RateModelSpec
    _index: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._index = {round(float(t), 12): i for i, t in enumerate(self.grid)}

    @property
    def paths(self):
        return self.short_rate[0].paths or 1

    @property
    def is_stochastic(self):
        return self.short_rate[0].is_stochastic

    def index_of(self, t):
        key = round(float(t), 12)
        if key not in self._index:
            raise ValueError(f"time {t} is not on the scenario grid")
        return self._index[key]

    def discount_factor(self, t):
        return discount_factor(self, t)

    def forward_rate(self, t, d_t):
        return forward_rate(self, t, d_t)

    def effective_rate_curve(self):
        return effective_rate_curve(self)

    def discount_factors(self):
        """List of N(0)/N(t_i) for every grid point."""
        return [discount_factor(self, t) for t in self.grid]


def _hull_white_b(a, tau):
    if a == 0.0:
        return tau
    return (1.0 - math.exp(-a * tau)) / a


def generate_scenarios(spec, grid):
    """Simulate a scenario set on the given strictly increasing grid.

    Deterministic kinds produce scalar sample values; the stochastic model
    simulates the exact Gaussian transition per step and is reproducible:
    identical spec and seed give identical paths.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.shape[0] < 2:
        raise ValueError("grid must contain at least two time points")
    if grid[0] != 0.0:
        raise ValueError("grid must start at 0")
    dts = np.diff(grid)
    if (dts <= 0.0).any():
        raise ValueError("grid must be strictly increasing")

    if spec.kind in ("constant", "deterministic-curve"):
        rates = [spec.curve_rate(t) if spec.kind == "deterministic-curve" else spec.r0 for t in grid]
        numeraire = [1.0]
        for r, dt in zip(rates[:-1], dts):
            numeraire.append(numeraire[-1] * math.exp(r * dt))
        return RateScenarioSet(
            grid=grid,
            short_rate=[SampleValue(r) for r in rates],
            numeraire=[SampleValue(n) for n in numeraire],
            spec=spec,
        )

    a = spec.mean_reversion
    sigma = spec.volatility
    rng = np.random.default_rng(spec.seed)
    n_paths = spec.paths
    x = np.zeros(n_paths)
    short_rate = []
    numeraire = [np.ones(n_paths)]
    for i, t in enumerate(grid):
        drift_adjust = (
            0.5 * sigma * sigma * _hull_white_b(a, t) ** 2
            if a == 0.0
            else sigma * sigma / (2.0 * a * a) * (1.0 - math.exp(-a * t)) ** 2
        )
        r = x + spec.curve_rate(t) + drift_adjust
        short_rate.append(r)
        if i < len(dts):
            dt = dts[i]
            if a == 0.0:
                std = sigma * math.sqrt(dt)
                decay = 1.0
            else:
                std = sigma * math.sqrt((1.0 - math.exp(-2.0 * a * dt)) / (2.0 * a))
                decay = math.exp(-a * dt)
            x = x * decay + std * rng.standard_normal(n_paths)
            numeraire.append(numeraire[-1] * np.exp(r * dt))
    return RateScenarioSet(
        grid=grid,
        short_rate=[SampleValue(r) for r in short_rate],
        numeraire=[SampleValue(n) for n in numeraire],
        spec=spec,
    )


def discount_factor(scenarios, t):
    """Stochastic discount factor N(0)/N(t), per path."""
    i = scenarios.index_of(t)
    n = scenarios.numeraire[i].samples
    return SampleValue(1.0 / n)


def zero_bond_price(scenarios, t, maturity):
    """Model zero-bond price P(t, maturity; t), per path.

    Affine closed form for the stochastic model; initial-curve ratio for
    deterministic kinds.
    """
    if maturity < t:
        raise ValueError("maturity before observation time")
    spec = scenarios.spec
    if spec.kind != "hull-white":
        return SampleValue(spec.initial_bond_price(maturity) / spec.initial_bond_price(t))
    a = spec.mean_reversion
    sigma = spec.volatility
    tau = maturity - t
    b = _hull_white_b(a, tau)
    fwd0 = spec.curve_rate(t)
    if a == 0.0:
        var_term = 0.5 * sigma * sigma * t * b * b
    else:
        var_term = sigma * sigma / (4.0 * a) * b * b * (1.0 - math.exp(-2.0 * a * t))
    log_a = (
        math.log(spec.initial_bond_price(maturity) / spec.initial_bond_price(t))
        + b * fwd0
        - var_term
    )
    r_t = scenarios.short_rate[scenarios.index_of(t)].samples
    return SampleValue(np.exp(log_a - b * r_t) if isinstance(r_t, np.ndarray) else math.exp(log_a - b * r_t))


def forward_rate(scenarios, t, d_t):
    """Simple forward rate FR(t, t+d_t; t) = (1/P(t, t+d_t) - 1)/d_t."""
    if d_t <= 0.0:
        raise ValueError("forward-rate period must be positive")
    p = zero_bond_price(scenarios, t, t + d_t)
    return SampleValue((1.0 / p.samples - 1.0) / d_t)


def effective_rate_curve(scenarios):
    """Deterministic rate table reproducing the expected discount factors.

    Returns (t_i, rate_i) pairs with one rate per grid interval; replaying
    them through a deterministic-curve model with the same grid recovers
    E[N(0)/N(t_i)] exactly at the grid points.
    """
    grid = scenarios.grid
    if grid.shape[0] < 2:
        raise ValueError("need at least two grid points")
    log_df = []
    for n in scenarios.numeraire:
        s = n.samples
        e = float(np.mean(1.0 / s)) if isinstance(s, np.ndarray) else 1.0 / s
        log_df.append(math.log(e))
    out = []
    for i in range(len(grid) - 1):
        dt = grid[i + 1] - grid[i]
        out.append((float(grid[i]), -(log_df[i + 1] - log_df[i]) / dt))
    return out
