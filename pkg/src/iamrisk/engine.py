"""Full pipeline simulation on a time grid across all paths, and
gradient-based calibration of a policy family against an objective.

Per step the engine evaluates the policy, emissions and costs (with the
funding ledger and the damage compensation factor), splits net output into
consumption and investment, computes utility, and then advances carbon,
temperature, capital, productivity and population; deterministic inputs
give deterministic outputs.  Calibration runs an ADAM ascent on the
objective using the reverse-mode tape, with one scenario set per
calibration (common random numbers) so the objective is a smooth
deterministic function of the parameters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import climate as climate_mod
from . import costs as costs_mod
from . import economy as economy_mod
from .climate import ClimateConfig, ClimateState
from .costs import CostConfig, FundingLedger
from .economy import EconomyConfig
from .objective import ObjectiveSpec, aggregate_welfare, objective_aggregate
from .policy import PolicySpec, evaluate_policy, logistic, logit
from .rates import RateModelSpec, forward_rate, generate_scenarios
from .stochvar import SampleValue, Tape, lincomb, maximum

__all__ = [
    "Adam",
    "CalibrationResult",
    "CalibrationSettings",
    "InitialState",
    "Perturbations",
    "SimulationConfig",
    "Trajectory",
    "calibrate",
    "first_order_condition_check",
    "simulate",
]

CAPITAL_FLOOR = 1e-6  # 10^12 USD; keeps Cobb-Douglas output defined


@dataclass
class InitialState:
    temperature: tuple = (0.85, 0.0068)
    carbon: tuple = (851.0, 460.0, 1740.0)
    capital: float = 223.0


@dataclass
class CalibrationSettings:
    learning_rate: float = 0.02
    beta1: float = 0.9
    beta2: float = 0.999
    max_iterations: int = 2000
    gradient_tolerance: float = 1e-6
    plateau_iterations: int = 150
    multi_start: bool = True


@dataclass
class SimulationConfig:
    horizon: float = 500.0
    dt: float = 1.0
    climate: ClimateConfig = field(default_factory=ClimateConfig)
    economy: EconomyConfig = field(default_factory=EconomyConfig)
    costs: CostConfig = field(default_factory=CostConfig)
    policy: PolicySpec = field(default_factory=PolicySpec)
    objective: ObjectiveSpec = field(default_factory=ObjectiveSpec)
    rates: RateModelSpec = field(default_factory=RateModelSpec)
    initial: InitialState = field(default_factory=InitialState)
    calibration: CalibrationSettings = field(default_factory=CalibrationSettings)

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        steps = self.horizon / self.dt
        if abs(steps - round(steps)) > 1e-9 or round(steps) < 1:
            raise ValueError("horizon must be a positive integer multiple of dt")
        if self.costs.funding_period > 0.0:
            per = self.costs.funding_period / self.dt
            if abs(per - round(per)) > 1e-9:
                raise ValueError("funding period must be a multiple of dt")

    @property
    def n_steps(self):
        return int(round(self.horizon / self.dt))

    def grid(self):
        return np.arange(self.n_steps + 1, dtype=float) * self.dt

    def scenarios(self):
        return generate_scenarios(self.rates, self.grid())


@dataclass
class Perturbations:
    """Optional additive pulses applied inside one simulation, keyed by step.

    Used by the sensitivity analyses: a pulse value may be a recorded tape
    variable so that derivatives with respect to it are available.
    """

    mu_add: dict = field(default_factory=dict)
    emission_add: dict = field(default_factory=dict)
    cost_add: dict = field(default_factory=dict)
    consumption_add: dict = field(default_factory=dict)


@dataclass
class Trajectory:
    """Per-time model series (per path where stochastic) at the flow times."""

    times: np.ndarray
    mu: list
    s: list
    sigma: list
    gdp: list
    emissions: list
    cost_abatement_incurred: list
    cost_abatement: list
    cost_damage: list
    cost_damage_raw: list
    cost_total: list
    consumption: list
    investment: list
    utility: list
    capital: list
    productivity: list
    population: list
    temperature_at: list
    temperature_lo: list
    carbon_at: list
    carbon_uo: list
    carbon_lo: list
    welfare: object
    scenarios: object
    config: object
    policy: object
    bankrupt_paths: int = 0

    def cost_per_gdp(self):
        return [c / g for c, g in zip(self.cost_total, self.gdp)]

    def series_mean(self, name):
        """Per-time mean across paths of one series, as an array."""
        out = []
        for v in getattr(self, name):
            if isinstance(v, SampleValue):
                out.append(float(np.mean(v.samples)))
            else:
                out.append(float(v))
        return np.array(out)


@dataclass
class CalibrationResult:
    parameters: dict
    objective: float
    trace: list
    gradient_norm: float
    iterations: int


class Adam:
    """Adaptive-moment gradient ascent on a flat parameter vector."""

    def __init__(self, n, learning_rate=0.02, beta1=0.9, beta2=0.999, eps=1e-8):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = np.zeros(n)
        self.v = np.zeros(n)
        self.t = 0

    def step(self, x, grad, maximize=True):
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad * grad
        m_hat = self.m / (1.0 - self.beta1**self.t)
        v_hat = self.v / (1.0 - self.beta2**self.t)
        update = self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)
        return x + update if maximize else x - update


# ---------------------------------------------------------------------------
# static (policy-independent) per-run data
# ---------------------------------------------------------------------------


def _sum_due(amounts):
    if not amounts:
        return SampleValue(0.0)
    if len(amounts) == 1:
        return amounts[0]
    return lincomb([(1.0, a) for a in amounts])


@dataclass
class _Statics:
    sigma: list
    productivity: list
    population: list
    ext_emissions: list
    fund_maturity: list
    fund_factor: list
    dfund_maturity: list
    dfund_factor: list


def _build_statics(cfg, scenarios):
    grid = scenarios.grid
    n = cfg.n_steps
    econ = cfg.economy
    clim = cfg.climate
    sigma = [clim.emission_intensity_initial]
    productivity = [econ.a0]
    population = [econ.l0]
    for i in range(n - 1):
        t, t_next = float(grid[i]), float(grid[i + 1])
        sigma.append(climate_mod.emission_intensity(t, t_next, sigma[-1], clim))
        productivity.append(economy_mod.step_productivity(productivity[-1], t, t_next - t, econ))
        population.append(economy_mod.step_population(population[-1], t_next - t, econ))
    ext = [climate_mod.external_emissions(float(t), clim) for t in grid[:-1]]

    final_flow_time = float(grid[n - 1])
    fund_maturity, fund_factor = [], []
    for i in range(n):
        t = float(grid[i])
        maturity = min(t + cfg.costs.funding_period, final_flow_time)
        span = maturity - t
        if span <= 0.0:
            fund_maturity.append(i)
            fund_factor.append(1.0)
        else:
            fr = forward_rate(scenarios, t, span)
            fund_maturity.append(scenarios.index_of(maturity))
            fund_factor.append(1.0 + fr.samples * span)
    return _Statics(
        sigma=sigma,
        productivity=productivity,
        population=population,
        ext_emissions=ext,
        fund_maturity=fund_maturity,
        fund_factor=fund_factor,
        dfund_maturity=list(fund_maturity),
        dfund_factor=list(fund_factor),
    )


# ---------------------------------------------------------------------------
# simulation
# ---------------------------------------------------------------------------


def simulate(cfg, policy=None, scenarios=None, perturbations=None, statics=None):
    """Run the full pipeline and return the trajectory with aggregated welfare.

    ``policy`` defaults to the configured one; pass a spec whose fields are
    recorded tape variables to obtain a differentiable run.
    """
    policy = policy if policy is not None else cfg.policy
    scenarios = scenarios if scenarios is not None else cfg.scenarios()
    if scenarios.grid.shape[0] != cfg.n_steps + 1:
        raise ValueError("scenario grid does not match the configured grid")
    statics = statics if statics is not None else _build_statics(cfg, scenarios)
    pert = perturbations or Perturbations()
    grid = scenarios.grid
    n = cfg.n_steps
    clim, econ, cost_cfg = cfg.climate, cfg.economy, cfg.costs

    temperature = tuple(SampleValue(float(v)) for v in cfg.initial.temperature)
    carbon = tuple(SampleValue(float(v)) for v in cfg.initial.carbon)
    capital = SampleValue(float(cfg.initial.capital))

    abate_ledger = FundingLedger(n)
    damage_ledger = FundingLedger(n)

    series = {
        name: []
        for name in (
            "mu s gdp emissions cost_abatement_incurred cost_abatement cost_damage "
            "cost_damage_raw cost_total consumption investment utility capital "
            "temperature_at temperature_lo carbon_at carbon_uo carbon_lo"
        ).split()
    }
    bankrupt = 0

    for i in range(n):
        t = float(grid[i])
        dt = float(grid[i + 1] - grid[i])
        r_t = scenarios.short_rate[i]
        numeraire = scenarios.numeraire[i]

        mu, s = evaluate_policy(policy, t, r_t, step=i)
        if i in pert.mu_add:
            mu = mu + pert.mu_add[i]

        gdp_i = economy_mod.gdp(capital, statics.productivity[i], statics.population[i], econ)

        industrial = lincomb([(-1.0, mu)], 1.0) * gdp_i  # (1 - mu) * GDP
        emissions = lincomb([(statics.sigma[i], industrial)], statics.ext_emissions[i])
        if i in pert.emission_add:
            emissions = emissions + pert.emission_add[i]

        rate = costs_mod.abatement_cost_rate(mu, t, cost_cfg)
        emission_base = industrial if cost_cfg.abatement_base == "unabated-emissions" else gdp_i
        c_mu = lincomb([(statics.sigma[i], rate)]) * emission_base
        if cost_cfg.dc_apply_to_abatement and cost_cfg.dc_mode != "none":
            c_mu = costs_mod.default_compensation(c_mu, numeraire, gdp_i, cost_cfg)
        abate_ledger.add(statics.fund_maturity[i], lincomb([(statics.fund_factor[i], c_mu)]))
        abatement_due = _sum_due(abate_ledger.due_at(i))

        damage_raw = costs_mod.damage_fraction(temperature[0], cost_cfg) * gdp_i
        series["cost_damage_raw"].append(damage_raw)
        damage_eff = costs_mod.default_compensation(
            damage_raw, numeraire, gdp_i, cost_cfg, abatement_due=abatement_due
        )
        if cost_cfg.fund_damages:
            damage_ledger.add(statics.dfund_maturity[i], lincomb([(statics.dfund_factor[i], damage_eff)]))
            damage_due = _sum_due(damage_ledger.due_at(i))
        else:
            damage_due = damage_eff

        total_cost = lincomb([(1.0, abatement_due), (1.0, damage_due)])
        breakdown = costs_mod.CostBreakdown(
            abatement_incurred=c_mu, abatement_due=abatement_due, damage=damage_due, total=total_cost
        )
        if i in pert.cost_add:
            total_cost = total_cost + pert.cost_add[i]

        consumption, investment = economy_mod.split_consumption_investment(gdp_i, total_cost, s)
        if i in pert.consumption_add:
            consumption = consumption + pert.consumption_add[i]
        floored = economy_mod.utility_consumption_floor(consumption, gdp_i)
        raw, flo = consumption.samples, floored.samples
        if isinstance(raw, float):
            bankrupt += int(flo > raw)
        else:
            bankrupt += int(np.count_nonzero(flo > raw))
        v_i = economy_mod.utility(floored, statics.population[i], econ)

        series["mu"].append(mu)
        series["s"].append(s)
        series["gdp"].append(gdp_i)
        series["emissions"].append(emissions)
        series["cost_abatement_incurred"].append(breakdown.abatement_incurred)
        series["cost_abatement"].append(breakdown.abatement_due)
        series["cost_damage"].append(breakdown.damage)
        series["cost_total"].append(total_cost)
        series["consumption"].append(consumption)
        series["investment"].append(investment)
        series["utility"].append(v_i)
        series["capital"].append(capital)
        series["temperature_at"].append(temperature[0])
        series["temperature_lo"].append(temperature[1])
        series["carbon_at"].append(carbon[0])
        series["carbon_uo"].append(carbon[1])
        series["carbon_lo"].append(carbon[2])

        state = ClimateState(temperature=temperature, carbon=carbon)
        f_i = climate_mod.forcing(carbon[0], t, clim)
        carbon = climate_mod.step_carbon(state, emissions, dt, clim)
        temperature = climate_mod.step_temperature(state, f_i, dt, clim)
        capital = maximum(economy_mod.step_capital(capital, investment, dt, econ), CAPITAL_FLOOR)

    welfare = aggregate_welfare(series["utility"], scenarios)
    return Trajectory(
        times=grid[:-1].copy(),
        sigma=list(statics.sigma),
        productivity=list(statics.productivity),
        population=list(statics.population),
        welfare=welfare,
        scenarios=scenarios,
        config=cfg,
        policy=policy,
        bankrupt_paths=bankrupt,
        **series,
    )


# ---------------------------------------------------------------------------
# calibration
# ---------------------------------------------------------------------------


@dataclass
class _Param:
    name: str
    init: float
    scale: float


def _family_parameters(spec, n_steps):
    if spec.kind == "reduced":
        return [_Param("a0", float(spec.a0), 0.01), _Param("s0", float(spec.s0), 0.25)]
    if spec.kind == "stochastic-linear":
        return [
            _Param("a0", float(spec.a0), 0.01),
            _Param("a1", float(spec.a1), 0.1),
            _Param("s0", float(spec.s0), 0.25),
        ]
    if spec.kind == "stochastic-quadratic":
        return [
            _Param("a0", float(spec.a0), 0.01),
            _Param("a1", float(spec.a1), 0.1),
            _Param("a2pol", float(spec.a2pol), 5.0),
            _Param("s0", float(spec.s0), 0.25),
        ]
    if spec.kind == "free-form":
        mu_table = spec.mu_table if spec.mu_table is not None else [0.5] * n_steps
        s_table = spec.s_table if spec.s_table is not None else [0.25] * n_steps
        if len(mu_table) < n_steps or len(s_table) < n_steps:
            raise ValueError("free-form tables shorter than the grid")
        params = [_Param(f"mu_{i}", logit(_squeeze_unit(mu_table[i])), 1.0) for i in range(n_steps)]
        params += [_Param(f"s_{i}", logit(_squeeze_unit(s_table[i])), 1.0) for i in range(n_steps)]
        return params
    raise ValueError(f"policy family {spec.kind!r} has no free parameters")


def _squeeze_unit(p, eps=1e-6):
    return min(max(float(p), eps), 1.0 - eps)


def _spec_with_values(spec, values, n_steps):
    if spec.kind == "free-form":
        mu_table = [logistic(values[f"mu_{i}"]) for i in range(n_steps)]
        s_table = [logistic(values[f"s_{i}"]) for i in range(n_steps)]
        return replace(spec, mu_table=mu_table, s_table=s_table)
    fields = {p: values[p] for p in values}
    return replace(spec, **fields)


def _evaluate_objective(cfg, spec, objective, scenarios, statics, raw, params, with_gradient=True):
    tape = Tape()
    values = {p.name: tape.variable(raw[k]) for k, p in enumerate(params)}
    pspec = _spec_with_values(spec, values, cfg.n_steps)
    traj = simulate(cfg, pspec, scenarios, statics=statics)
    agg = objective_aggregate(objective, traj.welfare, scenarios)
    value = objective.statistic.evaluate(agg)
    if not with_gradient:
        return value, None
    grads = tape.gradient(agg, objective.statistic, inputs=[values[p.name] for p in params])
    grad = np.array([grads[values[p.name].node] for p in params])
    return value, grad


def _default_starts(spec, params):
    starts = [np.array([p.init for p in params])]
    if spec.kind == "reduced":
        for t_full in (60.0, 180.0):
            alt = dict(a0=(1.0 - spec.mu0) / t_full, s0=0.25)
            starts.append(np.array([alt[p.name] for p in params]))
    return starts


def calibrate(cfg, policy=None, objective=None, scenarios=None, starts=None):
    """ADAM ascent of the objective over the policy family's free parameters.

    One scenario set is generated up front and relaxed nowhere, so repeated
    evaluations are deterministic in the parameters.  Stops on a small
    normalized gradient, on a long plateau of the best value, or at the
    iteration cap; returns the best-seen parameters, re-evaluated fresh.
    """
    spec = policy if policy is not None else cfg.policy
    objective = objective if objective is not None else cfg.objective
    scenarios = scenarios if scenarios is not None else cfg.scenarios()
    statics = _build_statics(cfg, scenarios)
    settings = cfg.calibration
    params = _family_parameters(spec, cfg.n_steps)
    scales = np.array([p.scale for p in params])

    if starts is None:
        starts = _default_starts(spec, params) if settings.multi_start else [np.array([p.init for p in params])]

    best_value = -math.inf
    best_raw = None
    best_norm = math.inf
    trace = []
    total_iters = 0

    for start in starts:
        x = np.asarray(start, dtype=float) / scales
        adam = Adam(len(params), settings.learning_rate, settings.beta1, settings.beta2)
        since_best = 0
        for it in range(settings.max_iterations):
            value, grad = _evaluate_objective(cfg, spec, objective, scenarios, statics, x * scales, params)
            if not math.isfinite(value):
                if total_iters == 0:
                    raise ValueError("objective is not finite at the starting parameters")
                break
            g_norm = float(np.max(np.abs(grad * scales))) if len(grad) else 0.0
            total_iters += 1
            trace.append((total_iters, value, g_norm))
            if best_raw is None or value > best_value + 1e-12 * max(1.0, abs(best_value)):
                best_value = value
                best_raw = x * scales
                best_norm = g_norm
                since_best = 0
            else:
                since_best += 1
            if g_norm < settings.gradient_tolerance:
                break
            if since_best >= settings.plateau_iterations:
                break
            x = adam.step(x, grad * scales, maximize=True)

    if best_raw is None:
        raise ValueError("calibration found no finite objective value")
    final_value, final_grad = _evaluate_objective(
        cfg, spec, objective, scenarios, statics, best_raw, params
    )
    result_params = {p.name: float(v) for p, v in zip(params, best_raw)}
    if spec.kind == "free-form":
        result_params = {
            "mu": [1.0 / (1.0 + math.exp(-best_raw[i])) for i in range(cfg.n_steps)],
            "s": [1.0 / (1.0 + math.exp(-best_raw[cfg.n_steps + i])) for i in range(cfg.n_steps)],
        }
    return CalibrationResult(
        parameters=result_params,
        objective=final_value,
        trace=trace,
        gradient_norm=float(np.max(np.abs(final_grad * scales))) if len(final_grad) else 0.0,
        iterations=total_iters,
    )


def spec_from_result(spec, result, n_steps=None):
    """Policy spec carrying the calibrated parameter values."""
    if spec.kind == "free-form":
        return replace(spec, mu_table=list(result.parameters["mu"]), s_table=list(result.parameters["s"]))
    return replace(spec, **result.parameters)


def first_order_condition_check(cfg, policy=None, objective=None, scenarios=None):
    """dW/d(time of full abatement) of the reduced family via the tape.

    A magnitude near zero certifies the calibrated equilibrium.
    """
    spec = policy if policy is not None else cfg.policy
    if spec.kind != "reduced":
        raise ValueError("the first-order condition check applies to the reduced family")
    objective = objective if objective is not None else cfg.objective
    scenarios = scenarios if scenarios is not None else cfg.scenarios()
    statics = _build_statics(cfg, scenarios)
    tape = Tape()
    t_full = tape.variable((1.0 - spec.mu0) / float(spec.a0))
    a0 = (1.0 - spec.mu0) / t_full
    pspec = replace(spec, a0=a0)
    traj = simulate(cfg, pspec, scenarios, statics=statics)
    agg = objective_aggregate(objective, traj.welfare, scenarios)
    grads = tape.gradient(agg, objective.statistic, inputs=[t_full])
    return grads[t_full.node]
