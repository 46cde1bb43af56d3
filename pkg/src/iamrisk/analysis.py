"""Derived quantities: social cost of carbon, cost-to-value weights,
damage-per-abatement sensitivities under four weighting modes, total-cost
sensitivity to the time of full abatement, and cost-distribution reports.

All sensitivities re-run the pipeline on a tape with pulse inputs and read
exact derivatives from it; a one-grid-step rectangular policy bump is
differentiated rather than literally applied.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .engine import Perturbations, simulate
from .objective import generational_average_welfare
from .stochvar import SampleValue, Tape

__all__ = [
    "SensitivityReport",
    "CostDistributionReport",
    "scc",
    "cost_to_value_weight",
    "damage_per_abatement_sensitivity",
    "cost_sensitivity_to_abatement_time",
    "cost_distribution",
]

WEIGHTINGS = ("none", "numeraire", "utility", "full")


@dataclass
class SensitivityReport:
    """Per-response-time ratios of damage-cost change to abatement-cost change
    for a policy bump at the observation time."""

    observation_time: float
    target_times: np.ndarray
    values: np.ndarray
    weighting: str


@dataclass
class CostDistributionReport:
    times: np.ndarray
    mean_abatement: np.ndarray
    std_abatement: np.ndarray
    mean_damage: np.ndarray
    std_damage: np.ndarray
    mean_total: np.ndarray
    std_total: np.ndarray
    mean_cost_per_gdp: np.ndarray
    std_cost_per_gdp: np.ndarray
    mean_discounted_total: np.ndarray
    std_discounted_total: np.ndarray
    generational_average: np.ndarray
    generational_average_per_gdp: np.ndarray
    generation_span: float


def _mean_std(values, paths):
    arr = np.stack([v.to_array(paths) for v in values])
    return arr.mean(axis=1), arr.std(axis=1)


def _pulse_shape(scenarios):
    return np.zeros(scenarios.paths) if scenarios.is_stochastic else 0.0


def scc(cfg, policy, scenarios, t, numeraire_relative=False, denominator="consumption"):
    """Social cost of carbon at time t, per path, in USD/tCO2.

    Ratio of the welfare sensitivity to a time-t emission pulse versus a
    time-t consumption pulse (or total-cost pulse with
    ``denominator="cost"``), scaled by -1000.  ``numeraire_relative``
    divides by N(t) per path.
    """
    step = scenarios.index_of(t)
    tape = Tape()
    shape = _pulse_shape(scenarios)
    e_pulse = tape.variable(shape)
    d_pulse = tape.variable(shape)
    pert = Perturbations(emission_add={step: e_pulse})
    if denominator == "consumption":
        pert.consumption_add[step] = d_pulse
    elif denominator == "cost":
        pert.cost_add[step] = d_pulse
    else:
        raise ValueError(f"unknown denominator {denominator!r}")
    traj = simulate(cfg, policy, scenarios, perturbations=pert)
    adj = tape.pathwise_adjoints(traj.welfare.aggregate, inputs=[e_pulse, d_pulse])
    dv_de = adj[e_pulse.node]
    dv_dd = adj[d_pulse.node]
    if isinstance(dv_dd, float):
        if dv_dd == 0.0:
            raise ValueError("vanishing welfare sensitivity in the scc denominator")
    elif (np.asarray(dv_dd) == 0.0).any():
        raise ValueError("vanishing welfare sensitivity in the scc denominator")
    value = -1000.0 * dv_de / dv_dd
    if numeraire_relative:
        value = value / scenarios.numeraire[step].samples
    return SampleValue(value)


def cost_to_value_weight(cfg, policy, scenarios, t):
    """Derivative of the time-t discounted utility with respect to the
    time-t total cost (discounting times marginal utility; negative)."""
    return cost_to_value_weights(cfg, policy, scenarios, times=[t])[0]


def cost_to_value_weights(cfg, policy, scenarios, times=None):
    """Cost-to-value weights for many times off one recorded run."""
    grid = scenarios.grid
    flow_times = grid[:-1]
    wanted = flow_times if times is None else times
    steps = [scenarios.index_of(t) for t in wanted]
    tape = Tape()
    shape = _pulse_shape(scenarios)
    pulses = {i: tape.variable(shape) for i in set(steps)}
    traj = simulate(cfg, policy, scenarios, perturbations=Perturbations(cost_add=pulses))
    out = []
    for i in steps:
        adj = tape.pathwise_adjoints(traj.welfare.discounted[i], inputs=[pulses[i]])
        out.append(SampleValue(adj[pulses[i].node]))
    return out


def _expect(sample_value):
    s = sample_value.samples
    return float(np.mean(s)) if isinstance(s, np.ndarray) else float(s)


def _full_weights(tape, traj, pulses, n):
    """d(aggregate welfare)/d(cost pulse at each step), divided by the step
    weight: the complete welfare impact of one unit of time-t cost."""
    grads = tape.gradient(traj.welfare.aggregate, inputs=[pulses[i] for i in range(n)])
    dts = np.diff(traj.welfare.grid)
    return np.array([grads[pulses[i].node] / dts[i] for i in range(n)])


def damage_per_abatement_sensitivity(cfg, policy, t, weighting="full", scenarios=None):
    """Damage-cost response over abatement-cost response for a policy bump.

    For a unit bump of mu at time t, reports the per-response-time ratio
    dC_D(s)/dmu(t) over dC_A(t)/dmu(t), multiplied by the chosen weight:
    none (1), numeraire (N(t)/N(s)), utility (welfare-weight ratio with
    discounting removed), or full (welfare-weight ratio).  Weights use the
    expectation across paths.
    """
    if weighting not in WEIGHTINGS:
        raise ValueError(f"unknown weighting {weighting!r}; expected one of {WEIGHTINGS}")
    scenarios = scenarios if scenarios is not None else cfg.scenarios()
    step = scenarios.index_of(t)
    n = cfg.n_steps
    tape = Tape()
    bump = tape.variable(0.0)
    pulses = {i: tape.variable(_pulse_shape(scenarios)) for i in range(n)} if weighting in ("utility", "full") else {}
    traj = simulate(cfg, policy, scenarios, perturbations=Perturbations(mu_add={step: bump}, cost_add=pulses))

    tangents = tape.tangents(bump)
    d_abate = _expect_tangent(tape, tangents, traj.cost_abatement[step])
    if d_abate == 0.0:
        raise ValueError("abatement cost does not respond to the policy bump")
    target_times = scenarios.grid[step:-1]
    # signed so that damage avoided by additional abatement reports positive
    ratios = np.array(
        [-_expect_tangent(tape, tangents, traj.cost_damage[i]) / d_abate for i in range(step, n)]
    )

    if weighting == "none":
        values = ratios
    elif weighting == "numeraire":
        values = ratios * _numeraire_ratio(scenarios, step, n)
    else:
        w = _full_weights(tape, traj, pulses, n)
        rel = w[step:] / w[step]
        if weighting == "full":
            values = ratios * rel
        else:
            values = ratios * rel / _numeraire_ratio(scenarios, step, n)
    return SensitivityReport(observation_time=t, target_times=target_times, values=values, weighting=weighting)


def _numeraire_ratio(scenarios, step, n):
    n_t = scenarios.numeraire[step].samples
    out = []
    for i in range(step, n):
        ratio = n_t / scenarios.numeraire[i].samples
        out.append(float(np.mean(ratio)) if isinstance(ratio, np.ndarray) else float(ratio))
    return np.array(out)


def _expect_tangent(tape, tangents, value):
    t = tape.tangent_of(tangents, value)
    return float(np.mean(t)) if isinstance(t, np.ndarray) else float(t)


@dataclass
class AbatementTimeSensitivity:
    times: np.ndarray
    series: np.ndarray
    running_integral: np.ndarray
    total: float


def cost_sensitivity_to_abatement_time(cfg, policy, scenarios=None):
    """Welfare-weighted cost response to delaying full abatement.

    Series over t of dC(t)/dT^{mu=1} times the magnitude of the full
    welfare weight |dW/dC(t)|; by the chain rule the dt-weighted sum over
    t equals -dW/dT^{mu=1}, so the running integral returns to zero at the
    calibrated equilibrium.
    """
    if policy.kind != "reduced":
        raise ValueError("the abatement-time sensitivity applies to the reduced family")
    scenarios = scenarios if scenarios is not None else cfg.scenarios()
    n = cfg.n_steps
    tape = Tape()
    t_full = tape.variable((1.0 - policy.mu0) / float(policy.a0))
    a0 = (1.0 - policy.mu0) / t_full
    pspec = replace(policy, a0=a0)
    pulses = {i: tape.variable(_pulse_shape(scenarios)) for i in range(n)}
    traj = simulate(cfg, pspec, scenarios, perturbations=Perturbations(cost_add=pulses))

    weights = _full_weights(tape, traj, pulses, n)
    tangents = tape.tangents(t_full)
    dc_dt = np.array([_expect_tangent(tape, tangents, traj.cost_total[i]) for i in range(n)])
    # weight by the impact magnitude so that early abatement relief plots
    # negative and the later damage increase positive
    series = dc_dt * np.abs(weights)
    dts = np.diff(scenarios.grid)
    running = np.cumsum(series * dts)
    return AbatementTimeSensitivity(
        times=scenarios.grid[:-1].copy(),
        series=series,
        running_integral=running,
        total=float(running[-1]),
    )


def cost_distribution(traj, generation_span=100.0):
    """Per-time mean/stddev of the cost components plus discounted and
    generational-average views."""
    if generation_span < 0.0:
        raise ValueError("generation span must be non-negative")
    scenarios = traj.scenarios
    paths = scenarios.paths
    times = traj.times
    mean_a, std_a = _mean_std(traj.cost_abatement, paths)
    mean_d, std_d = _mean_std(traj.cost_damage, paths)
    mean_c, std_c = _mean_std(traj.cost_total, paths)
    per_gdp = [c / g for c, g in zip(traj.cost_total, traj.gdp)]
    mean_pg, std_pg = _mean_std(per_gdp, paths)
    discounted = [
        SampleValue(c.samples / scenarios.numeraire[i].samples) for i, c in enumerate(traj.cost_total)
    ]
    mean_disc, std_disc = _mean_std(discounted, paths)

    gen = _generational_average(traj.cost_total, scenarios, generation_span, discounted_window=True)
    gen_pg = _generational_average(per_gdp, scenarios, generation_span, discounted_window=False)
    return CostDistributionReport(
        times=times,
        mean_abatement=mean_a,
        std_abatement=std_a,
        mean_damage=mean_d,
        std_damage=std_d,
        mean_total=mean_c,
        std_total=std_c,
        mean_cost_per_gdp=mean_pg,
        std_cost_per_gdp=std_pg,
        mean_discounted_total=mean_disc,
        std_discounted_total=std_disc,
        generational_average=gen,
        generational_average_per_gdp=gen_pg,
        generation_span=generation_span,
    )


def _generational_average(values, scenarios, span, discounted_window):
    """Backward window average over (t - span, t]; cost is discounted back to
    t inside the window, the per-GDP variant is not."""
    grid = scenarios.grid
    dts = np.diff(grid)
    paths = scenarios.paths
    numeraire = [n.samples for n in scenarios.numeraire]
    arr = np.stack([v.to_array(paths) for v in values])
    out = np.zeros(len(values))
    for i in range(len(values)):
        if span == 0.0:
            out[i] = arr[i].mean()
            continue
        acc = np.zeros(paths)
        mass = 0.0
        for j in range(i, -1, -1):
            if grid[j] <= grid[i] - span:
                break
            w = float(dts[j])
            if discounted_window:
                acc = acc + w * arr[j] * (numeraire[i] / numeraire[j])
            else:
                acc = acc + w * arr[j]
            mass += w
        out[i] = float(np.mean(acc / mass))
    return out
