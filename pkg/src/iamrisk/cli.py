"""Experiment runner: one subcommand per experiment family, CSV outputs.

Every subcommand is reproducible (identical config and seed give
byte-identical CSVs); floats are serialized with 17 significant digits.
Sweep points are independent calibrations and may be dispatched to a
process pool capped by the ``IAM_THREADS`` environment variable.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np

from . import analysis
from .config import ConfigError, load_config, parse_config
from .engine import (
    CalibrationSettings,
    SimulationConfig,
    calibrate,
    first_order_condition_check,
    simulate,
    spec_from_result,
)
from .objective import ObjectiveSpec
from .policy import PolicySpec, time_to_full_abatement
from .rates import RateModelSpec
from .stochvar import Statistic

SUBCOMMANDS = (
    "simulate",
    "calibrate",
    "cost-dist",
    "sensitivity",
    "sweep-rate",
    "sweep-vol",
    "sweep-quantile",
    "sweep-funding",
    "abatement-dist",
    "convergence",
)

TRAJECTORY_HEADER = [
    "time",
    "mu",
    "s",
    "temperature_at",
    "carbon_at",
    "gdp",
    "cost_abatement",
    "cost_damage",
    "cost_total",
    "cost_per_gdp",
    "utility",
    "discount_factor",
]


def _fmt(value):
    return format(float(value), ".17g")


def _write_csv(path, header, rows):
    try:
        with open(path, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(header)
            for row in rows:
                writer.writerow([cell if isinstance(cell, str) else _fmt(cell) for cell in row])
    except OSError as exc:
        raise IOError(f"cannot write {path}: {exc}") from exc


def _trajectory_rows(traj):
    means = {
        name: traj.series_mean(name)
        for name in ("mu", "s", "temperature_at", "carbon_at", "gdp", "cost_abatement", "cost_damage", "cost_total", "utility")
    }
    dfs = [1.0 / n.samples for n in traj.scenarios.numeraire[: len(traj.times)]]
    df_mean = [float(np.mean(d)) for d in dfs]
    rows = []
    for i, t in enumerate(traj.times):
        rows.append(
            [
                t,
                means["mu"][i],
                means["s"][i],
                means["temperature_at"][i],
                means["carbon_at"][i],
                means["gdp"][i],
                means["cost_abatement"][i],
                means["cost_damage"][i],
                means["cost_total"][i],
                means["cost_total"][i] / means["gdp"][i],
                means["utility"][i],
                df_mean[i],
            ]
        )
    return rows


def _dump_trajectory(traj, path):
    _write_csv(path, TRAJECTORY_HEADER, _trajectory_rows(traj))


def _calibrated_policy(cfg, result):
    return spec_from_result(cfg.policy, result, cfg.n_steps)


def _abatement_time(cfg, policy, scenarios):
    if policy.kind == "reduced":
        a0 = float(policy.a0)
        return (1.0 - policy.mu0) / a0 if a0 > 0 else math.inf
    summary = time_to_full_abatement(policy, scenarios)
    s = summary.t_full_abatement.samples
    return float(np.mean(s)) if isinstance(s, np.ndarray) else float(s)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _cmd_simulate(cfg, experiment, out):
    traj = simulate(cfg)
    _dump_trajectory(traj, os.path.join(out, "trajectory.csv"))
    return 0


def _cmd_calibrate(cfg, experiment, out):
    result = calibrate(cfg)
    policy = _calibrated_policy(cfg, result)
    scenarios = cfg.scenarios()
    traj = simulate(cfg, policy, scenarios)
    _dump_trajectory(traj, os.path.join(out, "trajectory.csv"))

    rows = [["objective", result.objective], ["gradient_norm", result.gradient_norm], ["iterations", result.iterations]]
    if cfg.policy.kind != "free-form":
        for name, value in result.parameters.items():
            rows.append([name, value])
        rows.append(["t_full_abatement", _abatement_time(cfg, policy, scenarios)])
    _write_csv(os.path.join(out, "calibration.csv"), ["quantity", "value"], rows)
    _write_csv(
        os.path.join(out, "calibration_trace.csv"),
        ["iteration", "objective", "gradient_norm"],
        result.trace,
    )
    if cfg.policy.kind == "free-form":
        _write_csv(
            os.path.join(out, "calibrated_policy.csv"),
            ["time", "mu", "s"],
            [
                [t, result.parameters["mu"][i], result.parameters["s"][i]]
                for i, t in enumerate(traj.times)
            ],
        )
    return 0


def _cmd_cost_dist(cfg, experiment, out):
    result = calibrate(cfg)
    policy = _calibrated_policy(cfg, result)
    traj = simulate(cfg, policy)
    report = analysis.cost_distribution(traj, experiment.generation_span)
    header = [
        "time",
        "mean_abatement",
        "std_abatement",
        "mean_damage",
        "std_damage",
        "mean_total",
        "std_total",
        "mean_cost_per_gdp",
        "std_cost_per_gdp",
        "mean_discounted_total",
        "std_discounted_total",
        "generational_average",
        "generational_average_per_gdp",
    ]
    rows = [
        [
            report.times[i],
            report.mean_abatement[i],
            report.std_abatement[i],
            report.mean_damage[i],
            report.std_damage[i],
            report.mean_total[i],
            report.std_total[i],
            report.mean_cost_per_gdp[i],
            report.std_cost_per_gdp[i],
            report.mean_discounted_total[i],
            report.std_discounted_total[i],
            report.generational_average[i],
            report.generational_average_per_gdp[i],
        ]
        for i in range(len(report.times))
    ]
    _write_csv(os.path.join(out, "cost_distribution.csv"), header, rows)
    return 0


def _cmd_sensitivity(cfg, experiment, out):
    result = calibrate(cfg)
    policy = _calibrated_policy(cfg, result)
    scenarios = cfg.scenarios()
    for weighting in analysis.WEIGHTINGS:
        report = analysis.damage_per_abatement_sensitivity(cfg, policy, 2.0, weighting, scenarios)
        _write_csv(
            os.path.join(out, f"damage_per_abatement_{weighting}.csv"),
            ["target_time", "value"],
            list(zip(report.target_times, report.values)),
        )
    if policy.kind == "reduced":
        sens = analysis.cost_sensitivity_to_abatement_time(cfg, policy, scenarios)
        _write_csv(
            os.path.join(out, "abatement_time_sensitivity.csv"),
            ["time", "value", "running_integral"],
            list(zip(sens.times, sens.series, sens.running_integral)),
        )
        residual = first_order_condition_check(cfg, policy, scenarios=scenarios)
        _write_csv(os.path.join(out, "first_order_condition.csv"), ["quantity", "value"], [["dW_dTfull", residual]])
    return 0


def _sweep_worker(args):
    data, updates, label = args
    cfg, _ = parse_config(data)
    cfg = _apply_updates(cfg, updates)
    result = calibrate(cfg)
    policy = _calibrated_policy(cfg, result)
    t_full = _abatement_time(cfg, policy, cfg.scenarios())
    s0 = result.parameters.get("s0", float("nan"))
    return label, t_full, s0, result.objective


def _apply_updates(cfg, updates):
    for section, values in updates.items():
        if section == "":
            cfg = replace(cfg, **values)
        else:
            cfg = replace(cfg, **{section: replace(getattr(cfg, section), **values)})
    return cfg


def _run_sweep(data, points, workers):
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_sweep_worker, points))
    return [_sweep_worker(p) for p in points]


def _workers():
    try:
        return max(1, int(os.environ.get("IAM_THREADS", "1")))
    except ValueError:
        return 1


def _cmd_sweep_rate(cfg, experiment, out, data):
    points = [
        (data, {"rates": {"kind": "constant", "r0": r, "volatility": 0.0}}, r)
        for r in experiment.rate_levels
    ]
    results = _run_sweep(data, points, _workers())
    _write_csv(
        os.path.join(out, "sweep_rate.csv"),
        ["rate", "t_full_abatement", "savings"],
        [[r, t, s] for (r, t, s, _) in results],
    )
    return 0


def _cmd_sweep_vol(cfg, experiment, out, data):
    points = []
    for tail in ("left", "right"):
        for vol in experiment.volatilities:
            updates = {
                "rates": {"kind": "hull-white", "volatility": vol},
                "objective": {
                    "statistic": Statistic("expected-shortfall", alpha=experiment.es_alpha, tail=tail)
                },
            }
            points.append((data, updates, f"{tail}:{vol}"))
    results = _run_sweep(data, points, _workers())
    rows = []
    for label, t, s, _ in results:
        tail, vol = label.split(":")
        rows.append([tail, float(vol), t, s])
    _write_csv(os.path.join(out, "sweep_vol.csv"), ["tail", "volatility", "t_full_abatement", "savings"], rows)
    return 0


def _cmd_sweep_quantile(cfg, experiment, out, data):
    points = []
    for alpha in experiment.quantile_levels:
        updates = {
            "rates": {"kind": "hull-white"},
            "objective": {"statistic": Statistic("expected-shortfall", alpha=alpha, tail="left")},
        }
        points.append((data, updates, alpha))
    results = _run_sweep(data, points, _workers())
    _write_csv(
        os.path.join(out, "sweep_quantile.csv"),
        ["alpha", "t_full_abatement", "savings"],
        [[a, t, s] for (a, t, s, _) in results],
    )
    return 0


def _cmd_sweep_funding(cfg, experiment, out, data):
    points = [
        (data, {"costs": {"funding_period": p}}, p)
        for p in experiment.funding_periods
    ]
    results = _run_sweep(data, points, _workers())
    _write_csv(
        os.path.join(out, "sweep_funding.csv"),
        ["funding_period", "t_full_abatement", "savings"],
        [[p, t, s] for (p, t, s, _) in results],
    )
    return 0


def _cmd_abatement_dist(cfg, experiment, out):
    if cfg.policy.kind not in ("stochastic-linear", "stochastic-quadratic"):
        cfg = replace(cfg, policy=replace(cfg.policy, kind="stochastic-linear"))
    if cfg.rates.kind != "hull-white":
        cfg = replace(cfg, rates=replace(cfg.rates, kind="hull-white", volatility=max(cfg.rates.volatility, 0.005)))
    rows = []
    sample_rows = []
    for label, statistic in (
        ("expectation", Statistic()),
        ("expected-shortfall", Statistic("expected-shortfall", alpha=experiment.es_alpha, tail="left")),
    ):
        objective = replace(cfg.objective, statistic=statistic)
        result = calibrate(cfg, objective=objective)
        policy = _calibrated_policy(cfg, result)
        scenarios = cfg.scenarios()
        summary = time_to_full_abatement(policy, scenarios)
        samples = summary.t_full_abatement.to_array(scenarios.paths)
        finite = samples[np.isfinite(samples)]
        edges = np.histogram_bin_edges(finite, bins=experiment.histogram_bins)
        counts, _ = np.histogram(finite, bins=edges)
        for lo, hi, c in zip(edges[:-1], edges[1:], counts):
            rows.append([label, lo, hi, int(c)])
        for name, value in result.parameters.items():
            sample_rows.append([label, name, value])
    _write_csv(
        os.path.join(out, "abatement_time_histogram.csv"),
        ["objective", "bin_low", "bin_high", "count"],
        [[label, lo, hi, str(c)] for label, lo, hi, c in rows],
    )
    _write_csv(os.path.join(out, "abatement_dist_parameters.csv"), ["objective", "parameter", "value"], sample_rows)
    return 0


def _cmd_convergence(cfg, experiment, out, data):
    for horizon in experiment.horizons:
        sub, _ = parse_config(data)
        sub = _apply_updates(sub, {"": {"horizon": float(horizon)}})
        result = calibrate(sub)
        policy = _calibrated_policy(sub, result)
        traj = simulate(sub, policy)
        damage = traj.series_mean("cost_damage")
        rows = [
            [
                traj.times[i],
                traj.series_mean("emissions")[i],
                traj.series_mean("carbon_at")[i],
                traj.series_mean("temperature_at")[i],
                damage[i],
                traj.series_mean("gdp")[i],
            ]
            for i in range(len(traj.times))
        ]
        _write_csv(
            os.path.join(out, f"convergence_{int(horizon)}.csv"),
            ["time", "emissions", "carbon_at", "temperature_at", "cost_damage", "gdp"],
            rows,
        )
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def _build_parser():
    parser = argparse.ArgumentParser(prog="iam", description="Climate-economy experiment runner")
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", default=None, help="JSON configuration file (defaults apply when omitted)")
    parser.add_argument("--out", default=None, help="output directory (default: experiment.outputDir)")
    parser.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    parser.add_argument("--paths", type=int, default=None, help="override the Monte-Carlo path count")
    return parser


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        if args.config is not None:
            cfg, experiment = load_config(args.config)
            with open(args.config) as handle:
                data = json.load(handle)
        else:
            cfg, experiment = parse_config({})
            data = {}
        overrides = {}
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.paths is not None:
            if args.paths < 1:
                raise ConfigError("paths must be at least 1")
            overrides["paths"] = args.paths
        if overrides:
            cfg = replace(cfg, rates=replace(cfg.rates, **overrides))
            data = dict(data)
            data["rates"] = {**data.get("rates", {}), **{k if k != "mean_reversion" else "meanReversion": v for k, v in overrides.items()}}
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2

    out = args.out if args.out is not None else experiment.output_dir
    try:
        os.makedirs(out, exist_ok=True)
    except OSError as exc:
        print(f"i/o error: cannot create output directory {out}: {exc}", file=sys.stderr)
        return 4

    try:
        if args.subcommand == "simulate":
            return _cmd_simulate(cfg, experiment, out)
        if args.subcommand == "calibrate":
            return _cmd_calibrate(cfg, experiment, out)
        if args.subcommand == "cost-dist":
            return _cmd_cost_dist(cfg, experiment, out)
        if args.subcommand == "sensitivity":
            return _cmd_sensitivity(cfg, experiment, out)
        if args.subcommand == "sweep-rate":
            return _cmd_sweep_rate(cfg, experiment, out, data)
        if args.subcommand == "sweep-vol":
            return _cmd_sweep_vol(cfg, experiment, out, data)
        if args.subcommand == "sweep-quantile":
            return _cmd_sweep_quantile(cfg, experiment, out, data)
        if args.subcommand == "sweep-funding":
            return _cmd_sweep_funding(cfg, experiment, out, data)
        if args.subcommand == "abatement-dist":
            return _cmd_abatement_dist(cfg, experiment, out)
        if args.subcommand == "convergence":
            return _cmd_convergence(cfg, experiment, out, data)
        raise AssertionError(f"unhandled subcommand {args.subcommand}")
    except IOError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 4
    except (ValueError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
