import math
from dataclasses import replace

import numpy as np
import pytest

from iamrisk.analysis import (
    cost_distribution,
    cost_sensitivity_to_abatement_time,
    cost_to_value_weight,
    cost_to_value_weights,
    damage_per_abatement_sensitivity,
    scc,
)
from iamrisk.climate import ClimateConfig
from iamrisk.costs import CostConfig
from iamrisk.engine import Perturbations, SimulationConfig, first_order_condition_check, simulate
from iamrisk.policy import PolicySpec
from iamrisk.rates import RateModelSpec
from iamrisk.stochvar import SampleValue


def value(sv):
    return sv.samples if isinstance(sv, SampleValue) else sv


@pytest.fixture(scope="module")
def setup():
    cfg = SimulationConfig(horizon=120.0)
    policy = PolicySpec(kind="reduced", a0=0.0097, s0=0.25)
    scenarios = cfg.scenarios()
    return cfg, policy, scenarios


def welfare_with(cfg, policy, scenarios, pert):
    traj = simulate(cfg, policy, scenarios, perturbations=pert)
    return value(traj.welfare.aggregate)


class TestScc:
    def test_matches_finite_difference_pulse(self, setup):
        cfg, policy, scenarios = setup
        ad = value(scc(cfg, policy, scenarios, 5.0))
        h = 1e-3  # GtCO2/year bump
        dv_de = (
            welfare_with(cfg, policy, scenarios, Perturbations(emission_add={5: SampleValue(h)}))
            - welfare_with(cfg, policy, scenarios, Perturbations(emission_add={5: SampleValue(-h)}))
        ) / (2 * h)
        dv_dc = (
            welfare_with(cfg, policy, scenarios, Perturbations(consumption_add={5: SampleValue(h)}))
            - welfare_with(cfg, policy, scenarios, Perturbations(consumption_add={5: SampleValue(-h)}))
        ) / (2 * h)
        fd = -1000.0 * dv_de / dv_dc
        assert ad == pytest.approx(fd, rel=1e-2)
        assert ad > 0.0

    def test_zero_climate_sensitivity_gives_zero(self, setup):
        cfg, policy, scenarios = setup
        cfg0 = replace(cfg, costs=CostConfig(a2=0.0))
        assert value(scc(cfg0, policy, scenarios, 5.0)) == pytest.approx(0.0, abs=1e-12)

    def test_numeraire_relative_variant(self, setup):
        cfg, policy, scenarios = setup
        plain = value(scc(cfg, policy, scenarios, 20.0))
        relative = value(scc(cfg, policy, scenarios, 20.0, numeraire_relative=True))
        n = value(scenarios.numeraire[scenarios.index_of(20.0)])
        assert relative == pytest.approx(plain / n, rel=1e-12)

    def test_cost_denominator_variant_has_opposite_sign(self, setup):
        cfg, policy, scenarios = setup
        consumption_based = value(scc(cfg, policy, scenarios, 5.0))
        cost_based = value(scc(cfg, policy, scenarios, 5.0, denominator="cost"))
        assert consumption_based > 0.0
        assert cost_based < 0.0  # extra cost lowers welfare, flipping the ratio sign

    def test_pathwise_values_with_stochastic_rates(self):
        cfg = SimulationConfig(
            horizon=60.0,
            rates=RateModelSpec(kind="hull-white", r0=0.018, mean_reversion=0.1, volatility=0.01, paths=40, seed=7),
        )
        policy = PolicySpec(kind="stochastic-linear", a0=0.0097, a1=-0.03, s0=0.25)
        out = scc(cfg, policy, cfg.scenarios(), 10.0)
        assert out.samples.shape == (40,)
        assert np.isfinite(out.samples).all()
        assert out.samples.std() > 0.0


class TestCostToValueWeight:
    def test_negative_everywhere_and_decaying(self, setup):
        cfg, policy, scenarios = setup
        times = [2.0, 20.0, 50.0, 90.0]
        weights = [value(w) for w in cost_to_value_weights(cfg, policy, scenarios, times)]
        assert all(w < 0 for w in weights)
        magnitudes = [abs(w) for w in weights]
        assert all(b < a for a, b in zip(magnitudes, magnitudes[1:]))

    def test_matches_finite_difference(self, setup):
        cfg, policy, scenarios = setup
        t = 10.0
        ad = value(cost_to_value_weight(cfg, policy, scenarios, t))
        h = 1e-4
        up = simulate(cfg, policy, scenarios, perturbations=Perturbations(cost_add={10: SampleValue(h)}))
        dn = simulate(cfg, policy, scenarios, perturbations=Perturbations(cost_add={10: SampleValue(-h)}))
        fd = (value(up.welfare.discounted[10]) - value(dn.welfare.discounted[10])) / (2 * h)
        assert ad == pytest.approx(fd, rel=1e-4)


class TestDamagePerAbatement:
    def test_no_instantaneous_damage_response(self, setup):
        cfg, policy, scenarios = setup
        report = damage_per_abatement_sensitivity(cfg, policy, 2.0, "none", scenarios)
        assert report.values[0] == pytest.approx(0.0, abs=1e-12)

    def test_unweighted_grows_for_a_long_span(self, setup):
        cfg, policy, scenarios = setup
        report = damage_per_abatement_sensitivity(cfg, policy, 2.0, "none", scenarios)
        vals = report.values
        assert all(vals[i + 1] >= vals[i] - 1e-12 for i in range(0, 100))

    def test_weight_factorization(self, setup):
        # numeraire weighting times utility weighting equals full weighting
        cfg, policy, scenarios = setup
        none = damage_per_abatement_sensitivity(cfg, policy, 2.0, "none", scenarios).values
        numer = damage_per_abatement_sensitivity(cfg, policy, 2.0, "numeraire", scenarios).values
        util = damage_per_abatement_sensitivity(cfg, policy, 2.0, "utility", scenarios).values
        full = damage_per_abatement_sensitivity(cfg, policy, 2.0, "full", scenarios).values
        mask = np.abs(none) > 1e-12
        lhs = numer[mask] * util[mask] / none[mask]
        np.testing.assert_allclose(lhs, full[mask], rtol=1e-10)

    def test_matches_literal_bump(self, setup):
        cfg, policy, scenarios = setup
        report = damage_per_abatement_sensitivity(cfg, policy, 2.0, "none", scenarios)
        h = 1e-5
        up = simulate(cfg, policy, scenarios, perturbations=Perturbations(mu_add={2: SampleValue(h)}))
        dn = simulate(cfg, policy, scenarios, perturbations=Perturbations(mu_add={2: SampleValue(-h)}))
        d_abate = (value(up.cost_abatement[2]) - value(dn.cost_abatement[2])) / (2 * h)
        for s_idx in (20, 60, 100):
            d_damage = (value(up.cost_damage[s_idx]) - value(dn.cost_damage[s_idx])) / (2 * h)
            fd_ratio = -d_damage / d_abate
            assert report.values[s_idx - 2] == pytest.approx(fd_ratio, rel=1e-3)

    def test_unknown_weighting_rejected(self, setup):
        cfg, policy, scenarios = setup
        with pytest.raises(ValueError, match="weighting"):
            damage_per_abatement_sensitivity(cfg, policy, 2.0, "quadratic", scenarios)


class TestAbatementTimeSensitivity:
    def test_total_approximates_negated_first_order_condition(self, setup):
        # the cost pulses also ride the capital channel into future costs,
        # so the decomposition carries a small feedback wedge (~1-2%)
        cfg, policy, scenarios = setup
        sens = cost_sensitivity_to_abatement_time(cfg, policy, scenarios)
        foc = first_order_condition_check(cfg, policy, scenarios=scenarios)
        assert sens.total == pytest.approx(-foc, rel=0.03)

    def test_sign_pattern_negative_then_positive(self, setup):
        cfg, policy, scenarios = setup
        sens = cost_sensitivity_to_abatement_time(cfg, policy, scenarios)
        t_min = sens.times[np.argmin(sens.series)]
        t_max = sens.times[np.argmax(sens.series)]
        assert sens.series.min() < 0.0 < sens.series.max()
        assert t_min < t_max

    def test_requires_reduced_family(self, setup):
        cfg, _, scenarios = setup
        ff = PolicySpec(kind="free-form", mu_table=[0.1] * 120, s_table=[0.2] * 120)
        with pytest.raises(ValueError, match="reduced"):
            cost_sensitivity_to_abatement_time(cfg, ff, scenarios)


class TestCostDistribution:
    def test_deterministic_run_has_zero_stddev(self, setup):
        cfg, policy, scenarios = setup
        traj = simulate(cfg, policy, scenarios)
        report = cost_distribution(traj, 100.0)
        assert np.all(report.std_total == 0.0)
        assert np.all(report.std_cost_per_gdp == 0.0)

    def test_zero_span_recovers_cost(self, setup):
        cfg, policy, scenarios = setup
        traj = simulate(cfg, policy, scenarios)
        report = cost_distribution(traj, 0.0)
        np.testing.assert_allclose(report.generational_average, report.mean_total, rtol=1e-12)

    def test_deterministic_policy_stochastic_rates(self):
        # cost per GDP stays deterministic while discounted cost is risky
        cfg = SimulationConfig(
            horizon=60.0,
            rates=RateModelSpec(kind="hull-white", r0=0.018, mean_reversion=0.1, volatility=0.01, paths=60, seed=13),
        )
        policy = PolicySpec(kind="reduced", a0=0.0097, s0=0.25)
        traj = simulate(cfg, policy)
        report = cost_distribution(traj, 100.0)
        assert np.all(report.std_cost_per_gdp < 1e-14)
        assert report.std_discounted_total[1:].min() > 0.0

    def test_mean_components_additive(self, setup):
        cfg, policy, scenarios = setup
        traj = simulate(cfg, policy, scenarios)
        report = cost_distribution(traj, 50.0)
        np.testing.assert_allclose(report.mean_total, report.mean_abatement + report.mean_damage, rtol=1e-12)

    def test_negative_span_rejected(self, setup):
        cfg, policy, scenarios = setup
        traj = simulate(cfg, policy, scenarios)
        with pytest.raises(ValueError):
            cost_distribution(traj, -1.0)
