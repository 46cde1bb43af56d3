import math

import numpy as np
import pytest

from iamrisk.economy import (
    EconomyConfig,
    gdp,
    split_consumption_investment,
    step_capital,
    step_population,
    step_productivity,
    utility,
    utility_consumption_floor,
)
from iamrisk.stochvar import SampleValue


def value(sv):
    return sv.samples if isinstance(sv, SampleValue) else sv


class TestStepCapital:
    def test_classical_five_year_step(self):
        cfg = EconomyConfig(delta_capital_5y=0.10)
        assert value(step_capital(100.0, 10.0, 5.0, cfg)) == pytest.approx(140.0, rel=1e-14)

    def test_no_depreciation_no_investment(self):
        cfg = EconomyConfig(delta_capital_5y=0.0)
        assert value(step_capital(100.0, 0.0, 5.0, cfg)) == pytest.approx(100.0)

    def test_one_year_step(self):
        cfg = EconomyConfig(delta_capital_5y=0.10)
        assert value(step_capital(100.0, 0.0, 1.0, cfg)) == pytest.approx(100.0 * 0.9**0.2, rel=1e-14)
        assert value(step_capital(100.0, 0.0, 1.0, cfg)) == pytest.approx(97.915, abs=5e-4)

    def test_default_is_classical_annual_depreciation(self):
        assert EconomyConfig().delta_capital_5y == pytest.approx(1.0 - 0.9**5)


class TestGdp:
    def test_initial_output_scale(self):
        cfg = EconomyConfig()
        out = value(gdp(223.0, 5.115, 7403.0, cfg))
        expected = 5.115 * 223.0**0.3 * 7.403**0.7  # direct arithmetic
        assert out == pytest.approx(expected, rel=1e-12)
        assert out == pytest.approx(105.2, abs=0.1)

    def test_zero_capital(self):
        cfg = EconomyConfig()
        assert value(gdp(0.0, 5.115, 7403.0, cfg)) == 0.0

    def test_degenerate_elasticity_limit(self):
        cfg = EconomyConfig(gamma=1.0 - 1e-12)
        assert value(gdp(223.0, 5.115, 7403.0, cfg)) == pytest.approx(5.115 * 223.0, rel=1e-9)


class TestStepProductivity:
    def test_first_five_year_step(self):
        cfg = EconomyConfig()
        out = step_productivity(5.115, 0.0, 5.0, cfg)
        assert out == pytest.approx(5.115 / 0.924, rel=1e-12)
        assert out == pytest.approx(5.5357, abs=5e-5)

    def test_zero_growth(self):
        cfg = EconomyConfig(ga=0.0)
        assert step_productivity(5.115, 0.0, 5.0, cfg) == 5.115

    def test_one_year_factor(self):
        cfg = EconomyConfig()
        out = step_productivity(1.0, 0.0, 1.0, cfg)
        assert out == pytest.approx(0.924**-0.2, rel=1e-12)
        assert out == pytest.approx(1.01593, abs=5e-6)

    def test_blow_up_guard(self):
        cfg = EconomyConfig(ga=1.5)
        with pytest.raises(ValueError, match="growth factor"):
            step_productivity(1.0, 0.0, 5.0, cfg)


class TestStepPopulation:
    def test_first_step(self):
        cfg = EconomyConfig()
        out = step_population(7403.0, 5.0, cfg)
        assert out == pytest.approx(7403.0 * (11500.0 / 7403.0) ** 0.134, rel=1e-12)
        assert out == pytest.approx(7853.0, abs=0.2)

    def test_fixed_point(self):
        cfg = EconomyConfig()
        assert step_population(11500.0, 5.0, cfg) == pytest.approx(11500.0)

    def test_zero_rate(self):
        cfg = EconomyConfig(g_pop=0.0)
        assert step_population(7403.0, 5.0, cfg) == 7403.0

    @pytest.mark.parametrize("start", [5000.0, 13000.0])
    def test_monotone_convergence_from_either_side(self, start):
        cfg = EconomyConfig()
        levels = [start]
        for _ in range(200):
            levels.append(step_population(levels[-1], 5.0, cfg))
        gaps = [abs(l - 11500.0) for l in levels]
        assert all(b <= a + 1e-9 for a, b in zip(gaps, gaps[1:]))
        assert gaps[-1] < 1.0


class TestSplit:
    def test_direct_arithmetic(self):
        consumption, investment = split_consumption_investment(100.0, 10.0, 0.25)
        assert value(consumption) == pytest.approx(67.5)
        assert value(investment) == pytest.approx(22.5)

    def test_all_to_consumption(self):
        consumption, investment = split_consumption_investment(100.0, 10.0, 0.0)
        assert value(consumption) == pytest.approx(90.0)
        assert value(investment) == 0.0

    def test_all_to_investment(self):
        consumption, investment = split_consumption_investment(100.0, 10.0, 1.0)
        assert value(consumption) == 0.0
        assert value(investment) == pytest.approx(90.0)

    def test_flow_conservation(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            g = float(rng.uniform(10, 200))
            c = float(rng.uniform(0, 5))
            s = float(rng.uniform(0, 1))
            consumption, investment = split_consumption_investment(g, c, s)
            total = value(consumption) + value(investment) + c
            assert total == pytest.approx(g, rel=1e-12)

    def test_bankrupt_floor_keeps_utility_defined(self):
        consumption, _ = split_consumption_investment(100.0, 150.0, 0.25)
        assert value(consumption) < 0
        floored = utility_consumption_floor(consumption, 100.0)
        assert value(floored) == pytest.approx(1e-6 * 100.0)


class TestUtility:
    def test_unit_per_capita_consumption_is_zero(self):
        cfg = EconomyConfig()
        # per-capita consumption of 1 (thousand USD/year): C = L/1000
        assert value(utility(7.403, 7403.0, cfg)) == pytest.approx(0.0, abs=1e-9)

    def test_direct_arithmetic(self):
        cfg = EconomyConfig()
        expected = 7403.0 * ((50.0 / 7.403) ** (1.0 - 1.45) - 1.0) / (1.0 - 1.45)
        out = value(utility(50.0, 7403.0, cfg))
        assert out == pytest.approx(expected, rel=1e-12)
        assert out == pytest.approx(9486.6, abs=0.1)

    def test_logarithmic_limit(self):
        cfg = EconomyConfig(eta=1.0001)
        c, pop = 50.0, 7403.0
        out = value(utility(c, pop, cfg))
        log_form = pop * math.log(c / (pop / 1000.0))
        assert out == pytest.approx(log_form, rel=1e-3)

    def test_monotone_and_concave(self):
        cfg = EconomyConfig()
        rng = np.random.default_rng(11)
        for _ in range(20):
            c = float(rng.uniform(5, 200))
            h = 1e-4 * c
            lo, mid, hi = (value(utility(x, 7403.0, cfg)) for x in (c - h, c, c + h))
            assert hi > mid > lo
            assert hi - 2 * mid + lo < 0.0

    def test_nonpositive_consumption_rejected(self):
        cfg = EconomyConfig()
        with pytest.raises(ValueError, match="consumption"):
            utility(0.0, 7403.0, cfg)
        with pytest.raises(ValueError, match="path 1"):
            utility(SampleValue([1.0, -1.0]), 7403.0, cfg)


class TestConfigValidation:
    def test_gamma_range(self):
        with pytest.raises(ValueError):
            EconomyConfig(gamma=1.0)

    def test_eta_not_one(self):
        with pytest.raises(ValueError):
            EconomyConfig(eta=1.0)

    def test_depreciation_range(self):
        with pytest.raises(ValueError):
            EconomyConfig(delta_capital_5y=1.0)
