import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from iamrisk.policy import PolicySpec, evaluate_policy, logistic, logit, time_to_full_abatement
from iamrisk.rates import RateModelSpec, generate_scenarios
from iamrisk.stochvar import SampleValue, Tape


def value(sv):
    return sv.samples if isinstance(sv, SampleValue) else sv


class TestEvaluatePolicy:
    def test_reduced_ramp(self):
        spec = PolicySpec(kind="reduced", mu0=0.03, a0=0.0097, s0=0.25)
        mu, s = evaluate_policy(spec, 50.0)
        assert value(mu) == pytest.approx(0.03 + 0.0097 * 50.0, rel=1e-12)
        assert value(mu) == pytest.approx(0.515, abs=5e-4)
        assert value(s) == 0.25

    def test_clip_at_full_abatement(self):
        spec = PolicySpec(kind="reduced", mu0=0.03, a0=0.0097)
        t_clip = (1.0 - 0.03) / 0.0097
        mu, _ = evaluate_policy(spec, t_clip + 10.0)
        assert value(mu) == 1.0

    def test_stochastic_linear_degenerates_to_reduced(self):
        rates = SampleValue(np.array([0.01, 0.03, 0.08]))
        reduced = PolicySpec(kind="reduced", a0=0.0097, s0=0.25)
        stoch = PolicySpec(kind="stochastic-linear", a0=0.0097, a1=0.0, s0=0.25)
        mu_r, _ = evaluate_policy(reduced, 40.0, rates)
        mu_s, _ = evaluate_policy(stoch, 40.0, rates)
        np.testing.assert_allclose(value(mu_s), value(mu_r), rtol=0, atol=1e-15)

    def test_stochastic_quadratic_reads_rate_squared(self):
        r = 0.05
        spec = PolicySpec(kind="stochastic-quadratic", a0=0.005, a1=0.01, a2pol=2.0, s0=0.2)
        mu, _ = evaluate_policy(spec, 10.0, SampleValue(r))
        speed = 0.005 + 0.01 * r + 2.0 * r * r
        assert value(mu) == pytest.approx(min(0.03 + speed * 10.0, 1.0), rel=1e-12)

    def test_negative_speed_clipped_below_at_mu0(self):
        spec = PolicySpec(kind="stochastic-linear", a0=0.001, a1=-1.0, s0=0.25)
        mu, _ = evaluate_policy(spec, 30.0, SampleValue(np.array([0.0005, 0.5])))
        assert value(mu)[0] > 0.03  # positive effective speed
        assert value(mu)[1] == 0.03  # negative speed pinned at the initial level

    def test_rate_required_for_stochastic_kinds(self):
        spec = PolicySpec(kind="stochastic-linear")
        with pytest.raises(ValueError, match="short rate"):
            evaluate_policy(spec, 1.0)

    def test_free_form_lookup_and_errors(self):
        spec = PolicySpec(kind="free-form", mu_table=[0.1, 0.2], s_table=[0.3, 0.4])
        mu, s = evaluate_policy(spec, 1.0, step=1)
        assert value(mu) == pytest.approx(0.2)
        assert value(s) == pytest.approx(0.4)
        with pytest.raises(ValueError, match="shorter than"):
            evaluate_policy(spec, 2.0, step=2)
        with pytest.raises(ValueError, match="step index"):
            evaluate_policy(spec, 0.0)

    def test_speed_sensitivity_is_a1_exactly(self):
        tape = Tape()
        r = tape.variable(0.03)
        spec = PolicySpec(kind="stochastic-linear", a0=0.005, a1=0.07, s0=0.25)
        t = 12.0
        mu, _ = evaluate_policy(spec, t, r)
        grad = tape.gradient(mu)[r.node]
        assert grad / t == pytest.approx(0.07, rel=1e-12)

    @given(
        st.floats(0.0, 1.0),
        st.floats(-0.05, 0.05),
        st.floats(-1.0, 1.0),
        st.floats(-0.1, 0.3),
        st.floats(0.0, 300.0),
    )
    @settings(max_examples=100)
    def test_clip_never_leaves_unit_interval(self, mu0, a0, a1, r, t):
        spec = PolicySpec(kind="stochastic-linear", mu0=mu0, a0=a0, a1=a1, s0=0.5)
        mu, s = evaluate_policy(spec, t, SampleValue(r))
        assert 0.0 <= value(mu) <= 1.0
        assert 0.0 <= value(s) <= 1.0

    def test_monotone_in_time_until_clip(self):
        spec = PolicySpec(kind="reduced", a0=0.01, s0=0.25)
        vals = [value(evaluate_policy(spec, t)[0]) for t in range(0, 140, 10)]
        clipped = [v for v in vals if v < 1.0]
        assert all(b > a for a, b in zip(clipped, clipped[1:]))
        assert vals[-1] == 1.0


class TestTimeToFullAbatement:
    def test_reduced_analytic(self):
        grid_ = np.arange(0.0, 201.0, 1.0)
        s = generate_scenarios(RateModelSpec(kind="constant"), grid_)
        spec = PolicySpec(kind="reduced", mu0=0.03, a0=0.0097)
        out = time_to_full_abatement(spec, s)
        analytic = (1.0 - 0.03) / 0.0097
        assert abs(value(out.t_full_abatement) - analytic) <= 1.0
        assert analytic == pytest.approx(100.0, rel=1e-12)

    def test_nonpositive_speed_reports_infinity(self):
        grid_ = np.arange(0.0, 51.0, 1.0)
        s = generate_scenarios(RateModelSpec(kind="constant"), grid_)
        spec = PolicySpec(kind="reduced", a0=0.0)
        assert value(time_to_full_abatement(spec, s).t_full_abatement) == math.inf

    def test_per_path_times_with_stochastic_policy(self):
        spec_rates = RateModelSpec(kind="hull-white", r0=0.02, mean_reversion=0.1, volatility=0.01, paths=64, seed=3)
        s = generate_scenarios(spec_rates, np.arange(0.0, 301.0, 1.0))
        spec = PolicySpec(kind="stochastic-linear", a0=0.0097, a1=-0.05, s0=0.25)
        out = time_to_full_abatement(spec, s)
        samples = out.t_full_abatement.samples
        assert samples.shape == (64,)
        finite = samples[np.isfinite(samples)]
        assert finite.size > 10
        assert finite.std() > 0.0


class TestLogistic:
    def test_roundtrip(self):
        for p in (0.03, 0.25, 0.9):
            assert value(logistic(logit(p))) == pytest.approx(p, rel=1e-12)

    def test_logit_domain(self):
        with pytest.raises(ValueError):
            logit(0.0)

    def test_spec_validation(self):
        with pytest.raises(ValueError, match="kind"):
            PolicySpec(kind="bang-bang")
        with pytest.raises(ValueError, match="initial abatement"):
            PolicySpec(mu0=1.5)
