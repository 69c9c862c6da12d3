import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from forestdual.measure import Exponential, PointMasses
from forestdual.verify import (
    InsufficientSample,
    RunReport,
    TestResult,
    check_geometric_equivalence,
    check_survival_lemma,
    check_width_reversal,
    chi2_geometric,
    dual_specs,
    ks_two_sample,
    survival_prediction,
)
from forestdual.verify.checks import descent_rate, half_grid_levels
from forestdual.verify.report import bonferroni
from forestdual.verify.stats import _pool, binomial_sigma, chi2_cells, correlation, exact_count, interval, ks_one_sample

BD21 = Exponential(2.0, 1.0)


class TestStatistics:
    def test_identical_samples(self):
        x = np.random.default_rng(0).random(1000)
        assert ks_two_sample(x, x).statistic == 0.0

    def test_geometric_self_test(self):
        counts = np.random.default_rng(1).geometric(0.6127, 10**5)
        assert chi2_geometric(counts, 0.6127, 0.01).passed

    def test_geometric_from_zero(self):
        counts = np.random.default_rng(2).geometric(0.3, 10**4) - 1
        assert chi2_geometric(counts, 0.3, 0.01, start=0).passed
        assert not chi2_geometric(counts, 0.4, 0.01, start=0).passed

    def test_power(self):
        rng = np.random.default_rng(3)
        assert not ks_two_sample(rng.exponential(1.0, 10**4), rng.exponential(0.5, 10**4)).passed

    def test_one_sample(self):
        from scipy import stats

        x = np.random.default_rng(4).exponential(0.5, 5000)
        assert ks_one_sample(x, stats.expon(scale=0.5).cdf).passed
        assert not ks_one_sample(x, stats.expon(scale=1.0).cdf).passed

    def test_nan_dropped(self):
        x = np.concatenate([np.random.default_rng(5).random(500), [np.nan] * 10])
        assert ks_two_sample(x, x).extra["n"] == 500

    def test_small_sample_refused(self):
        with pytest.raises(InsufficientSample):
            ks_two_sample(np.arange(10.0), np.arange(100.0))

    def test_pooling_merges_into_the_neighbour(self):
        e, o = _pool(np.array([50.0, 20.0, 3.0, 1.0]), np.array([48.0, 22.0, 2.0, 2.0]), 5.0)
        assert e.tolist() == [50.0, 24.0] and o.tolist() == [48.0, 26.0]
        e, o = _pool(np.array([2.0, 30.0, 30.0]), np.array([1.0, 31.0, 30.0]), 5.0)
        assert e.tolist() == [32.0, 30.0] and o.tolist() == [32.0, 30.0]

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.floats(0.1, 100), min_size=1, max_size=20))
    def test_pooling_preserves_totals(self, exp):
        e = np.array(exp)
        o = np.round(e)
        pe, po = _pool(e, o, 5.0)
        assert pe.sum() == pytest.approx(e.sum()) and po.sum() == pytest.approx(o.sum())
        assert pe.size == 1 or np.all(pe >= 5.0)

    def test_binomial_bias_widens(self):
        assert not binomial_sigma(520, 1000, 0.45).passed
        assert binomial_sigma(520, 1000, 0.45, bias=0.05).passed

    def test_correlation_and_interval(self):
        rng = np.random.default_rng(6)
        x = rng.random(2000)
        assert correlation(x, rng.random(2000)).passed
        assert not correlation(x, x + 0.1 * rng.random(2000)).passed
        assert interval(1.0, 0.1, 1.2, 0.1, "i").passed
        assert not interval(1.0, 0.01, 1.2, 0.01, "i").passed

    def test_bonferroni(self):
        assert bonferroni(0.01, 4) == 0.0025 and bonferroni(0.01, 0) == 0.01


class TestReports:
    def make(self):
        r = RunReport("demo", 3, {"n": 10})
        rng = np.random.default_rng(0)
        r.add(ks_two_sample(rng.random(200), rng.random(300), 0.01, "ks"))
        r.add(chi2_cells([10, 20, 30], [1 / 6, 1 / 3, 1 / 2], 0.01, "chi"))
        r.add(binomial_sigma(55, 100, 0.5))
        r.add(exact_count(0, 10, "exact"))
        r.add(correlation(rng.random(100), rng.random(100)))
        r.add(interval(1.0, 0.1, 1.1, 0.1, "interval", bias=0.01))
        r.meta["runtime_s"] = 1.5
        return r

    def test_audit(self):
        r = self.make()
        assert r.audit() and r.passed

    def test_tampered_report_fails_audit(self):
        d = self.make().to_dict()
        d["tests"][0]["critical"] = 1.0
        assert not RunReport.from_dict(d).audit()

    def test_json_round_trip(self):
        r = self.make()
        back = RunReport.from_dict(json.loads(r.to_json()))
        assert back.to_json() == r.to_json()
        assert "meta" not in json.loads(r.to_json(with_meta=False))

    def test_failures_listed(self):
        r = RunReport("x", 0)
        r.add(TestResult("bad", "exact", 2, 0))
        assert not r.passed and "failed: bad" in r.summary()


class TestPredictions:
    def test_supercritical(self):
        p_bot, p_top = survival_prediction(BD21, 1.0)
        assert p_bot == pytest.approx(0.612700, abs=1e-6) and p_top == pytest.approx(0.225399, abs=1e-6)

    def test_subcritical_sides_agree(self):
        p_bot, p_top = survival_prediction(Exponential(1, 2), 1.0)
        assert p_bot == p_top == pytest.approx(0.225399, abs=1e-6)

    def test_small_horizon(self):
        assert all(p == pytest.approx(1.0, abs=0.02) for p in survival_prediction(BD21, 0.01))

    def test_dual_sides(self):
        left, right, p_left, p_right = dual_specs(BD21, 1.0)
        assert left.ancestor == "bottom" and right.tilted and right.ancestor == "top"
        assert 1 / p_left == pytest.approx(2 - math.exp(-1)) and 1 / p_right == pytest.approx(2 * math.e - 1)

    def test_descent_rate(self):
        assert descent_rate(Exponential(1, 3)) == 2.0
        mu = PointMasses(((1.0, 0.5),))
        theta = descent_rate(mu)
        # psi(-theta) = -theta - 0.5 (1 - e^theta) = 0
        assert -theta - 0.5 * (1 - math.exp(theta)) == pytest.approx(0.0, abs=1e-10) and theta > 0
        with pytest.raises(ValueError):
            descent_rate(BD21)

    def test_half_grid_levels_avoid_the_grid(self):
        lv = half_grid_levels(np.random.default_rng(0), 1000, 1.0)
        assert np.all((lv * 2**32) % 1 == 0.5) and np.all((lv > 0) & (lv < 1))


class TestChecksAreDeterministic:
    def test_same_seed_same_report(self):
        a = check_width_reversal(BD21, 1.0, 2000, seed=5)
        b = check_width_reversal(BD21, 1.0, 2000, seed=5, threads=3)
        assert a.to_json(with_meta=False) == b.to_json(with_meta=False)

    def test_small_runs_pass_and_audit(self):
        for r in (
            check_survival_lemma(BD21, 1.0, 20000, seed=1),
            check_geometric_equivalence(PointMasses(((1.0, 0.6), (2.0, 0.9))), 1.0, 3000, seed=1),
        ):
            assert r.passed, r.summary()
            assert r.audit()
