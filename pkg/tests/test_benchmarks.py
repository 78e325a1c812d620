import math

import numpy as np
import pandas as pd
import pytest

from styletiming.benchmarks import (annualized_vol, matched_policy,
                                    matched_static_search, pair_stats,
                                    static_mix, vol_match_weight)
from styletiming.policy_engine import PolicyConfig, run_backtest
from styletiming.signal_kernel import ScoreParams

from test_policy_engine import make_market

IDX = pd.bdate_range("2018-01-01", periods=1200)


def mk(values):
    return pd.Series(values, index=IDX[:len(values)])


class TestStaticMix:
    def test_boundaries(self):
        rng = np.random.default_rng(0)
        g = mk(0.01 * rng.standard_normal(200))
        d = mk(0.01 * rng.standard_normal(200))
        np.testing.assert_array_equal(static_mix(1.0, g, d).to_numpy(), g.to_numpy())
        np.testing.assert_array_equal(static_mix(0.0, g, d).to_numpy(), d.to_numpy())

    def test_mix_of_equal_series(self):
        g = mk([0.01, -0.02, 0.005])
        out = static_mix(0.37, g, g.copy())
        np.testing.assert_allclose(out.to_numpy(), g.to_numpy(), rtol=1e-15)

    def test_invalid_weight(self):
        g = mk([0.01])
        with pytest.raises(ValueError):
            static_mix(1.5, g, g)


class TestVolMatching:
    def test_identity_weight(self):
        rng = np.random.default_rng(1)
        base = 0.01 * rng.standard_normal(1000)
        assert vol_match_weight(base, annualized_vol(base)) == pytest.approx(1.0)

    def test_scaling_identity_exact(self):
        rng = np.random.default_rng(2)
        base = 0.01 * rng.standard_normal(2000)
        target = 0.5 * annualized_vol(base)
        w = vol_match_weight(base, target)
        assert w == pytest.approx(0.5, rel=1e-12)
        assert annualized_vol(w * base) == pytest.approx(target, rel=1e-10)

    def test_above_one_allowed(self):
        rng = np.random.default_rng(3)
        base = 0.01 * rng.standard_normal(500)
        assert vol_match_weight(base, 2 * annualized_vol(base)) > 1.0

    def test_zero_vol_rejected(self):
        with pytest.raises(ValueError):
            vol_match_weight(np.zeros(100), 0.1)


class TestMatchedStaticSearch:
    def setup_method(self):
        rng = np.random.default_rng(4)
        # G dominates D in Sharpe at every mix
        self.g = mk(0.002 + 0.01 * rng.standard_normal(600))
        self.d = mk(-0.001 + 0.01 * rng.standard_normal(600))

    def test_sharpe_corner_solution(self):
        w, m = matched_static_search("sharpe", None, self.g, self.d)
        assert w == 1.0

    def test_vol_match_recovers_known_weight(self):
        target = annualized_vol(static_mix(0.62, self.g, self.d))
        w, m = matched_static_search("vol", target, self.g, self.d)
        assert w == pytest.approx(0.62, abs=0.011)

    def test_unknown_criterion(self):
        with pytest.raises(ValueError):
            matched_static_search("cagr", 0.1, self.g, self.d)

    def test_grid_step_validation(self):
        with pytest.raises(ValueError):
            matched_static_search("sharpe", None, self.g, self.d, grid_step=0.03)

    def test_static_mix_metrics_continuous_on_grid(self):
        vols = [annualized_vol(static_mix(w, self.g, self.d))
                for w in np.arange(0.0, 1.001, 0.01)]
        assert np.abs(np.diff(vols)).max() < 0.02


class TestMatchedPolicy:
    def test_core_only_with_alpha_one_equals_tnx_only(self):
        g, d, frame = make_market(seed=5)
        base = PolicyConfig(score=ScoreParams(alpha=1.0, lambda_s=0.5,
                                              lambda_c=0.05))
        bt_core = run_backtest(matched_policy("core_only", base), g, d, frame)
        bt_tnx = run_backtest(matched_policy("tnx_only", base), g, d, frame)
        np.testing.assert_array_equal(bt_core.weights, bt_tnx.weights)

    def test_tnx_only_matches_degenerate_standard(self):
        g, d, frame = make_market(seed=6)
        degenerate = PolicyConfig(score=ScoreParams(alpha=1.0, lambda_s=0.0,
                                                    lambda_c=0.0))
        bt_std = run_backtest(degenerate, g, d, frame)
        bt_tnx = run_backtest(matched_policy("tnx_only", degenerate), g, d, frame)
        np.testing.assert_array_equal(bt_std.weights, bt_tnx.weights)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            matched_policy("spy_only", PolicyConfig())


class TestPairStats:
    def test_identical_series(self):
        rng = np.random.default_rng(7)
        a = 0.01 * rng.standard_normal(400)
        ps = pair_stats(a, a.copy())
        assert ps.annual_excess == 0.0
        assert ps.tracking_error == 0.0
        assert math.isnan(ps.info_ratio)
        assert ps.maxdd_diff == 0.0

    def test_antisymmetry(self):
        rng = np.random.default_rng(8)
        a = 0.01 * rng.standard_normal(400)
        b = 0.01 * rng.standard_normal(400)
        ab, ba = pair_stats(a, b), pair_stats(b, a)
        assert ab.annual_excess == pytest.approx(-ba.annual_excess, abs=1e-15)
        assert ab.tracking_error == pytest.approx(ba.tracking_error, abs=1e-15)
        assert ab.maxdd_diff == pytest.approx(-ba.maxdd_diff, abs=1e-15)

    def test_known_shift(self):
        rng = np.random.default_rng(9)
        b = 0.01 * rng.standard_normal(504)
        a = b + 0.0001
        ps = pair_stats(a, b)
        assert ps.annual_excess == pytest.approx(252 * 0.0001, rel=1e-9)

    def test_misaligned_rejected(self):
        with pytest.raises(ValueError):
            pair_stats(np.zeros(10), np.zeros(11))
