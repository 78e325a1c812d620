import math

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from styletiming.market_data import DataError
from styletiming.signal_kernel import (RawStateInputs, ScoreParams,
                                       build_signal_frame, credit_signals,
                                       derive_inputs, directional_z,
                                       expanding_z, incremental_score,
                                       interactions, policy_score,
                                       smooth_components, softplus)

IDX = pd.bdate_range("2018-01-01", periods=1200)


def series(values, start=0):
    return pd.Series(values, index=IDX[start:start + len(values)])


class TestExpandingZ:
    def test_hand_computed_value(self):
        z = expanding_z(series([0.0, 1.0]), min_obs=2)
        assert np.isnan(z.iloc[0])
        assert z.iloc[1] == pytest.approx(0.5 / math.sqrt(0.5), abs=1e-12)

    def test_constant_series_all_missing(self):
        z = expanding_z(series([3.0] * 50), min_obs=2)
        assert z.isna().all()

    def test_min_obs_respected(self):
        rng = np.random.default_rng(0)
        z = expanding_z(series(rng.standard_normal(100)), min_obs=60)
        assert z.iloc[:59].isna().all()
        assert z.iloc[59:].notna().all()

    def test_appending_never_changes_past(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal(300)
        full = expanding_z(series(x), min_obs=10)
        partial = expanding_z(series(x[:200]), min_obs=10)
        np.testing.assert_array_equal(full.to_numpy()[:200], partial.to_numpy())

    def test_min_obs_validation(self):
        with pytest.raises(ValueError):
            expanding_z(series([1.0, 2.0]), min_obs=1)

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.floats(-50, 50), min_size=5, max_size=40), st.integers(2, 5))
    def test_prefix_extension_property(self, values, min_obs):
        x = series(values)
        full = expanding_z(x, min_obs=min_obs).to_numpy()
        cut = len(values) - 2
        partial = expanding_z(x.iloc[:cut], min_obs=min_obs).to_numpy()
        np.testing.assert_array_equal(full[:cut], partial)


class TestSoftplus:
    def test_at_zero(self):
        assert softplus(0.0, 1.0) == pytest.approx(math.log(2.0), abs=1e-12)

    def test_linear_asymptote(self):
        assert softplus(50.0, 1.0) - 50.0 < 1e-12

    def test_vanishes_for_large_negative(self):
        assert softplus(-50.0, 1.0) < 1e-12

    def test_tau_validation(self):
        with pytest.raises(ValueError):
            softplus(1.0, 0.0)

    @settings(max_examples=60, deadline=None)
    @given(st.floats(-100, 100), st.floats(-100, 100),
           st.floats(0.25, 4.0))
    def test_monotone_and_bounds(self, a, b, tau):
        lo, hi = sorted((a, b))
        assert softplus(lo, tau) <= softplus(hi, tau) + 1e-12
        x = hi
        assert softplus(x, tau) >= max(0.0, x) - 1e-12
        assert softplus(x, tau) - max(0.0, x) <= tau * math.log(2.0) + 1e-12

    @settings(max_examples=40, deadline=None)
    @given(st.floats(-20, 20), st.floats(-20, 20))
    def test_convexity_midpoint(self, a, b):
        mid = softplus((a + b) / 2.0)
        assert mid <= (softplus(a) + softplus(b)) / 2.0 + 1e-12


def make_raw(n=900, seed=0, planted=0.0):
    rng = np.random.default_rng(seed)
    tnx = series(2.5 + np.cumsum(0.03 * rng.standard_normal(n)))
    vix = series(np.clip(18.0 + np.cumsum(0.4 * rng.standard_normal(n)), 9.0, 80.0))
    spy = series(100.0 * np.cumprod(1.0 + 0.01 * rng.standard_normal(n)))
    gd = series(0.004 * rng.standard_normal(n) + planted)
    baa = series(2.0 + np.cumsum(0.01 * rng.standard_normal(n)))
    return RawStateInputs(tnx=tnx, vix=vix, spy=spy, gd=gd, baa10y=baa)


class TestDeriveInputs:
    def test_drawdown_zero_at_peak(self):
        raw = make_raw()
        spy = series(np.linspace(100.0, 150.0, 300))  # monotone rising
        raw = RawStateInputs(tnx=raw.tnx, vix=raw.vix, spy=spy, gd=raw.gd)
        derived = derive_inputs(raw, IDX[:300])
        assert (derived["spy_dd"] == 0.0).all()

    def test_vix_at_trailing_max_has_rank_one(self):
        vix = series(np.arange(1.0, 301.0))  # strictly rising
        raw = make_raw()
        raw = RawStateInputs(tnx=raw.tnx, vix=vix, spy=raw.spy, gd=raw.gd)
        derived = derive_inputs(raw, IDX[:300])
        valid = derived["vix_rank756"].dropna()
        assert (valid == 1.0).all()

    def test_zero_spread_gives_zero_trailing(self):
        raw = make_raw()
        raw = RawStateInputs(tnx=raw.tnx, vix=raw.vix, spy=raw.spy,
                             gd=series([0.0] * 300))
        derived = derive_inputs(raw, IDX[:300])
        valid = derived["gd_ret126"].dropna()
        assert len(valid) == 300 - 126 + 1
        assert (valid == 0.0).all()

    def test_insufficient_history_missing_not_zero(self):
        derived = derive_inputs(make_raw(), IDX[:900])
        assert derived["tnx_chg21"].iloc[:21].isna().all()
        assert derived["gd_ret126"].iloc[:125].isna().all()
        assert derived["vix_rank756"].iloc[:251].isna().all()


class TestDirectionalZ:
    def test_sign_conventions(self):
        n = 400
        derived = derive_inputs(make_raw(n), IDX[:n])
        signals = directional_z(derived, min_obs=60)
        # spot-check signs against the raw inputs on the last day
        last = derived.iloc[-1]
        mean_chg = derived["tnx_chg21"].iloc[:].expanding(60).mean().iloc[-1]
        if last["tnx_chg21"] < mean_chg:
            assert signals["rate_relief"].iloc[-1] > 0
        dd = derived["spy_dd"]
        z_dd = expanding_z(dd, 60)
        np.testing.assert_allclose(signals["draw_depth"].to_numpy(),
                                   (-z_dd).to_numpy(), atol=1e-14)
        z_vc = expanding_z(derived["vix_chg21"], 60)
        np.testing.assert_allclose(signals["vix_relief_z"].to_numpy(),
                                   (-z_vc).to_numpy(), atol=1e-14)


class TestComponents:
    def setup_method(self):
        n = 500
        derived = derive_inputs(make_raw(n, seed=3), IDX[:n])
        self.signals = directional_z(derived, min_obs=60)
        self.comps = smooth_components(self.signals)

    def test_rate_quiet_peak_and_range(self):
        rq = self.comps["rate_quiet"].dropna()
        assert ((rq > 0.0) & (rq <= 1.0)).all()
        assert math.exp(-0.5 * 0.0) == 1.0

    def test_softplus_symmetry_high_low(self):
        vh = self.signals["vix_high_z"]
        np.testing.assert_allclose(softplus(vh).to_numpy(),
                                   softplus(-(-vh)).to_numpy(), atol=1e-14)
        np.testing.assert_allclose(self.comps["low_vix"].to_numpy(),
                                   softplus(-vh).to_numpy(), atol=1e-14)

    def test_vh_zero_gives_ln2_both(self):
        signals = self.signals.copy()
        signals["vix_high_z"] = 0.0
        comps = smooth_components(signals)
        assert comps["high_vix"].iloc[-1] == pytest.approx(math.log(2.0))
        assert comps["low_vix"].iloc[-1] == pytest.approx(math.log(2.0))

    def test_interactions(self):
        inter = interactions(self.signals, self.comps)
        r = self.signals["rate_relief"]
        np.testing.assert_allclose(
            inter["i_rate_x_vix"].to_numpy(),
            (r * self.signals["vix_high_z"]).to_numpy(), atol=1e-14)
        valid = inter[["i_relief_in_stress", "i_crowded_calm"]].dropna()
        assert (valid >= 0.0).all().all()

    def test_rate_quiet_one_makes_i4_equal_i3(self):
        signals = self.signals.copy()
        signals["rate_relief"] = 0.0  # rate_quiet == 1
        comps = smooth_components(signals)
        inter = interactions(signals, comps)
        both = inter[["i_crowded_calm", "i_crowded_quiet"]].dropna()
        np.testing.assert_allclose(both["i_crowded_calm"].to_numpy(),
                                   both["i_crowded_quiet"].to_numpy(), atol=1e-14)

    def test_zero_rate_relief_kills_i1(self):
        signals = self.signals.copy()
        signals["rate_relief"] = 0.0
        inter = interactions(signals, smooth_components(signals))
        valid = inter["i_rate_x_vix"].dropna()
        assert (valid == 0.0).all()


class TestPolicyScore:
    def setup_method(self):
        self.frame = build_signal_frame(make_raw(1000, seed=5), IDX[:1000])

    def test_degenerate_weights_reduce_to_core(self):
        params = ScoreParams(alpha=0.5, lambda_s=0.0, lambda_c=0.0)
        out = policy_score(self.frame, params)
        np.testing.assert_array_equal(out["raw"].to_numpy(),
                                      out["core"].to_numpy())

    def test_alpha_one_core_is_rate_relief(self):
        params = ScoreParams(alpha=1.0, lambda_s=0.0, lambda_c=0.0)
        out = policy_score(self.frame, params)
        np.testing.assert_array_equal(out["raw"].to_numpy(),
                                      self.frame["rate_relief"].to_numpy())

    def test_score_z_near_zero_mean_on_iid_inputs(self):
        # seeded simulation: all z-inputs iid standard normal
        rng = np.random.default_rng(17)
        n = 1000
        cols = ["rate_relief", "draw_depth", "i_rate_x_vix_z",
                "i_relief_in_stress_z", "i_crowded_calm_z", "i_crowded_quiet_z"]
        frame = pd.DataFrame({c: rng.standard_normal(n) for c in cols},
                             index=IDX[:n])
        score = policy_score(frame, ScoreParams(), min_obs=60)["score"].dropna()
        assert abs(score.mean()) < 0.1

    def test_missing_component_day_is_missing(self):
        params = ScoreParams(alpha=0.5, lambda_s=0.5, lambda_c=0.05)
        out = policy_score(self.frame, params)
        # before the interaction z warmup the full score must be missing
        first_stress = out["stress"].first_valid_index()
        assert out["raw"].loc[:first_stress].iloc[:-1].isna().all()

    def test_monotone_in_rate_relief_when_no_crowding(self):
        frame = self.frame.copy()
        params = ScoreParams(alpha=0.5, lambda_s=0.0, lambda_c=0.0)
        base = policy_score(frame, params)["raw"]
        frame2 = frame.copy()
        frame2["rate_relief"] = frame2["rate_relief"] + 0.5
        bumped = policy_score(frame2, params)["raw"]
        diff = (bumped - base).dropna()
        assert (diff >= -1e-12).all()

    def test_crowding_enters_negatively(self):
        params = ScoreParams(alpha=0.5, lambda_s=0.0, lambda_c=0.25)
        base = policy_score(self.frame, params)["raw"]
        frame2 = self.frame.copy()
        frame2["i_crowded_calm_z"] = frame2["i_crowded_calm_z"] + 1.0
        frame2["i_crowded_quiet_z"] = frame2["i_crowded_quiet_z"] + 1.0
        bumped = policy_score(frame2, params)["raw"]
        diff = (bumped - base).dropna()
        assert (diff <= 1e-12).all()

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError, match="kind"):
            policy_score(self.frame, ScoreParams(), kind="bogus")


class TestCreditSignals:
    def test_sign_and_centering(self):
        n = 400
        raw = make_raw(n, seed=7)
        derived = derive_inputs(raw, IDX[:n])
        out = credit_signals(derived, directional_z(derived)["rate_relief"])
        ce = out["credit_relief"].dropna()
        z_chg = expanding_z(derived["baa_chg21"], 60).dropna()
        np.testing.assert_allclose(ce.to_numpy(), -z_chg.to_numpy(), atol=1e-14)
        # the level z is centered: its own expanding mean stays small
        cs = out["credit_stress"].dropna()
        assert abs(cs.mean()) < 1.0

    def test_degenerate_product_missing(self):
        n = 400
        raw = make_raw(n, seed=9)
        derived = derive_inputs(raw, IDX[:n])
        zero_relief = pd.Series(0.0, index=IDX[:n])
        out = credit_signals(derived, zero_relief)
        assert out["relief_x_stress_z"].isna().all()

    def test_missing_baa_raises(self):
        raw = make_raw(300)
        raw = RawStateInputs(tnx=raw.tnx, vix=raw.vix, spy=raw.spy, gd=raw.gd)
        derived = derive_inputs(raw, IDX[:300])
        with pytest.raises(DataError, match="BAA10Y"):
            credit_signals(derived, pd.Series(0.0, index=IDX[:300]))


class TestIncrementalScore:
    def setup_method(self):
        self.frame = build_signal_frame(make_raw(1000, seed=11), IDX[:1000])

    def test_zero_lambdas_identity(self):
        base = policy_score(self.frame, ScoreParams())
        overlay = policy_score(self.frame,
                               ScoreParams(lambda_credit=0.0, lambda_rxcs=0.0),
                               kind="incremental")
        np.testing.assert_array_equal(base["score"].to_numpy(),
                                      overlay["score"].to_numpy())

    def test_location_shift_invariance_of_ce(self):
        # shifting the spread-change input by a constant leaves ce unchanged
        derived = derive_inputs(make_raw(500, seed=13), IDX[:500])
        shifted = derived.copy()
        shifted["baa_chg21"] = shifted["baa_chg21"] + 5.0
        r = directional_z(derived)["rate_relief"]
        ce_a = credit_signals(derived, r)["credit_relief"]
        ce_b = credit_signals(shifted, r)["credit_relief"]
        np.testing.assert_allclose(ce_a.dropna().to_numpy(),
                                   ce_b.dropna().to_numpy(), atol=1e-9)

    def test_overlay_adds_terms(self):
        raw_base = policy_score(self.frame, ScoreParams())["raw"]
        raw_aug, score_aug = incremental_score(
            raw_base, self.frame["credit_relief"],
            self.frame["relief_x_stress_z"], 0.10, 0.50)
        expected = (raw_base + 0.10 * self.frame["credit_relief"]
                    + 0.50 * self.frame["relief_x_stress_z"])
        np.testing.assert_allclose(raw_aug.dropna().to_numpy(),
                                   expected.dropna().to_numpy(), atol=1e-14)
        assert score_aug.notna().sum() > 0


class TestScoreParams:
    def test_validation(self):
        with pytest.raises(ValueError):
            ScoreParams(alpha=1.5)
        with pytest.raises(ValueError):
            ScoreParams(lambda_s=-0.1)
        with pytest.raises(ValueError):
            ScoreParams(tau_softplus=0.0)


def test_feasible_start_is_growth_trail_warmup():
    frame = build_signal_frame(make_raw(600, seed=1), IDX[:600])
    assert frame.attrs["feasible_start"] == IDX[125]
