"""Macro state signals, smooth components, interactions, and allocation scores.

Everything here is strictly causal: a value dated t uses observations up to
and including t only. Standardization is an expanding z-score, so early dates
are missing until enough history accumulates, and missing inputs propagate to
missing scores (the weight policy holds on such days).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .market_data import DataError, forward_fill_bounded

Z_MIN_OBS = 60
DIFF_DAYS = 21
VIX_RANK_WINDOW = 756
VIX_RANK_MIN_OBS = 252
GROWTH_TRAIL_DAYS = 126

SCORE_KINDS = ("standard", "tnx_only", "core_only", "replacement", "incremental")


@dataclass(frozen=True)
class ScoreParams:
    """Mixing weights of the allocation score."""

    alpha: float = 0.50          # rate relief vs drawdown depth in the core
    lambda_s: float = 0.50       # stress-relief weight
    lambda_c: float = 0.05       # growth-crowding penalty
    lambda_credit: float = 0.0   # credit-relief overlay
    lambda_rxcs: float = 0.0     # rate-relief x credit-stress overlay
    tau_softplus: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        for name in ("lambda_s", "lambda_c", "lambda_credit", "lambda_rxcs"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be >= 0")
        if self.tau_softplus <= 0.0:
            raise ValueError("tau_softplus must be > 0")


@dataclass(frozen=True)
class RawStateInputs:
    """Raw inputs on their own calendars (the G-D spread on the master one)."""

    tnx: pd.Series
    vix: pd.Series
    spy: pd.Series
    gd: pd.Series
    baa10y: pd.Series | None = None


def expanding_z(x: pd.Series, min_obs: int = Z_MIN_OBS) -> pd.Series:
    """Causal z-score against the expanding mean and sample std (ddof=1).

    Missing until ``min_obs`` observations accumulate; zero variance yields
    missing, never zero or infinity.
    """
    if min_obs < 2:
        raise ValueError("min_obs must be >= 2")
    mean = x.expanding(min_periods=min_obs).mean()
    std = x.expanding(min_periods=min_obs).std()
    return (x - mean) / std.where(std > 0.0)


def softplus(x, tau: float = 1.0):
    """Smooth positive part tau*log(1 + exp(x/tau)), overflow-safe."""
    if tau <= 0.0:
        raise ValueError("tau must be > 0")
    with np.errstate(invalid="ignore"):
        out = tau * np.logaddexp(0.0, np.divide(x, tau))
    if np.isscalar(x):
        return float(out)
    return out


def _sample(series: pd.Series, calendar: pd.DatetimeIndex, max_gap: int) -> pd.Series:
    """Sample a transform onto the master calendar with bounded forward fill."""
    obs = series.dropna()
    if obs.empty:
        return pd.Series(np.nan, index=calendar)
    union = calendar.union(obs.index)
    filled = forward_fill_bounded(obs, union, max_gap)
    return filled.reindex(calendar)


def derive_inputs(raw: RawStateInputs, calendar: pd.DatetimeIndex,
                  max_gap: int = 3) -> pd.DataFrame:
    """Transform raw levels into state variables on the master calendar.

    Level transforms run on each source's own full history, so lookback
    windows can reach before the panel start; results are then sampled onto
    the calendar under the bounded forward-fill rule. The VIX rank is the
    inclusive fraction of trailing observations at or below today's level,
    using the available window once at least a year of history exists.
    """
    out = pd.DataFrame(index=calendar)
    out["tnx_chg21"] = _sample(raw.tnx.diff(DIFF_DAYS), calendar, max_gap)
    out["vix_chg21"] = _sample(raw.vix.diff(DIFF_DAYS), calendar, max_gap)
    vix_rank = raw.vix.rolling(VIX_RANK_WINDOW, min_periods=VIX_RANK_MIN_OBS).rank(
        method="max", pct=True)
    out["vix_rank756"] = _sample(vix_rank, calendar, max_gap)
    spy_dd = raw.spy / raw.spy.cummax() - 1.0
    out["spy_dd"] = _sample(spy_dd, calendar, max_gap)
    gd = raw.gd.reindex(calendar)
    out["gd_ret126"] = np.exp(np.log1p(gd).rolling(GROWTH_TRAIL_DAYS).sum()) - 1.0
    if raw.baa10y is not None:
        out["baa_chg21"] = _sample(raw.baa10y.diff(DIFF_DAYS), calendar, max_gap)
        out["baa_level"] = _sample(raw.baa10y, calendar, max_gap)
    return out


def directional_z(derived: pd.DataFrame, min_obs: int = Z_MIN_OBS) -> pd.DataFrame:
    """Direction-normalized signals.

    Positive values mean: rate relief (falling yields), deep equity drawdown,
    high VIX rank, VIX relief (falling VIX), strong trailing growth
    outperformance.
    """
    out = pd.DataFrame(index=derived.index)
    out["rate_relief"] = -expanding_z(derived["tnx_chg21"], min_obs)
    out["draw_depth"] = -expanding_z(derived["spy_dd"], min_obs)
    out["vix_high_z"] = expanding_z(derived["vix_rank756"], min_obs)
    out["vix_relief_z"] = -expanding_z(derived["vix_chg21"], min_obs)
    out["growth_trail_z"] = expanding_z(derived["gd_ret126"], min_obs)
    return out


def smooth_components(signals: pd.DataFrame, tau: float = 1.0) -> pd.DataFrame:
    """Softplus regime loadings plus the Gaussian rate-quiet kernel."""
    out = pd.DataFrame(index=signals.index)
    out["high_vix"] = softplus(signals["vix_high_z"], tau)
    out["vix_relief"] = softplus(signals["vix_relief_z"], tau)
    out["low_vix"] = softplus(-signals["vix_high_z"], tau)
    out["growth_ext"] = softplus(signals["growth_trail_z"], tau)
    out["rate_quiet"] = np.exp(-0.5 * signals["rate_relief"] ** 2)
    return out


def interactions(signals: pd.DataFrame, components: pd.DataFrame) -> pd.DataFrame:
    """Stress-relief and growth-crowding interaction terms."""
    out = pd.DataFrame(index=signals.index)
    out["i_rate_x_vix"] = signals["rate_relief"] * signals["vix_high_z"]
    out["i_relief_in_stress"] = components["high_vix"] * components["vix_relief"]
    out["i_crowded_calm"] = components["growth_ext"] * components["low_vix"]
    out["i_crowded_quiet"] = out["i_crowded_calm"] * components["rate_quiet"]
    return out


def credit_signals(derived: pd.DataFrame, rate_relief: pd.Series,
                   min_obs: int = Z_MIN_OBS) -> pd.DataFrame:
    """Credit relief (spread tightening), credit stress (spread level), and
    the standardized rate-relief-by-credit-stress product."""
    if "baa_chg21" not in derived.columns:
        raise DataError("credit signals need a BAA10Y spread series")
    out = pd.DataFrame(index=derived.index)
    out["credit_relief"] = -expanding_z(derived["baa_chg21"], min_obs)
    out["credit_stress"] = expanding_z(derived["baa_level"], min_obs)
    out["relief_x_stress_z"] = expanding_z(rate_relief * out["credit_stress"], min_obs)
    return out


def build_signal_frame(raw: RawStateInputs, calendar: pd.DatetimeIndex,
                       max_gap: int = 3, min_obs: int = Z_MIN_OBS,
                       tau: float = 1.0) -> pd.DataFrame:
    """Assemble the full causal signal frame on the master calendar.

    ``frame.attrs['feasible_start']`` is the first date the 126-day trailing
    growth signal exists: the binding warmup of the full policy.
    """
    derived = derive_inputs(raw, calendar, max_gap)
    signals = directional_z(derived, min_obs)
    comps = smooth_components(signals, tau)
    inter = interactions(signals, comps)
    frame = pd.concat([derived, signals, comps, inter], axis=1)
    for col in ("i_rate_x_vix", "i_relief_in_stress", "i_crowded_calm", "i_crowded_quiet"):
        frame[f"{col}_z"] = expanding_z(frame[col], min_obs)
    if raw.baa10y is not None:
        credit = credit_signals(derived, signals["rate_relief"], min_obs)
        frame = pd.concat([frame, credit], axis=1)
    frame.attrs["feasible_start"] = frame["gd_ret126"].first_valid_index()
    frame.attrs["z_min_obs"] = min_obs
    return frame


def _require_credit(frame: pd.DataFrame) -> None:
    if "credit_relief" not in frame.columns:
        raise DataError("frame has no credit columns; a BAA10Y series is required")


def incremental_score(raw_score: pd.Series, credit_relief: pd.Series,
                      relief_x_stress_z: pd.Series, lambda_credit: float,
                      lambda_rxcs: float, min_obs: int = Z_MIN_OBS
                      ) -> tuple[pd.Series, pd.Series]:
    """Overlay credit terms on a fixed base raw score, then re-standardize.

    Zero-weight terms are skipped outright so their missing values cannot
    poison days the base score covers; zero lambdas reproduce the base path
    exactly.
    """
    raw = raw_score
    if lambda_credit:
        raw = raw + lambda_credit * credit_relief
    if lambda_rxcs:
        raw = raw + lambda_rxcs * relief_x_stress_z
    return raw, expanding_z(raw, min_obs)


def policy_score(frame: pd.DataFrame, params: ScoreParams, kind: str = "standard",
                 min_obs: int | None = None) -> pd.DataFrame:
    """Blend signals into the raw allocation score and its expanding z.

    Kinds: ``standard`` is the full score; ``tnx_only`` uses rate relief
    alone; ``core_only`` drops the interaction terms; ``replacement`` swaps in
    the credit-based score; ``incremental`` overlays credit terms on the
    standard score.
    """
    if kind not in SCORE_KINDS:
        raise ValueError(f"unknown score kind {kind!r}")
    if min_obs is None:
        min_obs = int(frame.attrs.get("z_min_obs", Z_MIN_OBS))
    r = frame["rate_relief"]
    d = frame["draw_depth"]
    nan = pd.Series(np.nan, index=frame.index)
    stress, crowded = nan, nan

    if kind == "tnx_only":
        core = r
        raw = core
    elif kind == "core_only":
        core = params.alpha * r + (1.0 - params.alpha) * d
        raw = core
    elif kind == "replacement":
        _require_credit(frame)
        core = params.alpha * frame["credit_relief"] + (1.0 - params.alpha) * d
        stress = frame["relief_x_stress_z"]
        crowded = frame["growth_trail_z"]
        raw = core
        if params.lambda_s:
            raw = raw + params.lambda_s * stress
        if params.lambda_c:
            raw = raw - params.lambda_c * crowded
    else:  # standard or incremental
        core = params.alpha * r + (1.0 - params.alpha) * d
        stress = 0.5 * frame["i_rate_x_vix_z"] + 0.5 * frame["i_relief_in_stress_z"]
        crowded = 0.5 * frame["i_crowded_calm_z"] + 0.5 * frame["i_crowded_quiet_z"]
        raw = core
        if params.lambda_s:
            raw = raw + params.lambda_s * stress
        if params.lambda_c:
            raw = raw - params.lambda_c * crowded
        if kind == "incremental":
            _require_credit(frame)
            raw, _ = incremental_score(raw, frame["credit_relief"],
                                       frame["relief_x_stress_z"],
                                       params.lambda_credit, params.lambda_rxcs,
                                       min_obs)

    out = pd.DataFrame(index=frame.index)
    out["core"] = core
    out["stress"] = stress
    out["crowded"] = crowded
    out["raw"] = raw
    out["score"] = expanding_z(raw, min_obs)
    return out
