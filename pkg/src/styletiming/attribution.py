"""Time-series factor regressions with Newey-West (HAC) standard errors."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Mapping

import numpy as np
import pandas as pd

TRADING_DAYS = 252


def default_hac_lags(n: int) -> int:
    """Automatic lag count floor(4 * (n/100)^(2/9))."""
    if n < 1:
        raise ValueError("n must be positive")
    return int(math.floor(4.0 * (n / 100.0) ** (2.0 / 9.0)))


def _compound_annual(alpha_daily: float) -> float:
    return (1.0 + alpha_daily) ** TRADING_DAYS - 1.0


def annualize_alpha(alpha_daily: float) -> float:
    """Compound a daily intercept to an annual rate over 252 trading days."""
    if abs(alpha_daily) >= 0.01:
        warnings.warn(f"daily alpha {alpha_daily:.4f} is implausibly large", stacklevel=2)
    return _compound_annual(alpha_daily)


@dataclass
class RegressionResult:
    n: int
    hac_lags: int
    alpha_daily: float
    alpha_annual: float
    alpha_t: float
    betas: dict[str, float]
    beta_t: dict[str, float]
    r2: float
    adj_r2: float

    def to_row(self) -> dict:
        row: dict = {"n": self.n, "alpha_ann": self.alpha_annual, "alpha_t": self.alpha_t}
        row.update(self.betas)
        row.update({f"{k}_t": v for k, v in self.beta_t.items()})
        row["adj_r2"] = self.adj_r2
        return row


def _clean(y: pd.Series, X: pd.DataFrame) -> pd.DataFrame:
    return pd.concat([y.rename("__y"), X], axis=1, join="inner").dropna()


def ols_hac(y: pd.Series, X: pd.DataFrame, hac_lags: int | None = None) -> RegressionResult:
    """OLS with an intercept and HAC (Bartlett-kernel) standard errors.

    ``hac_lags=0`` reduces exactly to White heteroskedasticity-robust errors
    (HC0, no small-sample correction). ``hac_lags=None`` applies the automatic
    lag rule.
    """
    names = list(X.columns)
    data = _clean(y, X)
    yv = data["__y"].to_numpy(dtype=float)
    Xv = data[names].to_numpy(dtype=float)
    n, k = Xv.shape
    if n < k + 2:
        raise ValueError(f"sample too small: n={n} for {k} regressors")
    Z = np.column_stack([np.ones(n), Xv])
    if np.linalg.matrix_rank(Z) < k + 1:
        raise ValueError("regressor matrix is rank deficient")
    lags = default_hac_lags(n) if hac_lags is None else int(hac_lags)
    if lags < 0:
        raise ValueError("hac_lags must be >= 0")

    beta, *_ = np.linalg.lstsq(Z, yv, rcond=None)
    resid = yv - Z @ beta
    zu = Z * resid[:, None]
    meat = zu.T @ zu
    for j in range(1, lags + 1):
        w = 1.0 - j / (lags + 1.0)
        gamma = zu[j:].T @ zu[:-j]
        meat += w * (gamma + gamma.T)
    bread = np.linalg.inv(Z.T @ Z)
    cov = bread @ meat @ bread
    se = np.sqrt(np.maximum(np.diag(cov), 0.0))

    sse = float(resid @ resid)
    sst = float(((yv - yv.mean()) ** 2).sum())
    if sst <= 0.0 or sse <= 1e-24 * sst:
        # numerically perfect fit (e.g. the dependent leaked into the
        # regressors): coefficients are fine, inference is meaningless
        se = np.full_like(se, np.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        tstats = np.where(se > 0.0, beta / se, np.nan)

    r2 = 1.0 - sse / sst if sst > 0.0 else float("nan")
    adj_r2 = 1.0 - (1.0 - r2) * (n - 1) / (n - k - 1) if sst > 0.0 else float("nan")
    return RegressionResult(
        n=n,
        hac_lags=lags,
        alpha_daily=float(beta[0]),
        alpha_annual=_compound_annual(float(beta[0])),
        alpha_t=float(tstats[0]),
        betas={nm: float(b) for nm, b in zip(names, beta[1:])},
        beta_t={nm: float(t) for nm, t in zip(names, tstats[1:])},
        r2=r2,
        adj_r2=adj_r2,
    )


def ols_residuals(y: pd.Series, X: pd.DataFrame) -> pd.Series:
    """Residuals of a plain OLS fit with intercept, on the joint valid sample."""
    names = list(X.columns)
    data = _clean(y, X)
    yv = data["__y"].to_numpy(dtype=float)
    Z = np.column_stack([np.ones(len(data)), data[names].to_numpy(dtype=float)])
    beta, *_ = np.linalg.lstsq(Z, yv, rcond=None)
    return pd.Series(yv - Z @ beta, index=data.index, name="resid")


def excess_dependent(asset: pd.Series, rf: pd.Series, zero_cost: bool = False) -> pd.Series:
    """Subtract the risk-free rate unless the dependent is a self-financing spread."""
    if zero_cost:
        return asset
    return asset - rf.reindex(asset.index)


def rolling_attribution(y: pd.Series, X: pd.DataFrame, window: int,
                        hac_lags: int | None = None) -> pd.DataFrame:
    """Refit the regression on each trailing ``window``-observation slice.

    One row per terminal date; each row is an independent full refit.
    """
    data = _clean(y, X)
    names = list(X.columns)
    if window > len(data):
        raise ValueError(f"window {window} exceeds sample length {len(data)}")
    rows, idx = [], []
    for stop in range(window, len(data) + 1):
        chunk = data.iloc[stop - window:stop]
        res = ols_hac(chunk["__y"], chunk[names], hac_lags=hac_lags)
        rows.append(res.to_row())
        idx.append(chunk.index[-1])
    out = pd.DataFrame(rows, index=pd.DatetimeIndex(idx))
    out.index.name = "date"
    return out


def period_attribution(y: pd.Series, X: pd.DataFrame,
                       periods: Mapping[str, tuple],
                       hac_lags: int | None = None) -> pd.DataFrame:
    """One independent fit per named date range."""
    rows = []
    for name, (start, end) in periods.items():
        sl_y = y.loc[pd.Timestamp(start):pd.Timestamp(end)]
        sl_X = X.loc[pd.Timestamp(start):pd.Timestamp(end)]
        if _clean(sl_y, sl_X).empty:
            raise ValueError(f"period {name!r} contains no observations")
        res = ols_hac(sl_y, sl_X, hac_lags=hac_lags)
        rows.append({"period": name, **res.to_row()})
    return pd.DataFrame(rows)
