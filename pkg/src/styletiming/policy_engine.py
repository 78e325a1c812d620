"""Score-to-weight policy: tanh targets, EWMA smoothing, t+1 execution,
proportional costs, and the performance metrics block."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .market_data import DataError
from .signal_kernel import ScoreParams, policy_score

TRADING_DAYS = 252
_SQRT_DAYS = float(np.sqrt(TRADING_DAYS))


@dataclass(frozen=True)
class PolicyConfig:
    """Everything that pins down one backtestable policy."""

    score: ScoreParams = field(default_factory=ScoreParams)
    kind: str = "standard"
    max_tilt: float = 0.50
    tau_w: float = 0.75
    eta: float = 0.05
    cost_bps: float = 10.0
    w0: float = 0.5

    def __post_init__(self) -> None:
        # max_tilt == 0 is allowed as the degenerate static 50/50 limit
        if not 0.0 <= self.max_tilt <= 0.5:
            raise ValueError("max_tilt must lie in [0, 0.5]")
        if self.tau_w <= 0.0:
            raise ValueError("tau_w must be > 0")
        if not 0.0 < self.eta <= 1.0:
            raise ValueError("eta must lie in (0, 1]")
        if self.cost_bps < 0.0:
            raise ValueError("cost_bps must be >= 0")
        if not 0.5 - self.max_tilt <= self.w0 <= 0.5 + self.max_tilt:
            raise ValueError("w0 must lie within the tilt bounds")

    @property
    def config_id(self) -> str:
        parts = []
        if self.kind != "standard":
            parts.append(self.kind)
        parts.append(f"a{self.score.alpha:.2f}")
        parts.append(f"ls{self.score.lambda_s:.2f}")
        parts.append(f"lc{self.score.lambda_c:.2f}")
        if self.kind == "incremental" or self.score.lambda_credit or self.score.lambda_rxcs:
            parts.append(f"cr{self.score.lambda_credit:.2f}")
            parts.append(f"rx{self.score.lambda_rxcs:.2f}")
        parts.append(f"tilt{self.max_tilt:.2f}")
        parts.append(f"tau{self.tau_w:.2f}")
        parts.append(f"eta{self.eta:.2f}")
        return "_".join(parts)


def target_weight(score, max_tilt: float, tau_w: float):
    """Map a standardized score to a growth weight in [0.5-tilt, 0.5+tilt]."""
    if tau_w <= 0.0:
        raise ValueError("tau_w must be > 0")
    return 0.5 + max_tilt * np.tanh(np.divide(score, tau_w))


def ewma_weights(targets, eta: float, w0: float) -> np.ndarray:
    """Exponentially smoothed weight state; a missing target holds the state."""
    if not 0.0 < eta <= 1.0:
        raise ValueError("eta must lie in (0, 1]")
    t = np.asarray(targets, dtype=float)
    out = np.empty(t.shape)
    prev = float(w0)
    for i in range(t.size):
        x = t[i]
        if x == x:  # not NaN
            prev = (1.0 - eta) * prev + eta * x
        out[i] = prev
    return out


def apply_execution_lag(weights, w0: float = 0.5) -> np.ndarray:
    """Shift decided weights one day: day t trades the state decided at t-1."""
    w = np.asarray(weights, dtype=float)
    out = np.empty(w.shape)
    out[0] = w0
    out[1:] = w[:-1]
    return out


def transaction_cost(dw, cost_bps: float):
    """Two-sided proportional cost drag: 2 * |dw| * bps / 10000."""
    if cost_bps < 0.0:
        raise ValueError("cost_bps must be >= 0")
    return 2.0 * np.abs(dw) * cost_bps / 1e4


@dataclass
class Metrics:
    final_wealth: float
    cagr: float
    vol: float
    sharpe: float
    sortino: float
    max_dd: float
    calmar: float
    turnover: float
    avg_g: float

    def as_dict(self) -> dict[str, float]:
        return {
            "final_wealth": self.final_wealth,
            "cagr": self.cagr,
            "vol": self.vol,
            "sharpe": self.sharpe,
            "sortino": self.sortino,
            "max_dd": self.max_dd,
            "calmar": self.calmar,
            "turnover": self.turnover,
            "avg_g": self.avg_g,
        }


METRIC_FIELDS = ("final_wealth", "cagr", "vol", "sharpe", "sortino",
                 "max_dd", "calmar", "turnover", "avg_g")


def max_drawdown(net) -> float:
    """Deepest peak-to-trough equity loss, with the running peak floored at 1."""
    equity = np.cumprod(1.0 + np.asarray(net, dtype=float))
    peak = np.maximum(np.maximum.accumulate(equity), 1.0)
    return float(np.min(equity / peak - 1.0))


def compute_metrics(net, weights=None, weight_changes=None) -> Metrics:
    """Full metrics block for a net daily return series.

    Sharpe and Sortino use raw net returns (no risk-free leg); annualization
    is over 252 trading days; turnover counts both trade legs. Undefined
    ratios (zero variance, no drawdown) are reported missing, not infinite.
    """
    r = np.asarray(net, dtype=float)
    if r.size == 0:
        raise ValueError("empty return series")
    n = r.size
    equity = np.cumprod(1.0 + r)
    final_wealth = float(equity[-1])
    cagr = final_wealth ** (TRADING_DAYS / n) - 1.0
    mu = float(r.mean())
    sd = float(r.std(ddof=1)) if n > 1 else 0.0
    vol = sd * _SQRT_DAYS
    sharpe = mu / sd * _SQRT_DAYS if sd > 0.0 else float("nan")
    downside = float(np.sqrt(np.mean(np.minimum(r, 0.0) ** 2)))
    sortino = mu / downside * _SQRT_DAYS if downside > 0.0 else float("nan")
    peak = np.maximum(np.maximum.accumulate(equity), 1.0)
    max_dd = float(np.min(equity / peak - 1.0))
    calmar = cagr / abs(max_dd) if max_dd < 0.0 else float("nan")
    if weight_changes is not None:
        turnover = TRADING_DAYS / n * float(np.sum(2.0 * np.abs(weight_changes)))
    else:
        turnover = 0.0
    avg_g = float(np.mean(weights)) if weights is not None else float("nan")
    return Metrics(final_wealth, cagr, vol, sharpe, sortino, max_dd, calmar,
                   turnover, avg_g)


@dataclass
class BacktestResult:
    label: str
    dates: pd.DatetimeIndex
    weights: np.ndarray
    gross: np.ndarray
    costs: np.ndarray
    net: np.ndarray
    equity: np.ndarray
    metrics: Metrics

    def to_frame(self) -> pd.DataFrame:
        out = pd.DataFrame(
            {
                "weight_G": self.weights,
                "gross": self.gross,
                "cost": self.costs,
                "net": self.net,
                "equity": self.equity,
            },
            index=self.dates,
        )
        out.index.name = "date"
        return out


def _window_bounds(index: pd.DatetimeIndex, window, feasible_start) -> tuple[int, int]:
    if window is None:
        if feasible_start is None:
            raise ValueError("insufficient history: the trailing growth signal never becomes available")
        start, end = feasible_start, index[-1]
    else:
        start, end = pd.Timestamp(window[0]), pd.Timestamp(window[1])
    if feasible_start is not None and start < feasible_start:
        raise ValueError(
            f"window starts {start.date()} before the first feasible date "
            f"{pd.Timestamp(feasible_start).date()}")
    i0 = int(index.searchsorted(start, side="left"))
    i1 = int(index.searchsorted(end, side="right"))
    if i1 - i0 < 2:
        raise ValueError("window covers fewer than 2 trading days")
    return i0, i1


def run_backtest(config: PolicyConfig, g: pd.Series, d: pd.Series,
                 frame: pd.DataFrame, window=None, label: str | None = None
                 ) -> BacktestResult:
    """Backtest the tanh/EWMA policy on aligned basket returns.

    Weights decided from information through day t apply to day t+1's return;
    the cost drag lands on the day the applied weight changes. Days with a
    missing score hold the previous weight at zero cost.
    """
    if not g.index.equals(d.index):
        raise DataError("G and D calendars differ")
    score = policy_score(frame, config.score, kind=config.kind)["score"]
    if not score.index.equals(g.index):
        score = score.reindex(g.index)
    i0, i1 = _window_bounds(g.index, window, frame.attrs.get("feasible_start"))

    sc = score.to_numpy()[i0:i1]
    gv = g.to_numpy()[i0:i1]
    dv = d.to_numpy()[i0:i1]
    targets = target_weight(sc, config.max_tilt, config.tau_w)
    state = ewma_weights(targets, config.eta, config.w0)
    applied = apply_execution_lag(state, config.w0)
    dw = np.diff(applied, prepend=applied[0])
    costs = transaction_cost(dw, config.cost_bps)
    gross = applied * gv + (1.0 - applied) * dv
    net = gross - costs
    equity = np.cumprod(1.0 + net)
    metrics = compute_metrics(net, weights=applied, weight_changes=dw)
    return BacktestResult(label or config.config_id, g.index[i0:i1], applied,
                          gross, costs, net, equity, metrics)


def run_fixed_weight(w: float, g: pd.Series, d: pd.Series, label: str | None = None,
                     window=None) -> BacktestResult:
    """Constant-mix benchmark path: zero cost, zero turnover."""
    if not 0.0 <= w <= 1.0:
        raise ValueError("static weight must lie in [0, 1]")
    if not g.index.equals(d.index):
        raise DataError("G and D calendars differ")
    idx = g.index
    if window is not None:
        i0 = int(idx.searchsorted(pd.Timestamp(window[0]), side="left"))
        i1 = int(idx.searchsorted(pd.Timestamp(window[1]), side="right"))
    else:
        i0, i1 = 0, len(idx)
    if i1 - i0 < 1:
        raise ValueError("window is empty")
    gv = g.to_numpy()[i0:i1]
    dv = d.to_numpy()[i0:i1]
    net = w * gv + (1.0 - w) * dv
    n = net.size
    weights = np.full(n, float(w))
    zeros = np.zeros(n)
    metrics = compute_metrics(net, weights=weights, weight_changes=zeros)
    return BacktestResult(label or f"static_{w:.2f}", idx[i0:i1], weights, net,
                          zeros, net, np.cumprod(1.0 + net), metrics)


def run_return_series(returns: pd.Series, label: str, window=None) -> BacktestResult:
    """Wrap an externally given net return series (e.g. SPY) as a result."""
    r = returns
    if window is not None:
        r = r.loc[pd.Timestamp(window[0]):pd.Timestamp(window[1])]
    r = r.dropna()
    if r.empty:
        raise ValueError("return series is empty on the requested window")
    net = r.to_numpy(dtype=float)
    n = net.size
    weights = np.full(n, np.nan)
    zeros = np.zeros(n)
    metrics = compute_metrics(net, weights=None, weight_changes=zeros)
    return BacktestResult(label, r.index, weights, net, zeros, net,
                          np.cumprod(1.0 + net), metrics)
