"""Study orchestration: basket/panel assembly, parameter sweeps, walk-forward
validation, credit extension grids, and diagnostics."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np
import pandas as pd

from . import attribution as attr
from .baskets import D_MEMBERS, G_MEMBERS, basket_returns, relative
from .market_data import DataError, align, forward_fill_bounded, to_returns
from .policy_engine import (TRADING_DAYS, BacktestResult, PolicyConfig,
                            compute_metrics, run_backtest, run_fixed_weight,
                            run_return_series, target_weight, transaction_cost,
                            ewma_weights)
from .benchmarks import (matched_policy, matched_static_search, pair_stats,
                         vol_match_weight)
from .signal_kernel import RawStateInputs, ScoreParams, build_signal_frame, policy_score

_SQRT_DAYS = float(np.sqrt(TRADING_DAYS))

# Flagship full-window configuration and the fixed-structure tilt-sweep base.
SELECTED_PARAMS = ScoreParams(alpha=0.50, lambda_s=0.50, lambda_c=0.05)
SELECTED_CONFIG = PolicyConfig(score=SELECTED_PARAMS, max_tilt=0.50, tau_w=0.75, eta=0.05)
TILT_BASE_PARAMS = ScoreParams(alpha=0.50, lambda_s=0.25, lambda_c=0.15)

TRAIN_LEN = 252
TEST_LEN = 63


# ---------------------------------------------------------------------------
# Study assembly

@dataclass
class Study:
    """Aligned returns, signal frame, and coverage for one dataset."""

    g: pd.Series
    d: pd.Series
    gd: pd.Series
    spy: pd.Series
    frame: pd.DataFrame
    member_returns: pd.DataFrame
    raw_returns: dict[str, pd.Series]
    coverage: pd.DataFrame
    factors: pd.DataFrame | None
    feasible_start: pd.Timestamp | None

    @property
    def dates(self) -> pd.DatetimeIndex:
        return self.g.index

    @property
    def has_credit(self) -> bool:
        return "credit_relief" in self.frame.columns


def build_study(prices: Mapping[str, pd.Series], levels: Mapping[str, pd.Series],
                factors: pd.DataFrame | None = None,
                g_members: Sequence[str] = G_MEMBERS,
                d_members: Sequence[str] = D_MEMBERS,
                max_gap: int = 3, start=None, end=None) -> Study:
    """Build the master panel, baskets, spread, and signal frame.

    The master calendar is the intersection of the SPY and member return
    calendars (each forward-filled under the gap bound first); macro levels
    are sampled onto it afterwards, so the panel never waits for them.
    """
    needed = [*g_members, *d_members, "SPY"]
    missing = [s for s in needed if s not in prices]
    if missing:
        raise DataError(f"missing price series: {', '.join(missing)}")
    for name in ("TNX", "VIX"):
        if name not in levels:
            raise DataError(f"missing level series: {name}")

    union = None
    for sym in needed:
        idx = prices[sym].dropna().index
        union = idx if union is None else union.union(idx)
    filled = {sym: forward_fill_bounded(prices[sym], union, max_gap) for sym in needed}
    rets = {sym: to_returns(filled[sym]) for sym in needed}
    panel = align(rets, start=start, end=end)

    g = basket_returns({m: panel.frame[m] for m in g_members}, "G")
    d = basket_returns({m: panel.frame[m] for m in d_members}, "D")
    gd = relative(g, d)
    raw = RawStateInputs(tnx=levels["TNX"], vix=levels["VIX"], spy=prices["SPY"],
                         gd=gd, baa10y=levels.get("BAA10Y"))
    frame = build_signal_frame(raw, calendar=panel.dates, max_gap=max_gap)

    cov_rows = []
    for sym in needed:
        group = "G" if sym in g_members else ("D" if sym in d_members else "SPY")
        valid = rets[sym].dropna()
        cov_rows.append({"symbol": sym, "group": group,
                         "first_return_date": valid.index[0], "n_returns": len(valid)})
    for name in sorted(levels):
        valid = levels[name].dropna()
        cov_rows.append({"symbol": name, "group": "macro",
                         "first_return_date": valid.index[0], "n_returns": len(valid)})
    coverage = pd.DataFrame(cov_rows)

    return Study(g=g, d=d, gd=gd, spy=panel.frame["SPY"], frame=frame,
                 member_returns=panel.frame[[*g_members, *d_members]],
                 raw_returns=rets, coverage=coverage, factors=factors,
                 feasible_start=frame.attrs.get("feasible_start"))


# ---------------------------------------------------------------------------
# Grids and selection

@dataclass(frozen=True)
class GridSpec:
    """Cartesian parameter grid; the defaults are the expanded local grid."""

    alpha: tuple = (0.50, 0.67)
    lambda_s: tuple = (0.25, 0.50)
    lambda_c: tuple = (0.05, 0.15, 0.25)
    max_tilt: tuple = (0.20, 0.30, 0.40, 0.50)
    tau_w: tuple = (0.75, 1.00, 1.50)
    eta: tuple = (0.03, 0.05, 0.10)
    lambda_credit: tuple = (0.0,)
    lambda_rxcs: tuple = (0.0,)
    kind: str = "standard"

    def configs(self, cost_bps: float = 10.0) -> list[PolicyConfig]:
        out = []
        for a, ls, lc, lcr, lrx, tilt, tau, eta in itertools.product(
                self.alpha, self.lambda_s, self.lambda_c,
                self.lambda_credit, self.lambda_rxcs,
                self.max_tilt, self.tau_w, self.eta):
            out.append(PolicyConfig(
                score=ScoreParams(alpha=a, lambda_s=ls, lambda_c=lc,
                                  lambda_credit=lcr, lambda_rxcs=lrx),
                kind=self.kind, max_tilt=tilt, tau_w=tau, eta=eta,
                cost_bps=cost_bps))
        return out

    @property
    def size(self) -> int:
        return (len(self.alpha) * len(self.lambda_s) * len(self.lambda_c)
                * len(self.lambda_credit) * len(self.lambda_rxcs)
                * len(self.max_tilt) * len(self.tau_w) * len(self.eta))


DEFAULT_GRID = GridSpec()

# Credit overlay on the fixed selected structure: only the two lambdas vary.
INCREMENTAL_GRID = GridSpec(
    alpha=(0.50,), lambda_s=(0.50,), lambda_c=(0.05,),
    max_tilt=(0.50,), tau_w=(0.75,), eta=(0.05,),
    lambda_credit=(0.0, 0.05, 0.10, 0.25, 0.50),
    lambda_rxcs=(0.0, 0.10, 0.25, 0.50, 1.00),
    kind="incremental")

REPLACEMENT_GRID = GridSpec(kind="replacement")


def _zscore_fill(v: np.ndarray) -> np.ndarray:
    """Cross-sectional z with missing values pinned to the mean (z of 0)."""
    v = np.asarray(v, dtype=float).copy()
    ok = np.isfinite(v)
    if not ok.any():
        return np.zeros_like(v)
    mean = v[ok].mean()
    v[~ok] = mean
    sd = v.std()
    if sd <= 0.0:
        return np.zeros_like(v)
    return (v - mean) / sd


@dataclass(frozen=True)
class SelectionScore:
    """Composite config ranking: equal-weight cross-config z-scores where deep
    drawdowns and heavy turnover count against a configuration."""

    w_sharpe: float = 1.0
    w_calmar: float = 1.0
    w_cagr: float = 1.0
    w_maxdd: float = 1.0
    w_turnover: float = 1.0

    def composite(self, table: pd.DataFrame) -> np.ndarray:
        terms = (
            ("sharpe", self.w_sharpe, 1.0),
            ("calmar", self.w_calmar, 1.0),
            ("cagr", self.w_cagr, 1.0),
            ("max_dd", self.w_maxdd, 1.0),   # max_dd <= 0: closer to zero is better
            ("turnover", self.w_turnover, -1.0),
        )
        total = sum(w for _, w, _ in terms)
        if total <= 0.0:
            return np.zeros(len(table))
        acc = np.zeros(len(table))
        for col, w, sign in terms:
            acc += sign * w * _zscore_fill(table[col].to_numpy())
        return acc / total

    def weights_dict(self) -> dict[str, float]:
        return {"sharpe": self.w_sharpe, "calmar": self.w_calmar,
                "cagr": self.w_cagr, "maxdd": self.w_maxdd,
                "turnover": self.w_turnover}


def rank_table(table: pd.DataFrame, selector: SelectionScore) -> pd.DataFrame:
    """Attach the composite selection score and sort best-first.

    Ties break lexicographically on the config id, so the ranking does not
    depend on enumeration order.
    """
    out = table.assign(selection_score=selector.composite(table))
    out = out.sort_values(["selection_score", "config"],
                          ascending=[False, True], kind="mergesort")
    return out.reset_index(drop=True)


def _argbest(table: pd.DataFrame, selector: SelectionScore) -> int:
    comp = selector.composite(table)
    ids = table["config"].to_numpy()
    order = np.lexsort((ids, -comp))
    return int(order[0])


# ---------------------------------------------------------------------------
# Config pools with precomputed paths (used by grids and walk-forward)

@dataclass
class PoolPaths:
    """Per-config full-window paths plus prefix sums for fast slice metrics."""

    dates: pd.DatetimeIndex
    configs: list[PolicyConfig]
    ids: list[str]
    g: np.ndarray
    d: np.ndarray
    targets: np.ndarray
    applied: np.ndarray
    dweights: np.ndarray
    net: np.ndarray
    c_sum: np.ndarray
    c_sq: np.ndarray
    c_log: np.ndarray
    c_down: np.ndarray
    c_turn: np.ndarray
    c_wgt: np.ndarray

    def block_metrics(self, lo: int, hi: int) -> pd.DataFrame:
        """Canonical metrics of every config on the day slice [lo, hi)."""
        if not 0 <= lo < hi <= len(self.dates):
            raise ValueError(f"bad slice [{lo}, {hi})")
        n = hi - lo
        s1 = self.c_sum[:, hi] - self.c_sum[:, lo]
        s2 = self.c_sq[:, hi] - self.c_sq[:, lo]
        sl = self.c_log[:, hi] - self.c_log[:, lo]
        sd2 = self.c_down[:, hi] - self.c_down[:, lo]
        st = self.c_turn[:, hi] - self.c_turn[:, lo]
        sw = self.c_wgt[:, hi] - self.c_wgt[:, lo]
        mean = s1 / n
        var = (s2 - n * mean ** 2) / (n - 1) if n > 1 else np.zeros_like(mean)
        sd = np.sqrt(np.clip(var, 0.0, None))
        final_wealth = np.exp(sl)
        cagr = final_wealth ** (TRADING_DAYS / n) - 1.0
        with np.errstate(divide="ignore", invalid="ignore"):
            sharpe = np.where(sd > 0.0, mean / sd * _SQRT_DAYS, np.nan)
            downside = np.sqrt(sd2 / n)
            sortino = np.where(downside > 0.0, mean / downside * _SQRT_DAYS, np.nan)
        equity = np.exp(self.c_log[:, lo + 1:hi + 1] - self.c_log[:, lo:lo + 1])
        peak = np.maximum(np.maximum.accumulate(equity, axis=1), 1.0)
        max_dd = (equity / peak - 1.0).min(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            calmar = np.where(max_dd < 0.0, cagr / np.abs(max_dd), np.nan)
        turnover = TRADING_DAYS / n * 2.0 * st
        return pd.DataFrame({
            "config": self.ids,
            "final_wealth": final_wealth,
            "cagr": cagr,
            "vol": sd * _SQRT_DAYS,
            "sharpe": sharpe,
            "sortino": sortino,
            "max_dd": max_dd,
            "calmar": calmar,
            "turnover": turnover,
            "avg_g": sw / n,
        })


def build_pool(study: Study, configs: Sequence[PolicyConfig], window=None) -> PoolPaths:
    """Backtest every pool config once over the window and cache path arrays."""
    if not configs:
        raise ValueError("config pool is empty")
    idx = study.dates
    feasible = study.feasible_start
    if window is None:
        if feasible is None:
            raise ValueError("insufficient history: no feasible start date")
        window = (feasible, idx[-1])
    start, end = pd.Timestamp(window[0]), pd.Timestamp(window[1])
    if feasible is not None and start < feasible:
        raise ValueError(f"window starts {start.date()} before the first feasible "
                         f"date {pd.Timestamp(feasible).date()}")
    i0 = int(idx.searchsorted(start, side="left"))
    i1 = int(idx.searchsorted(end, side="right"))
    if i1 - i0 < 2:
        raise ValueError("window covers fewer than 2 trading days")
    dates = idx[i0:i1]
    g = study.g.to_numpy()[i0:i1]
    d = study.d.to_numpy()[i0:i1]
    n = i1 - i0
    m = len(configs)

    score_cache: dict[tuple, np.ndarray] = {}
    targets = np.empty((m, n))
    applied = np.empty((m, n))
    dweights = np.empty((m, n))
    net = np.empty((m, n))
    for i, cfg in enumerate(configs):
        key = (cfg.kind, cfg.score.alpha, cfg.score.lambda_s, cfg.score.lambda_c,
               cfg.score.lambda_credit, cfg.score.lambda_rxcs)
        sc = score_cache.get(key)
        if sc is None:
            sc = policy_score(study.frame, cfg.score, kind=cfg.kind)["score"].to_numpy()
            score_cache[key] = sc
        tg = target_weight(sc[i0:i1], cfg.max_tilt, cfg.tau_w)
        state = ewma_weights(tg, cfg.eta, cfg.w0)
        app = np.empty(n)
        app[0] = cfg.w0
        app[1:] = state[:-1]
        dw = np.diff(app, prepend=app[0])
        cost = transaction_cost(dw, cfg.cost_bps)
        targets[i] = tg
        applied[i] = app
        dweights[i] = dw
        net[i] = app * g + (1.0 - app) * d - cost

    def prefix(values: np.ndarray) -> np.ndarray:
        out = np.zeros((m, n + 1))
        np.cumsum(values, axis=1, out=out[:, 1:])
        return out

    return PoolPaths(
        dates=dates, configs=list(configs),
        ids=[c.config_id for c in configs],
        g=g, d=d, targets=targets, applied=applied, dweights=dweights, net=net,
        c_sum=prefix(net),
        c_sq=prefix(net ** 2),
        c_log=prefix(np.log1p(net)),
        c_down=prefix(np.minimum(net, 0.0) ** 2),
        c_turn=prefix(np.abs(dweights)),
        c_wgt=prefix(applied),
    )


# ---------------------------------------------------------------------------
# Sweeps and grids

def tilt_sweep(study: Study, tilts: Sequence[float] = (0.20, 0.30, 0.40, 0.50),
               base_params: ScoreParams = TILT_BASE_PARAMS, tau_w: float = 1.0,
               eta: float = 0.05, cost_bps: float = 10.0, window=None
               ) -> tuple[pd.DataFrame, dict[float, BacktestResult]]:
    """Backtest the fixed-structure score across maximum active tilts."""
    rows, curves = [], {}
    for tilt in tilts:
        cfg = PolicyConfig(score=base_params, max_tilt=tilt, tau_w=tau_w,
                           eta=eta, cost_bps=cost_bps)
        bt = run_backtest(cfg, study.g, study.d, study.frame, window=window,
                          label=f"tilt_{int(round(tilt * 100))}")
        rows.append({"max_tilt": tilt, **bt.metrics.as_dict()})
        curves[tilt] = bt
    return pd.DataFrame(rows), curves


def run_grid(study: Study, grid: GridSpec, selector: SelectionScore | None = None,
             window=None, cost_bps: float = 10.0) -> pd.DataFrame:
    """Backtest every grid config on the window and rank by the selector."""
    selector = selector or SelectionScore()
    pool = build_pool(study, grid.configs(cost_bps), window=window)
    table = pool.block_metrics(0, len(pool.dates))
    return rank_table(table, selector)


def config_from_id(grid: GridSpec, config_id: str, cost_bps: float = 10.0) -> PolicyConfig:
    """Recover the PolicyConfig whose id matches a ranked-table row."""
    for cfg in grid.configs(cost_bps):
        if cfg.config_id == config_id:
            return cfg
    raise KeyError(f"config id {config_id!r} not in grid")


# ---------------------------------------------------------------------------
# Walk-forward validation

@dataclass
class WalkForwardResult:
    mode: str
    backtest: BacktestResult
    selections: pd.DataFrame


def walk_forward(study: Study, configs: Sequence[PolicyConfig], oos_start,
                 oos_end, mode: str = "expanding",
                 selector: SelectionScore | None = None, cost_bps: float = 10.0,
                 train_len: int = TRAIN_LEN, test_len: int = TEST_LEN,
                 label: str | None = None) -> WalkForwardResult:
    """Out-of-sample protocol over contiguous test blocks.

    For each block the pool config with the best composite on the training
    span is traded through the block. ``expanding`` trains on all history
    since the feasible start, ``rolling`` on the trailing ``train_len`` days,
    and ``fixed`` selects once on the ``train_len`` days before ``oos_start``.
    On a config change the weight state continues from the incumbent applied
    weight; any resulting weight move is charged the usual cost.
    """
    if mode not in ("expanding", "rolling", "fixed"):
        raise ValueError(f"unknown walk-forward mode {mode!r}")
    selector = selector or SelectionScore()
    configs = [replace(c, cost_bps=cost_bps) for c in configs]
    pool = build_pool(study, configs, window=(study.feasible_start, oos_end))
    dates = pool.dates
    i0 = int(dates.searchsorted(pd.Timestamp(oos_start), side="left"))
    n = len(dates)
    if i0 < train_len:
        raise ValueError(
            f"out-of-sample start {pd.Timestamp(oos_start).date()} needs "
            f"{train_len} training days after the feasible start")
    if i0 >= n:
        raise ValueError("out-of-sample window is empty")

    blocks = [(b, min(b + test_len, n)) for b in range(i0, n, test_len)]
    fixed_choice: int | None = None
    if mode == "fixed":
        fixed_choice = _argbest(pool.block_metrics(i0 - train_len, i0), selector)

    w0 = 0.5
    total = n - i0
    applied = np.empty(total)
    dw = np.empty(total)
    net = np.empty(total)
    costs = np.empty(total)
    gross = np.empty(total)
    state = w0
    prev_applied = w0
    k = 0
    sel_rows = []
    for b0, b1 in blocks:
        if mode == "expanding":
            chosen = _argbest(pool.block_metrics(0, b0), selector)
        elif mode == "rolling":
            chosen = _argbest(pool.block_metrics(b0 - train_len, b0), selector)
        else:
            chosen = fixed_choice
        eta = pool.configs[chosen].eta
        tg = pool.targets[chosen]
        for t in range(b0, b1):
            a = state
            applied[k] = a
            dw[k] = a - prev_applied
            costs[k] = 2.0 * abs(dw[k]) * cost_bps / 1e4
            gross[k] = a * pool.g[t] + (1.0 - a) * pool.d[t]
            net[k] = gross[k] - costs[k]
            prev_applied = a
            x = tg[t]
            if x == x:
                state = (1.0 - eta) * state + eta * x
            k += 1
        sel_rows.append({"block_start": dates[b0], "block_end": dates[b1 - 1],
                         "config": pool.ids[chosen]})

    metrics = compute_metrics(net, weights=applied, weight_changes=dw)
    bt = BacktestResult(label or f"wf_{mode}", dates[i0:], applied, gross, costs,
                        net, np.cumprod(1.0 + net), metrics)
    return WalkForwardResult(mode=mode, backtest=bt,
                             selections=pd.DataFrame(sel_rows))


def fixed_parameter(study: Study, configs: Sequence[PolicyConfig], oos_start,
                    oos_end, selector: SelectionScore | None = None,
                    cost_bps: float = 10.0, train_len: int = TRAIN_LEN,
                    label: str | None = None) -> WalkForwardResult:
    """Select once on the training window before ``oos_start``, trade throughout."""
    return walk_forward(study, configs, oos_start, oos_end, mode="fixed",
                        selector=selector, cost_bps=cost_bps,
                        train_len=train_len, label=label)


def validation_rows(study: Study, grid: GridSpec, oos_start, oos_end,
                    selector: SelectionScore | None = None,
                    cost_bps: float = 10.0,
                    include_benchmarks: bool = True,
                    label_prefix: str = "Smooth Score"
                    ) -> tuple[pd.DataFrame, dict[str, BacktestResult],
                               dict[str, pd.DataFrame]]:
    """Walk-forward expanding/rolling/fixed rows plus static benchmark rows."""
    configs = grid.configs(cost_bps)
    rows, curves, selections = [], {}, {}
    for mode, name in (("expanding", f"{label_prefix} WF Expanding"),
                       ("rolling", f"{label_prefix} WF Rolling"),
                       ("fixed", "Fixed Parameter" if label_prefix == "Smooth Score"
                        else f"{label_prefix} Fixed Parameter")):
        wf = walk_forward(study, configs, oos_start, oos_end, mode=mode,
                          selector=selector, cost_bps=cost_bps)
        rows.append({"method": name, **wf.backtest.metrics.as_dict()})
        curves[name] = wf.backtest
        selections[name] = wf.selections
    if include_benchmarks:
        window = (oos_start, oos_end)
        for name, bt in benchmark_paths(study, window).items():
            rows.append({"method": name, **bt.metrics.as_dict()})
            curves[name] = bt
    return pd.DataFrame(rows), curves, selections


def benchmark_paths(study: Study, window) -> dict[str, BacktestResult]:
    """Static comparison paths on a window: 50/50, pure baskets, SPY."""
    return {
        "50/50 G/D": run_fixed_weight(0.5, study.g, study.d, "mix_50_50", window),
        "100% G": run_fixed_weight(1.0, study.g, study.d, "all_g", window),
        "100% D": run_fixed_weight(0.0, study.g, study.d, "all_d", window),
        "SPY": run_return_series(study.spy, "spy", window),
    }


# ---------------------------------------------------------------------------
# Main-window benchmark comparison

def benchmark_comparison(study: Study, config: PolicyConfig = SELECTED_CONFIG,
                         window=None, cost_bps: float = 10.0
                         ) -> tuple[pd.DataFrame, pd.DataFrame,
                                    dict[str, BacktestResult]]:
    """Aligned strategy comparison plus pairwise incremental statistics."""
    cfg = replace(config, cost_bps=cost_bps)
    if window is None:
        window = (study.feasible_start, study.dates[-1])
    selected = run_backtest(cfg, study.g, study.d, study.frame, window, "selected")
    tnx = run_backtest(matched_policy("tnx_only", cfg), study.g, study.d,
                       study.frame, window, "matched_tnx")
    core = run_backtest(matched_policy("core_only", cfg), study.g, study.d,
                        study.frame, window, "matched_core")
    fixed_cfg = PolicyConfig(score=TILT_BASE_PARAMS, max_tilt=0.50, tau_w=1.0,
                             eta=0.05, cost_bps=cost_bps)
    fixed = run_backtest(fixed_cfg, study.g, study.d, study.frame, window,
                         "fixed_structure")
    results = {
        "Selected Smooth Score": selected,
        "Matched TNX-only": tnx,
        "Matched Core-only": core,
        "Fixed-Structure 50% Tilt": fixed,
        **benchmark_paths(study, window),
    }
    table = pd.DataFrame([{"method": k, **bt.metrics.as_dict()}
                          for k, bt in results.items()])
    pair_rows = []
    for name in ("Matched TNX-only", "Matched Core-only",
                 "Fixed-Structure 50% Tilt", "50/50 G/D", "100% G", "SPY"):
        ps = pair_stats(selected.net, results[name].net)
        pair_rows.append({"comparison": f"Selected Policy - {name}", **ps.as_dict()})
    return table, pd.DataFrame(pair_rows), results


def vol_match_table(study: Study, config: PolicyConfig = SELECTED_CONFIG,
                    window=None, cost_bps: float = 10.0
                    ) -> tuple[pd.DataFrame, dict[str, BacktestResult]]:
    """Vol-matched and static-mix comparisons against the selected policy."""
    cfg = replace(config, cost_bps=cost_bps)
    if window is None:
        window = (study.feasible_start, study.dates[-1])
    selected = run_backtest(cfg, study.g, study.d, study.frame, window, "selected")
    target_vol = selected.metrics.vol
    all_g = run_fixed_weight(1.0, study.g, study.d, "all_g", window)
    scale = vol_match_weight(all_g.net, target_vol)
    scaled_net = scale * all_g.net
    n = scaled_net.size
    scaled = BacktestResult("vol_matched_g", all_g.dates,
                            np.full(n, scale), scaled_net, np.zeros(n),
                            scaled_net, np.cumprod(1.0 + scaled_net),
                            compute_metrics(scaled_net, np.full(n, scale),
                                            np.zeros(n)))
    mix = run_fixed_weight(0.5, study.g, study.d, "mix_50_50", window)
    g_win = study.g.loc[selected.dates]
    d_win = study.d.loc[selected.dates]
    w_vol, _ = matched_static_search("vol", target_vol, g_win, d_win)
    w_dd, _ = matched_static_search("maxdd", selected.metrics.max_dd, g_win, d_win)
    w_sh, _ = matched_static_search("sharpe", None, g_win, d_win)
    rows_src = {
        "Selected Smooth Score": selected,
        "100% G": all_g,
        "Vol-Matched 100% G": scaled,
        "50/50 G/D": mix,
        f"Vol-Matched Static G/D ({w_vol:.0%} G)":
            run_fixed_weight(w_vol, study.g, study.d, "vol_matched_static", window),
        f"MaxDD-Matched Static G/D ({w_dd:.0%} G)":
            run_fixed_weight(w_dd, study.g, study.d, "maxdd_matched_static", window),
        f"Best Sharpe Static G/D ({w_sh:.0%} G)":
            run_fixed_weight(w_sh, study.g, study.d, "best_sharpe_static", window),
    }
    rows = []
    for name, bt in rows_src.items():
        excess = TRADING_DAYS * float(np.mean(bt.net - selected.net))
        rows.append({"method": name, "cagr": bt.metrics.cagr, "vol": bt.metrics.vol,
                     "sharpe": bt.metrics.sharpe, "max_dd": bt.metrics.max_dd,
                     "turnover": bt.metrics.turnover, "excess_vs_smooth": excess})
    table = pd.DataFrame(rows)
    table.attrs["vol_match_weight"] = scale
    return table, rows_src


# ---------------------------------------------------------------------------
# Cost sensitivity

def cost_sensitivity(study: Study, config: PolicyConfig,
                     costs: Sequence[float] = (0.0, 5.0, 10.0, 20.0),
                     window=None) -> pd.DataFrame:
    """Recompute the cost drag on one fixed weight path per cost level."""
    base = run_backtest(replace(config, cost_bps=0.0), study.g, study.d,
                        study.frame, window=window)
    dw = np.diff(base.weights, prepend=base.weights[0])
    rows = []
    for bps in costs:
        net = base.gross - transaction_cost(dw, bps)
        m = compute_metrics(net, weights=base.weights, weight_changes=dw)
        rows.append({"cost_bps": bps, **m.as_dict()})
    return pd.DataFrame(rows)


# ---------------------------------------------------------------------------
# Credit extension

def _require_credit_study(study: Study) -> None:
    if not study.has_credit:
        raise DataError("credit experiments need a BAA10Y series in the data directory")


def credit_main(study: Study, selector: SelectionScore | None = None,
                window=None, cost_bps: float = 10.0
                ) -> tuple[pd.DataFrame, pd.DataFrame, pd.DataFrame,
                           dict[str, BacktestResult]]:
    """Replacement-vs-overlay comparison on the main window.

    Returns the comparison table, the ranked replacement grid, and the ranked
    overlay grid.
    """
    _require_credit_study(study)
    selector = selector or SelectionScore()
    if window is None:
        window = (study.feasible_start, study.dates[-1])
    repl_ranked = run_grid(study, REPLACEMENT_GRID, selector, window, cost_bps)
    incr_ranked = run_grid(study, INCREMENTAL_GRID, selector, window, cost_bps)
    repl_cfg = config_from_id(REPLACEMENT_GRID, repl_ranked["config"].iloc[0], cost_bps)
    incr_cfg = config_from_id(INCREMENTAL_GRID, incr_ranked["config"].iloc[0], cost_bps)
    core_cfg = replace(repl_cfg,
                       score=replace(repl_cfg.score, lambda_s=0.0, lambda_c=0.0))
    base_cfg = replace(SELECTED_CONFIG, cost_bps=cost_bps)
    results = {
        "Credit Replacement Best": run_backtest(repl_cfg, study.g, study.d,
                                                study.frame, window, "credit_replacement"),
        "Credit Replacement Core Only": run_backtest(core_cfg, study.g, study.d,
                                                     study.frame, window,
                                                     "credit_replacement_core"),
        "Smooth Score + Credit Overlay": run_backtest(incr_cfg, study.g, study.d,
                                                      study.frame, window,
                                                      "credit_overlay"),
        "Selected Smooth Score": run_backtest(base_cfg, study.g, study.d,
                                              study.frame, window, "selected"),
        "50/50 G/D": run_fixed_weight(0.5, study.g, study.d, "mix_50_50", window),
        "100% G": run_fixed_weight(1.0, study.g, study.d, "all_g", window),
        "SPY": run_return_series(study.spy, "spy", window),
    }
    table = pd.DataFrame([{"method": k, **bt.metrics.as_dict()}
                          for k, bt in results.items()])
    return table, repl_ranked, incr_ranked, results


def credit_validation(study: Study, oos_start, oos_end,
                      selector: SelectionScore | None = None,
                      cost_bps: float = 10.0, include_all_g: bool = False
                      ) -> tuple[pd.DataFrame, dict[str, BacktestResult]]:
    """Walk-forward rows for the replacement and overlay pools plus baselines."""
    _require_credit_study(study)
    rows, curves = [], {}
    for grid, prefix in ((REPLACEMENT_GRID, "Credit Replacement"),
                         (INCREMENTAL_GRID, "Credit Overlay")):
        tbl, cur, _ = validation_rows(study, grid, oos_start, oos_end, selector,
                                      cost_bps, include_benchmarks=False,
                                      label_prefix=prefix)
        rows.extend(tbl.to_dict("records"))
        curves.update(cur)
    window = (oos_start, oos_end)
    base_cfg = replace(SELECTED_CONFIG, cost_bps=cost_bps)
    base = run_backtest(base_cfg, study.g, study.d, study.frame, window, "selected")
    rows.append({"method": "Selected Smooth Score", **base.metrics.as_dict()})
    curves["Selected Smooth Score"] = base
    mix = run_fixed_weight(0.5, study.g, study.d, "mix_50_50", window)
    rows.append({"method": "50/50 G/D", **mix.metrics.as_dict()})
    curves["50/50 G/D"] = mix
    if include_all_g:
        all_g = run_fixed_weight(1.0, study.g, study.d, "all_g", window)
        rows.append({"method": "100% G", **all_g.metrics.as_dict()})
        curves["100% G"] = all_g
    return pd.DataFrame(rows), curves


# ---------------------------------------------------------------------------
# Diagnostics

def forward_compound(returns: pd.Series, horizon: int) -> pd.Series:
    """Compounded return over the ``horizon`` days after each date."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    return np.exp(np.log1p(returns).rolling(horizon).sum().shift(-horizon)) - 1.0


def quintile_diagnostic(score: pd.Series, gd: pd.Series, horizon: int = 21) -> dict:
    """Mean forward spread return per score quintile plus the Q5-Q1 gap."""
    fwd = forward_compound(gd, horizon)
    both = pd.DataFrame({"score": score, "fwd": fwd}).dropna()
    if len(both) < 5 * horizon:
        raise ValueError(f"need at least {5 * horizon} observations, have {len(both)}")
    order = np.argsort(both["score"].to_numpy(), kind="stable")
    buckets = np.array_split(order, 5)
    fwd_v = both["fwd"].to_numpy()
    means = [float(fwd_v[b].mean()) for b in buckets]
    out = {f"q{i + 1}": m for i, m in enumerate(means)}
    out["q5_q1"] = means[4] - means[0]
    out["n"] = len(both)
    return out


def quintile_table(study: Study, horizon: int = 21, cost_bps: float = 10.0
                   ) -> pd.DataFrame:
    """Quintile diagnostic for the selected and reduced scoring variants."""
    variants = {
        "Selected Smooth Score": (SELECTED_PARAMS, "standard"),
        "Matched Core-only": (SELECTED_PARAMS, "core_only"),
        "Fixed-Structure 50% Tilt": (TILT_BASE_PARAMS, "standard"),
        "Matched TNX-only": (SELECTED_PARAMS, "tnx_only"),
    }
    rows = []
    for name, (params, kind) in variants.items():
        score = policy_score(study.frame, params, kind=kind)["score"]
        rows.append({"method": name, **quintile_diagnostic(score, study.gd, horizon)})
    return pd.DataFrame(rows)


def yearly_breakdown(net: pd.Series) -> pd.DataFrame:
    """Compounded return per calendar year present in the series."""
    grouped = net.groupby(net.index.year).apply(
        lambda r: float(np.expm1(np.log1p(r).sum())))
    out = grouped.rename("return").rename_axis("year").reset_index()
    return out


def yearly_table(study: Study, config: PolicyConfig = SELECTED_CONFIG,
                 window=None, cost_bps: float = 10.0) -> pd.DataFrame:
    """Year-by-year returns of the selected policy next to the pure baskets."""
    cfg = replace(config, cost_bps=cost_bps)
    if window is None:
        window = (study.feasible_start, study.dates[-1])
    selected = run_backtest(cfg, study.g, study.d, study.frame, window, "selected")
    all_g = run_fixed_weight(1.0, study.g, study.d, "all_g", window)
    all_d = run_fixed_weight(0.0, study.g, study.d, "all_d", window)
    out = None
    for name, bt in (("selected", selected), ("all_g", all_g), ("all_d", all_d)):
        yb = yearly_breakdown(pd.Series(bt.net, index=bt.dates)).rename(
            columns={"return": name})
        out = yb if out is None else out.merge(yb, on="year")
    return out


GATE_DIRECTIONS = {"draw_depth": 1, "growth_trail_z": -1, "credit_relief": 1}
GATE_T_MIN = 1.65


def gate_regressions(candidates: Mapping[str, pd.Series], gd: pd.Series,
                     horizon: int = 63, nw_extra: int = 5) -> pd.DataFrame:
    """Forward-return predictive gates with HAC inference.

    Each candidate is regressed on the compounded forward ``horizon``-day
    spread return using overlapping daily observations (Newey-West lags
    ``horizon + nw_extra``) plus a non-overlapping every-``horizon``-th-day
    variant.
    """
    fwd = forward_compound(gd, horizon)
    rows = []
    for name, x in candidates.items():
        both = pd.DataFrame({"x": x, "y": fwd}).dropna()
        if len(both) < max(50, horizon + 10):
            raise ValueError(f"{name}: insufficient overlap with forward returns")
        res = attr.ols_hac(both["y"], both[["x"]], hac_lags=horizon + nw_extra)
        sub = both.iloc[::horizon]
        res_no = attr.ols_hac(sub["y"], sub[["x"]], hac_lags=0)
        rows.append({"variable": name, "coef": res.betas["x"],
                     "hac_t": res.beta_t["x"],
                     "nonoverlap_coef": res_no.betas["x"]})
    return pd.DataFrame(rows)


def residual_gate(x: pd.Series, control: pd.Series, gd: pd.Series,
                  horizon: int = 63, nw_extra: int = 5) -> dict:
    """Gate on residual forward returns after absorbing a control variable."""
    fwd = forward_compound(gd, horizon)
    both = pd.DataFrame({"x": x, "c": control, "y": fwd}).dropna()
    if len(both) < max(50, horizon + 10):
        raise ValueError("insufficient overlap for the residual gate")
    resid = attr.ols_residuals(both["y"], both[["c"]])
    res = attr.ols_hac(resid, both[["x"]], hac_lags=horizon + nw_extra)
    return {"coef": res.betas["x"], "hac_t": res.beta_t["x"], "n": res.n}


def gate_tables(study: Study, horizon: int = 63
                ) -> tuple[pd.DataFrame, pd.DataFrame]:
    """Main-effect gates plus the rate-relief-by-credit-stress interaction gate."""
    f = study.frame
    candidates = {"draw_depth": f["draw_depth"],
                  "growth_trail_z": f["growth_trail_z"]}
    if study.has_credit:
        candidates["credit_relief"] = f["credit_relief"]
    main = gate_regressions(candidates, study.gd, horizon)
    main["direction"] = [("Positive" if GATE_DIRECTIONS[v] > 0 else "Negative")
                         for v in main["variable"]]
    main["passed"] = [
        bool(np.sign(c) == GATE_DIRECTIONS[v] and abs(t) >= GATE_T_MIN)
        for v, c, t in zip(main["variable"], main["coef"], main["hac_t"])]
    inter_rows = []
    if study.has_credit:
        raw = gate_regressions({"relief_x_stress": f["relief_x_stress_z"]},
                               study.gd, horizon)
        res = residual_gate(f["relief_x_stress_z"], f["rate_relief"], study.gd,
                            horizon)
        inter_rows.append({
            "interaction": "relief_x_stress",
            "raw_coef": raw["coef"].iloc[0],
            "raw_hac_t": raw["hac_t"].iloc[0],
            "residual_coef": res["coef"],
            "residual_hac_t": res["hac_t"],
        })
    return main, pd.DataFrame(inter_rows)


# ---------------------------------------------------------------------------
# Attribution tables

FACTOR_MAP = {"mkt_rf": "MKT", "smb": "SMB", "hml": "HML", "rmw": "RMW",
              "cma": "CMA", "mom": "MOM"}


def default_periods(dates: pd.DatetimeIndex) -> dict[str, tuple]:
    """Named market stages clipped to the data; equal quarters as a fallback."""
    named = {
        "COVID Rebound 2020-2021": ("2020-01-01", "2021-12-31"),
        "Rate Hike 2022": ("2022-01-01", "2022-12-31"),
        "AI Rally 2023-2024": ("2023-01-01", "2024-12-31"),
        "Recent 2025-2026Q1": ("2025-01-01", "2026-03-31"),
    }
    out = {}
    for name, (s, e) in named.items():
        n = int(((dates >= pd.Timestamp(s)) & (dates <= pd.Timestamp(e))).sum())
        if n >= 60:
            out[name] = (s, e)
    if out:
        return out
    quarters = np.array_split(np.arange(len(dates)), 4)
    return {f"Stage {i + 1}": (str(dates[q[0]].date()), str(dates[q[-1]].date()))
            for i, q in enumerate(quarters) if len(q) >= 30}


def attribution_tables(study: Study, window=None, hac_lags: int | None = None,
                       periods: Mapping[str, tuple] | None = None,
                       rolling_windows: Sequence[int] = (252, 504)
                       ) -> dict[str, pd.DataFrame]:
    """Factor attribution for the baskets, the spread, and each member ETF."""
    if study.factors is None:
        raise DataError("attribution needs the daily factor file")
    fac = study.factors
    X = fac[list(FACTOR_MAP)].rename(columns=FACTOR_MAP)
    rf = fac["rf"]

    def clip(s: pd.Series) -> pd.Series:
        if window is None:
            return s
        return s.loc[pd.Timestamp(window[0]):pd.Timestamp(window[1])]

    rows = []
    portfolio_deps = {
        "G": attr.excess_dependent(study.g, rf),
        "D": attr.excess_dependent(study.d, rf),
        "G-D": attr.excess_dependent(study.gd, rf, zero_cost=True),
    }
    for name, dep in portfolio_deps.items():
        res = attr.ols_hac(clip(dep), X, hac_lags=hac_lags)
        rows.append({"portfolio": name, **res.to_row()})
    portfolios = pd.DataFrame(rows)

    etf_rows = []
    group = {**{s: "G" for s in G_MEMBERS}, **{s: "D" for s in D_MEMBERS}}
    for sym, ret in study.raw_returns.items():
        if sym == "SPY":
            continue
        res = attr.ols_hac(clip(attr.excess_dependent(ret, rf)), X, hac_lags=hac_lags)
        etf_rows.append({"etf": sym, "group": group.get(sym, ""), **res.to_row()})
    etfs = pd.DataFrame(etf_rows)

    if periods is None:
        periods = default_periods(clip(study.gd).index)
    period_tbl = attr.period_attribution(clip(portfolio_deps["G-D"]), X,
                                         periods, hac_lags=hac_lags)

    out = {"portfolios": portfolios, "etfs": etfs, "periods": period_tbl}
    for w in rolling_windows:
        dep = clip(portfolio_deps["G-D"])
        joint = pd.concat([dep.rename("y"), X], axis=1, join="inner").dropna()
        if len(joint) >= w:
            out[f"rolling_{w}"] = attr.rolling_attribution(dep, X, w,
                                                           hac_lags=hac_lags)
    return out
