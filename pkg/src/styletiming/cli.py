"""Command-line entry point: configure a run, execute experiments, write all
tables, equity curves, and the run manifest."""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import pandas as pd

from . import __version__
from . import experiments as xp
from .baskets import D_MEMBERS, G_MEMBERS
from .market_data import DataError, load_factor_panel, load_series
from .policy_engine import run_backtest
from .report import METRIC_KINDS, slug, write_equity, write_table
from .signal_kernel import Z_MIN_OBS, VIX_RANK_MIN_OBS, policy_score
from .synth import synth_data

EXPERIMENTS = ("attribution", "tilt", "grid", "benchmarks", "volmatch",
               "walkforward", "post2022", "credit", "diagnostics", "all")

LEVEL_SYMBOLS = ("TNX", "VIX", "BAA10Y")
FACTOR_FILE = "ff5_mom_daily.csv"

# Every convention that moves a reported number, echoed into the manifest.
CONVENTIONS = {
    "returns": "simple daily, compounded wealth",
    "trading_days_per_year": 252,
    "forward_fill_max_gap": 3,
    "basket_rebalance": "daily equal weight (mean of member returns)",
    "hac_lag_rule": "floor(4*(n/100)^(2/9)); no small-sample correction (lag 0 = HC0)",
    "alpha_annualization": "(1+alpha_daily)^252 - 1",
    "z_min_obs": Z_MIN_OBS,
    "vix_rank": f"inclusive trailing rank over 756 obs, min {VIX_RANK_MIN_OBS}",
    "growth_trail": "compounded 126-day G-D return",
    "sharpe": "mean/std of raw net returns, no risk-free leg, annualized sqrt(252)",
    "sortino_denominator": "sqrt(mean(min(r,0)^2))",
    "turnover": "annualized sum of two-sided applied-weight changes",
    "cost_timing": "charged on the day the applied weight changes",
    "execution": "signals formed at close t, applied from t+1; w0=0.5",
    "missing_score_days": "hold previous weight at zero cost",
    "selector": "equal-weight cross-config z of sharpe, calmar, cagr, maxdd, -turnover",
    "selection_tie_break": "lexicographic config id",
    "walk_forward": "train 252, test 63; training metrics from each config's "
                    "continuously-run path; weight state carries across blocks "
                    "and config changes start from the incumbent weight",
    "walk_forward_selection_cost": "same cost as trading",
    "matched_static_tie_break": "lower growth weight",
    "annual_excess": "252 x mean daily difference (linear)",
    "vol_matching": "scaled against zero-yield cash",
    "quintile_horizon_default": 21,
    "gate_nw_lags": "horizon + 5 (overlapping); every-horizon-th day non-overlapping",
}


@dataclass
class RunConfig:
    experiment: str = "all"
    data_dir: str | None = None
    out_dir: str = "stl_out"
    window: tuple[str, str] | None = None
    post_start: str | None = None
    cost_bps: float = 10.0
    seed: int = 7
    synthetic: bool = False
    n_days: int = 2600
    synth_params: dict = field(default_factory=dict)
    selector: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)
    cost_levels: tuple[float, ...] = (0.0, 5.0, 10.0, 20.0)
    g_members: tuple[str, ...] = G_MEMBERS
    d_members: tuple[str, ...] = D_MEMBERS
    quintile_horizon: int = 21
    gate_horizon: int = 63

    def __post_init__(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}; "
                             f"choose from {', '.join(EXPERIMENTS)}")
        if self.window is not None:
            self.window = (str(self.window[0]), str(self.window[1]))
            pd.Timestamp(self.window[0]), pd.Timestamp(self.window[1])

    def echo(self) -> dict:
        out = asdict(self)
        # the artifact directory is implied by the manifest's own location
        del out["out_dir"]
        out["g_members"] = list(self.g_members)
        out["d_members"] = list(self.d_members)
        out["cost_levels"] = list(self.cost_levels)
        out["window"] = list(self.window) if self.window else None
        return out


def load_study_dir(data_dir: str | Path, cfg: RunConfig) -> xp.Study:
    data_dir = Path(data_dir)
    if not data_dir.is_dir():
        raise DataError(f"data directory not found: {data_dir}")
    prices = {}
    for sym in (*cfg.g_members, *cfg.d_members, "SPY"):
        path = data_dir / f"{sym}.csv"
        if not path.exists():
            raise DataError(f"missing data file: {path}")
        prices[sym] = load_series(path, kind="price")
    levels = {}
    for sym in LEVEL_SYMBOLS:
        path = data_dir / f"{sym}.csv"
        if path.exists():
            levels[sym] = load_series(path, kind="level")
    factors = None
    if (data_dir / FACTOR_FILE).exists():
        factors = load_factor_panel(data_dir / FACTOR_FILE)
    return xp.build_study(prices, levels, factors,
                          g_members=cfg.g_members, d_members=cfg.d_members)


@dataclass
class Windows:
    main: tuple[pd.Timestamp, pd.Timestamp]
    oos_start: pd.Timestamp
    post_start: pd.Timestamp


def derive_windows(study: xp.Study, cfg: RunConfig) -> Windows:
    dates = study.dates
    if cfg.window is not None:
        main = (pd.Timestamp(cfg.window[0]), pd.Timestamp(cfg.window[1]))
    else:
        if study.feasible_start is None:
            raise DataError("history too short: the trailing growth signal never forms")
        main = (study.feasible_start, dates[-1])
    main_pos = int(dates.searchsorted(main[0], side="left"))
    oos_pos = main_pos + xp.TRAIN_LEN
    if oos_pos >= len(dates):
        oos_pos = len(dates) - 1
    oos_start = dates[oos_pos]
    if cfg.post_start is not None:
        post = pd.Timestamp(cfg.post_start)
    else:
        post = pd.Timestamp("2022-01-03")
        last_ok = len(dates) - xp.TEST_LEN
        if not (oos_start <= post <= dates[min(last_ok, len(dates) - 1)]):
            post = dates[(oos_pos + len(dates)) // 2]
    return Windows(main=main, oos_start=oos_start, post_start=post)


def _selected_config(cfg: RunConfig) -> "xp.PolicyConfig":
    from dataclasses import replace
    return replace(xp.SELECTED_CONFIG, cost_bps=cfg.cost_bps)


def _grid(cfg: RunConfig, kind: str = "standard") -> xp.GridSpec:
    base = xp.DEFAULT_GRID if kind == "standard" else xp.REPLACEMENT_GRID
    if not cfg.grid:
        return base
    axes = {k: tuple(v) for k, v in cfg.grid.items()}
    return xp.GridSpec(**axes, kind=kind)


def _method_kinds(extra: dict | None = None) -> dict:
    kinds = {"method": "str", **METRIC_KINDS}
    kinds.update(extra or {})
    return kinds


def emit_attribution(study, cfg, win, out):
    kinds = {"symbol": "str", "group": "str", "first_return_date": "date",
             "n_returns": "int"}
    write_table(study.coverage, out, "data_coverage", kinds)
    tables = xp.attribution_tables(study)
    beta_kinds = {"n": "int", "alpha_ann": "pct", "alpha_t": "ratio",
                  "adj_r2": "beta"}
    for f in xp.FACTOR_MAP.values():
        beta_kinds[f] = "beta"
        beta_kinds[f"{f}_t"] = "ratio"
    write_table(tables["portfolios"], out, "attribution_portfolios",
                {"portfolio": "str", **beta_kinds})
    write_table(tables["etfs"], out, "attribution_etfs",
                {"etf": "str", "group": "str", **beta_kinds})
    write_table(tables["periods"], out, "attribution_periods",
                {"period": "str", **beta_kinds})
    for key in ("rolling_252", "rolling_504"):
        if key in tables:
            tables[key].reset_index().to_csv(out / f"attribution_{key}.csv",
                                             index=False, float_format="%.8g")


def emit_tilt(study, cfg, win, out):
    table, curves = xp.tilt_sweep(study, cost_bps=cfg.cost_bps, window=win.main)
    write_table(table, out, "tilt_sweep", _method_kinds({"max_tilt": "pct"}))
    for tilt, bt in curves.items():
        write_equity(bt, out, f"tilt_{int(round(tilt * 100))}")


def emit_grid(study, cfg, win, out):
    selector = xp.SelectionScore(**cfg.selector)
    grid = _grid(cfg)
    ranked = xp.run_grid(study, grid, selector, win.main, cfg.cost_bps)
    kinds = {"config": "str", **METRIC_KINDS, "selection_score": "num"}
    write_table(ranked, out, "local_grid", kinds)
    write_table(ranked.head(5), out, "local_grid_top", kinds)
    best = xp.config_from_id(grid, ranked["config"].iloc[0], cfg.cost_bps)
    bt = run_backtest(best, study.g, study.d, study.frame, win.main, "grid_best")
    write_equity(bt, out, "grid_best")


def emit_benchmarks(study, cfg, win, out):
    table, pairs, results = xp.benchmark_comparison(
        study, _selected_config(cfg), win.main, cfg.cost_bps)
    write_table(table, out, "benchmarks", _method_kinds())
    write_table(pairs, out, "pair_stats",
                {"comparison": "str", "annual_excess": "pct",
                 "tracking_error": "pct", "info_ratio": "ratio",
                 "maxdd_diff": "pct"})
    for name, bt in results.items():
        write_equity(bt, out, slug(name))


def emit_volmatch(study, cfg, win, out):
    table, results = xp.vol_match_table(study, _selected_config(cfg), win.main,
                                        cfg.cost_bps)
    kinds = {"method": "str", "cagr": "pct", "vol": "pct", "sharpe": "ratio",
             "max_dd": "pct", "turnover": "pct", "excess_vs_smooth": "pct"}
    write_table(table, out, "vol_matched", kinds)
    meta = pd.DataFrame([{"vol_match_weight": table.attrs["vol_match_weight"]}])
    write_table(meta, out, "vol_match_weight", {"vol_match_weight": "pct"})


def _emit_validation(study, cfg, out, oos_start, oos_end, name):
    selector = xp.SelectionScore(**cfg.selector)
    table, curves, selections = xp.validation_rows(
        study, _grid(cfg), oos_start, oos_end, selector, cfg.cost_bps)
    write_table(table, out, name, _method_kinds())
    for mode, sel in selections.items():
        sel.to_csv(out / f"selections_{slug(mode)}.csv", index=False)
    for label, bt in curves.items():
        write_equity(bt, out, slug(label))


def emit_walkforward(study, cfg, win, out):
    _emit_validation(study, cfg, out, win.oos_start, win.main[1], "walkforward")


def emit_post2022(study, cfg, win, out):
    _emit_validation(study, cfg, out, win.post_start, win.main[1], "post2022")


def emit_credit(study, cfg, win, out):
    selector = xp.SelectionScore(**cfg.selector)
    table, repl, incr, results = xp.credit_main(study, selector, win.main,
                                                cfg.cost_bps)
    write_table(table, out, "credit_main", _method_kinds())
    grid_kinds = {"config": "str", **METRIC_KINDS, "selection_score": "num"}
    write_table(repl, out, "credit_grid_replacement", grid_kinds)
    write_table(incr, out, "credit_grid_overlay", grid_kinds)
    for name, bt in results.items():
        write_equity(bt, out, slug(name))
    oos_tbl, _ = xp.credit_validation(study, win.oos_start, win.main[1],
                                      selector, cfg.cost_bps)
    write_table(oos_tbl, out, "credit_oos", _method_kinds())
    post_tbl, _ = xp.credit_validation(study, win.post_start, win.main[1],
                                       selector, cfg.cost_bps, include_all_g=True)
    write_table(post_tbl, out, "credit_post2022", _method_kinds())
    best_incr = xp.config_from_id(xp.INCREMENTAL_GRID, incr["config"].iloc[0],
                                  cfg.cost_bps)
    cost_tbl = xp.cost_sensitivity(study, best_incr, costs=cfg.cost_levels,
                                   window=win.main)
    write_table(cost_tbl, out, "credit_cost_sensitivity",
                {"cost_bps": "ratio", **METRIC_KINDS})


def emit_diagnostics(study, cfg, win, out):
    score = policy_score(study.frame, xp.SELECTED_PARAMS)
    signals = study.frame.join(score.add_prefix("score_"))
    signals.index.name = "date"
    signals.to_csv(out / "signals.csv", float_format="%.8g")
    write_table(xp.quintile_table(study, cfg.quintile_horizon), out,
                "score_quintiles",
                {"method": "str", "q1": "pct", "q2": "pct", "q3": "pct",
                 "q4": "pct", "q5": "pct", "q5_q1": "pct", "n": "int"})
    write_table(xp.yearly_table(study, _selected_config(cfg), win.main), out,
                "yearly_returns",
                {"year": "int", "selected": "pct", "all_g": "pct", "all_d": "pct"})
    main_gate, inter_gate = xp.gate_tables(study, cfg.gate_horizon)
    write_table(main_gate, out, "gate_main_effects",
                {"variable": "str", "coef": "pct", "hac_t": "ratio",
                 "nonoverlap_coef": "pct", "direction": "str", "passed": "str"})
    if len(inter_gate):
        write_table(inter_gate, out, "gate_interactions",
                    {"interaction": "str", "raw_coef": "pct", "raw_hac_t": "ratio",
                     "residual_coef": "pct", "residual_hac_t": "ratio"})


EMITTERS = {
    "attribution": emit_attribution,
    "tilt": emit_tilt,
    "grid": emit_grid,
    "benchmarks": emit_benchmarks,
    "volmatch": emit_volmatch,
    "walkforward": emit_walkforward,
    "post2022": emit_post2022,
    "credit": emit_credit,
    "diagnostics": emit_diagnostics,
}


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out: Path, cfg: RunConfig, data_dir: Path,
                   experiments_run: list[str]) -> None:
    echo = cfg.echo()
    try:
        echo["data_dir"] = str(data_dir.relative_to(out))
    except ValueError:
        echo["data_dir"] = str(data_dir)
    payload = {
        "version": __version__,
        "config": echo,
        "experiments_run": experiments_run,
        "conventions": CONVENTIONS,
        "data_files": {p.name: _sha256(p) for p in sorted(data_dir.glob("*.csv"))},
    }
    with open(out / "run_manifest.json", "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def run(cfg: RunConfig) -> Path:
    """Execute the configured experiments; returns the artifact directory."""
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if cfg.synthetic:
        data_dir = synth_data(out / "synth_data", seed=cfg.seed,
                              n_days=cfg.n_days, params=cfg.synth_params)
    else:
        source = cfg.data_dir or os.environ.get("STL_DATA_DIR")
        if not source:
            raise DataError("no data: pass --data-dir, set STL_DATA_DIR, "
                            "or use --synthetic")
        data_dir = Path(source)
    study = load_study_dir(data_dir, cfg)
    win = derive_windows(study, cfg)
    names = list(EMITTERS) if cfg.experiment == "all" else [cfg.experiment]
    for name in names:
        sub = out / name
        sub.mkdir(parents=True, exist_ok=True)
        EMITTERS[name](study, cfg, win, sub)
    write_manifest(out, cfg, data_dir, names)
    return out


def config_from_manifest(manifest_path: str | Path, out_dir: str | Path) -> RunConfig:
    """Rebuild a RunConfig from a manifest for an exact re-run."""
    manifest_path = Path(manifest_path)
    with open(manifest_path) as fh:
        payload = json.load(fh)
    echo = dict(payload["config"])
    data_dir = echo.get("data_dir")
    if data_dir and not Path(data_dir).is_absolute():
        echo["data_dir"] = str(manifest_path.parent / data_dir)
    echo["out_dir"] = str(out_dir)
    echo["g_members"] = tuple(echo.get("g_members", G_MEMBERS))
    echo["d_members"] = tuple(echo.get("d_members", D_MEMBERS))
    echo["cost_levels"] = tuple(echo.get("cost_levels", (0.0, 5.0, 10.0, 20.0)))
    if echo.get("window"):
        echo["window"] = tuple(echo["window"])
    return RunConfig(**echo)


def build_arg_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="styletiming",
        description="Growth-vs-defensive style-timing research engine")
    ap.add_argument("--config", help="JSON config file; flags override it")
    ap.add_argument("--experiment", choices=EXPERIMENTS, help="which study to run")
    ap.add_argument("--data-dir", help="directory of input CSVs "
                                       "(fallback: env STL_DATA_DIR)")
    ap.add_argument("--out-dir", help="artifact directory (default stl_out)")
    ap.add_argument("--cost-bps", type=float, help="transaction cost in bps")
    ap.add_argument("--synthetic", action="store_true",
                    help="generate and use synthetic data")
    ap.add_argument("--seed", type=int, help="synthetic data seed")
    ap.add_argument("--n-days", type=int, help="synthetic sample length")
    ap.add_argument("--window", help="main window as START:END (ISO dates)")
    ap.add_argument("--post-start", help="restricted validation start date")
    return ap


def main(argv=None) -> int:
    args = build_arg_parser().parse_args(argv)
    settings: dict = {}
    if args.config:
        try:
            with open(args.config) as fh:
                settings.update(json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            print(f"error: cannot read config {args.config}: {exc}", file=sys.stderr)
            return 1
    overrides = {
        "experiment": args.experiment,
        "data_dir": args.data_dir,
        "out_dir": args.out_dir,
        "cost_bps": args.cost_bps,
        "seed": args.seed,
        "n_days": args.n_days,
        "post_start": args.post_start,
    }
    settings.update({k: v for k, v in overrides.items() if v is not None})
    if args.synthetic:
        settings["synthetic"] = True
    if args.window:
        try:
            start, end = args.window.split(":")
        except ValueError:
            print("error: --window expects START:END", file=sys.stderr)
            return 2
        settings["window"] = (start, end)
    if "g_members" in settings:
        settings["g_members"] = tuple(settings["g_members"])
    if "d_members" in settings:
        settings["d_members"] = tuple(settings["d_members"])
    if settings.get("window"):
        settings["window"] = tuple(settings["window"])
    try:
        cfg = RunConfig(**settings)
        out = run(cfg)
    except (DataError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"artifacts written to {out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
