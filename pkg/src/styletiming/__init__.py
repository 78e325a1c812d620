"""Growth-vs-defensive style-timing research engine."""

__version__ = "0.1.0"

from .market_data import (DataError, align, forward_fill_bounded,
                          load_factor_panel, load_series, to_returns)
from .baskets import D_MEMBERS, G_MEMBERS, BasketDef, basket_returns, relative
from .signal_kernel import (RawStateInputs, ScoreParams, build_signal_frame,
                            expanding_z, policy_score, softplus)
from .policy_engine import (BacktestResult, Metrics, PolicyConfig,
                            compute_metrics, run_backtest, run_fixed_weight)
from .benchmarks import PairStats, matched_policy, pair_stats, vol_match_weight
from .experiments import (GridSpec, SelectionScore, Study, build_study,
                          run_grid, walk_forward)
from .synth import synth_data

__all__ = [
    "DataError", "align", "forward_fill_bounded", "load_factor_panel",
    "load_series", "to_returns", "D_MEMBERS", "G_MEMBERS", "BasketDef",
    "basket_returns", "relative", "RawStateInputs", "ScoreParams",
    "build_signal_frame", "expanding_z", "policy_score", "softplus",
    "BacktestResult", "Metrics", "PolicyConfig", "compute_metrics",
    "run_backtest", "run_fixed_weight", "PairStats", "matched_policy",
    "pair_stats", "vol_match_weight", "GridSpec", "SelectionScore", "Study",
    "build_study", "run_grid", "walk_forward", "synth_data",
]
