"""Comparison portfolios: static mixes, volatility matching, matched reduced
policies, and pairwise incremental statistics."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import pandas as pd

from .policy_engine import (TRADING_DAYS, Metrics, PolicyConfig, compute_metrics,
                            max_drawdown)

_SQRT_DAYS = float(np.sqrt(TRADING_DAYS))


def static_mix(w_g: float, g: pd.Series, d: pd.Series) -> pd.Series:
    """Daily return of the constant-weight mix w*G + (1-w)*D."""
    if not 0.0 <= w_g <= 1.0:
        raise ValueError("static weight must lie in [0, 1]")
    out = w_g * g + (1.0 - w_g) * d
    out.name = f"mix_{w_g:.2f}"
    return out


def annualized_vol(net) -> float:
    r = np.asarray(net, dtype=float)
    return float(r.std(ddof=1)) * _SQRT_DAYS


def vol_match_weight(base, target_vol: float) -> float:
    """Scaling weight against zero-yield cash that hits ``target_vol``.

    Values above 1 are allowed (no leverage cost is modeled) but the caller
    should flag them.
    """
    base_vol = annualized_vol(base)
    if base_vol <= 0.0:
        raise ValueError("base series has no volatility to scale")
    return target_vol / base_vol


def matched_static_search(criterion: str, target: float | None, g: pd.Series,
                          d: pd.Series, grid_step: float = 0.01
                          ) -> tuple[float, Metrics]:
    """Scan the static-mix grid for the weight matching (or maximizing) a metric.

    ``vol`` and ``maxdd`` pick the mix closest to ``target``; ``sharpe`` picks
    the argmax. Ties break toward the lower growth weight.
    """
    if criterion not in ("vol", "maxdd", "sharpe"):
        raise ValueError(f"unknown criterion {criterion!r}")
    if criterion != "sharpe" and target is None:
        raise ValueError("target required for vol/maxdd matching")
    steps = int(round(1.0 / grid_step))
    if abs(steps * grid_step - 1.0) > 1e-9:
        raise ValueError("grid_step must divide [0, 1]")
    best_w, best_metrics, best_key = None, None, None
    for k in range(steps + 1):
        w = k * grid_step
        m = compute_metrics(static_mix(w, g, d).to_numpy(),
                            weights=np.full(len(g), w),
                            weight_changes=np.zeros(len(g)))
        if criterion == "vol":
            key = abs(m.vol - target)
        elif criterion == "maxdd":
            key = abs(m.max_dd - target)
        else:
            key = -m.sharpe
        if best_key is None or key < best_key:
            best_w, best_metrics, best_key = w, m, key
    return float(best_w), best_metrics


def matched_policy(kind: str, base_config: PolicyConfig) -> PolicyConfig:
    """Reduced-score policy sharing the base tilt, tanh scale, and smoothing."""
    if kind not in ("tnx_only", "core_only"):
        raise ValueError(f"unknown matched policy kind {kind!r}")
    return replace(base_config, kind=kind)


@dataclass
class PairStats:
    annual_excess: float
    tracking_error: float
    info_ratio: float
    maxdd_diff: float

    def as_dict(self) -> dict[str, float]:
        return {
            "annual_excess": self.annual_excess,
            "tracking_error": self.tracking_error,
            "info_ratio": self.info_ratio,
            "maxdd_diff": self.maxdd_diff,
        }


def pair_stats(a, b) -> PairStats:
    """Incremental statistics of net series a over net series b.

    Annual excess is the linear 252x mean daily difference, the convention
    consistent with the information ratio.
    """
    av = np.asarray(a, dtype=float)
    bv = np.asarray(b, dtype=float)
    if av.shape != bv.shape:
        raise ValueError("series must be aligned to the same window")
    diff = av - bv
    excess = TRADING_DAYS * float(diff.mean())
    te = float(diff.std(ddof=1)) * _SQRT_DAYS
    ir = excess / te if te > 0.0 else float("nan")
    return PairStats(excess, te, ir, max_drawdown(av) - max_drawdown(bv))
