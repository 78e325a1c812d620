"""Fixed-format table output: percent/ratio formatting for the headline CSVs
plus full-precision companion files for tests."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping

import numpy as np
import pandas as pd

from .policy_engine import BacktestResult

METRIC_KINDS = {
    "final_wealth": "ratio",
    "cagr": "pct",
    "vol": "pct",
    "sharpe": "ratio",
    "sortino": "ratio",
    "max_dd": "pct",
    "calmar": "ratio",
    "turnover": "pct",
    "avg_g": "pct",
}


def format_value(value, kind: str) -> str:
    if kind in ("str",):
        return "" if value is None else str(value)
    if kind == "date":
        return "" if pd.isna(value) else pd.Timestamp(value).strftime("%Y-%m-%d")
    if value is None or (isinstance(value, float) and not np.isfinite(value)):
        return ""
    if kind == "pct":
        return f"{100.0 * value:.2f}"
    if kind == "ratio":
        return f"{value:.2f}"
    if kind == "beta":
        return f"{value:.3f}"
    if kind == "num":
        return f"{value:.4f}"
    if kind == "int":
        return f"{int(value)}"
    raise ValueError(f"unknown format kind {kind!r}")


def format_table(df: pd.DataFrame, kinds: Mapping[str, str]) -> pd.DataFrame:
    out = {}
    for col in df.columns:
        kind = kinds.get(col, "num")
        out[col] = [format_value(v, kind) for v in df[col]]
    return pd.DataFrame(out)


def write_table(df: pd.DataFrame, out_dir: str | Path, name: str,
                kinds: Mapping[str, str]) -> None:
    """Write ``<name>.csv`` (display formatting) and ``<name>_raw.csv``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    format_table(df, kinds).to_csv(out_dir / f"{name}.csv", index=False)
    df.to_csv(out_dir / f"{name}_raw.csv", index=False, float_format="%.12g")


def slug(name: str) -> str:
    out = "".join(c.lower() if c.isalnum() else "_" for c in name)
    while "__" in out:
        out = out.replace("__", "_")
    return out.strip("_")


def write_equity(bt: BacktestResult, out_dir: str | Path, name: str) -> None:
    """Per-run curve and one-row metrics files."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    bt.to_frame().to_csv(out_dir / f"equity_{name}.csv", float_format="%.10g")
    row = pd.DataFrame([{"method": bt.label, **bt.metrics.as_dict()}])
    kinds = {"method": "str", **METRIC_KINDS}
    format_table(row, kinds).to_csv(out_dir / f"metrics_{name}.csv", index=False)
