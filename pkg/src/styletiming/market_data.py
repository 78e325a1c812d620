"""CSV loading, bounded forward-fill, daily returns, and calendar alignment.

All series are float64 pandas Series indexed by a DatetimeIndex of trading
dates. Input files are two-column delimited text with a ``date,value`` header,
ISO-8601 dates, and plain decimal values.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np
import pandas as pd

FACTOR_COLUMNS = ("mkt_rf", "smb", "hml", "rmw", "cma", "mom", "rf")


class DataError(ValueError):
    """Malformed or inconsistent input data."""


def _looks_like_header(row: list[str]) -> bool:
    try:
        pd.Timestamp(row[0].strip())
    except (ValueError, TypeError):
        return True
    return False


def load_series(path: str | Path, kind: str = "price") -> pd.Series:
    """Load a ``date,value`` CSV into a sorted, validated series.

    ``kind="price"`` requires strictly positive values; ``kind="level"``
    accepts any finite value (yields and spreads can sit near or below zero).
    """
    if kind not in ("price", "level"):
        raise ValueError(f"unknown series kind {kind!r}")
    path = Path(path)
    dates: list[pd.Timestamp] = []
    values: list[float] = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if lineno == 1 and _looks_like_header(row):
                continue
            if len(row) != 2:
                raise DataError(f"{path.name}:{lineno}: expected 2 fields, got {len(row)}")
            try:
                stamp = pd.Timestamp(row[0].strip())
                value = float(row[1])
            except (ValueError, TypeError) as exc:
                raise DataError(f"{path.name}:{lineno}: {exc}") from None
            if not np.isfinite(value):
                raise DataError(f"{path.name}:{lineno}: non-finite value {row[1]!r}")
            if kind == "price" and value <= 0.0:
                raise DataError(f"{path.name}:{lineno}: nonpositive price {value}")
            dates.append(stamp)
            values.append(value)
    if not dates:
        raise DataError(f"{path.name}: no data rows")
    series = pd.Series(values, index=pd.DatetimeIndex(dates), name=path.stem, dtype=float)
    series = series.sort_index()
    dupes = series.index[series.index.duplicated()]
    if len(dupes):
        raise DataError(f"{path.name}: duplicate date {dupes[0].date()}")
    return series


def forward_fill_bounded(series: pd.Series, calendar: pd.DatetimeIndex,
                         max_gap: int = 3) -> pd.Series:
    """Reindex onto ``calendar``, filling gaps of at most ``max_gap``
    consecutive calendar dates with the last prior value.

    Longer gaps stay missing, and nothing is filled before the first or after
    the last observation.
    """
    if max_gap < 0:
        raise ValueError("max_gap must be >= 0")
    obs = series.dropna()
    if not obs.index.isin(calendar).all():
        raise DataError(f"{series.name or 'series'}: observations fall outside the target calendar")
    out = obs.reindex(calendar)
    if obs.empty:
        return out
    filled = out.ffill()
    missing = out.isna()
    run_id = (~missing).cumsum()
    run_len = missing.groupby(run_id).transform("sum")
    in_span = pd.Series(calendar <= obs.index[-1], index=calendar)
    fillable = missing & (run_len <= max_gap) & filled.notna() & in_span
    return out.where(~fillable, filled)


def to_returns(prices: pd.Series) -> pd.Series:
    """Daily simple returns ``p_t / p_{t-1} - 1`` along the series calendar.

    Positions whose prior value is missing yield a missing return.
    """
    if int(prices.notna().sum()) < 2:
        raise DataError(f"{prices.name or 'series'}: need at least 2 prices to form returns")
    rets = prices / prices.shift(1) - 1.0
    rets = rets.iloc[1:]
    rets.name = prices.name
    return rets


def cumulate(returns: pd.Series, base: float = 1.0) -> pd.Series:
    """Compound returns into a level path starting at ``base``."""
    return base * (1.0 + returns).cumprod()


@dataclass
class AlignedPanel:
    """Columns sampled on a common trading calendar plus per-source coverage."""

    frame: pd.DataFrame
    coverage: pd.DataFrame

    @property
    def dates(self) -> pd.DatetimeIndex:
        return self.frame.index


def align(series: Mapping[str, pd.Series], start=None, end=None) -> AlignedPanel:
    """Intersect the input calendars over ``[start, end]``.

    The coverage report lists each input's own first valid date and
    observation count, independent of the intersection.
    """
    if not series:
        raise ValueError("align needs at least one series")
    calendar: pd.DatetimeIndex | None = None
    rows = []
    for name, s in series.items():
        valid = s.dropna()
        if valid.empty:
            raise DataError(f"{name}: series has no observations")
        rows.append({"symbol": name, "first_date": valid.index[0], "n_obs": int(valid.size)})
        calendar = valid.index if calendar is None else calendar.intersection(valid.index)
    if start is not None:
        calendar = calendar[calendar >= pd.Timestamp(start)]
    if end is not None:
        calendar = calendar[calendar <= pd.Timestamp(end)]
    if len(calendar) == 0:
        raise DataError("aligned calendar is empty")
    frame = pd.DataFrame({name: s.reindex(calendar) for name, s in series.items()},
                         index=calendar)
    return AlignedPanel(frame=frame, coverage=pd.DataFrame(rows))


def load_factor_panel(path: str | Path) -> pd.DataFrame:
    """Load the daily factor file: ``date`` plus decimal-return factor columns.

    Rejects files whose market factor looks like percent units.
    """
    path = Path(path)
    try:
        df = pd.read_csv(path, parse_dates=["date"])
    except Exception as exc:
        raise DataError(f"{path.name}: {exc}") from None
    missing = [c for c in ("date", *FACTOR_COLUMNS) if c not in df.columns]
    if missing:
        raise DataError(f"{path.name}: missing columns {', '.join(missing)}")
    df = df.set_index("date").sort_index()[list(FACTOR_COLUMNS)].astype(float)
    if df.empty:
        raise DataError(f"{path.name}: no data rows")
    if df.index.duplicated().any():
        dupe = df.index[df.index.duplicated()][0]
        raise DataError(f"{path.name}: duplicate date {dupe.date()}")
    if float(df["mkt_rf"].abs().mean()) > 0.05:
        raise DataError(f"{path.name}: mkt_rf looks like percent units; decimal daily returns required")
    return df
