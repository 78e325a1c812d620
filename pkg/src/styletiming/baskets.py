"""Fixed equal-weight growth (G) and defensive (D) baskets and their spread."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import pandas as pd

from .market_data import DataError

G_MEMBERS = ("QQQ", "XLK", "VGT", "SPYG", "VUG")
D_MEMBERS = ("SCHD", "VYM", "VTV", "FDVV", "COWZ")


@dataclass(frozen=True)
class BasketDef:
    name: str
    members: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.members:
            raise ValueError(f"basket {self.name!r} has no members")


DEFAULT_BASKETS = (BasketDef("G", G_MEMBERS), BasketDef("D", D_MEMBERS))


def basket_returns(members: Mapping[str, pd.Series], name: str = "basket") -> pd.Series:
    """Daily-rebalanced equal-weight basket return: the mean of member returns.

    The basket starts at the latest member first-return date. A member missing
    after that date is an upstream data defect and raises.
    """
    if not members:
        raise ValueError("basket needs at least one member series")
    # canonical column order makes the mean bitwise permutation-invariant
    frame = pd.DataFrame(dict(members)).sort_index(axis=1)
    firsts = [frame[c].first_valid_index() for c in frame.columns]
    if any(f is None for f in firsts):
        empty = [c for c, f in zip(frame.columns, firsts) if f is None]
        raise DataError(f"member(s) with no observations: {', '.join(empty)}")
    start = max(firsts)
    live = frame.loc[frame.index >= start]
    holes = live.isna()
    if holes.any().any():
        col = holes.any()[holes.any()].index[0]
        date = holes.index[holes[col]][0]
        raise DataError(f"member {col} missing on {date.date()} after basket start {start.date()}")
    out = live.mean(axis=1)
    out.name = name
    return out


def relative(g: pd.Series, d: pd.Series) -> pd.Series:
    """Daily relative return of the growth basket over the defensive one."""
    if not g.index.equals(d.index):
        raise DataError("G and D calendars differ")
    out = g - d
    out.name = "G-D"
    return out
