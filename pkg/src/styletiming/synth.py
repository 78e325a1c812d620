"""Deterministic synthetic market generator.

Writes the same file formats the loaders read (per-symbol price CSVs, macro
level CSVs, a daily factor file) so the whole pipeline can run without
proprietary data. A configurable lagged rate-relief effect can be planted in
the G-D spread for signal-recovery checks.
"""

from __future__ import annotations

from pathlib import Path
from typing import Mapping

import numpy as np
import pandas as pd

from .baskets import D_MEMBERS, G_MEMBERS

DEFAULTS: dict[str, float | str] = {
    "start": "2015-01-02",
    "vol_scale": 1.0,
    # daily G-D drift in bp per unit of (lagged, scaled) rate relief
    "rate_effect_bp": 2.0,
}


def _ou(rng: np.random.Generator, n: int, x0: float, mu: float, kappa: float,
        sigma: float, floor: float | None = None) -> np.ndarray:
    """Mean-reverting level path; with sigma=0 and x0=mu it stays constant."""
    x = np.empty(n)
    shocks = rng.standard_normal(n) if sigma > 0.0 else np.zeros(n)
    prev = x0
    for i in range(n):
        prev = prev + kappa * (mu - prev) + sigma * shocks[i]
        if floor is not None and prev < floor:
            prev = floor
        x[i] = prev
    return x


def _write_series(path: Path, dates: pd.DatetimeIndex, values: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("date,value\n")
        for d, v in zip(dates.strftime("%Y-%m-%d"), values):
            fh.write(f"{d},{v:.12g}\n")


def synth_data(out_dir: str | Path, seed: int = 7, n_days: int = 2600,
               params: Mapping[str, float] | None = None) -> Path:
    """Generate a full synthetic data directory and return its path."""
    if n_days < 1000:
        raise ValueError("n_days must be at least 1000")
    p = dict(DEFAULTS)
    p.update(params or {})
    vol = float(p["vol_scale"])
    if vol < 0.0:
        raise ValueError("vol_scale must be >= 0")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    dates = pd.bdate_range(str(p["start"]), periods=n_days)
    n = n_days

    # Macro levels. In the degenerate zero-vol setting every level starts at
    # its long-run mean and stays there, so all z-signals are missing.
    tnx_x0 = 2.5 if vol == 0.0 else 2.2
    vix_x0 = np.log(18.0) if vol == 0.0 else np.log(16.0)
    baa_x0 = 2.0 if vol == 0.0 else 2.3
    tnx = _ou(rng, n, x0=tnx_x0, mu=2.5, kappa=0.02, sigma=0.045 * vol, floor=0.2)
    vix = np.exp(_ou(rng, n, x0=vix_x0, mu=np.log(18.0), kappa=0.03,
                     sigma=0.08 * vol))
    vix = np.clip(vix, 8.0, 95.0)
    baa = _ou(rng, n, x0=baa_x0, mu=2.0, kappa=0.015, sigma=0.020 * vol, floor=0.4)

    # Factor returns; market volatility scales with the lagged VIX level.
    rf = np.full(n, 6e-5)
    vix_lag = np.concatenate([[vix[0]], vix[:-1]])
    mkt_vol = 0.0065 * (vix_lag / 18.0) * vol
    mkt = 0.00035 + mkt_vol * rng.standard_normal(n)
    smb = 0.0045 * vol * rng.standard_normal(n)
    hml = 0.0050 * vol * rng.standard_normal(n)
    rmw = 0.0035 * vol * rng.standard_normal(n)
    cma = 0.0030 * vol * rng.standard_normal(n)
    mom = 0.0002 + 0.0060 * vol * rng.standard_normal(n)

    # Common growth-vs-defensive shock with the planted lagged rate-relief
    # drift: yesterday's 21-day yield drop (scaled to roughly unit variance)
    # pushes the spread the following day.
    relief = np.zeros(n)
    relief[21:] = -(tnx[21:] - tnx[:-21]) / 0.20
    relief_lag = np.concatenate([[0.0], relief[:-1]])
    gd_shock = (float(p["rate_effect_bp"]) * 1e-4 * relief_lag
                + 0.0020 * vol * rng.standard_normal(n))

    members: dict[str, np.ndarray] = {}
    for sym in G_MEMBERS:
        idio = 0.0040 * vol * rng.standard_normal(n)
        members[sym] = (rf + 1.12 * mkt - 0.30 * hml + 0.05 * mom - 0.10 * cma
                        + 0.5 * gd_shock + idio)
    for sym in D_MEMBERS:
        idio = 0.0040 * vol * rng.standard_normal(n)
        members[sym] = (rf + 0.88 * mkt + 0.25 * hml + 0.20 * cma - 0.06 * mom
                        - 0.5 * gd_shock + idio)
    spy = rf + 1.0 * mkt + 0.0015 * vol * rng.standard_normal(n)

    for sym, rets in sorted(members.items()):
        _write_series(out / f"{sym}.csv", dates, 100.0 * np.cumprod(1.0 + rets))
    _write_series(out / "SPY.csv", dates, 100.0 * np.cumprod(1.0 + spy))
    _write_series(out / "TNX.csv", dates, tnx)
    _write_series(out / "VIX.csv", dates, vix)
    _write_series(out / "BAA10Y.csv", dates, baa)

    with open(out / "ff5_mom_daily.csv", "w", newline="") as fh:
        fh.write("date,mkt_rf,smb,hml,rmw,cma,mom,rf\n")
        for i, d in enumerate(dates.strftime("%Y-%m-%d")):
            vals = ",".join(f"{x:.12g}" for x in
                            (mkt[i], smb[i], hml[i], rmw[i], cma[i], mom[i], rf[i]))
            fh.write(f"{d},{vals}\n")
    return out
