import numpy as np
import pandas as pd
import pytest

from styletiming.market_data import (DataError, align, cumulate,
                                     forward_fill_bounded, load_factor_panel,
                                     load_series, to_returns)


def write_csv(path, rows, header="date,value"):
    path.write_text(header + "\n" + "\n".join(rows) + "\n")
    return path


class TestLoadSeries:
    def test_minimal_two_rows(self, tmp_path):
        p = write_csv(tmp_path / "ABC.csv", ["2020-01-02,100.0", "2020-01-03,101.0"])
        s = load_series(p)
        assert len(s) == 2
        assert s.name == "ABC"
        assert s.iloc[1] == 101.0

    def test_unsorted_rows_sorted(self, tmp_path):
        p1 = write_csv(tmp_path / "a.csv", ["2020-01-03,101.0", "2020-01-02,100.0"])
        p2 = write_csv(tmp_path / "b.csv", ["2020-01-02,100.0", "2020-01-03,101.0"])
        assert load_series(p1).tolist() == load_series(p2).tolist()

    def test_duplicate_date_rejected(self, tmp_path):
        p = write_csv(tmp_path / "a.csv", ["2020-01-02,100.0", "2020-01-02,101.0"])
        with pytest.raises(DataError, match="2020-01-02"):
            load_series(p)

    def test_malformed_row_names_line(self, tmp_path):
        p = write_csv(tmp_path / "a.csv", ["2020-01-02,100.0", "2020-01-03,oops"])
        with pytest.raises(DataError, match=":3"):
            load_series(p)

    def test_nonpositive_price_rejected(self, tmp_path):
        p = write_csv(tmp_path / "a.csv", ["2020-01-02,0.0"])
        with pytest.raises(DataError, match="nonpositive"):
            load_series(p)

    def test_level_kind_allows_negative(self, tmp_path):
        p = write_csv(tmp_path / "a.csv", ["2020-01-02,-0.5", "2020-01-03,0.1"])
        s = load_series(p, kind="level")
        assert s.iloc[0] == -0.5

    def test_empty_file_rejected(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text("date,value\n")
        with pytest.raises(DataError, match="no data rows"):
            load_series(p)


class TestForwardFillBounded:
    def setup_method(self):
        self.cal = pd.bdate_range("2020-01-01", periods=12)

    def test_gap_of_two_filled(self):
        s = pd.Series([1.0, 2.0, 3.0], index=self.cal[[0, 3, 5]])
        out = forward_fill_bounded(s, self.cal[:6], max_gap=3)
        assert out.iloc[1] == 1.0 and out.iloc[2] == 1.0
        assert out.iloc[3] == 2.0

    def test_gap_of_four_not_filled(self):
        s = pd.Series([1.0, 2.0], index=self.cal[[0, 5]])
        out = forward_fill_bounded(s, self.cal[:6], max_gap=3)
        assert out.iloc[1:5].isna().all()
        assert out.iloc[5] == 2.0

    def test_pre_listing_never_filled(self):
        s = pd.Series([1.0, 2.0], index=self.cal[[4, 5]])
        out = forward_fill_bounded(s, self.cal[:6], max_gap=3)
        assert out.iloc[:4].isna().all()

    def test_beyond_last_observation_not_extended(self):
        s = pd.Series([1.0, 2.0], index=self.cal[[0, 1]])
        out = forward_fill_bounded(s, self.cal[:5], max_gap=3)
        assert out.iloc[2:].isna().all()

    def test_total_filled_at_most_max_gap(self):
        s = pd.Series([1.0, 2.0], index=self.cal[[0, 3]])
        out = forward_fill_bounded(s, self.cal[:4], max_gap=2)
        filled = out.notna().sum() - 2
        assert filled <= 2

    def test_off_calendar_observation_rejected(self):
        s = pd.Series([1.0], index=pd.DatetimeIndex(["2020-01-04"]))  # a Saturday
        with pytest.raises(DataError, match="outside"):
            forward_fill_bounded(s, self.cal, max_gap=3)


class TestToReturns:
    def test_arithmetic(self):
        idx = pd.bdate_range("2020-01-01", periods=3)
        r = to_returns(pd.Series([100.0, 101.0, 50.5], index=idx))
        assert r.iloc[0] == pytest.approx(0.01)
        assert r.iloc[1] == pytest.approx(-0.5)

    def test_flat_prices_zero_return(self):
        idx = pd.bdate_range("2020-01-01", periods=2)
        r = to_returns(pd.Series([100.0, 100.0], index=idx))
        assert r.iloc[0] == 0.0

    def test_length_is_one_less(self):
        idx = pd.bdate_range("2020-01-01", periods=7)
        r = to_returns(pd.Series(np.linspace(100, 106, 7), index=idx))
        assert len(r) == 6

    def test_missing_prior_close_gives_no_return(self):
        idx = pd.bdate_range("2020-01-01", periods=4)
        r = to_returns(pd.Series([100.0, np.nan, 102.0, 103.0], index=idx))
        assert np.isnan(r.iloc[0]) and np.isnan(r.iloc[1])
        assert r.iloc[2] == pytest.approx(103.0 / 102.0 - 1.0)

    def test_too_few_prices(self):
        with pytest.raises(DataError):
            to_returns(pd.Series([100.0], index=pd.bdate_range("2020-01-01", periods=1)))

    def test_roundtrip_with_cumulate(self):
        rng = np.random.default_rng(3)
        idx = pd.bdate_range("2020-01-01", periods=500)
        prices = pd.Series(100.0 * np.cumprod(1.0 + 0.01 * rng.standard_normal(500)),
                           index=idx)
        rets = to_returns(prices)
        rebuilt = cumulate(rets, base=prices.iloc[0])
        np.testing.assert_allclose(rebuilt.to_numpy(), prices.iloc[1:].to_numpy(),
                                   rtol=1e-12)

    def test_returns_of_cumulated_returns_identity(self):
        rng = np.random.default_rng(4)
        idx = pd.bdate_range("2020-01-01", periods=400)
        rets = pd.Series(0.01 * rng.standard_normal(400), index=idx)
        path = cumulate(rets)
        recovered = to_returns(pd.concat([pd.Series([1.0], index=idx[:1] - pd.Timedelta(days=1)), path]))
        np.testing.assert_allclose(recovered.to_numpy(), rets.to_numpy(),
                                   rtol=1e-12, atol=1e-15)


class TestAlign:
    def test_intersection_and_coverage(self):
        long_idx = pd.bdate_range("2020-01-01", periods=10)
        short_idx = long_idx[4:]
        panel = align({"a": pd.Series(1.0, index=long_idx),
                       "b": pd.Series(2.0, index=short_idx)})
        assert panel.dates.equals(short_idx)
        cov = panel.coverage.set_index("symbol")
        assert cov.loc["a", "n_obs"] == 10
        assert cov.loc["b", "first_date"] == short_idx[0]

    def test_identical_calendars_unchanged(self):
        idx = pd.bdate_range("2020-01-01", periods=5)
        panel = align({"a": pd.Series(1.0, index=idx), "b": pd.Series(2.0, index=idx)})
        assert panel.dates.equals(idx)

    def test_disjoint_calendars_error(self):
        a = pd.Series(1.0, index=pd.bdate_range("2020-01-01", periods=5))
        b = pd.Series(1.0, index=pd.bdate_range("2021-01-01", periods=5))
        with pytest.raises(DataError, match="empty"):
            align({"a": a, "b": b})

    def test_order_invariant(self):
        idx = pd.bdate_range("2020-01-01", periods=20)
        series = {"a": pd.Series(1.0, index=idx),
                  "b": pd.Series(2.0, index=idx[3:]),
                  "c": pd.Series(3.0, index=idx[:15])}
        p1 = align(series)
        p2 = align(dict(reversed(series.items())))
        assert p1.dates.equals(p2.dates)


class TestFactorPanel:
    def test_loads_decimal_file(self, tmp_path):
        p = tmp_path / "ff5_mom_daily.csv"
        p.write_text("date,mkt_rf,smb,hml,rmw,cma,mom,rf\n"
                     "2020-01-02,0.001,0.0,0.0,0.0,0.0,0.0,0.00005\n")
        df = load_factor_panel(p)
        assert df.loc["2020-01-02", "mkt_rf"] == 0.001

    def test_percent_format_rejected(self, tmp_path):
        p = tmp_path / "ff.csv"
        p.write_text("date,mkt_rf,smb,hml,rmw,cma,mom,rf\n"
                     "2020-01-02,0.10,0.0,0.0,0.0,0.0,0.0,0.005\n")
        with pytest.raises(DataError, match="percent"):
            load_factor_panel(p)

    def test_missing_column_rejected(self, tmp_path):
        p = tmp_path / "ff.csv"
        p.write_text("date,mkt_rf,smb\n2020-01-02,0.001,0.0\n")
        with pytest.raises(DataError, match="missing columns"):
            load_factor_panel(p)
