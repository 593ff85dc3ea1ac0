"""Panel ingestion, compound returns, shrinkage covariance."""
import datetime

import numpy as np
import pytest

from polyfolio.errors import (DegenerateAssetError, IngestionError,
                              InsufficientDataError, WindowError)
from polyfolio.market import (ReturnsPanel, compound_returns, ingest_csv,
                              panel_to_csv, shrinkage_covariance)


def write_csv(path, rows):
    path.write_text("\n".join(",".join(str(c) for c in r) for r in rows) + "\n")


def make_panel(rets, start=datetime.date(2020, 1, 1)):
    rets = np.asarray(rets, dtype=float)
    dates = tuple(start + datetime.timedelta(days=i) for i in range(len(rets)))
    return ReturnsPanel(tuple(f"A{j}" for j in range(rets.shape[1])), dates, rets)


class TestIngest:
    def test_constant_prices_zero_returns(self, tmp_path):
        p = tmp_path / "px.csv"
        write_csv(p, [["date", "X", "Y"],
                      ["2020-01-01", 10, 20],
                      ["2020-01-02", 10, 20],
                      ["2020-01-03", 10, 20]])
        panel = ingest_csv(p, format="prices")
        assert np.allclose(panel.returns, 0.0)
        assert len(panel) == 2

    def test_price_to_return(self, tmp_path):
        p = tmp_path / "px.csv"
        write_csv(p, [["date", "X", "Y"],
                      ["2020-01-01", 100, 50],
                      ["2020-01-02", 110, 55]])
        panel = ingest_csv(p, format="prices")
        assert panel.returns[0, 0] == pytest.approx(0.10)
        assert panel.returns[0, 1] == pytest.approx(0.10)

    def test_bad_cell_reports_location(self, tmp_path):
        p = tmp_path / "bad.csv"
        write_csv(p, [["date", "X", "Y"],
                      ["2020-01-01", 1.0, 2.0],
                      ["2020-01-02", "oops", 2.0],
                      ["2020-01-03", 1.0, 2.0]])
        with pytest.raises(IngestionError) as err:
            ingest_csv(p, format="returns")
        assert err.value.row == 3 and err.value.column == 2

    def test_missing_cells_dropped(self, tmp_path, caplog):
        p = tmp_path / "gap.csv"
        write_csv(p, [["date", "X", "Y"],
                      ["2020-01-01", 0.01, 0.02],
                      ["2020-01-02", "", 0.02],
                      ["2020-01-03", 0.03, 0.01]])
        with caplog.at_level("INFO", logger="polyfolio.market"):
            panel = ingest_csv(p, format="returns")
        assert len(panel) == 2
        assert "dropped 1" in caplog.text

    def test_too_few_assets(self, tmp_path):
        p = tmp_path / "one.csv"
        write_csv(p, [["date", "X"], ["2020-01-01", 1], ["2020-01-02", 2]])
        with pytest.raises(InsufficientDataError):
            ingest_csv(p)

    def test_round_trip_bit_identical(self, tmp_path):
        rng = np.random.default_rng(0)
        panel = make_panel(rng.normal(size=(7, 3)) * 0.01)
        p1 = tmp_path / "a.csv"
        panel_to_csv(panel, p1)
        back = ingest_csv(p1, format="returns")
        assert np.array_equal(back.returns, panel.returns)
        p2 = tmp_path / "b.csv"
        panel_to_csv(back, p2)
        assert p1.read_text() == p2.read_text()


class TestCompoundReturns:
    def test_zero_returns(self):
        panel = make_panel(np.zeros((5, 3)))
        assert np.allclose(compound_returns(panel), 0.0)

    def test_two_periods_of_ten_percent(self):
        panel = make_panel(np.full((2, 2), 0.10))
        assert np.allclose(compound_returns(panel), 0.21)

    def test_matches_direct_product(self):
        rng = np.random.default_rng(1)
        rets = rng.normal(size=(5, 3)) * 0.05
        panel = make_panel(rets)
        direct = np.prod(1 + rets, axis=0) - 1
        assert np.allclose(compound_returns(panel), direct, atol=1e-14)

    def test_window_split_associativity(self):
        rng = np.random.default_rng(2)
        rets = rng.normal(size=(9, 4)) * 0.03
        whole = compound_returns(rets)
        first = compound_returns(rets[:4])
        second = compound_returns(rets[4:])
        combined = (1 + first) * (1 + second) - 1
        assert np.allclose(whole, combined, atol=1e-12)

    def test_oversized_window(self):
        panel = make_panel(np.zeros((3, 2)))
        with pytest.raises(WindowError):
            compound_returns(panel, k=4)


class TestShrinkageCovariance:
    def test_large_sample_converges_to_sample_cov(self):
        rng = np.random.default_rng(3)
        rets = rng.normal(size=(10_000, 3)) * 0.02
        est = shrinkage_covariance(rets)
        x = rets - rets.mean(axis=0)
        sample = x.T @ x / rets.shape[0]
        rel = np.linalg.norm(est.Sigma - sample) / np.linalg.norm(sample)
        assert rel < 0.05
        assert est.intensity < 0.2

    def test_intensity_bounds_and_symmetry(self):
        rng = np.random.default_rng(4)
        for _ in range(10):
            T = int(rng.integers(10, 60))
            n = int(rng.integers(2, 8))
            rets = rng.normal(size=(T, n)) * rng.uniform(0.005, 0.05, size=n)
            est = shrinkage_covariance(rets)
            assert 0.0 <= est.intensity <= 1.0
            assert np.allclose(est.Sigma, est.Sigma.T, atol=1e-12)

    def test_psd_floor(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            rets = rng.normal(size=(15, 6)) * 0.02
            est = shrinkage_covariance(rets)
            x = rets - rets.mean(axis=0)
            sample = x.T @ x / rets.shape[0]
            floor = min(np.linalg.eigvalsh(sample).min(), 0.0)
            assert np.linalg.eigvalsh(est.Sigma).min() >= floor - 1e-10

    def test_zero_variance_asset_named(self):
        rets = np.column_stack([np.zeros(10), np.random.default_rng(6).normal(size=10)])
        panel = make_panel(rets)
        with pytest.raises(DegenerateAssetError) as err:
            shrinkage_covariance(panel)
        assert err.value.symbol == "A0"

    def test_short_panel_rejected(self):
        with pytest.raises(InsufficientDataError):
            shrinkage_covariance(np.zeros((1, 3)))
