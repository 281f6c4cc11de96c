import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fieldattr import market_data as md
from fieldattr.errors import DataError, DegenerateWindowError
from fieldattr.synthetic_lab import business_days


def make_panel(rng, n=6, T=200):
    return md.ReturnPanel([f"S{i}" for i in range(n)], business_days(T), rng.standard_normal((n, T)) * 0.01)


def test_prices_to_returns_log_differences():
    prices = np.array([[100.0, 110.0, 99.0], [50.0, 50.0, 55.0]])
    panel = md.prices_to_returns(["A", "B"], business_days(3), prices)
    np.testing.assert_allclose(panel.returns, np.diff(np.log(prices), axis=1))
    assert panel.n_days == 2 and panel.dates[0] == business_days(3)[1]


def test_missing_or_bad_prices_rejected():
    with pytest.raises(DataError):
        md.prices_to_returns(["A"], business_days(3), [[1.0, np.nan, 2.0]])
    with pytest.raises(DataError):
        md.prices_to_returns(["A"], business_days(3), [[1.0, 0.0, 2.0]])


def test_window_correlation_matches_numpy(rng):
    panel = make_panel(rng)
    corrs = md.rolling_correlation(panel, 30)
    k = 17
    ref = np.corrcoef(panel.returns[:, k:k + 30])
    np.testing.assert_allclose(corrs[k].matrix, ref, atol=1e-12)
    assert corrs[k].end_date == panel.dates[k + 29]
    assert len(corrs) == panel.n_days - 29


def test_degenerate_window_names_ticker(rng):
    panel = make_panel(rng)
    r = panel.returns.copy()
    r[2, 50:90] = 0.0
    bad = md.ReturnPanel(panel.tickers, panel.dates, r)
    with pytest.raises(DegenerateWindowError) as exc:
        md.psi1_series(bad, 30)
    assert "S2" in str(exc.value)


def test_psi1_identical_streams_is_one():
    T = 100
    x = np.random.Generator(np.random.Philox(1)).standard_normal(T)
    panel = md.ReturnPanel(["A", "B", "C"], business_days(T), np.vstack([x, x, x]))
    psi = md.psi1_series(panel, 20)
    np.testing.assert_allclose(psi.values, 1.0, atol=1e-12)
    assert psi.label == "psi1_W20"


@given(st.integers(2, 8), st.integers(0, 10_000))
def test_psi1_bounds(n, seed):
    rng = np.random.Generator(np.random.Philox(seed))
    panel = md.ReturnPanel([str(i) for i in range(n)], business_days(40), rng.standard_normal((n, 40)))
    psi = md.psi1_series(panel, 20).values
    assert np.all(psi >= 1.0 / n - 1e-12) and np.all(psi <= 1.0 + 1e-12)


def test_leading_eigenvalue_sparse_path_agrees(rng):
    n = 600
    a = rng.standard_normal((n, 3))
    c = a @ a.T + np.eye(n)
    d = np.sqrt(np.diag(c))
    c = c / np.outer(d, d)
    dense = np.linalg.eigvalsh(c)[-1]
    assert md.leading_eigenvalue(c) == pytest.approx(dense, rel=1e-10)


def test_align_intersects_dates():
    d = business_days(10)
    a = md.ObservableSeries(d[:8], np.arange(8.0), "a")
    b = md.ObservableSeries(d[3:], np.arange(7.0), "b")
    pair = md.align(a, b)
    assert pair.count == 5
    np.testing.assert_array_equal(pair.x, np.arange(3.0, 8.0))
    np.testing.assert_array_equal(pair.y, np.arange(5.0))


def test_align_rejects_disjoint_and_unsorted():
    d = business_days(10)
    with pytest.raises(DataError):
        md.align(md.ObservableSeries(d[:3], [1, 2, 3.0]), md.ObservableSeries(d[5:8], [1, 2, 3.0]))
    with pytest.raises(DataError):
        md.align(md.ObservableSeries(d[[2, 1, 3]], [1, 2, 3.0]), md.ObservableSeries(d, np.ones(10)))


def test_weekly_disjoint_count_and_identity():
    T = 25
    x = np.random.Generator(np.random.Philox(2)).standard_normal(T)
    panel = md.ReturnPanel(["A", "B"], business_days(T), np.vstack([x, x]))
    w = md.weekly_disjoint_observables(panel)
    assert len(w.psi1) == 5
    np.testing.assert_allclose(w.psi1.values, 1.0)
    np.testing.assert_allclose(w.meancorr.values, 1.0)


def test_weekly_skips_degenerate_block(rng):
    panel = make_panel(rng, T=50)
    r = panel.returns.copy()
    r[0, 10:15] = 0.0
    with pytest.warns(UserWarning):
        w = md.weekly_disjoint_observables(md.ReturnPanel(panel.tickers, panel.dates, r))
    assert len(w.psi1) == 9 and len(w.skipped) == 1


def test_block_observables_count_and_vix_pairing(rng):
    T = 4650
    panel = make_panel(rng, n=4, T=T)
    vix = md.ObservableSeries(panel.dates, 15 + np.arange(T) % 7, "vix")
    b = md.block_observables(panel, vix, 60)
    assert len(b) == T // 60 == 77
    assert b.vix_end[0] == vix.values[59]
    assert b.vix_mean[1] == pytest.approx(vix.values[60:120].mean())


def test_rolling_volatility_matches_direct(rng):
    panel = make_panel(rng)
    v = md.rolling_volatility(panel, 30)
    assert v.shape == (6, panel.n_days - 29)
    assert v[3, 10] == pytest.approx(np.std(panel.returns[3, 10:40], ddof=1), rel=1e-12)


def test_file_round_trip(tmp_path):
    dates = business_days(5)
    prices = np.array([[1.0, 1.1, 1.2, 1.1, 1.3], [2.0, 2.1, 2.0, 2.2, 2.3]])
    md.write_prices(tmp_path / "p.csv", ["A", "B"], dates, prices)
    panel = md.load_returns(tmp_path / "p.csv")
    np.testing.assert_allclose(panel.returns, np.diff(np.log(prices), axis=1))
    (tmp_path / "v.csv").write_text("DATE,VIXCLS\n2004-01-02,18\n2004-01-05,.\n2004-01-06,17.5\n")
    v = md.load_field(tmp_path / "v.csv", "vix")
    assert len(v) == 2 and v.values[1] == 17.5
