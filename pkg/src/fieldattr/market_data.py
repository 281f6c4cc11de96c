"""Return panels, field series, and the correlation-spectrum observables built from them.

Dates are ``numpy.datetime64[D]`` arrays throughout. Price panels are delimited
text with a ``date`` column followed by one column per ticker; field files
(VIX, MOVE, TED) are two columns ``date,close``.
"""

from __future__ import annotations

import warnings
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy.sparse.linalg import eigsh

from .errors import DataError, DegenerateWindowError

DENSE_EIG_MAX_N = 512


def as_dates(values) -> np.ndarray:
    return np.asarray(values, dtype="datetime64[D]")


@dataclass(frozen=True)
class ObservableSeries:
    dates: np.ndarray
    values: np.ndarray
    label: str = ""

    def __post_init__(self):
        dates = as_dates(self.dates)
        values = np.asarray(self.values, dtype=float)
        if dates.ndim != 1 or values.ndim != 1 or len(dates) != len(values):
            raise DataError(f"series {self.label!r}: dates and values must be 1-D and equal length")
        if not np.all(np.isfinite(values)):
            raise DataError(f"series {self.label!r} contains non-finite values")
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return len(self.values)

    def log(self, label=None) -> ObservableSeries:
        if np.any(self.values <= 0):
            raise DataError(f"cannot take log of non-positive values in {self.label!r}")
        return ObservableSeries(self.dates, np.log(self.values), label or f"log_{self.label}")

    def take(self, index) -> ObservableSeries:
        return ObservableSeries(self.dates[index], self.values[index], self.label)

    def relabel(self, label: str) -> ObservableSeries:
        return ObservableSeries(self.dates, self.values, label)


@dataclass(frozen=True)
class ReturnPanel:
    tickers: tuple
    dates: np.ndarray
    returns: np.ndarray  # N x T

    def __post_init__(self):
        dates = as_dates(self.dates)
        returns = np.asarray(self.returns, dtype=float)
        if returns.ndim != 2 or returns.shape != (len(self.tickers), len(dates)):
            raise DataError("returns must be an N x T matrix matching tickers and dates")
        if not np.all(np.isfinite(returns)):
            raise DataError("return panel has missing or non-finite cells")
        if len(dates) > 1 and not np.all(np.diff(dates) > np.timedelta64(0, "D")):
            raise DataError("panel dates must be strictly increasing")
        object.__setattr__(self, "tickers", tuple(self.tickers))
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "returns", returns)

    @property
    def n_stocks(self) -> int:
        return self.returns.shape[0]

    @property
    def n_days(self) -> int:
        return self.returns.shape[1]


@dataclass(frozen=True)
class CorrelationWindow:
    end_date: np.datetime64
    matrix: np.ndarray


@dataclass(frozen=True)
class AlignedPair:
    dates: np.ndarray
    x: np.ndarray
    y: np.ndarray
    x_label: str = "x"
    y_label: str = "y"

    @property
    def count(self) -> int:
        return len(self.dates)

    def series(self):
        return (ObservableSeries(self.dates, self.x, self.x_label),
                ObservableSeries(self.dates, self.y, self.y_label))


# ---------------------------------------------------------------------------
# I/O


def prices_to_returns(tickers, dates, prices) -> ReturnPanel:
    prices = np.asarray(prices, dtype=float)
    if prices.shape[1] < 2:
        raise DataError("need at least two price rows per ticker")
    if np.any(~np.isfinite(prices)):
        raise DataError("price panel has missing cells; the universe must have complete coverage")
    if np.any(prices <= 0):
        raise DataError("price panel contains non-positive prices")
    returns = np.diff(np.log(prices), axis=1)
    return ReturnPanel(tuple(tickers), as_dates(dates)[1:], returns)


def load_returns(prices_path) -> ReturnPanel:
    frame = pd.read_csv(prices_path, float_precision="round_trip")
    if frame.shape[1] < 2:
        raise DataError(f"{prices_path}: expected a date column and at least one ticker column")
    date_col = frame.columns[0]
    dates = as_dates(pd.to_datetime(frame[date_col]).dt.strftime("%Y-%m-%d").to_numpy())
    values = frame.drop(columns=[date_col]).apply(pd.to_numeric, errors="coerce").to_numpy(dtype=float)
    if len(dates) > 1 and not np.all(np.diff(dates) > np.timedelta64(0, "D")):
        raise DataError(f"{prices_path}: dates must be strictly increasing")
    return prices_to_returns([str(c) for c in frame.columns[1:]], dates, values.T)


def load_field(path, label: str = "field") -> ObservableSeries:
    frame = pd.read_csv(path, na_values=["."], float_precision="round_trip")
    if frame.shape[1] != 2:
        raise DataError(f"{path}: field files have exactly two columns (date, close)")
    frame.columns = ["date", "close"]
    frame["close"] = pd.to_numeric(frame["close"], errors="coerce")
    frame = frame.dropna()
    dates = as_dates(pd.to_datetime(frame["date"]).dt.strftime("%Y-%m-%d").to_numpy())
    order_ok = len(dates) < 2 or np.all(np.diff(dates) > np.timedelta64(0, "D"))
    if not order_ok:
        raise DataError(f"{path}: dates must be strictly increasing")
    return ObservableSeries(dates, frame["close"].to_numpy(dtype=float), label)


def write_prices(path, tickers, dates, prices) -> None:
    frame = pd.DataFrame(np.asarray(prices).T, columns=list(tickers))
    frame.insert(0, "date", [str(d) for d in as_dates(dates)])
    frame.to_csv(path, index=False)


def write_field(path, series: ObservableSeries) -> None:
    frame = pd.DataFrame({"date": [str(d) for d in series.dates], "close": series.values})
    frame.to_csv(path, index=False)


# ---------------------------------------------------------------------------
# Correlation windows


def _window_correlation(block: np.ndarray, tickers, end_date) -> np.ndarray:
    """Pearson correlation of a T_w x N block (population normalization)."""
    centered = block - block.mean(axis=0)
    cov = centered.T @ centered / block.shape[0]
    var = np.diag(cov).copy()
    # relative threshold guards against round-off in constant columns
    scale = np.maximum(np.abs(block).max(axis=0), 1e-300)
    bad = np.flatnonzero(var <= (1e-14 * scale) ** 2)
    if bad.size:
        raise DegenerateWindowError(tickers[bad[0]], end_date)
    sd = np.sqrt(var)
    corr = cov / np.outer(sd, sd)
    corr = 0.5 * (corr + corr.T)
    np.fill_diagonal(corr, 1.0)
    return corr


class RollingCorrelation(Sequence):
    """Lazily evaluated trailing-window correlation matrices.

    Window ``k`` ends at ``panel.dates[k + W - 1]`` and uses the W returns up to
    and including that date.
    """

    def __init__(self, panel: ReturnPanel, W: int):
        if W < 2:
            raise DataError("window length must be at least 2")
        if panel.n_days < W:
            raise DataError(f"panel has {panel.n_days} days, fewer than window {W}")
        self.panel = panel
        self.W = int(W)
        self.end_dates = panel.dates[self.W - 1:]

    def __len__(self):
        return self.panel.n_days - self.W + 1

    def matrix(self, k: int) -> np.ndarray:
        block = self.panel.returns[:, k:k + self.W].T
        return _window_correlation(block, self.panel.tickers, self.end_dates[k])

    def __getitem__(self, k):
        if isinstance(k, slice):
            return [self[i] for i in range(*k.indices(len(self)))]
        if k < 0:
            k += len(self)
        if not 0 <= k < len(self):
            raise IndexError(k)
        return CorrelationWindow(self.end_dates[k], self.matrix(k))


def rolling_correlation(panel: ReturnPanel, W: int) -> RollingCorrelation:
    return RollingCorrelation(panel, W)


def leading_eigenvalue(matrix: np.ndarray) -> float:
    n = matrix.shape[0]
    if n <= DENSE_EIG_MAX_N:
        try:
            return float(np.linalg.eigvalsh(matrix)[-1])
        except np.linalg.LinAlgError as exc:
            raise DataError(f"eigen-solver failed: {exc}") from exc
    vals, vecs = eigsh(matrix, k=1, which="LA", tol=1e-12)
    resid = np.linalg.norm(matrix @ vecs[:, 0] - vals[0] * vecs[:, 0])
    if resid > 1e-10 * max(1.0, abs(vals[0])):
        raise DataError(f"leading eigenpair did not converge (residual {resid:.2e})")
    return float(vals[0])


def psi1_series(panel: ReturnPanel, W: int = 60) -> ObservableSeries:
    """Leading-eigenvalue fraction of every trailing W-day correlation matrix."""
    corrs = rolling_correlation(panel, W)
    n = panel.n_stocks
    values = np.array([leading_eigenvalue(corrs.matrix(k)) / n for k in range(len(corrs))])
    return ObservableSeries(corrs.end_dates, values, f"psi1_W{W}")


# ---------------------------------------------------------------------------
# Alignment


def _check_sorted(series: ObservableSeries):
    if len(series) > 1 and not np.all(np.diff(series.dates) > np.timedelta64(0, "D")):
        raise DataError(f"series {series.label!r} has unsorted or duplicate dates")


def align(a: ObservableSeries, b: ObservableSeries) -> AlignedPair:
    if len(a) == 0 or len(b) == 0:
        raise DataError("cannot align an empty series")
    _check_sorted(a)
    _check_sorted(b)
    common, ia, ib = np.intersect1d(a.dates, b.dates, assume_unique=True, return_indices=True)
    if common.size == 0:
        raise DataError(f"series {a.label!r} and {b.label!r} share no dates")
    return AlignedPair(common, a.values[ia], b.values[ib], a.label, b.label)


def align_many(*series: ObservableSeries) -> list:
    """Restrict several series to their common dates."""
    for s in series:
        _check_sorted(s)
    common = series[0].dates
    for s in series[1:]:
        common = np.intersect1d(common, s.dates, assume_unique=True)
    if common.size == 0:
        raise DataError("series share no dates")
    return [s.take(np.searchsorted(s.dates, common)) for s in series]


def restrict_to(series: ObservableSeries, dates) -> ObservableSeries:
    """Values of ``series`` on ``dates``; every date must be present."""
    dates = as_dates(dates)
    idx = np.searchsorted(series.dates, dates)
    ok = (idx < len(series)) & (series.dates[np.minimum(idx, len(series) - 1)] == dates)
    if not np.all(ok):
        missing = dates[~ok][0]
        raise DataError(f"series {series.label!r} has no value on {missing}")
    return series.take(idx)


# ---------------------------------------------------------------------------
# Disjoint reconstructions


@dataclass
class WeeklyObservables:
    psi1: ObservableSeries
    meancorr: ObservableSeries
    skipped: list = field(default_factory=list)


def weekly_disjoint_observables(panel: ReturnPanel, block: int = 5) -> WeeklyObservables:
    """Correlation observables of disjoint ``block``-day windows anchored at the sample start."""
    if panel.n_days < 2 * block:
        raise DataError(f"need at least {2 * block} return days")
    if panel.n_stocks < 2:
        raise DataError("need at least two stocks")
    n = panel.n_stocks
    off = ~np.eye(n, dtype=bool)
    dates, psi, mc, skipped = [], [], [], []
    for start in range(0, panel.n_days - block + 1, block):
        end_date = panel.dates[start + block - 1]
        try:
            corr = _window_correlation(panel.returns[:, start:start + block].T, panel.tickers, end_date)
        except DegenerateWindowError as exc:
            warnings.warn(f"skipping degenerate weekly block: {exc}", stacklevel=2)
            skipped.append(str(end_date))
            continue
        dates.append(end_date)
        psi.append(leading_eigenvalue(corr) / n)
        mc.append(corr[off].mean())
    return WeeklyObservables(ObservableSeries(dates, psi, "psi1_weekly"),
                             ObservableSeries(dates, mc, "meancorr_weekly"), skipped)


@dataclass
class BlockTable:
    end_dates: np.ndarray
    psi1: np.ndarray
    vix_end: np.ndarray
    vix_mean: np.ndarray
    skipped: list = field(default_factory=list)

    def __len__(self):
        return len(self.end_dates)


def block_observables(panel: ReturnPanel, vix: ObservableSeries, B: int = 60) -> BlockTable:
    """Disjoint B-day blocks anchored at the sample start; the trailing remainder is dropped."""
    if panel.n_days < 2 * B:
        raise DataError(f"need at least {2 * B} return days for {B}-day blocks")
    n = panel.n_stocks
    end_dates, psi, v_end, v_mean, skipped = [], [], [], [], []
    for start in range(0, panel.n_days - B + 1, B):
        block_dates = panel.dates[start:start + B]
        try:
            corr = _window_correlation(panel.returns[:, start:start + B].T, panel.tickers, block_dates[-1])
        except DegenerateWindowError as exc:
            warnings.warn(f"skipping degenerate block: {exc}", stacklevel=2)
            skipped.append(str(block_dates[-1]))
            continue
        vix_block = restrict_to(vix, block_dates).values
        end_dates.append(block_dates[-1])
        psi.append(leading_eigenvalue(corr) / n)
        v_end.append(vix_block[-1])
        v_mean.append(vix_block.mean())
    return BlockTable(as_dates(end_dates), np.array(psi), np.array(v_end), np.array(v_mean), skipped)


def rolling_volatility(panel: ReturnPanel, W: int = 60) -> np.ndarray:
    """Trailing W-day sample standard deviation (ddof=1) per stock, N x (T-W+1)."""
    if W < 2:
        raise DataError("volatility window must be at least 2")
    if panel.n_days < W:
        raise DataError(f"panel has {panel.n_days} days, fewer than window {W}")
    windows = np.lib.stride_tricks.sliding_window_view(panel.returns, W, axis=1)
    return windows.std(axis=2, ddof=1)
