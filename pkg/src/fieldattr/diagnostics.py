"""Model-free persistence diagnostics: ACF summaries, quiet-regime pooling, episode
bootstrap, field-stripped residuals and bivariate Granger tests."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import DataError, FitError
from .market_data import ObservableSeries, align, align_many
from .ou_core import mu_eff

E_FOLD = math.exp(-1.0)


@dataclass(frozen=True)
class AcfSummary:
    acf: np.ndarray
    efolding_lag: int | None
    integrated_60: float
    integrated_90: float

    @classmethod
    def from_acf(cls, acf: np.ndarray) -> AcfSummary:
        below = np.flatnonzero(acf < E_FOLD)
        lag = int(below[0]) if below.size else None
        return cls(acf, lag, integrated_acf(acf, 60), integrated_acf(acf, 90))

    def rows(self) -> list:
        return [{"lag": k, "acf": float(a)} for k, a in enumerate(self.acf)]

    def record(self) -> dict:
        return {"efolding_lag": self.efolding_lag if self.efolding_lag is not None else float("nan"),
                "integrated_60": self.integrated_60, "integrated_90": self.integrated_90,
                "max_lag": len(self.acf) - 1}


def integrated_acf(acf: np.ndarray, L: int) -> float:
    """Sum of the ACF over lags 1..L (nan when fewer lags are available)."""
    return float(np.sum(acf[1:L + 1])) if len(acf) > L else float("nan")


def _raw_acf(x: np.ndarray, max_lag: int) -> np.ndarray:
    """Biased ACF: autocovariances divided by n around the sample mean."""
    d = x - x.mean()
    c0 = float(d @ d)
    if c0 == 0:
        raise DataError("constant series has no autocorrelation")
    n = len(x)
    return np.array([float(d[:n - k] @ d[k:]) / c0 for k in range(max_lag + 1)])


def acf_summary(series, max_lag: int = 120) -> AcfSummary:
    x = np.asarray(series.values if isinstance(series, ObservableSeries) else series, dtype=float)
    if len(x) <= max_lag + 1:
        raise DataError(f"need more than {max_lag + 1} observations for {max_lag} lags")
    return AcfSummary.from_acf(_raw_acf(x, max_lag))


# ---------------------------------------------------------------------------
# Quiet regimes


class QuietMode(enum.Enum):
    STRICT_DAILY = "strict_daily"
    ROLLING_MEDIAN = "rolling_median"


@dataclass(frozen=True)
class QuietSpec:
    mode: QuietMode = QuietMode.STRICT_DAILY
    low: float = 15.0
    high: float = 18.0
    min_len: int = 120
    window: int = 20

    def __post_init__(self):
        if not self.low < self.high:
            raise DataError("quiet band needs low < high")
        if self.min_len < 1 or self.window < 1:
            raise DataError("min_len and window must be positive")


@dataclass(frozen=True)
class Segment:
    start: np.datetime64
    end: np.datetime64
    length: int


def _trailing_median(x: np.ndarray, window: int) -> np.ndarray:
    out = np.full(len(x), np.nan)
    if len(x) >= window:
        view = np.lib.stride_tricks.sliding_window_view(x, window)
        out[window - 1:] = np.median(view, axis=1)
    return out


def _runs(mask: np.ndarray):
    """(start, stop) index pairs of maximal True runs."""
    padded = np.concatenate([[False], mask, [False]]).astype(np.int8)
    edges = np.flatnonzero(np.diff(padded))
    return list(zip(edges[::2], edges[1::2]))


def quiet_segments(vix: ObservableSeries, spec: QuietSpec) -> list:
    """Maximal contiguous runs inside the band lasting at least ``spec.min_len`` days."""
    x = vix.values
    if spec.mode is QuietMode.ROLLING_MEDIAN:
        x = _trailing_median(x, spec.window)
    with np.errstate(invalid="ignore"):
        inside = (x >= spec.low) & (x <= spec.high)
    out = []
    for a, b in _runs(inside):
        if b - a >= spec.min_len:
            out.append(Segment(vix.dates[a], vix.dates[b - 1], int(b - a)))
    return out


def _segment_values(psi1: ObservableSeries, segments) -> list:
    out = []
    for seg in segments:
        m = (psi1.dates >= seg.start) & (psi1.dates <= seg.end)
        out.append(psi1.values[m])
    return out


def _segment_table(pieces: list, max_lag: int):
    """Per-segment ACFs (biased, own mean) and pair-count weights, padded with zeros."""
    n_seg = len(pieces)
    rho = np.zeros((n_seg, max_lag + 1))
    w = np.zeros((n_seg, max_lag + 1))
    for i, x in enumerate(pieces):
        L = min(max_lag, len(x) - 1)
        if L < 0:
            continue
        d = x - x.mean()
        c0 = float(d @ d)
        if c0 == 0:
            continue
        n = len(x)
        rho[i, :L + 1] = [float(d[:n - k] @ d[k:]) / c0 for k in range(L + 1)]
        w[i, :L + 1] = n - np.arange(L + 1)
    return rho, w


def _pool(rho, w, counts=None):
    wc = w if counts is None else w * counts[:, None]
    tot = wc.sum(axis=0)
    feasible = np.flatnonzero(tot > 0)
    if feasible.size == 0:
        raise DataError("no segment supports any lag")
    # truncate at the largest lag some segment still covers
    last = feasible[-1]
    return (wc[:, :last + 1] * rho[:, :last + 1]).sum(axis=0) / tot[:last + 1]


def pooled_quiet_acf(psi1: ObservableSeries, segments, max_lag: int = 120) -> AcfSummary:
    """Pair-count weighted pooling of segment ACFs, each computed around its own mean."""
    if not segments:
        raise DataError("need at least one segment")
    rho, w = _segment_table(_segment_values(psi1, segments), max_lag)
    return AcfSummary.from_acf(_pool(rho, w))


@dataclass(frozen=True)
class BootstrapCI:
    point: int | None
    low: float
    high: float
    n_valid: int


def episode_bootstrap(psi1: ObservableSeries, segments, draws: int = 5000, seed: int = 0,
                      max_lag: int = 120) -> BootstrapCI:
    """Resample quiet episodes with replacement and recompute the pooled e-folding lag."""
    if not segments:
        raise DataError("need at least one segment")
    rho, w = _segment_table(_segment_values(psi1, segments), max_lag)
    point = AcfSummary.from_acf(_pool(rho, w)).efolding_lag
    rng = np.random.Generator(np.random.Philox(seed))
    k = len(segments)
    counts = rng.multinomial(k, np.full(k, 1.0 / k), size=draws)
    lags = []
    for c in counts:
        try:
            lag = AcfSummary.from_acf(_pool(rho, w, c.astype(float))).efolding_lag
        except DataError:
            continue
        if lag is not None:
            lags.append(lag)
    if not lags:
        raise FitError("every bootstrap draw was degenerate (no e-folding crossing)")
    lo, hi = np.percentile(lags, [2.5, 97.5])
    return BootstrapCI(point, float(lo), float(hi), len(lags))


def field_stripped_residual(fit2, psi1: ObservableSeries, field: ObservableSeries) -> ObservableSeries:
    """psi1 minus the fitted conditional equilibrium mu + (beta/theta) v."""
    y, v = align_many(psi1, field)
    return ObservableSeries(y.dates, y.values - mu_eff(fit2, v.values), "field_stripped")


# ---------------------------------------------------------------------------
# Granger causality


class Direction(enum.Enum):
    X_TO_Y = "x->y"
    Y_TO_X = "y->x"


@dataclass(frozen=True)
class GrangerResult:
    direction: Direction
    lag: int
    F: float
    p: float
    differenced: bool
    df_num: int = 0
    df_den: int = 0


def _lags(z: np.ndarray, p: int, start: int) -> np.ndarray:
    n = len(z)
    return np.column_stack([z[start - i:n - i] for i in range(1, p + 1)])


def _rss(X, y) -> float:
    coef, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    if rank < X.shape[1]:
        raise FitError("singular Granger design (collinear inputs)")
    r = y - X @ coef
    return float(r @ r)


def select_var_lag(x: np.ndarray, y: np.ndarray, max_lag: int) -> int:
    """AIC-minimal order of the unrestricted bivariate VAR on the common sample."""
    n = len(x) - max_lag
    best = None
    for p in range(1, max_lag + 1):
        X = np.column_stack([np.ones(n), _lags(x, p, max_lag), _lags(y, p, max_lag)])
        resid = []
        for target in (x[max_lag:], y[max_lag:]):
            coef, _, rank, _ = np.linalg.lstsq(X, target, rcond=None)
            if rank < X.shape[1]:
                raise FitError("singular Granger design (collinear inputs)")
            resid.append(target - X @ coef)
        R = np.column_stack(resid)
        sign, logdet = np.linalg.slogdet(R.T @ R / n)
        if sign <= 0:
            raise FitError("singular residual covariance (collinear inputs)")
        aic = logdet + 2.0 * (2 * (2 * p + 1)) / n
        if best is None or aic < best[1]:
            best = (p, aic)
    return best[0]


def granger_f(cause: np.ndarray, target: np.ndarray, p: int):
    """F test that p lags of ``cause`` add nothing to p own lags of ``target``.

    Returns (F, p_value, df_num, df_den).
    """
    n = len(target) - p
    own = _lags(target, p, p)
    cross = _lags(cause, p, p)
    ones = np.ones((n, 1))
    rss_r = _rss(np.hstack([ones, own]), target[p:])
    rss_u = _rss(np.hstack([ones, own, cross]), target[p:])
    df_den = n - 2 * p - 1
    if df_den <= 0 or rss_u <= 0:
        raise FitError("not enough observations for the Granger regression")
    F = max((rss_r - rss_u) / p / (rss_u / df_den), 0.0)
    return F, float(stats.f.sf(F, p, df_den)), p, df_den


def granger(x: ObservableSeries, y: ObservableSeries, max_lag: int = 10, differenced: bool = False) -> dict:
    """Both Granger directions with one AIC-selected lag order shared across them."""
    pair = align(x, y)
    a, b = pair.x, pair.y
    if differenced:
        a, b = np.diff(a), np.diff(b)
    if len(a) <= 3 * max_lag:
        raise DataError(f"need more than {3 * max_lag} observations for max_lag={max_lag}")
    if np.ptp(a) == 0 or np.ptp(b) == 0:
        raise FitError("constant input to Granger test")
    p = select_var_lag(a, b, max_lag)
    out = {}
    for direction, cause, target in ((Direction.X_TO_Y, a, b), (Direction.Y_TO_X, b, a)):
        F, pv, d1, d2 = granger_f(cause, target, p)
        out[direction] = GrangerResult(direction, p, F, pv, differenced, d1, d2)
    return out
