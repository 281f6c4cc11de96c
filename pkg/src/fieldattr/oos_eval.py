"""Anchored chronological holdouts and the raw-return window sweep."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .market_data import ObservableSeries, ReturnPanel, align_many, as_dates, psi1_series
from .ou_core import attribution_from_rates, bare_spec, field_spec, fit, loglik_terms

MIN_SIDE = 100


@dataclass(frozen=True)
class SplitResult:
    split_date: np.datetime64
    n_train: int
    n_test: int
    m0_train_ll_per_obs: float
    m2_train_ll_per_obs: float
    m0_test_ll_per_obs: float
    m2_test_ll_per_obs: float
    n_segments: int = 1

    @property
    def gap(self) -> float:
        return self.m2_test_ll_per_obs - self.m0_test_ll_per_obs

    @property
    def m2_ratio(self) -> float:
        return self.m2_test_ll_per_obs / self.m2_train_ll_per_obs

    def record(self) -> dict:
        out = {k: getattr(self, k) for k in self.__dataclass_fields__}
        out["split_date"] = str(self.split_date)
        out["gap"] = self.gap
        out["m2_ratio"] = self.m2_ratio
        return out


def _contiguous(mask: np.ndarray):
    padded = np.concatenate([[False], mask, [False]]).astype(np.int8)
    edges = np.flatnonzero(np.diff(padded))
    return list(zip(edges[::2], edges[1::2]))


def _score(spec, params, psi: ObservableSeries, v: ObservableSeries, segments) -> tuple:
    """Summed one-step loglik over segments (no increment crosses a segment edge)."""
    total, n_trans = 0.0, 0
    for a, b in segments:
        if b - a < 2:
            continue
        sl = slice(a, b)
        s = spec if not spec.fields else spec.with_fields(v.take(sl))
        terms = loglik_terms(s, params, psi.take(sl))
        total += float(np.sum(terms))
        n_trans += len(terms)
    return total, n_trans


def anchored_oos(psi1: ObservableSeries, field_: ObservableSeries, split_dates, seed: int = 0,
                 exclusion=None) -> list:
    """Fit M0 and M2 on each prefix and score the suffix at the frozen prefix parameters.

    A split lands on the first trading date at or after its nominal date; that
    date begins the test side. ``exclusion`` is an optional inclusive
    (start, end) date range removed from the test side, which then splits into
    contiguous segments scored separately. Per-observation figures divide by the
    number of scored transitions.
    """
    psi, v = align_many(psi1, field_)
    n = len(psi)
    out = []
    for nominal in as_dates(split_dates):
        k = int(np.searchsorted(psi.dates, nominal))
        if k < MIN_SIDE or n - k < MIN_SIDE:
            raise DataError(f"split {nominal} leaves {k} training and {n - k} test observations "
                            f"(need {MIN_SIDE} each)")
        train_psi, train_v = psi.take(slice(0, k)), v.take(slice(0, k))
        keep = np.ones(n - k, dtype=bool)
        if exclusion is not None:
            lo, hi = as_dates(exclusion)
            d = psi.dates[k:]
            keep &= ~((d >= lo) & (d <= hi))
        segments = [(k + a, k + b) for a, b in _contiguous(keep)]
        if not any(b - a >= 2 for a, b in segments):
            raise DataError(f"exclusion leaves no scorable test transitions after split {nominal}")
        test_psi, test_v = psi.take(slice(0, n)), v.take(slice(0, n))
        m0 = fit(bare_spec(), train_psi, seed)
        m2 = fit(field_spec(train_v), train_psi, seed)
        ll0, t0 = _score(m0.spec, m0.params, test_psi, test_v, segments)
        ll2, t2 = _score(m2.spec, m2.params, test_psi, test_v, segments)
        out.append(SplitResult(psi.dates[k], k, int(keep.sum()), m0.loglik / m0.n_trans, m2.loglik / m2.n_trans,
                               ll0 / t0, ll2 / t2, len(segments)))
    return out


@dataclass
class WindowRow:
    W: int
    theta0: float
    tau0: float
    theta: float
    tau_cond: float
    beta: float
    chi: float
    scpa: float
    dbic: float
    n_obs: int = 0
    psi1: ObservableSeries | None = field(default=None, repr=False, compare=False)

    def record(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__ if k != "psi1"}


def window_row(W: int, psi: ObservableSeries, log_vix: ObservableSeries, seed: int = 0) -> WindowRow:
    y, v = align_many(psi, log_vix)
    m0 = fit(bare_spec(), y, seed)
    m2 = fit(field_spec(v), y, seed)
    s = attribution_from_rates(m0.params["theta"], m2.params["theta"], m2.params["beta"])
    return WindowRow(W, m0.params["theta"], s.tau_auto, m2.params["theta"], s.tau_cond, m2.params["beta"],
                     s.chi, s.scpa, m0.bic - m2.bic, len(y), psi)


def window_sweep(panel: ReturnPanel, vix: ObservableSeries, windows=(30, 45, 60, 90, 120), seed: int = 0) -> list:
    """Rebuild psi1 from raw returns at each window and refit M0/M2 against log VIX."""
    if panel.n_days < max(windows) + MIN_SIDE:
        raise DataError(f"panel of {panel.n_days} days is too short for window {max(windows)}")
    log_vix = vix.log("log_vix")
    return [window_row(W, psi1_series(panel, W), log_vix, seed) for W in windows]
