"""Mechanical/informational split of a volatility field and its attribution to the observable.

The mechanical proxy is the volatility of a fixed-weight portfolio whose member
volatilities are frozen, so it moves only with the realized correlation matrix:

    VIX_mech(t) = c * sqrt(sum_ij w_i w_j s_i s_j C_ij(t)).

``c`` matches the sample mean of the observed VIX. The informational field is
the residual of log VIX on the log proxy.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError, DegenerateWindowError, FieldAttrError, FitError
from .market_data import (ObservableSeries, ReturnPanel, RollingCorrelation, align_many, as_dates,
                          rolling_volatility)
from .ou_core import bare_spec, field_spec, fit


class Freeze(enum.Enum):
    FULL_MEDIAN = "full_median"
    FULL_MEAN = "full_mean"
    PRE_SPLIT_MEDIAN = "pre_split_median"


class Weights(enum.Enum):
    EQUAL = "equal"
    INVERSE_VOL = "inverse_vol"
    VOL_SHARE = "vol_share"


@dataclass(frozen=True)
class DecompRecipe:
    freeze: Freeze = Freeze.FULL_MEDIAN
    weights: Weights = Weights.EQUAL
    split_date: np.datetime64 | None = None

    def __post_init__(self):
        if self.freeze is Freeze.PRE_SPLIT_MEDIAN:
            if self.split_date is None:
                raise ConfigError("PRE_SPLIT_MEDIAN needs a split date")
            object.__setattr__(self, "split_date", np.datetime64(self.split_date, "D"))
        elif self.split_date is not None:
            raise ConfigError(f"{self.freeze.name} takes no split date")

    @property
    def name(self) -> str:
        tag = self.freeze.value
        if self.split_date is not None:
            tag += f"@{self.split_date}"
        return f"{tag}/{self.weights.value}"


def default_recipes(split_date) -> list:
    """Three freezes under equal weights plus two weighting variants of the full-median freeze."""
    return [
        DecompRecipe(Freeze.FULL_MEDIAN, Weights.EQUAL),
        DecompRecipe(Freeze.FULL_MEAN, Weights.EQUAL),
        DecompRecipe(Freeze.PRE_SPLIT_MEDIAN, Weights.EQUAL, split_date),
        DecompRecipe(Freeze.FULL_MEDIAN, Weights.INVERSE_VOL),
        DecompRecipe(Freeze.FULL_MEDIAN, Weights.VOL_SHARE),
    ]


@dataclass
class DecompResult:
    mech_fraction: float
    info_fraction: float
    r2_full: float
    r2_mech: float
    dbic_mech_only: float
    dbic_info_only: float
    dbic_actual: float
    partial_residual_corr: float
    n_obs: int = 0


# ---------------------------------------------------------------------------
# Mechanical proxy


def frozen_volatility(vols: np.ndarray, dates, recipe: DecompRecipe) -> np.ndarray:
    """Per-stock frozen volatility from an N x T rolling-volatility panel."""
    if recipe.freeze is Freeze.FULL_MEAN:
        return vols.mean(axis=1)
    if recipe.freeze is Freeze.FULL_MEDIAN:
        return np.median(vols, axis=1)
    dates = as_dates(dates)
    if not dates[0] < recipe.split_date <= dates[-1]:
        raise ConfigError(f"split date {recipe.split_date} is outside the sample {dates[0]}..{dates[-1]}")
    return np.median(vols[:, dates < recipe.split_date], axis=1)


def portfolio_weights(s: np.ndarray, scheme: Weights) -> np.ndarray:
    if scheme is Weights.EQUAL:
        w = np.ones_like(s)
    elif scheme is Weights.INVERSE_VOL:
        w = 1.0 / s
    else:
        w = s.copy()
    return w / w.sum()


def _quadratic_forms(corrs, u: np.ndarray) -> np.ndarray:
    """u' C(t) u for every window."""
    if isinstance(corrs, RollingCorrelation):
        # u'Cu equals the variance of the u-weighted standardized returns
        R = corrs.panel.returns
        W = corrs.W
        out = np.empty(len(corrs))
        for k in range(len(corrs)):
            block = R[:, k:k + W]
            centered = block - block.mean(axis=1, keepdims=True)
            sd = np.sqrt((centered * centered).mean(axis=1))
            if np.any(sd == 0):
                bad = int(np.flatnonzero(sd == 0)[0])
                raise DegenerateWindowError(corrs.panel.tickers[bad], corrs.end_dates[k])
            p = (u / sd) @ centered
            out[k] = (p @ p) / W
        return out
    return np.array([u @ c.matrix @ u for c in corrs])


def mechanical_proxy(panel: ReturnPanel, corrs, recipe: DecompRecipe, vix: ObservableSeries) -> ObservableSeries:
    """Frozen-volatility portfolio proxy on the correlation-window end dates, scaled to the VIX mean.

    ``corrs`` is either a RollingCorrelation over ``panel`` or a sequence of
    CorrelationWindow objects whose end dates match the rolling-volatility panel.
    """
    W = corrs.W if isinstance(corrs, RollingCorrelation) else panel.n_days - len(corrs) + 1
    vols = rolling_volatility(panel, W)
    end_dates = panel.dates[W - 1:]
    corr_dates = corrs.end_dates if isinstance(corrs, RollingCorrelation) else as_dates([c.end_date for c in corrs])
    if len(corr_dates) != vols.shape[1] or not np.array_equal(corr_dates, end_dates):
        raise DataError("volatility panel and correlation windows do not share end dates")
    s = frozen_volatility(vols, end_dates, recipe)
    w = portfolio_weights(s, recipe.weights)
    q = _quadratic_forms(corrs, w * s)
    if np.any(q < 0):
        raise FitError(f"negative portfolio variance on {end_dates[np.flatnonzero(q < 0)[0]]}")
    raw = ObservableSeries(end_dates, np.sqrt(q), "vix_mech")
    raw_c, vix_c = align_many(raw, vix)
    c = vix_c.values.mean() / raw_c.values.mean()
    return ObservableSeries(raw_c.dates, c * raw_c.values, "vix_mech")


# ---------------------------------------------------------------------------
# Regressions


def _ols_fit(X: np.ndarray, y: np.ndarray):
    coef, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    if rank < X.shape[1]:
        raise FitError("singular regression design")
    return coef, y - X @ coef


def _r2(X: np.ndarray, y: np.ndarray) -> float:
    _, resid = _ols_fit(X, y)
    tss = float(np.sum((y - y.mean()) ** 2))
    if tss == 0:
        raise DataError("response is constant")
    return 1.0 - float(resid @ resid) / tss


def informational_residual(log_vix: ObservableSeries, mech_log: ObservableSeries):
    """OLS residual of log VIX on the log mechanical proxy: (residual, gamma0, gamma1)."""
    a, m = align_many(log_vix, mech_log)
    if len(a) < 3:
        raise DataError("need at least three aligned observations")
    if np.ptp(m.values) == 0:
        raise DataError("mechanical regressor has zero variance")
    X = np.column_stack([np.ones(len(m)), m.values])
    coef, resid = _ols_fit(X, a.values)
    return ObservableSeries(a.dates, resid, "vix_info"), float(coef[0]), float(coef[1])


def fractions_from_r2(r2_mech: float, r2_full: float):
    if r2_full <= 0:
        raise DataError("full-model R^2 is zero; fractions are undefined")
    f_mech = r2_mech / r2_full
    return f_mech, 1.0 - f_mech


def r2_split(psi1: ObservableSeries, mech_log: ObservableSeries, info_residual: ObservableSeries):
    """Sequential R^2 of psi1 on the mechanical then mechanical+informational fields.

    Returns (f_mech, f_info, r2_mech, r2_full).
    """
    y, m, r = align_many(psi1, mech_log, info_residual)
    ones = np.ones(len(y))
    r2_mech = _r2(np.column_stack([ones, m.values]), y.values)
    r2_full = _r2(np.column_stack([ones, m.values, r.values]), y.values)
    f_mech, f_info = fractions_from_r2(r2_mech, r2_full)
    return f_mech, f_info, r2_mech, r2_full


def partial_corr(y: np.ndarray, x: np.ndarray, control: np.ndarray) -> float:
    """Correlation of y and x after both are residualized on [1, control]."""
    X = np.column_stack([np.ones(len(control)), control])
    _, ry = _ols_fit(X, y)
    _, rx = _ols_fit(X, x)
    denom = math.sqrt(float(ry @ ry) * float(rx @ rx))
    return float(ry @ rx) / denom if denom > 0 else float("nan")


def standalone_field_fits(psi1: ObservableSeries, actual_field: ObservableSeries, mech_field: ObservableSeries,
                          info_field: ObservableSeries, seed: int = 0) -> DecompResult:
    """Field-coupled OU fits with the actual, mechanical and informational fields on one sample."""
    y, act, mech, info = align_many(psi1, actual_field, mech_field, info_field)
    bare = fit(bare_spec(), y, seed)
    dbic = {}
    for name, f in (("actual", act), ("mech", mech), ("info", info)):
        f = f.relabel(name)
        dbic[name] = bare.bic - fit(field_spec(f), y, seed).bic
    f_mech, f_info, r2_mech, r2_full = r2_split(y, mech, info)
    return DecompResult(f_mech, f_info, r2_full, r2_mech, dbic["mech"], dbic["info"], dbic["actual"],
                        partial_corr(y.values, info.values, mech.values), len(y))


# ---------------------------------------------------------------------------
# Recipe grid


@dataclass
class GridRow:
    recipe: DecompRecipe
    result: DecompResult | None
    gamma: tuple = (float("nan"), float("nan"))
    error: str = ""

    def record(self) -> dict:
        out = {"recipe": self.recipe.name, "error": self.error, "gamma0": self.gamma[0], "gamma1": self.gamma[1]}
        names = list(DecompResult.__dataclass_fields__)
        for k in names:
            out[k] = getattr(self.result, k) if self.result is not None else float("nan")
        return out


def decompose(panel: ReturnPanel, corrs, log_vix: ObservableSeries, psi1: ObservableSeries,
              recipe: DecompRecipe, seed: int = 0) -> GridRow:
    vix = ObservableSeries(log_vix.dates, np.exp(log_vix.values), "vix")
    proxy = mechanical_proxy(panel, corrs, recipe, vix)
    mech_log = proxy.log("log_vix_mech")
    info, g0, g1 = informational_residual(log_vix, mech_log)
    result = standalone_field_fits(psi1, log_vix, mech_log, info, seed)
    return GridRow(recipe, result, (g0, g1))


def recipe_grid(panel: ReturnPanel, corrs, log_vix: ObservableSeries, psi1: ObservableSeries,
                recipes: list, seed: int = 0) -> list:
    """One row per recipe; a failing recipe records its error instead of aborting the grid."""
    if not recipes:
        raise ConfigError("recipe grid needs at least one recipe")
    rows = []
    for recipe in recipes:
        try:
            rows.append(decompose(panel, corrs, log_vix, psi1, recipe, seed))
        except (FieldAttrError, FitError, ValueError) as exc:
            rows.append(GridRow(recipe, None, error=f"{type(exc).__name__}: {exc}"))
    return rows


def sign_invariance(rows: list) -> dict:
    """Signs of the informational-only and mechanical-only BIC gains across successful recipes."""
    ok = [r.result for r in rows if r.result is not None]
    return {
        "n_recipes": len(rows),
        "n_ok": len(ok),
        "info_positive_all": bool(ok) and all(r.dbic_info_only > 0 for r in ok),
        "mech_nonpositive_all": bool(ok) and all(r.dbic_mech_only <= 0 for r in ok),
    }
