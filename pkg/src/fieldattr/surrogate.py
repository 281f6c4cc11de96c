"""AR(p) marginals of a field, persistence-matched surrogates, and the placebo gate."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import signal

from .errors import DataError, FitError, ModelDomainError
from .market_data import AlignedPair, ObservableSeries, align
from .ou_core import bare_spec, field_spec, fit
from .twod import coupling_gain

BURN_IN = 1000
MAX_FAILURE_RATE = 0.05


@dataclass(frozen=True)
class ARFit:
    p: int
    intercept: float
    coeffs: np.ndarray
    noise_var: float
    aic: float
    stderr: np.ndarray | None = None

    @property
    def mean(self) -> float:
        return self.intercept / (1.0 - float(np.sum(self.coeffs)))

    def companion_roots(self) -> np.ndarray:
        comp = np.zeros((self.p, self.p))
        comp[0] = self.coeffs
        comp[1:, :-1] = np.eye(self.p - 1)
        return np.linalg.eigvals(comp)

    def is_stationary(self) -> bool:
        return bool(np.all(np.abs(self.companion_roots()) < 1.0))


def _lagged(x: np.ndarray, p: int, start: int):
    """Regress x[t] on [1, x[t-1..t-p]] for t >= start."""
    n = len(x)
    cols = [np.ones(n - start)] + [x[start - i:n - i] for i in range(1, p + 1)]
    return np.column_stack(cols), x[start:]


def _ls(X, y):
    coef, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    if rank < X.shape[1]:
        raise FitError("singular AR design")
    resid = y - X @ coef
    return coef, float(resid @ resid)


def fit_ar(series, p_max: int = 10) -> ARFit:
    """Least-squares AR fit with the order chosen by AIC (k = p + 2) on a common sample.

    All orders are compared on observations ``p_max ..``; the chosen order is then
    refitted on every usable observation.
    """
    x = np.asarray(series.values if isinstance(series, ObservableSeries) else series, dtype=float)
    if p_max < 1:
        raise DataError("p_max must be at least 1")
    if len(x) <= p_max + 10:
        raise DataError(f"need more than {p_max + 10} observations, got {len(x)}")
    best = None
    for p in range(1, p_max + 1):
        X, y = _lagged(x, p, p_max)
        _, rss = _ls(X, y)
        n = len(y)
        if rss <= 0:
            raise FitError("AR residual variance is zero")
        aic = n * (math.log(2 * math.pi * rss / n) + 1.0) + 2.0 * (p + 2)
        if best is None or aic < best[1]:
            best = (p, aic)
    p, aic = best
    X, y = _lagged(x, p, p)
    coef, rss = _ls(X, y)
    noise_var = rss / len(y)
    cov = noise_var * np.linalg.inv(X.T @ X)
    return ARFit(p, float(coef[0]), coef[1:].copy(), noise_var, aic, np.sqrt(np.diag(cov))[1:])


def ar_acf(ar: ARFit, max_lag: int) -> np.ndarray:
    """Theoretical autocorrelations 0..max_lag of a stationary AR model (Yule-Walker recursion)."""
    if not ar.is_stationary():
        raise ModelDomainError("AR model is not stationary")
    p = ar.p
    # solve for rho_1..rho_p from the Yule-Walker equations
    A = np.eye(p)
    b = np.zeros(p)
    for k in range(1, p + 1):
        for j in range(1, p + 1):
            lag = abs(k - j)
            if lag == 0:
                b[k - 1] += ar.coeffs[j - 1]
            else:
                A[k - 1, lag - 1] -= ar.coeffs[j - 1]
    rho = np.ones(max(max_lag, p) + 1)
    rho[1:p + 1] = np.linalg.solve(A, b)
    for k in range(p + 1, len(rho)):
        rho[k] = sum(ar.coeffs[j - 1] * rho[k - j] for j in range(1, p + 1))
    return rho[:max_lag + 1]


def _rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, index])))


def _simulate_one(ar: ARFit, n_obs: int, rng: np.random.Generator) -> np.ndarray:
    eps = rng.standard_normal(BURN_IN + n_obs) * math.sqrt(ar.noise_var)
    dev = signal.lfilter([1.0], np.concatenate([[1.0], -ar.coeffs]), eps)
    return ar.mean + dev[BURN_IN:]


def rescale(x: np.ndarray, target_mean: float, target_sd: float) -> np.ndarray:
    """Affine map onto the target mean and (population) standard deviation."""
    sd = float(np.std(x))
    if sd == 0:
        raise DataError("cannot rescale a constant path")
    return target_mean + (x - np.mean(x)) * (target_sd / sd)


def gen_surrogates(ar: ARFit, n_obs: int, count: int = 100, target_mean: float | None = None,
                   target_sd: float | None = None, seed: int = 0) -> list:
    """Independent AR paths after burn-in, each rescaled to the target moments.

    Path ``i`` draws from its own Philox stream keyed by ``(seed, i)``.
    """
    if not ar.is_stationary():
        raise ModelDomainError(f"AR({ar.p}) fit has a root on or outside the unit circle")
    if n_obs < 2 or count < 1:
        raise DataError("need n_obs >= 2 and count >= 1")
    out = []
    for i in range(count):
        x = _simulate_one(ar, n_obs, _rng(seed, i))
        if target_mean is not None or target_sd is not None:
            x = rescale(x, float(np.mean(x)) if target_mean is None else target_mean,
                        float(np.std(x)) if target_sd is None else target_sd)
        out.append(x)
    return out


# ---------------------------------------------------------------------------
# Placebo gate


class Comparison(enum.Enum):
    ONE_D = "1d"
    TWO_D = "2d"


@dataclass
class PlaceboReport:
    comparison: Comparison
    real_gain: float
    placebo_gains: np.ndarray
    ar: ARFit
    failed: list = field(default_factory=list)

    @property
    def n_placebo(self) -> int:
        return len(self.placebo_gains)

    @property
    def empirical_p(self) -> float:
        return float(np.count_nonzero(self.placebo_gains >= self.real_gain)) / self.n_placebo

    def summary(self) -> dict:
        g = np.sort(self.placebo_gains)
        return {
            "comparison": self.comparison.value,
            "real_gain": float(self.real_gain),
            "n_placebo": int(g.size),
            "n_failed": len(self.failed),
            "mean": float(np.mean(g)),
            "sd": float(np.std(g, ddof=1)) if g.size > 1 else float("nan"),
            "max": float(g[-1]),
            "empirical_p": self.empirical_p,
            "ar_order": self.ar.p,
        }

    def rows(self) -> list:
        return [{"surrogate": i, "gain": float(g)} for i, g in enumerate(self.placebo_gains)]


def _gain_1d(psi: ObservableSeries, bare_bic: float, v: ObservableSeries) -> float:
    return bare_bic - fit(field_spec(v), psi).bic


def placebo_gate(series: ObservableSeries, real_field: ObservableSeries, count: int = 100, seed: int = 0,
                 comparison: Comparison = Comparison.ONE_D, p_max: int = 10) -> PlaceboReport:
    """Compare the real field's BIC gain against AR-matched surrogate fields.

    ONE_D scores BIC(bare OU) - BIC(field-coupled OU); TWO_D scores the VAR(1)
    coupling gain. Surrogates whose fit fails are excluded and listed in ``failed``.
    """
    pair = align(series, real_field)
    psi, v = pair.series()
    ar = fit_ar(v, p_max)
    target_mean, target_sd = float(np.mean(v.values)), float(np.std(v.values))
    paths = gen_surrogates(ar, len(v), count, target_mean, target_sd, seed)

    if comparison is Comparison.ONE_D:
        bare_bic = fit(bare_spec(), psi).bic

        def score(values):
            return _gain_1d(psi, bare_bic, ObservableSeries(psi.dates, values, "placebo"))
    else:
        def score(values):
            return coupling_gain(AlignedPair(psi.dates, psi.values, values, psi.label, "placebo"))

    real_gain = score(v.values)
    gains, failed = [], []
    for i, x in enumerate(paths):
        try:
            g = score(x)
        except (FitError, ModelDomainError, DataError, np.linalg.LinAlgError):
            failed.append(i)
            continue
        gains.append(g)
    if len(failed) / count >= MAX_FAILURE_RATE:
        raise FitError(f"{len(failed)} of {count} surrogate fits failed")
    return PlaceboReport(comparison, float(real_gain), np.array(gains), ar, failed)
