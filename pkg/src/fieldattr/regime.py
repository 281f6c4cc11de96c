"""Two-state Gaussian Hamilton filter for the constrained regime-switching OU models.

Only the equilibrium level switches between a calm (0) and stress (1) state;
theta, sigma and the field loading beta are shared. The regime in force over
the step t -> t+1 sets the exact OU mean

    m_s = exp(-theta) psi_t + (1 - exp(-theta)) (mu_s + beta v_t / theta).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numba
import numpy as np
from scipy import optimize, stats
from scipy.stats import qmc

from .errors import DataError, FitError, ModelDomainError
from .market_data import ObservableSeries
from .ou_core import Family, ModelSpec, _ou_closed_form

LOG_2PI = math.log(2.0 * math.pi)
N_STARTS = 16
MAX_ITER = 2000
MEAN_BOUNDS = (0.0, 1.0)
FIELD_MEAN_BOUNDS = (-10.0, 1.0)


@dataclass(frozen=True)
class RegimeParams:
    theta: float
    mu_calm: float
    mu_stress: float
    beta: float
    sigma: float
    p_cs: float
    p_sc: float

    def __post_init__(self):
        if not (self.theta > 0 and self.sigma > 0):
            raise ModelDomainError("regime model needs theta > 0 and sigma > 0")
        if not (0 <= self.p_cs <= 1 and 0 <= self.p_sc <= 1):
            raise ModelDomainError("transition probabilities must lie in [0, 1]")

    def transition_matrix(self) -> np.ndarray:
        return np.array([[1 - self.p_cs, self.p_cs], [self.p_sc, 1 - self.p_sc]])

    def stationary(self) -> np.ndarray:
        tot = self.p_cs + self.p_sc
        if tot == 0:
            return np.array([1.0, 0.0])
        return np.array([self.p_sc / tot, self.p_cs / tot])

    def swapped(self) -> RegimeParams:
        return RegimeParams(self.theta, self.mu_stress, self.mu_calm, self.beta, self.sigma,
                            self.p_sc, self.p_cs)


@dataclass(frozen=True)
class RegimeStats:
    expected_calm_days: float
    expected_stress_days: float
    stationary_calm: float
    stationary_stress: float
    calm_relaxation_days: float


def regime_stats(params: RegimeParams) -> RegimeStats:
    pi = params.stationary()
    return RegimeStats(1.0 / params.p_cs if params.p_cs > 0 else math.inf,
                       1.0 / params.p_sc if params.p_sc > 0 else math.inf,
                       float(pi[0]), float(pi[1]), 1.0 / params.theta)


@numba.njit(cache=True)
def _filter_kernel(x, v, a, one_minus_a, mu0, mu1, shift_scale, q, p00, p01, p10, p11, pi0, pi1):
    n = x.shape[0] - 1
    probs = np.empty((n, 2))
    ll = 0.0
    pred0, pred1 = pi0, pi1
    log_norm = -0.5 * (math.log(2.0 * math.pi) + math.log(q))
    for t in range(n):
        shift = shift_scale * v[t]
        base = a * x[t] + one_minus_a * shift
        r0 = x[t + 1] - (base + one_minus_a * mu0)
        r1 = x[t + 1] - (base + one_minus_a * mu1)
        l0 = log_norm - 0.5 * r0 * r0 / q
        l1 = log_norm - 0.5 * r1 * r1 / q
        m = max(l0, l1)
        j0 = pred0 * math.exp(l0 - m)
        j1 = pred1 * math.exp(l1 - m)
        tot = j0 + j1
        if not tot > 0.0:
            return -np.inf, probs
        ll += m + math.log(tot)
        f0 = j0 / tot
        f1 = j1 / tot
        probs[t, 0] = f0
        probs[t, 1] = f1
        pred0 = f0 * p00 + f1 * p10
        pred1 = f0 * p01 + f1 * p11
    return ll, probs


def _prepare(params: RegimeParams, series: ObservableSeries, field):
    if len(series) < 2:
        raise DataError("need at least two observations")
    x = np.ascontiguousarray(series.values, dtype=float)
    if field is None:
        v = np.zeros(len(x))
    else:
        if len(field) != len(series) or not np.array_equal(field.dates, series.dates):
            raise DataError("field is not aligned with the series")
        v = np.ascontiguousarray(field.values, dtype=float)
    beta = params.beta if field is not None else 0.0
    one_minus_a = -math.expm1(-params.theta)
    q = params.sigma ** 2 * (-math.expm1(-2 * params.theta)) / (2 * params.theta)
    return x, v, 1.0 - one_minus_a, one_minus_a, beta / params.theta, q


def hamilton_loglik(params: RegimeParams, series: ObservableSeries, field=None):
    """Log likelihood and filtered state probabilities (one row per transition)."""
    x, v, a, oma, shift, q = _prepare(params, series, field)
    pi = params.stationary()
    P = params.transition_matrix()
    ll, probs = _filter_kernel(x, v, a, oma, params.mu_calm, params.mu_stress, shift, q,
                               P[0, 0], P[0, 1], P[1, 0], P[1, 1], pi[0], pi[1])
    if not np.isfinite(ll) or np.any(np.isnan(probs)):
        raise FitError("Hamilton filter produced a non-finite likelihood")
    return float(ll), probs


def enumerate_loglik(params: RegimeParams, series: ObservableSeries, field=None) -> float:
    """Exhaustive marginalization over all 2^(T-1) regime paths (small T only)."""
    x, v, a, oma, shift, q = _prepare(params, series, field)
    n = len(x) - 1
    if n > 16:
        raise DataError("path enumeration is limited to 16 transitions")
    pi = params.stationary()
    P = params.transition_matrix()
    mus = (params.mu_calm, params.mu_stress)
    base = a * x[:-1] + oma * shift * v[:-1]
    dens = np.empty((n, 2))
    for s in range(2):
        r = x[1:] - (base + oma * mus[s])
        dens[:, s] = -0.5 * (LOG_2PI + math.log(q) + r * r / q)
    terms = []
    with np.errstate(divide="ignore"):
        logP = np.log(P)
        logpi = np.log(pi)
    for path in itertools.product((0, 1), repeat=n):
        lp = logpi[path[0]] + dens[0, path[0]]
        for t in range(1, n):
            lp += logP[path[t - 1], path[t]] + dens[t, path[t]]
        terms.append(lp)
    terms = np.array(terms)
    m = terms.max()
    return float(m + math.log(np.exp(terms - m).sum()))


# ---------------------------------------------------------------------------
# Fitting


@dataclass
class RegimeFit:
    params: dict
    loglik: float
    n_trans: int
    with_field: bool
    sample: tuple = ()
    pinned_stress: float | None = None
    converged: bool = True

    @property
    def k(self) -> int:
        return len(self.params) - (1 if self.pinned_stress is not None else 0)

    @property
    def aic(self) -> float:
        return 2.0 * self.k - 2.0 * self.loglik

    @property
    def bic(self) -> float:
        return self.k * math.log(self.n_trans) - 2.0 * self.loglik

    @property
    def label(self) -> str:
        return "M_RS,c+VIX" if self.with_field else "M_RS,c"

    @property
    def regime_params(self) -> RegimeParams:
        p = self.params
        return RegimeParams(p["theta"], p["mu_calm"], p["mu_stress"], p.get("beta", 0.0), p["sigma"],
                            p["p_cs"], p["p_sc"])

    def stats(self) -> RegimeStats:
        return regime_stats(self.regime_params)

    def to_record(self) -> dict:
        s = self.stats()
        return {"family": self.label, "params": dict(self.params), "loglik": self.loglik, "aic": self.aic,
                "bic": self.bic, "n_trans": self.n_trans,
                "regime_stats": {k: getattr(s, k) for k in s.__dataclass_fields__}}


def _logit(p):
    return math.log(p / (1 - p))


def _expit(z):
    return 1.0 / (1.0 + math.exp(-z)) if z > -700 else 0.0


def fit_rs(with_field: bool, series: ObservableSeries, field=None, seed: int = 0,
           pin_stress: float | None = None) -> RegimeFit:
    """Constrained two-state regime-switching OU fit by multistart simplex search.

    Means are box-constrained (``[0, 1]`` without a field; upper bound 1 with a
    field, where the level parameter is no longer on the observable's scale).
    ``pin_stress`` fixes the stress mean instead of estimating it.
    """
    if with_field and field is None:
        raise DataError("with_field=True needs a field series")
    if len(series) < 3:
        raise DataError("need at least three observations")
    if np.ptp(series.values) == 0:
        raise FitError("series is constant; the likelihood is degenerate")
    fld = field if with_field else None
    lo, hi = FIELD_MEAN_BOUNDS if with_field else MEAN_BOUNDS
    spec = ModelSpec(Family.OU_FIELD, (field,)) if with_field else ModelSpec(Family.OU_BARE)
    base = _ou_closed_form(spec, series) or {"theta": 1e-2, "mu": float(np.mean(series.values)),
                                             "beta": 0.0, "sigma": float(np.std(np.diff(series.values)))}
    sd = float(np.std(series.values))
    mu_c = min(max(base["mu"], lo), hi)
    mu_s = min(mu_c + 2 * sd, hi) if pin_stress is None else pin_stress
    names = ["log_theta", "mu_calm"] + (["mu_stress"] if pin_stress is None else []) + \
        (["beta"] if with_field else []) + ["log_sigma", "logit_pcs", "logit_psc"]
    z0 = [math.log(base["theta"]), mu_c] + ([mu_s] if pin_stress is None else []) + \
        ([base["beta"]] if with_field else []) + [math.log(base["sigma"]), _logit(0.02), _logit(0.3)]
    z0 = np.array(z0)
    width = {"log_theta": math.log(5), "mu_calm": max(sd, 0.05), "mu_stress": max(2 * sd, 0.1),
             "beta": max(abs(base.get("beta", 0.0)), 1e-3), "log_sigma": math.log(3),
             "logit_pcs": 2.0, "logit_psc": 2.0}
    w = np.array([width[n] for n in names])
    bounds = [(lo, hi) if n.startswith("mu") else (None, None) for n in names]

    def unpack(z):
        d = dict(zip(names, z))
        return RegimeParams(math.exp(d["log_theta"]), d["mu_calm"],
                            d["mu_stress"] if pin_stress is None else pin_stress,
                            d.get("beta", 0.0), math.exp(d["log_sigma"]),
                            _expit(d["logit_pcs"]), _expit(d["logit_psc"]))

    def objective(z):
        try:
            p = unpack(z)
        except (ModelDomainError, OverflowError):
            return np.inf
        if not (0 < p.p_cs < 1 and 0 < p.p_sc < 1) or not np.isfinite(p.theta) or not np.isfinite(p.sigma):
            return np.inf
        x, v, a, oma, shift, q = _prepare(p, series, fld)
        pi = p.stationary()
        P = p.transition_matrix()
        ll, _ = _filter_kernel(x, v, a, oma, p.mu_calm, p.mu_stress, shift, q,
                               P[0, 0], P[0, 1], P[1, 0], P[1, 1], pi[0], pi[1])
        return -ll if np.isfinite(ll) else np.inf

    pts = qmc.Sobol(d=len(names), scramble=True, seed=seed).random(N_STARTS)
    starts = [z0] + [z0 + (2 * p - 1) * w for p in pts[1:]]
    results = []
    with np.errstate(all="ignore"):
        for z in starts:
            z = np.array([min(max(val, b[0]), b[1]) if b[0] is not None else val for val, b in zip(z, bounds)])
            f0 = objective(z)
            if not np.isfinite(f0):
                continue
            res = optimize.minimize(objective, z, method="Nelder-Mead", bounds=bounds,
                                    options={"maxiter": MAX_ITER, "xatol": 1e-9,
                                             "fatol": 1e-10 * max(1.0, abs(f0)),
                                             "adaptive": True})
            if np.isfinite(res.fun):
                results.append((res.fun, tuple(res.x), bool(res.success)))
    if not results:
        raise FitError("all regime-switching starts failed")
    best = min(results, key=lambda r: (r[0], r[1]))
    p = unpack(np.array(best[1]))
    if pin_stress is None and p.mu_calm > p.mu_stress:
        p = p.swapped()
    params = {"theta": p.theta, "mu_calm": p.mu_calm, "mu_stress": p.mu_stress}
    if with_field:
        params["beta"] = p.beta
    params.update({"sigma": p.sigma, "p_cs": p.p_cs, "p_sc": p.p_sc})
    params = {k: float(v) for k, v in params.items()}
    key = (str(series.dates[0]), str(series.dates[-1]), len(series))
    return RegimeFit(params, -best[0], len(series) - 1, with_field, key, pin_stress, best[2])


# ---------------------------------------------------------------------------
# Likelihood-ratio test


@dataclass(frozen=True)
class LRTResult:
    chi2: float
    df: int
    p: float


def lrt(nested, full) -> LRTResult:
    """Likelihood-ratio test of a nested fit against a fuller one on the same sample."""
    if getattr(nested, "sample", None) != getattr(full, "sample", None):
        raise DataError("LRT needs both fits on the same sample")
    df = full.k - nested.k
    if df < 0:
        raise DataError("the 'full' model has fewer parameters than the nested one")
    diff = full.loglik - nested.loglik
    if diff < -1e-6:
        raise FitError(f"full model loglik below nested by {-diff:.3g}: optimizer failure")
    chi2 = max(2.0 * diff, 0.0)
    p = float(stats.chi2.sf(chi2, df)) if df > 0 else (1.0 if chi2 == 0 else 0.0)
    return LRTResult(chi2, df, p)
