"""One-dimensional stochastic model hierarchy: transition laws, likelihoods, and MLE.

Families and their parameter vectors::

    OU_BARE          theta, mu, sigma                       (M0)
    OU_FIELD         theta, mu, beta, sigma                 (M2)
    OU_FIELD_HETERO  theta, mu, beta, sigma0, sigma1        (M2')
    QUARTIC          a2, a4, mu, sigma                      (M1)
    QUARTIC_FIELD    a2, a4, mu, beta, sigma                (M3)
    OU_MULTIFIELD    theta, mu, beta_1..beta_k, sigma

OU families use the exact one-step Gaussian transition with the field held
constant over each step. QUARTIC, QUARTIC_FIELD and OU_FIELD_HETERO use the
Euler one-step Gaussian (mean psi + drift*dt, variance sigma(psi)^2*dt).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize, stats
from scipy.stats import qmc

from .errors import DataError, FitError, ModelDomainError
from .market_data import ObservableSeries

LOG_2PI = math.log(2.0 * math.pi)
N_STARTS = 16
MAX_ITER = 2000
REL_TOL = 1e-10


class Family(enum.Enum):
    OU_BARE = "M0"
    OU_FIELD = "M2"
    OU_FIELD_HETERO = "M2'"
    QUARTIC = "M1"
    QUARTIC_FIELD = "M3"
    OU_MULTIFIELD = "OU_MULTIFIELD"

    @property
    def exact(self) -> bool:
        return self in (Family.OU_BARE, Family.OU_FIELD, Family.OU_MULTIFIELD)

    @property
    def arity(self):
        if self in (Family.OU_BARE, Family.QUARTIC):
            return 0
        if self is Family.OU_MULTIFIELD:
            return None
        return 1


@dataclass(frozen=True)
class ModelSpec:
    family: Family
    fields: tuple = ()
    dt: float = 1.0

    def __post_init__(self):
        fields = tuple(self.fields)
        arity = self.family.arity
        if arity is None:
            if len(fields) < 1:
                raise DataError("OU_MULTIFIELD needs at least one field")
        elif len(fields) != arity:
            raise DataError(f"{self.family.name} takes {arity} field(s), got {len(fields)}")
        object.__setattr__(self, "fields", fields)

    @property
    def param_names(self) -> tuple:
        fam = self.family
        if fam is Family.OU_BARE:
            return ("theta", "mu", "sigma")
        if fam is Family.OU_FIELD:
            return ("theta", "mu", "beta", "sigma")
        if fam is Family.OU_FIELD_HETERO:
            return ("theta", "mu", "beta", "sigma0", "sigma1")
        if fam is Family.QUARTIC:
            return ("a2", "a4", "mu", "sigma")
        if fam is Family.QUARTIC_FIELD:
            return ("a2", "a4", "mu", "beta", "sigma")
        return ("theta", "mu") + tuple(f"beta_{j + 1}" for j in range(len(self.fields))) + ("sigma",)

    @property
    def n_params(self) -> int:
        return len(self.param_names)

    def field_matrix(self) -> np.ndarray:
        """Fields stacked as a (k, n) array (k may be 0)."""
        if not self.fields:
            return np.empty((0, 0))
        return np.vstack([np.asarray(f.values, dtype=float) for f in self.fields])

    def with_fields(self, *fields) -> ModelSpec:
        return ModelSpec(self.family, tuple(fields), self.dt)


def bare_spec() -> ModelSpec:
    return ModelSpec(Family.OU_BARE)


def field_spec(field_series: ObservableSeries) -> ModelSpec:
    return ModelSpec(Family.OU_FIELD, (field_series,))


POSITIVE = {"theta", "sigma", "sigma0", "a4"}


@dataclass
class ModelFit:
    spec: ModelSpec
    params: dict
    loglik: float
    n_trans: int
    sample: tuple = ()  # (first date, last date, length) of the fitted series
    converged: bool = True
    n_failed_starts: int = 0
    method: str = ""

    @property
    def k(self) -> int:
        return len(self.params)

    @property
    def aic(self) -> float:
        return 2.0 * self.k - 2.0 * self.loglik

    @property
    def bic(self) -> float:
        return self.k * math.log(self.n_trans) - 2.0 * self.loglik

    @property
    def label(self) -> str:
        return self.spec.family.value

    def to_record(self) -> dict:
        return {
            "family": self.spec.family.name,
            "params": {k: float(v) for k, v in self.params.items()},
            "loglik": float(self.loglik),
            "aic": float(self.aic),
            "bic": float(self.bic),
            "n_trans": int(self.n_trans),
        }


def _sample_key(series: ObservableSeries) -> tuple:
    return (str(series.dates[0]), str(series.dates[-1]), len(series))


# ---------------------------------------------------------------------------
# Transition moments


def _ou_moments(theta, mu, betas, sigma, psi, fields, dt):
    """Exact OU step: mean and variance for arrays of starting states."""
    one_minus_a = -math.expm1(-theta * dt)
    a = 1.0 - one_minus_a
    target = mu
    if len(betas):
        target = mu + np.dot(betas, fields) / theta
    mean = a * psi + one_minus_a * target
    var = sigma * sigma * (-math.expm1(-2.0 * theta * dt)) / (2.0 * theta)
    return mean, var


def exact_step(params: dict, psi, v=None, dt: float = 1.0):
    """Exact one-step mean and variance of the (field-coupled) OU transition.

    Works elementwise on arrays of ``psi`` and ``v``; without ``v`` the field term is dropped.
    """
    theta, mu, sigma = params["theta"], params["mu"], params["sigma"]
    one_minus_a = -math.expm1(-theta * dt)
    target = mu if v is None else mu + params.get("beta", 0.0) / theta * np.asarray(v, dtype=float)
    mean = (1.0 - one_minus_a) * np.asarray(psi, dtype=float) + one_minus_a * target
    var = sigma * sigma * (-math.expm1(-2.0 * theta * dt)) / (2.0 * theta)
    if np.ndim(mean) == 0:
        mean = float(mean)
    return mean, var


def drift(spec: ModelSpec, params: dict, psi, fields=None):
    """Deterministic drift of the continuous-time model (per unit time)."""
    fam = spec.family
    psi = np.asarray(psi, dtype=float)
    fields = np.zeros((0,) + psi.shape) if fields is None else np.asarray(fields, dtype=float)
    if fam in (Family.QUARTIC, Family.QUARTIC_FIELD):
        x = psi - params["mu"]
        out = -params["a2"] * x - params["a4"] * x ** 3
        if fam is Family.QUARTIC_FIELD:
            out = out + params["beta"] * fields[0]
        return out
    out = -params["theta"] * (psi - params["mu"])
    for j, b in enumerate(_betas(spec, params)):
        out = out + b * fields[j]
    return out


def diffusion(spec: ModelSpec, params: dict, psi):
    psi = np.asarray(psi, dtype=float)
    if spec.family is Family.OU_FIELD_HETERO:
        return params["sigma0"] + params["sigma1"] * psi
    return np.full(psi.shape, params["sigma"])


def _betas(spec: ModelSpec, params: dict) -> np.ndarray:
    fam = spec.family
    if fam in (Family.OU_FIELD, Family.OU_FIELD_HETERO, Family.QUARTIC_FIELD):
        return np.array([params["beta"]])
    if fam is Family.OU_MULTIFIELD:
        return np.array([params[f"beta_{j + 1}"] for j in range(len(spec.fields))])
    return np.zeros(0)


def one_step_moments(spec: ModelSpec, params: dict, psi_prev, fields_prev=None):
    """Predictive mean and variance of psi[t+1] given psi[t] and the fields at t."""
    psi_prev = np.asarray(psi_prev, dtype=float)
    if fields_prev is None:
        fields_prev = np.zeros((0, psi_prev.size))
    fields_prev = np.asarray(fields_prev, dtype=float).reshape(-1, psi_prev.size)
    if spec.family.exact:
        mean, var = _ou_moments(params["theta"], params["mu"], _betas(spec, params), params["sigma"],
                                psi_prev, fields_prev, spec.dt)
        return mean, np.full(psi_prev.shape, var)
    mean = psi_prev + drift(spec, params, psi_prev, fields_prev) * spec.dt
    sd = diffusion(spec, params, psi_prev)
    return mean, sd * sd * spec.dt


def _check_aligned(spec: ModelSpec, series: ObservableSeries):
    for f in spec.fields:
        if len(f) != len(series) or not np.array_equal(f.dates, series.dates):
            raise DataError(f"field {f.label!r} is not aligned with series {series.label!r}")


def _check_hetero(params, series: ObservableSeries):
    sd = params["sigma0"] + params["sigma1"] * series.values
    bad = np.flatnonzero(sd <= 0)
    if bad.size:
        raise ModelDomainError(f"state-dependent sigma is non-positive on {series.dates[bad[0]]}")


def loglik_terms(spec: ModelSpec, params: dict, series: ObservableSeries) -> np.ndarray:
    """Per-transition Gaussian log densities, length len(series) - 1."""
    if len(series) < 2:
        raise DataError("need at least two observations")
    _check_aligned(spec, series)
    if spec.family is Family.OU_FIELD_HETERO:
        _check_hetero(params, series)
    x = series.values
    fm = spec.field_matrix()
    fields_prev = fm[:, :-1] if fm.size else None
    mean, var = one_step_moments(spec, params, x[:-1], fields_prev)
    resid = x[1:] - mean
    return -0.5 * (LOG_2PI + np.log(var) + resid * resid / var)


def loglik(spec: ModelSpec, params: dict, series: ObservableSeries) -> float:
    return float(np.sum(loglik_terms(spec, params, series)))


# ---------------------------------------------------------------------------
# Fitting


def _design(spec: ModelSpec, series: ObservableSeries):
    x = series.values
    fm = spec.field_matrix()
    cols = [np.ones(len(x) - 1), x[:-1]]
    if fm.size:
        cols.extend(fm[:, :-1])
    return np.column_stack(cols), x[1:]


def _ols(X, y):
    coef, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    if rank < X.shape[1]:
        raise FitError("singular regression design")
    resid = y - X @ coef
    return coef, float(resid @ resid)


def _ou_closed_form(spec: ModelSpec, series: ObservableSeries):
    """Exact MLE via the linear-Gaussian reparameterization, or None if off the domain.

    psi[t+1] = c + a psi[t] + d.v[t] + eta with a = exp(-theta dt) is a bijection
    from theta > 0 onto 0 < a < 1, so interior OLS estimates are the exact MLE.
    """
    X, y = _design(spec, series)
    coef, rss = _ols(X, y)
    n = len(y)
    a = coef[1]
    if not (0.0 < a < 1.0) or rss <= 0:
        return None
    dt = spec.dt
    theta = -math.log(a) / dt
    mu = coef[0] / (1.0 - a)
    q = rss / n
    sigma = math.sqrt(2.0 * theta * q / (1.0 - a * a))
    params = {"theta": theta, "mu": mu}
    betas = coef[2:] * theta / (1.0 - a)
    names = spec.param_names
    for name, b in zip([nm for nm in names if nm.startswith("beta")], betas):
        params[name] = float(b)
    params["sigma"] = sigma
    return {k: float(params[k]) for k in names}


def _anchor(spec: ModelSpec, series: ObservableSeries) -> dict:
    """Data-driven starting point for the numerical optimizer."""
    fam = spec.family
    ou_spec = ModelSpec(Family.OU_BARE) if fam in (Family.OU_BARE, Family.QUARTIC) else \
        ModelSpec(Family.OU_MULTIFIELD if fam is Family.OU_MULTIFIELD else Family.OU_FIELD, spec.fields)
    base = _ou_closed_form(ou_spec, series)
    if base is None:
        x = series.values
        sd_inc = float(np.std(np.diff(x))) or 1e-8
        base = {"theta": 1e-3, "mu": float(np.mean(x))}
        for nm in ou_spec.param_names:
            if nm.startswith("beta"):
                base[nm] = 0.0
        base["sigma"] = sd_inc
    if fam in (Family.OU_BARE, Family.OU_FIELD, Family.OU_MULTIFIELD):
        return {k: base[k] for k in spec.param_names}
    if fam is Family.OU_FIELD_HETERO:
        return {"theta": base["theta"], "mu": base["mu"], "beta": base["beta"],
                "sigma0": base["sigma"], "sigma1": 0.0}
    sd = float(np.std(series.values)) or 1.0
    out = {"a2": base["theta"], "a4": base["theta"] / (sd * sd) * 1e-2, "mu": base["mu"]}
    if fam is Family.QUARTIC_FIELD:
        out["beta"] = base["beta"]
    out["sigma"] = base["sigma"]
    return out


def _to_z(names, params):
    return np.array([math.log(params[n]) if n in POSITIVE else params[n] for n in names])


def _from_z(names, z):
    return {n: (math.exp(v) if n in POSITIVE else float(v)) for n, v in zip(names, z)}


def _half_widths(names, anchor, series: ObservableSeries, spec: ModelSpec):
    sd = float(np.std(series.values)) or 1.0
    out = []
    for n in names:
        if n in POSITIVE:
            out.append(math.log(5.0))
        elif n == "mu":
            out.append(max(abs(anchor[n]) * 0.5, sd))
        elif n.startswith("beta"):
            out.append(max(abs(anchor[n]), 1e-3))
        elif n == "sigma1":
            out.append(max(abs(anchor["sigma0"]) / max(np.max(np.abs(series.values)), 1e-12) * 0.5, 1e-6))
        else:  # a2
            out.append(max(abs(anchor[n]), 1e-3))
    return np.array(out)


def fit(spec: ModelSpec, series: ObservableSeries, seed: int = 0) -> ModelFit:
    """Maximum-likelihood fit, deterministic given ``seed``."""
    _check_aligned(spec, series)
    if len(series) < 3:
        raise DataError("need at least three observations to fit")
    if np.ptp(series.values) == 0:
        raise FitError(f"series {series.label!r} is constant; the likelihood is degenerate")
    n_trans = len(series) - 1
    key = _sample_key(series)
    if spec.family.exact:
        params = _ou_closed_form(spec, series)
        if params is not None:
            return ModelFit(spec, params, loglik(spec, params, series), n_trans, key, True, 0, "closed-form")
    return _multistart(spec, series, seed, n_trans, key)


def _multistart(spec, series, seed, n_trans, key) -> ModelFit:
    names = spec.param_names
    anchor = _anchor(spec, series)
    z0 = _to_z(names, anchor)
    width = _half_widths(names, anchor, series, spec)
    sobol = qmc.Sobol(d=len(names), scramble=True, seed=seed)
    pts = sobol.random(N_STARTS)
    starts = [z0] + [z0 + (2.0 * p - 1.0) * width for p in pts[1:]]

    def objective(z):
        try:
            p = _from_z(names, z)
            val = loglik(spec, p, series)
        except (ModelDomainError, OverflowError, FloatingPointError):
            return np.inf
        return -val if np.isfinite(val) else np.inf

    results = []
    n_failed = 0
    with np.errstate(all="ignore"):
        for z in starts:
            if not np.isfinite(objective(z)):
                n_failed += 1
                continue
            scale = max(1.0, abs(objective(z)))
            res = optimize.minimize(objective, z, method="Nelder-Mead",
                                    options={"maxiter": MAX_ITER, "xatol": 1e-9,
                                             "fatol": REL_TOL * scale, "adaptive": len(z) > 3})
            if not np.isfinite(res.fun):
                n_failed += 1
                continue
            results.append((res.fun, tuple(res.x), bool(res.success)))
    if not results:
        raise FitError(f"all {len(starts)} starts failed for {spec.family.name}")
    best = min(results, key=lambda r: (r[0], r[1]))
    params = _from_z(names, np.array(best[1]))
    return ModelFit(spec, params, -best[0], n_trans, key, best[2], n_failed, "multistart")


# ---------------------------------------------------------------------------
# Derived quantities


@dataclass(frozen=True)
class AttributionSummary:
    tau_auto: float
    tau_cond: float
    chi: float
    scpa: float


def attribution_from_rates(theta0: float, theta: float, beta: float = float("nan")) -> AttributionSummary:
    tau_auto, tau_cond = 1.0 / theta0, 1.0 / theta
    return AttributionSummary(tau_auto, tau_cond, beta / theta, 1.0 - tau_cond / tau_auto)


def attribution(fit0: ModelFit, fit2: ModelFit) -> AttributionSummary:
    if fit0.sample != fit2.sample:
        raise DataError(f"fits use different samples: {fit0.sample} vs {fit2.sample}")
    return attribution_from_rates(fit0.params["theta"], fit2.params["theta"], fit2.params.get("beta", 0.0))


def mu_eff(fit2, v):
    """Conditional equilibrium mu + (beta/theta) v of a field-coupled OU fit (or params dict)."""
    p = fit2.params if isinstance(fit2, ModelFit) else fit2
    if "beta" not in p:
        raise DataError("mu_eff needs a single-field coupled fit")
    out = p["mu"] + p["beta"] / p["theta"] * np.asarray(v, dtype=float)
    return float(out) if np.ndim(out) == 0 else out


def delta_bic(bare: ModelFit, other: ModelFit) -> float:
    """BIC(bare) - BIC(other); positive favours ``other``."""
    return bare.bic - other.bic


def pit_series(fit_: ModelFit, series: ObservableSeries, fields=None) -> ObservableSeries:
    """One-step probability integral transforms, dated at the predicted observation."""
    spec = fit_.spec if fields is None else fit_.spec.with_fields(*fields)
    _check_aligned(spec, series)
    fm = spec.field_matrix()
    mean, var = one_step_moments(spec, fit_.params, series.values[:-1], fm[:, :-1] if fm.size else None)
    u = stats.norm.cdf((series.values[1:] - mean) / np.sqrt(var))
    return ObservableSeries(series.dates[1:], u, "pit")


@dataclass(frozen=True)
class PitSummary:
    ks: float
    critical_5pct: float
    n: int

    @property
    def rejects(self) -> bool:
        return self.ks > self.critical_5pct


def pit_ks(pit: ObservableSeries, mask=None) -> PitSummary:
    u = pit.values if mask is None else pit.values[np.asarray(mask, dtype=bool)]
    if u.size == 0:
        raise DataError("empty PIT subsample")
    d = float(stats.kstest(u, "uniform").statistic)
    return PitSummary(d, float(stats.kstwo.ppf(0.95, u.size)), int(u.size))
