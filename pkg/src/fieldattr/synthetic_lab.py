"""Ground-truth simulators, the Euler-Maruyama moment oracle, and planted worlds.

All randomness goes through :func:`make_rng`, a Philox counter-based generator,
so streams are reproducible across platforms for a given integer seed.
"""

from __future__ import annotations

import math
import dataclasses
from dataclasses import dataclass
from pathlib import Path

import numba
import numpy as np
from scipy import signal

from .errors import DataError, ModelDomainError
from .market_data import (AlignedPair, ObservableSeries, ReturnPanel, prices_to_returns,
                          write_field, write_prices)
from .ou_core import Family, ModelSpec, exact_step
from .twod import LinearSystem2D, discretize

EXPLOSION = 1e6
START_DATE = "2004-01-02"


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def business_days(n: int, start: str = START_DATE) -> np.ndarray:
    first = np.busday_offset(np.datetime64(start, "D"), 0, roll="forward")
    return np.busday_offset(first, np.arange(n))


def _canonical(spec: ModelSpec, params: dict):
    """(a2, a4, mu, betas, sig0, sig1): every family's drift/diffusion in one shape.

    drift = -a2 (x - mu) - a4 (x - mu)^3 + betas . v,   diffusion = sig0 + sig1 x
    """
    fam = spec.family
    k = len(spec.fields)
    if fam in (Family.QUARTIC, Family.QUARTIC_FIELD):
        betas = [params["beta"]] if fam is Family.QUARTIC_FIELD else []
        return params["a2"], params["a4"], params["mu"], np.array(betas, float), params["sigma"], 0.0
    if fam is Family.OU_MULTIFIELD:
        betas = [params[f"beta_{j + 1}"] for j in range(k)]
    else:
        betas = [params["beta"]] if "beta" in params else []
    if fam is Family.OU_FIELD_HETERO:
        return params["theta"], 0.0, params["mu"], np.array(betas, float), params["sigma0"], params["sigma1"]
    return params["theta"], 0.0, params["mu"], np.array(betas, float), params["sigma"], 0.0


@numba.njit(cache=True)
def _euler_path(x0, forcing, a2, a4, mu, sig0, sig1, dt, z):
    """Sub-stepped Euler path; ``forcing[t]`` is betas . v_t, ``z`` is (n-1, n_sub)."""
    n = z.shape[0] + 1
    out = np.empty(n)
    out[0] = x0
    x = x0
    sq = math.sqrt(dt)
    for t in range(n - 1):
        f = forcing[t]
        for s in range(z.shape[1]):
            d = x - mu
            x = x + (-a2 * d - a4 * d * d * d + f) * dt + (sig0 + sig1 * x) * sq * z[t, s]
        if not abs(x) < 1e6:
            return out[: t + 1], False
        out[t + 1] = x
    return out, True


def _field_values(spec: ModelSpec, field_, n):
    if spec.family.arity == 0:
        return np.empty((0, n)), None
    if field_ is None:
        raise DataError(f"{spec.family.name} needs a field to simulate")
    fields = field_ if isinstance(field_, (list, tuple)) else [field_]
    mats, dates = [], None
    for f in fields:
        vals = f.values if isinstance(f, ObservableSeries) else np.asarray(f, float)
        if len(vals) < n:
            raise DataError(f"field has {len(vals)} values, need {n}")
        mats.append(vals[:n])
        if dates is None and isinstance(f, ObservableSeries):
            dates = f.dates[:n]
    return np.vstack(mats), dates


def simulate_1d(spec: ModelSpec, params: dict, n: int, seed: int, field=None, psi0=None,
                substep: float = 1e-3, label: str = "psi") -> ObservableSeries:
    """Daily path of a 1-D model: exact law for OU families, sub-stepped Euler otherwise."""
    rng = make_rng(seed)
    fields, dates = _field_values(spec, field, n)
    if dates is None:
        dates = business_days(n)
    a2, a4, mu, betas, sig0, sig1 = _canonical(spec, params)
    forcing = betas @ fields if betas.size else np.zeros(n)
    if spec.family.exact:
        theta, sigma = params["theta"], params["sigma"]
        if theta <= 0 or sigma < 0:
            raise ModelDomainError("OU simulation needs theta > 0 and sigma >= 0")
        target = mu + forcing / theta
        _, q = exact_step({"theta": theta, "mu": 0.0, "sigma": sigma}, 0.0, dt=spec.dt)
        if psi0 is None:
            psi0 = target[0] + sigma / math.sqrt(2 * theta) * rng.standard_normal()
        a = math.exp(-theta * spec.dt)
        drive = (1.0 - a) * target[:-1] + math.sqrt(q) * rng.standard_normal(n - 1)
        path = signal.lfilter([1.0], [1.0, -a], drive, zi=[a * psi0])[0]
        values = np.concatenate([[psi0], path])
    else:
        if psi0 is None:
            psi0 = mu + (forcing[0] / a2 if a2 != 0 else 0.0)
        n_sub = int(round(spec.dt / substep))
        z = rng.standard_normal((n - 1, n_sub))
        values, ok = _euler_path(float(psi0), forcing.astype(float), a2, a4, mu, sig0, sig1,
                                 spec.dt / n_sub, z)
        if not ok:
            raise ModelDomainError(f"simulation exploded (|psi| > {EXPLOSION:g}) at step {len(values)}")
    return ObservableSeries(dates, values, label)


def simulate_ar1_field(n: int, seed: int, mean: float = math.log(18.0), sd: float = 0.35,
                       phi: float = 0.98, label: str = "log_vix") -> ObservableSeries:
    """Stationary Gaussian AR(1), a stand-in for a persistent log-volatility field."""
    rng = make_rng(seed)
    innov_sd = sd * math.sqrt(1 - phi * phi)
    e = innov_sd * rng.standard_normal(n)
    e[0] = sd * rng.standard_normal()
    x = signal.lfilter([1.0], [1.0, -phi], e)
    return ObservableSeries(business_days(n), mean + x, label)


@dataclass
class EulerMoments:
    mean: float
    var: float
    se_mean: float
    se_var: float


def euler_oracle(spec: ModelSpec, params: dict, psi0: float, v: float = 0.0, n_paths: int = 100_000,
                 dt: float = 1e-3, seed: int = 0, horizon: float = 1.0) -> EulerMoments:
    """Monte-Carlo moments at ``horizon`` from Euler-Maruyama paths with the field held at ``v``."""
    rng = make_rng(seed)
    a2, a4, mu, betas, sig0, sig1 = _canonical(spec, params)
    force = float(np.sum(betas) * v) if betas.size else 0.0
    x = np.full(n_paths, float(psi0))
    n_steps = int(round(horizon / dt))
    sq = math.sqrt(dt)
    for _ in range(n_steps):
        d = x - mu
        x = x + (-a2 * d - a4 * d ** 3 + force) * dt + (sig0 + sig1 * x) * sq * rng.standard_normal(n_paths)
    m = math.fsum(x) / n_paths
    dev = x - m
    var = math.fsum(dev * dev) / (n_paths - 1)
    m4 = math.fsum(dev ** 4) / n_paths
    return EulerMoments(m, var, math.sqrt(var / n_paths), math.sqrt(max(m4 - var * var, 0.0) / n_paths))


def simulate_var1(system: LinearSystem2D, n: int, seed: int, x0=None, dt: float = 1.0):
    """Exact discrete-time path of a stable 2-D linear-Gaussian system."""
    if np.any(np.linalg.eigvals(system.drift).real >= 0):
        raise ModelDomainError("drift matrix is not stable")
    rng = make_rng(seed)
    c, phi, Q = discretize(system, dt)
    chol = np.linalg.cholesky(Q + 1e-300 * np.eye(2))
    z = rng.standard_normal((n - 1, 2)) @ chol.T
    out = np.empty((n, 2))
    out[0] = system.means if x0 is None else x0
    for t in range(n - 1):
        out[t + 1] = c + phi @ out[t] + z[t]
    return AlignedPair(business_days(n), out[:, 0], out[:, 1], "psi", "v")


# ---------------------------------------------------------------------------
# Planted worlds


@dataclass
class SimWorld:
    kind: str
    true_params: dict
    n_obs: int
    seed: int
    series: ObservableSeries | None = None
    field: ObservableSeries | None = None
    extra: dict = dataclasses.field(default_factory=dict)

    def to_files(self, directory) -> list:
        """Write the world in the same formats :mod:`market_data` reads."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        written = []
        if "prices" in self.extra:
            p = directory / "prices.csv"
            write_prices(p, self.extra["tickers"], self.extra["price_dates"], self.extra["prices"])
            written.append(p)
        for name, s in (("series", self.series), ("field", self.field)):
            if s is not None:
                p = directory / f"{s.label or name}.csv"
                write_field(p, s)
                written.append(p)
        for name, s in self.extra.items():
            if isinstance(s, ObservableSeries):
                p = directory / f"{name}.csv"
                write_field(p, s)
                written.append(p)
        return written


def m2_world(n: int, seed: int, params: dict | None = None, field_params: dict | None = None) -> SimWorld:
    """Field-coupled OU observable driven by a persistent AR(1) log-volatility field."""
    params = params or REFERENCE_M2
    fld = simulate_ar1_field(n, seed * 2 + 1, **(field_params or {}))
    spec = ModelSpec(Family.OU_FIELD, (fld,))
    psi = simulate_1d(spec, params, n, seed * 2, field=fld, label="psi1")
    return SimWorld("M2", dict(params), n, seed, psi, fld)


def m0_world(n: int, seed: int, params: dict | None = None, field_params: dict | None = None) -> SimWorld:
    """Bare OU observable plus an independent field of the same law as :func:`m2_world`."""
    params = params or REFERENCE_M0
    fld = simulate_ar1_field(n, seed * 2 + 1, **(field_params or {}))
    psi = simulate_1d(ModelSpec(Family.OU_BARE), params, n, seed * 2, label="psi1")
    return SimWorld("M0", dict(params), n, seed, psi, fld)


def market_world(n_stocks: int = 20, n_days: int = 1500, seed: int = 0, field_phi: float = 0.985,
                 field_sd: float = 0.3, coupling: float = 1.6, corr_noise: float = 0.3,
                 info_sd: float = 0.08) -> SimWorld:
    """Price panel whose market-mode strength follows a latent log-volatility field.

    The observed "VIX" is the exponentiated field plus an independent persistent
    component, so log VIX carries both a realized-covariance and an extra channel.
    """
    rng = make_rng(seed)
    T = n_days + 1
    v = simulate_ar1_field(T, seed + 10_000, mean=0.0, sd=field_sd, phi=field_phi).values
    noise = simulate_ar1_field(T, seed + 20_000, mean=0.0, sd=corr_noise, phi=0.95).values
    logit = -1.0 + coupling * v / field_sd + noise
    rho = 1.0 / (1.0 + np.exp(-logit))
    base_vol = rng.uniform(0.008, 0.025, n_stocks)
    level = np.exp(v)
    f = rng.standard_normal(T)
    e = rng.standard_normal((n_stocks, T))
    r = base_vol[:, None] * level[None, :] * (np.sqrt(rho)[None, :] * f[None, :]
                                               + np.sqrt(1 - rho)[None, :] * e)
    prices = 100.0 * np.exp(np.cumsum(r, axis=1))
    dates = business_days(T)
    tickers = [f"S{i:03d}" for i in range(n_stocks)]
    info = simulate_ar1_field(T, seed + 30_000, mean=0.0, sd=info_sd, phi=0.97).values
    vix = ObservableSeries(dates, 18.0 * np.exp(v + info), "vix")
    extra = {"prices": prices, "tickers": tickers, "price_dates": dates, "vix": vix}
    return SimWorld("market", {"coupling": coupling, "field_phi": field_phi}, n_days, seed, None, None, extra)


def world_panel(world: SimWorld) -> ReturnPanel:
    return prices_to_returns(world.extra["tickers"], world.extra["price_dates"], world.extra["prices"])


# Baseline 60-day-window parameter scale; M0's mu and sigma are set to the
# observable's sample mean and the M2 noise level.
REFERENCE_M2 = {"theta": 0.01640, "mu": -0.6256, "beta": 0.00572, "sigma": 0.00942}
REFERENCE_M0 = {"theta": 0.00335, "mu": 0.3778, "sigma": 0.00942}


def decomposition_world(seed: int, n_stocks: int = 10, n_days: int = 2500, info_sd: float = 0.35,
                        info_phi: float = 0.98, mech_sd: float = 0.3, params: dict | None = None) -> SimWorld:
    """Planted informational driver: psi follows M2 forced by a component of log VIX
    that is independent of the return panel.

    The panel's market-mode correlation follows a latent mechanical factor ``m``;
    log VIX = log 18 + m + info, and ``series`` is driven by ``info`` alone.
    """
    rng = make_rng(seed)
    T = n_days + 1
    m = simulate_ar1_field(T, 3 * seed + 40_001, mean=0.0, sd=mech_sd, phi=0.985).values
    rho = 1.0 / (1.0 + np.exp(-(-0.5 + 2.5 * m / mech_sd)))
    base_vol = rng.uniform(0.008, 0.025, n_stocks)
    f = rng.standard_normal(T)
    e = rng.standard_normal((n_stocks, T))
    r = base_vol[:, None] * (np.sqrt(rho)[None, :] * f[None, :] + np.sqrt(1 - rho)[None, :] * e)
    prices = 100.0 * np.exp(np.cumsum(r, axis=1))
    dates = business_days(T)
    tickers = [f"S{i:03d}" for i in range(n_stocks)]
    info = simulate_ar1_field(T, 3 * seed + 40_002, mean=0.0, sd=info_sd, phi=info_phi, label="info")
    vix = ObservableSeries(dates, 18.0 * np.exp(m + info.values), "vix")
    p = dict(REFERENCE_M2, mu=0.3778) if params is None else params
    psi = simulate_1d(ModelSpec(Family.OU_FIELD, (info,)), p, T, 3 * seed + 40_003, field=info, label="psi1")
    extra = {"prices": prices, "tickers": tickers, "price_dates": dates, "vix": vix, "mech_latent": m}
    return SimWorld("decomposition", p, T, seed, psi, info, extra)


def simulate_rs(params, n: int, seed: int, field: ObservableSeries | None = None, label: str = "psi"):
    """Two-state regime-switching OU path; returns (series, states) with states[t] the
    regime in force over the step t -> t+1 (length n - 1)."""
    rng = make_rng(seed)
    P = params.transition_matrix()
    pi = params.stationary()
    v = np.zeros(n) if field is None else np.asarray(field.values[:n], dtype=float)
    dates = business_days(n) if field is None else field.dates[:n]
    a = math.exp(-params.theta)
    q = params.sigma ** 2 * (1 - a * a) / (2 * params.theta)
    mus = np.array([params.mu_calm, params.mu_stress])
    u = rng.random(n)
    z = rng.standard_normal(n)
    states = np.empty(n - 1, dtype=np.int64)
    s = int(u[0] >= pi[0])
    x = np.empty(n)
    x[0] = mus[s] + params.beta * v[0] / params.theta + z[0] * params.sigma / math.sqrt(2 * params.theta)
    for t in range(n - 1):
        if t > 0:
            s = int(u[t] >= P[s, 0])
        states[t] = s
        target = mus[s] + params.beta * v[t] / params.theta
        x[t + 1] = a * x[t] + (1 - a) * target + math.sqrt(q) * z[t + 1]
    return ObservableSeries(dates, x, label), states
