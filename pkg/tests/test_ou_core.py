import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fieldattr import ou_core as oc
from fieldattr.errors import DataError, FitError, ModelDomainError
from fieldattr.market_data import ObservableSeries
from fieldattr.synthetic_lab import REFERENCE_M2, business_days, m0_world, m2_world, simulate_1d
from oracle_fixtures import ou_fixture


def test_param_names_and_counts():
    v = ObservableSeries(business_days(5), np.ones(5))
    assert oc.bare_spec().n_params == 3
    assert oc.field_spec(v).n_params == 4
    assert oc.ModelSpec(oc.Family.OU_FIELD_HETERO, (v,)).n_params == 5
    assert oc.ModelSpec(oc.Family.QUARTIC).n_params == 4
    assert oc.ModelSpec(oc.Family.QUARTIC_FIELD, (v,)).n_params == 5
    assert oc.ModelSpec(oc.Family.OU_MULTIFIELD, (v, v, v)).param_names[-2] == "beta_3"
    with pytest.raises(DataError):
        oc.ModelSpec(oc.Family.OU_FIELD)


@given(theta=st.floats(1e-4, 2.0), mu=st.floats(-2, 2), sigma=st.floats(1e-4, 1.0),
       psi=st.floats(-3, 3), dt=st.floats(0.1, 5.0))
def test_exact_step_formula(theta, mu, sigma, psi, dt):
    m, v = oc.exact_step({"theta": theta, "mu": mu, "sigma": sigma}, psi, dt=dt)
    a = math.exp(-theta * dt)
    assert m == pytest.approx(a * psi + (1 - a) * mu, abs=1e-12)
    assert v == pytest.approx(sigma ** 2 * (1 - math.exp(-2 * theta * dt)) / (2 * theta), rel=1e-10)


@given(theta=st.floats(1e-3, 0.5), beta=st.floats(-0.1, 0.1), v=st.floats(1.0, 5.0))
def test_field_step_targets_conditional_equilibrium(theta, beta, v):
    p = {"theta": theta, "mu": 0.1, "beta": beta, "sigma": 0.01}
    eq = oc.mu_eff(p, v)
    m, _ = oc.exact_step(p, eq, v)
    assert m == pytest.approx(eq, abs=1e-10)


def test_loglik_matches_scipy_norm():
    from scipy import stats
    psi, v = ou_fixture(n=50)
    s = ObservableSeries(business_days(50), psi)
    f = ObservableSeries(business_days(50), v)
    p = {"theta": 0.03, "mu": -0.4, "beta": 0.005, "sigma": 0.012}
    mean, var = oc.exact_step(p, psi[:-1], v[:-1])
    ref = stats.norm.logpdf(psi[1:], mean, np.sqrt(var)).sum()
    assert oc.loglik(oc.field_spec(f), p, s) == pytest.approx(ref, rel=1e-12)


def test_closed_form_matches_statsmodels_oracle(oracles):
    psi, v = ou_fixture()
    d = business_days(len(psi))
    s, f = ObservableSeries(d, psi), ObservableSeries(d, v)
    fit = oc.fit(oc.field_spec(f), s)
    assert fit.method == "closed-form"
    for k, ref in oracles["ou_field"].items():
        assert fit.params[k] == pytest.approx(ref, rel=1e-8)


def test_closed_form_is_numerical_optimum():
    w = m2_world(1500, 3)
    spec = oc.field_spec(w.field)
    closed = oc.fit(spec, w.series)
    num = oc._multistart(spec, w.series, 0, closed.n_trans, closed.sample)
    assert num.loglik <= closed.loglik + 1e-6
    assert num.loglik == pytest.approx(closed.loglik, abs=1e-3)


def test_fit_recovers_m2_parameters():
    w = m2_world(20_000, 1)
    fit = oc.fit(oc.field_spec(w.field), w.series)
    assert fit.params["theta"] == pytest.approx(REFERENCE_M2["theta"], rel=0.2)
    assert fit.params["beta"] == pytest.approx(REFERENCE_M2["beta"], rel=0.3)
    assert fit.params["sigma"] == pytest.approx(REFERENCE_M2["sigma"], rel=0.02)


def test_fit_is_deterministic_and_nested_ordering():
    w = m2_world(1000, 5)
    specs = [oc.bare_spec(), oc.field_spec(w.field), oc.ModelSpec(oc.Family.QUARTIC_FIELD, (w.field,))]
    a = [oc.fit(s, w.series, seed=2) for s in specs]
    b = [oc.fit(s, w.series, seed=2) for s in specs]
    assert [x.params for x in a] == [x.params for x in b]
    assert a[1].loglik >= a[0].loglik - 1e-9
    assert a[0].bic == pytest.approx(3 * math.log(999) - 2 * a[0].loglik)


def test_quartic_fit_runs_on_ou_data():
    w = m0_world(800, 2)
    fit = oc.fit(oc.ModelSpec(oc.Family.QUARTIC), w.series)
    assert fit.method == "multistart" and fit.params["a4"] > 0 and np.isfinite(fit.loglik)


def test_hetero_domain_error():
    s = ObservableSeries(business_days(4), [0.1, 0.2, 0.3, 0.4])
    f = ObservableSeries(business_days(4), np.ones(4))
    spec = oc.ModelSpec(oc.Family.OU_FIELD_HETERO, (f,))
    with pytest.raises(ModelDomainError):
        oc.loglik(spec, {"theta": 0.1, "mu": 0.0, "beta": 0.0, "sigma0": 0.01, "sigma1": -1.0}, s)


def test_constant_series_and_misaligned_field():
    s = ObservableSeries(business_days(10), np.full(10, 0.3))
    with pytest.raises(FitError):
        oc.fit(oc.bare_spec(), s)
    x = ObservableSeries(business_days(10), np.arange(10.0))
    f = ObservableSeries(business_days(9), np.arange(9.0))
    with pytest.raises(DataError):
        oc.fit(oc.field_spec(f), x)


def test_attribution_requires_same_sample():
    w = m2_world(600, 1)
    f0 = oc.fit(oc.bare_spec(), w.series)
    f2 = oc.fit(oc.field_spec(w.field.take(slice(1, None))), w.series.take(slice(1, None)))
    with pytest.raises(DataError):
        oc.attribution(f0, f2)


@given(t0=st.floats(1e-4, 1.0), ratio=st.floats(1.0, 50.0))
def test_scpa_identity(t0, ratio):
    s = oc.attribution_from_rates(t0, t0 * ratio, 0.0)
    assert s.scpa == pytest.approx(1 - 1 / ratio, abs=1e-12)
    assert 0 <= s.scpa < 1


def test_pit_uniform_under_true_model():
    w = m2_world(4000, 9)
    fit = oc.ModelFit(oc.field_spec(w.field), dict(REFERENCE_M2), 0.0, len(w.series) - 1)
    summary = oc.pit_ks(oc.pit_series(fit, w.series))
    assert not summary.rejects and summary.n == 3999


def test_simulated_exact_ou_variance():
    p = {"theta": 0.1, "mu": 0.0, "sigma": 0.2}
    x = simulate_1d(oc.bare_spec(), p, 100_000, 4).values
    assert np.var(x) == pytest.approx(0.04 / 0.2, rel=0.05)
