import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fieldattr import surrogate as sg
from fieldattr.errors import ModelDomainError
from fieldattr.synthetic_lab import m2_world
from oracle_fixtures import ar_fixture


def test_ar_ols_matches_autoreg_oracle(oracles):
    x = ar_fixture()
    X, y = sg._lagged(x, 3, 3)
    coef, rss = sg._ls(X, y)
    np.testing.assert_allclose(coef, oracles["ar3"]["params"], rtol=1e-10)
    assert rss / len(y) == pytest.approx(oracles["ar3"]["sigma2"], rel=1e-10)


def test_order_selection_finds_planted_order():
    ar = sg.fit_ar(ar_fixture(), p_max=10)
    assert ar.p == 3 and ar.is_stationary()
    np.testing.assert_allclose(ar.coeffs, [0.5, -0.2, 0.15], atol=0.06)


def test_theoretical_acf_ar1():
    ar = sg.ARFit(1, 0.0, np.array([0.8]), 1.0, 0.0)
    np.testing.assert_allclose(sg.ar_acf(ar, 5), 0.8 ** np.arange(6))


@given(st.floats(-5, 5), st.floats(0.01, 5), st.integers(0, 1000))
def test_rescale_is_exact(mean, sd, seed):
    x = np.random.Generator(np.random.Philox(seed)).standard_normal(50)
    y = sg.rescale(x, mean, sd)
    assert y.mean() == pytest.approx(mean, abs=1e-9)
    assert y.std() == pytest.approx(sd, rel=1e-9)


def test_surrogates_are_independent_of_count():
    ar = sg.ARFit(1, 0.1, np.array([0.9]), 0.01, 0.0)
    a = sg.gen_surrogates(ar, 200, 3, 1.0, 0.5, seed=4)
    b = sg.gen_surrogates(ar, 200, 5, 1.0, 0.5, seed=4)
    for u, v in zip(a, b):
        np.testing.assert_array_equal(u, v)
    assert not np.array_equal(a[0], a[1])


def test_nonstationary_ar_rejected():
    with pytest.raises(ModelDomainError):
        sg.gen_surrogates(sg.ARFit(1, 0.0, np.array([1.0]), 1.0, 0.0), 100, 2)


def test_surrogate_acf_matches_fitted_law():
    ar = sg.ARFit(2, 0.0, np.array([1.2, -0.3]), 1.0, 0.0)
    paths = sg.gen_surrogates(ar, 20_000, 4, 0.0, 1.0, seed=0)
    x = np.concatenate(paths)
    acf1 = np.mean([np.corrcoef(p[1:], p[:-1])[0, 1] for p in paths])
    assert acf1 == pytest.approx(sg.ar_acf(ar, 1)[1], abs=0.02)
    assert abs(x.mean()) < 1e-9


def test_placebo_gate_flags_real_field():
    w = m2_world(3000, 1)
    rep = sg.placebo_gate(w.series, w.field, count=30, seed=0)
    assert rep.real_gain > rep.summary()["max"]
    assert rep.empirical_p == 0.0 and rep.n_placebo == 30
    assert len(rep.rows()) == 30
