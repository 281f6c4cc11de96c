import numpy as np
import pytest

from fieldattr import synthetic_lab as sl
from fieldattr.errors import ModelDomainError
from fieldattr.market_data import load_field, load_returns
from fieldattr.ou_core import Family, ModelSpec, exact_step


def test_philox_streams_are_reproducible():
    a = sl.make_rng(7).standard_normal(5)
    b = sl.make_rng(7).standard_normal(5)
    np.testing.assert_array_equal(a, b)


def test_business_days_skip_weekends():
    d = sl.business_days(10)
    assert np.all(np.is_busday(d)) and len(np.unique(d)) == 10


def test_euler_oracle_matches_exact_ou_moments():
    p = {"theta": 0.5, "mu": 0.2, "sigma": 0.3}
    m = sl.euler_oracle(ModelSpec(Family.OU_BARE), p, psi0=1.0, n_paths=40_000, dt=1e-2, seed=1)
    mean, var = exact_step(p, 1.0)
    assert abs(m.mean - mean) < 4 * m.se_mean + 1e-3
    assert abs(m.var - var) < 4 * m.se_var + 1e-3


def test_ar1_field_law():
    f = sl.simulate_ar1_field(50_000, 3, mean=1.0, sd=0.5, phi=0.9)
    x = f.values
    assert x.mean() == pytest.approx(1.0, abs=0.05)
    assert x.std() == pytest.approx(0.5, rel=0.05)
    assert np.corrcoef(x[1:], x[:-1])[0, 1] == pytest.approx(0.9, abs=0.01)


def test_quartic_simulator_explosion_is_reported():
    spec = ModelSpec(Family.QUARTIC)
    with pytest.raises(ModelDomainError):
        sl.simulate_1d(spec, {"a2": -5.0, "a4": 0.0, "mu": 0.0, "sigma": 1.0}, 200, 0, substep=0.01)


def test_world_files_round_trip(tmp_path):
    w = sl.market_world(n_stocks=5, n_days=120, seed=2)
    w.to_files(tmp_path)
    panel = load_returns(tmp_path / "prices.csv")
    assert panel.returns.shape == (5, 120)
    np.testing.assert_allclose(panel.returns, sl.world_panel(w).returns, rtol=1e-12)
    vix = load_field(tmp_path / "vix.csv", "vix")
    np.testing.assert_allclose(vix.values, w.extra["vix"].values, rtol=1e-12)


def test_worlds_are_seed_deterministic():
    a, b = sl.m2_world(300, 4), sl.m2_world(300, 4)
    np.testing.assert_array_equal(a.series.values, b.series.values)
    assert not np.array_equal(a.series.values, sl.m2_world(300, 5).series.values)


def test_simulate_rs_state_frequencies():
    from fieldattr.regime import RegimeParams
    p = RegimeParams(0.2, 0.3, 0.6, 0.0, 0.02, 0.02, 0.2)
    _, states = sl.simulate_rs(p, 50_000, 1)
    assert states.mean() == pytest.approx(p.stationary()[1], abs=0.03)
