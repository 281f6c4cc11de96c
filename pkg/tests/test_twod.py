import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, linalg

from fieldattr import twod
from fieldattr.errors import ModelDomainError
from fieldattr.market_data import AlignedPair
from fieldattr.synthetic_lab import business_days, simulate_var1
from oracle_fixtures import var_fixture


def planted(beta_v=0.01):
    A = np.array([[-0.05, 0.02], [beta_v, -0.03]])
    D = np.array([[1e-4, 2e-5], [2e-5, 4e-4]])
    return twod.LinearSystem2D(A, np.array([0.4, 3.0]), D)


def test_unrestricted_fit_matches_var_oracle(oracles):
    z = var_fixture()
    pair = AlignedPair(business_days(len(z)), z[:, 0], z[:, 1])
    f = twod.fit_var1(pair, twod.Structure.BIDIRECTIONAL)
    ref = oracles["var1"]
    np.testing.assert_allclose(f.transition, ref["transition"], rtol=1e-8)
    np.testing.assert_allclose(f.intercepts, ref["intercepts"], rtol=1e-7, atol=1e-12)
    np.testing.assert_allclose(f.innovation_cov, ref["cov_mle"], rtol=1e-8)


def test_restricted_structures_zero_entries():
    pair = simulate_var1(planted(), 2000, 1)
    ff = twod.fit_var1(pair, twod.Structure.FEEDFORWARD)
    dec = twod.fit_var1(pair, twod.Structure.DECOUPLED)
    assert ff.transition[1, 0] == 0.0
    assert dec.transition[0, 1] == 0.0 and dec.transition[1, 0] == 0.0
    bi = twod.fit_var1(pair, twod.Structure.BIDIRECTIONAL)
    assert bi.loglik >= ff.loglik - 1e-8 >= dec.loglik - 2e-8
    assert [s.n_params for s in twod.Structure] == [7, 8, 9]


def test_round_trip_discretize_continuous():
    sysm = planted()
    c, phi, Q = twod.discretize(sysm)
    f = twod.Var1Fit(twod.Structure.BIDIRECTIONAL, c, phi, Q, 0.0, 100)
    back = twod.to_continuous(f)
    np.testing.assert_allclose(back.drift, sysm.drift, atol=1e-10)
    np.testing.assert_allclose(back.diffusion, sysm.diffusion, atol=1e-12)
    np.testing.assert_allclose(back.means, sysm.means, atol=1e-9)


def test_integrated_covariance_matches_quadrature():
    sysm = planted()
    q = twod.integrated_covariance(sysm.drift, sysm.diffusion, 1.0)
    ref = integrate.quad_vec(lambda s: linalg.expm(sysm.drift * s) @ sysm.diffusion
                             @ linalg.expm(sysm.drift.T * s), 0, 1, epsabs=1e-14)[0]
    np.testing.assert_allclose(q, ref, atol=1e-14)


@given(st.floats(0.01, 0.5), st.floats(0.01, 0.5), st.floats(-0.05, 0.05), st.floats(-0.05, 0.05))
def test_lyapunov_residual(tp, tv, bp, bv):
    A = np.array([[-tp, bp], [bv, -tv]])
    if np.any(np.linalg.eigvals(A).real >= 0):
        return
    D = np.array([[0.01, 0.002], [0.002, 0.02]])
    X = twod.stationary_covariance(twod.LinearSystem2D(A, np.zeros(2), D))
    np.testing.assert_allclose(A @ X + X @ A.T + D, 0, atol=1e-12)


def test_negative_eigenvalue_has_no_log():
    f = twod.Var1Fit(twod.Structure.BIDIRECTIONAL, np.zeros(2), np.diag([-0.5, 0.9]), np.eye(2), 0.0, 10)
    with pytest.raises(ModelDomainError):
        twod.to_continuous(f)


def test_kernel_definition():
    k = twod.projected_kernel(planted())
    assert k.defined and k.amplitude == pytest.approx(0.02 * 0.01)
    assert k.timescale == pytest.approx(1 / 0.03)
    ff = twod.LinearSystem2D(planted().drift, np.zeros(2), np.eye(2), twod.Structure.FEEDFORWARD)
    assert not twod.projected_kernel(ff).defined


def test_compare_structures_prefers_planted_feedback():
    pair = simulate_var1(planted(0.03), 3000, 2)
    cmp_ = twod.compare_structures(pair, dataset="x")
    assert cmp_.winner is twod.Structure.BIDIRECTIONAL
    row = cmp_.row()
    assert row["dataset"] == "x" and row["dbic_vs_decoupled"] > 0


def test_thin():
    pair = simulate_var1(planted(), 23, 0)
    t = twod.thin(pair, 5)
    assert t.count == 5 and t.x[1] == pair.x[5]
