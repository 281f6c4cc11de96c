import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fieldattr import residual_state as rs
from fieldattr.errors import DataError
from fieldattr.market_data import ObservableSeries
from fieldattr.synthetic_lab import business_days


def enumerated_p(x, y):
    """Exact one-sided p by enumerating every split of the pooled sample."""
    pooled = np.concatenate([x, y])
    n1 = len(x)

    def u(a, b):
        return sum((ai > bj) + 0.5 * (ai == bj) for ai in a for bj in b)

    obs = u(x, y)
    hits = total = 0
    for idx in itertools.combinations(range(len(pooled)), n1):
        mask = np.zeros(len(pooled), bool)
        mask[list(idx)] = True
        total += 1
        hits += u(pooled[mask], pooled[~mask]) >= obs - 1e-12
    return hits / total


@given(st.lists(st.integers(0, 30), min_size=1, max_size=6), st.lists(st.integers(0, 30), min_size=1, max_size=6))
def test_mann_whitney_matches_enumeration(x, y):
    x, y = np.array(x, float), np.array(y, float)
    mw = rs.mann_whitney_greater(x, y)
    assert mw.p == pytest.approx(enumerated_p(x, y), abs=1e-9)
    assert mw.method in ("exact", "permutation")


def test_mann_whitney_large_uses_normal_approx():
    r = np.random.Generator(np.random.Philox(0))
    mw = rs.mann_whitney_greater(r.standard_normal(200) + 0.3, r.standard_normal(150))
    assert mw.method == "asymptotic" and mw.p < 0.05 and mw.rank_biserial > 0


def test_orthogonal_residual_is_orthogonal():
    r = np.random.Generator(np.random.Philox(1))
    d = business_days(300)
    v = ObservableSeries(d, 3 + 0.3 * r.standard_normal(300))
    psi = ObservableSeries(d, 0.2 + 0.1 * v.values + 0.02 * r.standard_normal(300))
    o = rs.orthogonal_residual(psi, v)
    assert o.b == pytest.approx(0.1, abs=0.02)
    assert abs(o.residual.values @ v.values) < 1e-8
    assert abs(o.residual.values.sum()) < 1e-10


def test_quadrant_rules():
    d = business_days(4)
    v = ObservableSeries(d, [1.0, 2.0, 3.0, 4.0])
    e = ObservableSeries(d, [0.5, 0.0, 0.1, -0.2])
    _, labels = rs.quadrant_labels(v, e)
    assert list(labels) == [rs.Quadrant.Q2, rs.Quadrant.Q3, rs.Quadrant.Q1, rs.Quadrant.Q4]


def test_horizon_test_forward_changes():
    d = business_days(10)
    lv = ObservableSeries(d, np.log(np.arange(10.0, 20.0)))
    labels = np.array([rs.Quadrant.Q2, rs.Quadrant.Q3] * 5, dtype=object)
    (res,) = rs.horizon_test(d, labels, lv, horizons=(2,), change="level")
    assert res.mean_q2 == pytest.approx(2.0) and res.mean_q3 == pytest.approx(2.0)
    assert res.n_q2 == 4 and res.n_q3 == 4
    with pytest.raises(DataError):
        rs.horizon_test(d, labels, lv, horizons=(2,), change="pct")
