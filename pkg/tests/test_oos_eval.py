import numpy as np
import pytest

from fieldattr import oos_eval as oe
from fieldattr.errors import DataError
from fieldattr.synthetic_lab import m2_world, market_world, world_panel


def test_anchored_splits_prefer_field_model():
    w = m2_world(3000, 2)
    d = w.series.dates
    res = oe.anchored_oos(w.series, w.field, [d[1000], d[2000]])
    assert [r.n_train for r in res] == [1000, 2000]
    assert all(r.gap > 0 for r in res)
    assert res[0].record()["split_date"] == str(d[1000])


def test_split_lands_on_next_trading_day():
    w = m2_world(600, 1)
    d = w.series.dates
    i = 300 + int(np.flatnonzero(np.diff(d[300:]) == np.timedelta64(3, "D"))[0])
    saturday = d[i] + np.timedelta64(1, "D")
    (r,) = oe.anchored_oos(w.series, w.field, [saturday])
    assert r.split_date == d[i + 1] and r.n_train == i + 1


def test_exclusion_splits_test_side():
    w = m2_world(1200, 3)
    d = w.series.dates
    (r,) = oe.anchored_oos(w.series, w.field, [d[500]], exclusion=(d[700], d[799]))
    assert r.n_test == 600 and r.n_segments == 2


def test_too_short_side_rejected():
    w = m2_world(400, 1)
    with pytest.raises(DataError):
        oe.anchored_oos(w.series, w.field, [w.series.dates[50]])


def test_window_sweep_rows():
    wd = market_world(n_stocks=8, n_days=700, seed=1)
    rows = oe.window_sweep(world_panel(wd), wd.extra["vix"], windows=(30, 60))
    assert [r.W for r in rows] == [30, 60]
    for r in rows:
        rec = r.record()
        assert "psi1" not in rec and rec["scpa"] == pytest.approx(1 - r.theta0 / r.theta)
