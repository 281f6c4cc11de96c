"""Level-orthogonal residual, quadrant partition of (log VIX, residual), and the
Q2-versus-Q3 forward-change test."""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import DataError
from .market_data import ObservableSeries, align_many

EXACT_MAX = 50
PERMUTATION_MAX_ORDERINGS = 200_000


class Quadrant(enum.Enum):
    Q1 = "Q1"  # high VIX, positive residual
    Q2 = "Q2"  # low VIX, positive residual
    Q3 = "Q3"  # low VIX, negative residual
    Q4 = "Q4"  # high VIX, negative residual


@dataclass(frozen=True)
class OrthoResidual:
    residual: ObservableSeries
    a: float
    b: float
    stderr: tuple = (float("nan"), float("nan"))


def orthogonal_residual(psi1: ObservableSeries, log_vix: ObservableSeries) -> OrthoResidual:
    """OLS residual of psi1 on [1, log VIX] over the common dates."""
    y, x = align_many(psi1, log_vix)
    if len(y) < 3:
        raise DataError("need at least three aligned observations")
    if np.ptp(x.values) == 0:
        raise DataError("log VIX has zero variance")
    X = np.column_stack([np.ones(len(x)), x.values])
    coef, _, _, _ = np.linalg.lstsq(X, y.values, rcond=None)
    resid = y.values - X @ coef
    s2 = float(resid @ resid) / (len(y) - 2)
    se = np.sqrt(np.diag(s2 * np.linalg.inv(X.T @ X)))
    return OrthoResidual(ObservableSeries(y.dates, resid, "eps_perp"), float(coef[0]), float(coef[1]),
                         (float(se[0]), float(se[1])))


def quadrant_labels(log_vix: ObservableSeries, residual: ObservableSeries):
    """Quadrant of every common date; days at or below the log-VIX median count as low.

    Returns (dates, labels) with labels an object array of Quadrant members.
    A zero residual is treated as negative.
    """
    v, r = align_many(log_vix, residual)
    low = v.values <= np.median(v.values)
    pos = r.values > 0
    labels = np.empty(len(v), dtype=object)
    labels[low & pos] = Quadrant.Q2
    labels[low & ~pos] = Quadrant.Q3
    labels[~low & pos] = Quadrant.Q1
    labels[~low & ~pos] = Quadrant.Q4
    return v.dates, labels


# ---------------------------------------------------------------------------
# Mann-Whitney


@dataclass(frozen=True)
class MannWhitney:
    U: float
    p: float
    method: str
    rank_biserial: float


def _enumerated_p(x: np.ndarray, y: np.ndarray) -> float:
    """Exact upper-tail p of the midrank sum over every split of the pooled sample."""
    ranks = stats.rankdata(np.concatenate([x, y]))
    n1 = len(x)
    observed = ranks[:n1].sum()
    sums = np.fromiter((sum(c) for c in itertools.combinations(ranks, n1)), dtype=float,
                       count=math.comb(len(ranks), n1))
    return float(np.mean(sums >= observed - 1e-9))


def mann_whitney_greater(x, y) -> MannWhitney:
    """One-sided test that ``x`` tends to exceed ``y``.

    U counts pairs with x > y plus half the ties. Both groups of at most 50 use
    the exact null distribution (an exhaustive permutation when ties are present
    and the enumeration is small enough), otherwise the tie-corrected normal
    approximation with continuity correction.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n1, n2 = len(x), len(y)
    if n1 == 0 or n2 == 0:
        raise DataError("Mann-Whitney needs two non-empty groups")
    ties = len(np.unique(np.concatenate([x, y]))) < n1 + n2
    small = n1 <= EXACT_MAX and n2 <= EXACT_MAX
    if small and not ties:
        res = stats.mannwhitneyu(x, y, alternative="greater", method="exact")
        U, p, method = float(res.statistic), float(res.pvalue), "exact"
    elif small and math.comb(n1 + n2, n1) <= PERMUTATION_MAX_ORDERINGS:
        U = float(stats.mannwhitneyu(x, y, alternative="greater", method="asymptotic").statistic)
        p, method = _enumerated_p(x, y), "permutation"
    else:
        res = stats.mannwhitneyu(x, y, alternative="greater", method="asymptotic", use_continuity=True)
        U, p, method = float(res.statistic), float(res.pvalue), "asymptotic"
    return MannWhitney(U, min(max(p, 0.0), 1.0), method, 2.0 * U / (n1 * n2) - 1.0)


@dataclass(frozen=True)
class QuadrantTest:
    horizon: int
    mean_q2: float
    mean_q3: float
    mw_p: float
    rank_biserial: float
    n_q2: int = 0
    n_q3: int = 0
    method: str = ""

    def record(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def horizon_test(dates, labels, log_vix: ObservableSeries, horizons=(30, 60, 90),
                 change: str = "log") -> list:
    """Forward change of VIX over ``h`` trading days, Q2 versus Q3, for each horizon.

    ``dates``/``labels`` come from :func:`quadrant_labels`; ``h`` counts
    observations of ``log_vix``. Days without a t+h observation are dropped.
    ``change`` is ``"log"`` (difference of log VIX) or ``"level"`` (VIX points).
    """
    if change not in ("log", "level"):
        raise DataError(f"unknown change type {change!r}")
    idx = np.searchsorted(log_vix.dates, dates)
    if np.any(idx >= len(log_vix)) or not np.array_equal(log_vix.dates[np.minimum(idx, len(log_vix) - 1)], dates):
        raise DataError("labelled dates must all appear in the log-VIX series")
    level = log_vix.values if change == "log" else np.exp(log_vix.values)
    labels = np.asarray(labels, dtype=object)
    out = []
    for h in horizons:
        ok = idx + h < len(log_vix)
        fwd = np.full(len(idx), np.nan)
        fwd[ok] = level[idx[ok] + h] - level[idx[ok]]
        q2 = fwd[ok & (labels == Quadrant.Q2)]
        q3 = fwd[ok & (labels == Quadrant.Q3)]
        for name, grp in (("Q2", q2), ("Q3", q3)):
            if grp.size == 0:
                raise DataError(f"quadrant {name} has no observations at horizon {h}")
        mw = mann_whitney_greater(q2, q3)
        out.append(QuadrantTest(int(h), float(q2.mean()), float(q3.mean()), mw.p, mw.rank_biserial,
                                int(q2.size), int(q3.size), mw.method))
    return out
