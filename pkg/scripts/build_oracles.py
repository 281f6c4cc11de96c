"""Freeze reference values from independent implementations into tests/data/oracles.json.

Fixtures are regenerated from fixed Philox seeds so the tests can rebuild them
and compare the package against the frozen numbers. Uses statsmodels and
mpmath, which the package itself does not import.

    python scripts/build_oracles.py
"""

import json
import sys
from pathlib import Path

import mpmath
import numpy as np
from statsmodels.regression.linear_model import OLS
from statsmodels.tsa.api import VAR
from statsmodels.tsa.ar_model import AutoReg
from statsmodels.tsa.stattools import grangercausalitytests

TESTS = Path(__file__).resolve().parents[1] / "tests"
OUT = TESTS / "data" / "oracles.json"
sys.path.insert(0, str(TESTS))

from oracle_fixtures import ar_fixture, granger_fixture, ou_fixture, var_fixture  # noqa: E402


def main():
    out = {}
    x, y = granger_fixture()
    res = grangercausalitytests(np.column_stack([y, x]), maxlag=[2, 4])
    out["granger"] = {str(p): {"F": res[p][0]["ssr_ftest"][0], "p": res[p][0]["ssr_ftest"][1],
                               "df_den": res[p][0]["ssr_ftest"][2]} for p in (2, 4)}

    xa = ar_fixture()
    ar = AutoReg(xa, lags=3, trend="c").fit()
    out["ar3"] = {"params": ar.params.tolist(), "sigma2": float(np.sum(ar.resid ** 2) / len(ar.resid))}

    psi, v = ou_fixture()
    X = np.column_stack([np.ones(len(psi) - 1), psi[:-1], v[:-1]])
    ols = OLS(psi[1:], X).fit()
    c, a, d = ols.params
    theta = -np.log(a)
    q = np.sum(ols.resid ** 2) / len(ols.resid)
    out["ou_field"] = {"theta": theta, "mu": c / (1 - a), "beta": d * theta / (1 - a),
                       "sigma": float(np.sqrt(2 * theta * q / (1 - a * a)))}

    z = var_fixture()
    vr = VAR(z).fit(1, trend="c")
    out["var1"] = {"intercepts": vr.params[0].tolist(), "transition": vr.coefs[0].tolist(),
                   "cov_mle": (vr.resid.T @ vr.resid / len(vr.resid)).tolist()}

    mpmath.mp.dps = 30
    th0, th, beta = mpmath.mpf("0.00335"), mpmath.mpf("0.01640"), mpmath.mpf("0.00572")
    out["reference_attribution"] = {"tau_auto": float(1 / th0), "tau_cond": float(1 / th),
                                "scpa": float(1 - th0 / th), "chi": float(beta / th)}
    pcs, psc, th_rs = mpmath.mpf("0.01170"), mpmath.mpf("0.8940"), mpmath.mpf("0.02348")
    out["reference_regime"] = {"calm_days": float(1 / pcs), "stress_days": float(1 / psc),
                           "stationary_calm": float(psc / (pcs + psc)),
                           "stationary_stress": float(pcs / (pcs + psc)), "relax_days": float(1 / th_rs)}
    out["ar1_efold_095"] = int(mpmath.ceil(-1 / mpmath.log(mpmath.mpf("0.95"))))

    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps(out, indent=2, sort_keys=True) + "\n")
    print(f"wrote {OUT}")


if __name__ == "__main__":
    main()
