"""Deterministic fixtures shared by the oracle builder and the tests."""

import numpy as np


def rng(seed):
    return np.random.Generator(np.random.Philox(seed))


def granger_fixture(seed=11, n=800):
    r = rng(seed)
    x = np.zeros(n)
    y = np.zeros(n)
    e = r.standard_normal((n, 2))
    for t in range(2, n):
        x[t] = 0.6 * x[t - 1] + e[t, 0]
        y[t] = 0.3 * y[t - 1] + 0.4 * x[t - 2] + e[t, 1]
    return x, y


def ar_fixture(seed=12, n=3000):
    r = rng(seed)
    phi = [0.5, -0.2, 0.15]
    x = np.zeros(n)
    e = r.standard_normal(n)
    for t in range(3, n):
        x[t] = 0.1 + phi[0] * x[t - 1] + phi[1] * x[t - 2] + phi[2] * x[t - 3] + e[t]
    return x


def ou_fixture(seed=13, n=2000):
    r = rng(seed)
    v = np.cumsum(r.standard_normal(n)) * 0.01 + np.log(18.0)
    psi = np.empty(n)
    psi[0] = 0.4
    a = np.exp(-0.02)
    for t in range(n - 1):
        psi[t + 1] = a * psi[t] + (1 - a) * (-0.5 + 0.006 * v[t] / 0.02) + 0.01 * r.standard_normal()
    return psi, v


def var_fixture(seed=14, n=1500):
    r = rng(seed)
    phi = np.array([[0.95, 0.03], [0.02, 0.9]])
    z = np.zeros((n, 2))
    for t in range(n - 1):
        z[t + 1] = np.array([0.01, 0.02]) + phi @ z[t] + r.standard_normal(2) * [0.05, 0.1]
    return z
