"""Compiled and pure kernels are interchangeable."""
import numpy as np
import pytest
from scipy.optimize import linprog

import polyfolio._kernels as K
from polyfolio._kernels import pure


def lp_transport(a, b, C):
    """Dense LP formulation of the transport problem (independent oracle)."""
    S, T = C.shape
    rows = []
    for i in range(S):
        row = np.zeros((S, T))
        row[i, :] = 1
        rows.append(row.ravel())
    for j in range(T):
        row = np.zeros((S, T))
        row[:, j] = 1
        rows.append(row.ravel())
    res = linprog(C.ravel(), A_eq=np.array(rows),
                  b_eq=np.concatenate([a, b]), bounds=(0, None),
                  method="highs")
    assert res.success
    return res.fun


def test_varsi_twins_agree():
    rng = np.random.default_rng(0)
    for _ in range(300):
        n = int(rng.integers(2, 12))
        R = rng.normal(size=n) * rng.uniform(0.1, 5)
        c = float(rng.uniform(R.min() - 0.1, R.max() + 0.1))
        assert K.varsi_fraction(R, c) == pytest.approx(
            pure.varsi_fraction(R, c), abs=1e-13)


def test_varsi_many_matches_scalar():
    rng = np.random.default_rng(1)
    R = rng.normal(size=7)
    cs = np.linspace(R.min(), R.max(), 31)
    batch = K.varsi_many(R, cs)
    single = [K.varsi_fraction(R, c) for c in cs]
    assert np.allclose(batch, single, atol=1e-14)


def test_transport_twins_and_lp_oracle():
    rng = np.random.default_rng(2)
    for trial in range(25):
        S, T = int(rng.integers(2, 9)), int(rng.integers(2, 9))
        a = rng.random(S)
        b = rng.random(T)
        if trial % 3 == 0:
            a[rng.integers(S)] = 0.0
        a /= a.sum()
        b /= b.sum()
        C = rng.random((S, T)) * 4
        got = K.min_cost_transport(a, b, C)
        ref = lp_transport(a, b, C)
        assert got == pytest.approx(ref, abs=1e-8)
        assert pure.min_cost_transport(a, b, C) == pytest.approx(ref, abs=1e-8)


def test_transport_rejects_mismatched_mass():
    with pytest.raises(ValueError):
        K.min_cost_transport(np.array([1.0]), np.array([0.5]),
                             np.array([[1.0]]))


def test_rehmc_twins_identical_on_flat_density():
    # zero potential: energy change is exactly zero in both paths, so the
    # accept decisions coincide and trajectories can be compared directly
    d = 3
    B = np.vstack([np.eye(d), -np.eye(d)])
    z = np.ones(2 * d)
    A2 = np.zeros((d, d))
    a1 = np.zeros(d)
    g = np.random.default_rng(3)
    n_traj = 20 + 150
    normals = g.normal(size=(n_traj, d))
    uniforms = g.random(n_traj)
    args = (A2, a1, B, z, np.zeros(d), 0.7, 12, 150, 1, 20, normals, uniforms, 100)
    s_cy = K.rehmc_quadratic(*args)
    s_py = pure.rehmc_quadratic(*args)
    assert np.allclose(np.asarray(s_cy[0]), s_py[0], atol=1e-10)
    assert s_cy[1] == s_py[1]


def test_rehmc_twins_close_on_gaussian():
    d = 4
    A2 = 2.0 * np.eye(d)
    a1 = np.zeros(d)
    B = np.vstack([np.eye(d), -np.eye(d)])
    z = 50 * np.ones(2 * d)
    g = np.random.default_rng(4)
    n_traj = 30 + 300
    normals = g.normal(size=(n_traj, d))
    uniforms = g.random(n_traj)
    args = (A2, a1, B, z, np.zeros(d), 0.2, 15, 300, 1, 30, normals, uniforms, 100)
    s_cy = np.asarray(K.rehmc_quadratic(*args)[0])
    s_py = pure.rehmc_quadratic(*args)[0]
    assert np.allclose(s_cy, s_py, atol=1e-8)


def test_rehmc_reflection_cap_reported():
    # a needle polytope and a huge step force many reflections
    d = 2
    B = np.vstack([np.eye(d), -np.eye(d)])
    z = np.array([1e-4, 1.0, 1e-4, 1.0])
    g = np.random.default_rng(5)
    normals = g.normal(size=(4, d))
    uniforms = g.random(4)
    *_, status = K.rehmc_quadratic(np.zeros((d, d)), np.zeros(d), B, z,
                                   np.zeros(d), 5.0, 10, 4, 1, 0, normals,
                                   uniforms, max_reflections=20)
    assert status == 1
