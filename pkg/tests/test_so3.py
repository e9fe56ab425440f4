import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

import suites
from reachcert.so3 import (
    NotPositiveDefiniteError,
    NotSkewError,
    exp_so3,
    exp_so3_batch,
    hat,
    hat_batch,
    induced_norm2,
    is_rotation,
    jacobi_eigh,
    project_to_so3,
    spd_inv_sqrt,
    spd_sqrt,
    sym_eig_bounds,
    vee,
    vee_batch,
)

vec3 = arrays(np.float64, 3, elements=st.floats(-10, 10))


def test_hat_examples():
    assert np.array_equal(hat([1, 0, 0]), [[0, 0, 0], [0, 0, -1], [0, 1, 0]])
    assert np.array_equal(hat([0, 0, 0]), np.zeros((3, 3)))


def test_vee_examples():
    assert np.array_equal(vee(hat([1, 2, 3])), [1, 2, 3])
    assert np.array_equal(vee(np.zeros((3, 3))), [0, 0, 0])
    with pytest.raises(NotSkewError):
        vee(np.eye(3))


@settings(max_examples=300)
@given(vec3, vec3)
def test_hat_is_cross_product(v, w):
    assert np.allclose(hat(v) @ w, np.cross(v, w), atol=1e-12)
    assert np.array_equal(hat(v), -hat(v).T)
    assert np.array_equal(vee(hat(v)), v)


def test_vee_hat_round_trip(rng):
    for v in rng.normal(size=(1000, 3)):
        assert np.max(np.abs(vee(hat(v)) - v)) <= 1e-12


def test_batched_maps_match_scalar(rng):
    v = rng.normal(size=(50, 3))
    H = hat_batch(v)
    assert all(np.array_equal(H[k], hat(v[k])) for k in range(50))
    assert np.allclose(vee_batch(H), v, atol=0)
    E = exp_so3_batch(v)
    assert all(np.allclose(E[k], exp_so3(v[k]), atol=1e-15) for k in range(50))


def test_exp_examples():
    assert np.array_equal(exp_so3([0, 0, 0]), np.eye(3))
    assert np.allclose(exp_so3([0, 0, math.pi]), np.diag([-1, -1, 1]), atol=1e-15)
    tiny = np.array([1e-9, -2e-9, 3e-9])
    assert np.allclose(exp_so3(tiny), suites.series_exp(hat(tiny)), atol=1e-17)


@settings(max_examples=300)
@given(vec3)
def test_exp_is_rotation(v):
    assert is_rotation(exp_so3(v))


def test_exp_matches_series(rng):
    fails, worst = suites.rodrigues_vs_series(500, rng)
    assert fails == 0, worst


def test_hat_identities(rng):
    fails, worst = suites.hat_identities(500, rng)
    assert fails == 0, worst


def test_psd_estimates(rng):
    fails, worst = suites.psd_estimates(500, rng)
    assert fails == 0, worst


def test_spd_roots():
    assert np.allclose(spd_sqrt(np.eye(6)), np.eye(6))
    assert np.allclose(spd_sqrt(np.diag([4, 9, 16, 1, 1, 1])), np.diag([2, 3, 4, 1, 1, 1]), atol=1e-14)
    with pytest.raises(NotPositiveDefiniteError) as err:
        spd_sqrt(np.diag([1.0, 0.0, 1.0]))
    assert err.value.min_eig == 0.0


def test_spd_roots_random(rng):
    for _ in range(200):
        A = suites.random_spd(rng)
        K = spd_sqrt(A)
        assert np.linalg.norm(K @ K - A) < 1e-9 * max(1.0, np.linalg.norm(A))
        assert np.allclose(spd_inv_sqrt(A) @ K, np.eye(6), atol=1e-9)
        assert np.array_equal(K, K.T)


def test_eig_bounds():
    assert sym_eig_bounds(np.eye(3)) == (1.0, 1.0)
    lo, hi = sym_eig_bounds(np.diag([0.0820, 0.0845, 0.1377]))
    assert lo == pytest.approx(0.0820, abs=1e-15) and hi == pytest.approx(0.1377, abs=1e-15)


def test_rayleigh_quotients(rng):
    A = rng.normal(size=(6, 6))
    A = A + A.T
    lo, hi = sym_eig_bounds(A)
    X = rng.normal(size=(10_000, 6))
    q = np.einsum("bi,ij,bj->b", X, A, X) / np.sum(X * X, axis=1)
    assert np.all(q >= lo - 1e-12) and np.all(q <= hi + 1e-12)


def test_jacobi_matches_lapack(rng):
    for _ in range(20):
        A = suites.random_spd(rng)
        w, V = jacobi_eigh(A)
        assert np.allclose(w, np.linalg.eigvalsh(A), rtol=1e-12)
        assert np.allclose(V @ np.diag(w) @ V.T, A, atol=1e-10)


def test_induced_norm(rng):
    assert induced_norm2(np.eye(4)) == pytest.approx(1.0)
    assert induced_norm2(np.zeros((3, 6))) == 0.0
    A = rng.normal(size=(3, 6))
    n = induced_norm2(A)
    X = rng.normal(size=(100_000, 6))
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    assert np.linalg.norm(X @ A.T, axis=1).max() <= n * (1 + 1e-12)
    # the maximiser lies in the 3-dimensional row space, so sample there for the lower bound
    Y = rng.normal(size=(100_000, 3)) @ A
    Y /= np.linalg.norm(Y, axis=1, keepdims=True)
    observed = np.linalg.norm(Y @ A.T, axis=1).max()
    assert n * 0.999 <= observed <= n * (1 + 1e-12)


def test_projection_restores_rotation(rng):
    R = exp_so3(rng.normal(size=3)) + 1e-6 * rng.normal(size=(3, 3))
    assert not is_rotation(R)
    assert is_rotation(project_to_so3(R), tol=1e-12)
