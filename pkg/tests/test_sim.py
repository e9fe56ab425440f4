import dataclasses

import numpy as np
import pytest

from reachcert.bezier import PiecewiseBezier
from reachcert.bounds import PUBLISHED_GAINS
from reachcert.geometry import Box3, Scenario
from reachcert.sim import (
    QuadState,
    SimOptions,
    SimulationTrace,
    certify_trace,
    integrate,
    polar_project,
    state_derivative,
)
from reachcert.so3 import exp_so3, hat

G = PUBLISHED_GAINS
POINT = np.array([2.0, 2.0, 2.0])


def hover_curve(duration=3.0):
    return PiecewiseBezier([duration], np.tile(POINT, (1, 15, 1)))


def hover_scenario():
    return Scenario(
        domain=Box3([0, 0, 0], [5, 5, 5]), obstacles=[], target=Box3([1, 1, 1], [3, 3, 3]),
        p0=POINT, v0=[0, 0, 0], v_max=[2, 2, 2], f_max=85.1508,
    )


def test_free_fall(params):
    pd, vd, Rd, wd = state_derivative(
        np.zeros((1, 3)), np.ones((1, 3)), np.eye(3)[None], np.zeros((1, 3)), np.zeros(1), np.zeros((1, 3)), params
    )
    assert np.array_equal(pd[0], np.ones(3))
    assert np.allclose(vd[0], [0, 0, -params.g])
    assert np.array_equal(Rd[0], np.zeros((3, 3))) and np.array_equal(wd[0], np.zeros(3))


def test_hover_has_zero_tangent(params):
    _, vd, Rd, wd = state_derivative(
        POINT[None], np.zeros((1, 3)), np.eye(3)[None], np.zeros((1, 3)),
        np.array([params.m * params.g]), np.zeros((1, 3)), params,
    )
    assert np.allclose(vd, 0, atol=1e-14) and np.array_equal(Rd[0], np.zeros((3, 3))) and np.allclose(wd, 0)


def test_rotational_energy_rate_is_torque_power(params, rng):
    """d/dt (w'Jw/2) = w . tau for any state."""
    for _ in range(100):
        w = rng.normal(size=(1, 3))
        tau = rng.normal(size=(1, 3))
        R = exp_so3(rng.normal(size=3))[None]
        _, _, Rd, wd = state_derivative(np.zeros((1, 3)), np.zeros((1, 3)), R, w, np.ones(1), tau, params)
        assert w[0] @ params.J @ wd[0] == pytest.approx(w[0] @ tau[0], rel=1e-12, abs=1e-12)
        assert np.allclose(Rd[0], R[0] @ hat(w[0]), atol=1e-15)


def test_polar_projection(rng):
    R = np.array([exp_so3(v) for v in rng.normal(size=(10, 3))]) + 1e-6 * rng.normal(size=(10, 3, 3))
    P = polar_project(R)
    assert np.max(np.abs(np.swapaxes(P, 1, 2) @ P - np.eye(3))) < 1e-14


def test_hover_stays_at_equilibrium(params, published_matrices):
    start = QuadState(POINT.copy(), np.zeros(3), np.eye(3), np.zeros(3))
    (tr,) = integrate(start, hover_curve(), G, params, published_matrices)
    assert tr.ep.max() < 1e-6 and tr.ev.max() < 1e-6
    assert np.allclose(tr.f, params.m * params.g, rtol=1e-12)
    assert np.allclose(np.diff(tr.t[:10]), 0.01)


def _perturbed_start():
    return QuadState(POINT + np.array([0.05, -0.03, 0.02]), np.array([0.02, 0.0, -0.01]),
                     exp_so3([0.01, -0.02, 0.005]), np.array([0.02, 0.0, 0.01]))


@pytest.fixture(scope="module")
def perturbed_trace(params, published_matrices):
    (tr,) = integrate(_perturbed_start(), hover_curve(), G, params, published_matrices)
    return tr


def test_perturbed_run_is_certified(perturbed_trace, published_bounds):
    tr = perturbed_trace
    assert tr.orthonormality_drift < 1e-9
    rep = certify_trace(tr, published_bounds, hover_scenario())
    assert rep.passed, rep.to_dict()
    assert tr.ep[-1] < tr.ep[0]


def test_halving_tolerance_changes_little(params, published_matrices):
    loose = SimOptions(atol=1e-8, rtol=1e-7)
    tight = SimOptions(atol=5e-9, rtol=5e-8)
    (a,) = integrate(_perturbed_start(), hover_curve(2.0), G, params, published_matrices, loose)
    (b,) = integrate(_perturbed_start(), hover_curve(2.0), G, params, published_matrices, tight)
    assert np.array_equal(a.t, b.t)
    assert np.abs(a.p - b.p).max() < 1e-6 and np.abs(a.R - b.R).max() < 1e-6


def test_batched_runs_match_single(params, published_matrices):
    s1, s2 = _perturbed_start(), QuadState(POINT.copy(), np.zeros(3), np.eye(3), np.zeros(3))
    both = integrate([s1, s2], hover_curve(1.0), G, params, published_matrices)
    (alone,) = integrate(s1, hover_curve(1.0), G, params, published_matrices)
    assert np.abs(both[0].p - alone.p).max() < 1e-7


def test_starts_outside_initial_set_are_refused(params, published_matrices):
    far = QuadState(POINT + 10.0, np.zeros(3), np.eye(3), np.zeros(3))
    with pytest.raises(ValueError, match="outside the initial set"):
        integrate(far, hover_curve(), G, params, published_matrices)


def test_csv_round_trip(params, published_matrices):
    (tr,) = integrate(_perturbed_start(), hover_curve(0.5), G, params, published_matrices)
    again = SimulationTrace.from_csv(tr.to_csv())
    for name in ("t", "p", "v", "R", "w", "ep", "ev", "V1", "V2", "f", "Fd3"):
        assert np.array_equal(getattr(again, name), getattr(tr, name)), name
    assert again.to_csv() == tr.to_csv()


def test_injected_position_spike_breaks_one_check(perturbed_trace, published_bounds):
    tr = dataclasses.replace(perturbed_trace, ep=perturbed_trace.ep.copy())
    tr.ep[100] = published_bounds.Lp * 1.5
    rep = certify_trace(tr, published_bounds, hover_scenario())
    assert rep.violated == ["position_error"]
    bad = next(c for c in rep.checks if c.name == "position_error")
    assert bad.violations == 1 and bad.first_time == pytest.approx(tr.t[100])


def test_unsafe_position_is_flagged(perturbed_trace, published_bounds):
    tr = perturbed_trace
    sc = hover_scenario()
    sc.obstacles = [Box3(POINT - 0.5, POINT + 0.5)]
    assert "safe_set" in certify_trace(tr, published_bounds, sc).violated
