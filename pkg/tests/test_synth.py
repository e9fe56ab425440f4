import dataclasses

import numpy as np
import pytest

from reachcert.geometry import inflate_scenario
from reachcert.sim import ReferenceSignal
from reachcert.synth import SynthParams, durations_for, synthesize, verify_curve
from reachcert.tube import RrtParams, plan_tube


def test_reference_curve_passes_dense_verifier(reference_synthesis, reference_plan, reference_scenario,
                                               published_bounds, params):
    res, elapsed = reference_synthesis
    inf, _ = reference_plan
    check = verify_curve(res.curve, res.tube, published_bounds, reference_scenario, inf, params.m, params.g, 1e-6)
    assert check.ok, check.worst
    assert elapsed < 60


def test_initial_conditions_are_exact(reference_synthesis, reference_scenario):
    curve = reference_synthesis[0].curve
    d = curve.derivatives(0.0, 3)
    assert np.array_equal(d[0], reference_scenario.p0)
    assert np.abs(d[1] - reference_scenario.v0).max() <= 1e-15
    assert np.abs(d[2:]).max() <= 1e-12


def test_horizon_sequence_is_geometric(reference_synthesis):
    res = reference_synthesis[0]
    for k, att in enumerate(res.attempts):
        assert att.T == 10.0 * 1.1**k
    assert res.T == res.attempts[-1].T
    assert all(a.status == "infeasible" for a in res.attempts[:-1])


def test_durations_split_by_length(reference_synthesis):
    res = reference_synthesis[0]
    d = durations_for(res.tube, res.T)
    assert d.sum() == pytest.approx(res.T, rel=1e-14)
    assert np.array_equal(res.curve.durations, d)


def test_gives_up_after_iteration_cap(reference_plan, reference_scenario, published_bounds, params):
    inf, tube = reference_plan
    res = synthesize(tube, published_bounds, reference_scenario, inf, SynthParams(max_outer_iters=1),
                     params.m, params.g)
    assert not res.success and len(res.attempts) == 1 and res.curve is None
    assert "no feasible horizon" in res.message


def test_start_in_target_holds_position(reference_scenario, published_bounds, params):
    inf = inflate_scenario(reference_scenario, published_bounds.Lp)
    sc = dataclasses.replace(reference_scenario, p0=inf.target.center)
    plan = plan_tube(inf, RrtParams(seed=0), sc.p0)
    res = synthesize(plan.tube, published_bounds, sc, inf, SynthParams(), params.m, params.g)
    assert res.success and res.T == 10.0
    check = verify_curve(res.curve, res.tube, published_bounds, sc, inf, params.m, params.g, 1e-6)
    assert check.ok, check.worst


def test_reference_signal_matches_curve(reference_synthesis):
    curve = reference_synthesis[0].curve
    ref = ReferenceSignal(curve)
    for t in np.linspace(0, curve.T, 13):
        out = ref(t)
        for k in range(4):
            assert np.allclose(out[k], curve.eval(t, k), atol=1e-12)
