"""Shared fixtures and the acceptance summary printed at the end of a run."""
from __future__ import annotations

import time

import numpy as np
import pytest

from reachcert.bounds import PUBLISHED_GAINS, BoundConfig, PhysicalParams, build_matrices, compute_bounds
from reachcert.cli import load_scenario
from reachcert.geometry import inflate_scenario
from reachcert.synth import SynthParams, synthesize
from reachcert.tube import RrtParams, plan_tube

# criterion id -> (passed, detail); filled by tests/test_acceptance.py
ACCEPTANCE: dict = {}


def record(key: str, passed: bool, detail: str) -> None:
    ACCEPTANCE[key] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=_order):
        passed, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{key}: {'PASS' if passed else 'FAIL'} - {detail}")


def _order(key: str):
    head, _, tail = key.partition(" ")
    return (0, int(tail)) if head == "criterion" and tail.isdigit() else (1, key)


@pytest.fixture(scope="session")
def params():
    return PhysicalParams()


@pytest.fixture(scope="session")
def cfg():
    return BoundConfig()


@pytest.fixture(scope="session")
def published_bounds(params, cfg):
    return compute_bounds(PUBLISHED_GAINS, params, cfg)


@pytest.fixture(scope="session")
def published_matrices(params, cfg):
    return build_matrices(PUBLISHED_GAINS, params, cfg)


@pytest.fixture(scope="session")
def reference_scenario():
    return load_scenario("reference")


@pytest.fixture(scope="session")
def reference_plan(reference_scenario, published_bounds):
    """Inflated scenario and tube for the shipped scenario with seed 0."""
    inf = inflate_scenario(reference_scenario, published_bounds.Lp)
    res = plan_tube(inf, RrtParams(seed=0), reference_scenario.p0)
    assert res.success
    return inf, res.tube


@pytest.fixture(scope="session")
def reference_synthesis(reference_scenario, published_bounds, reference_plan, params):
    """(synthesis result, wall-clock seconds) for the shipped scenario."""
    inf, tube = reference_plan
    start = time.perf_counter()
    res = synthesize(tube, published_bounds, reference_scenario, inf, SynthParams(), params.m, params.g)
    elapsed = time.perf_counter() - start
    assert res.success, res.message
    return res, elapsed


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
