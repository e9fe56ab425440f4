"""Iterative time scaling: grow the horizon until the control-point LP is feasible."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .bezier import PiecewiseBezier, TrajectoryLimits, assemble, unpack, var_index
from .bounds import BoundSet
from .geometry import InflatedScenario, Scenario
from .lp import solve_feasibility
from .tube import SafeTube

log = logging.getLogger(__name__)

MERGE_FRACTION = 1e-9


@dataclass(frozen=True)
class SynthParams:
    T0: float = 10.0
    alpha_T: float = 1.1
    max_outer_iters: int = 60
    eps: float = 1e-6
    Np: int = 14
    terminal_rest: bool = False

    def __post_init__(self):
        if self.T0 <= 0 or self.alpha_T <= 1 or self.eps <= 0 or self.max_outer_iters < 1:
            raise ValueError("need T0 > 0, alpha_T > 1, eps > 0, max_outer_iters >= 1")
        if self.Np < 4:
            raise ValueError("degree must be at least 4")


@dataclass
class Attempt:
    T: float
    status: str
    iterations: int


@dataclass
class SynthResult:
    success: bool
    curve: PiecewiseBezier | None
    T: float | None
    attempts: list = field(default_factory=list)
    tube: SafeTube | None = None
    message: str = ""


def trajectory_limits(B: BoundSet, sc: Scenario, m: float, g: float, eps: float, rest=False) -> TrajectoryLimits:
    return TrajectoryLimits(
        p0=sc.p0,
        v0=sc.v0,
        v_limit=sc.v_max - B.Lv,
        a_max=sc.a_max,
        g=g,
        accel_floor=(B.Lf - m * g + eps) / m,
        terminal_rest=rest,
    )


def merge_short_edges(tube: SafeTube, p0, inf: InflatedScenario) -> SafeTube:
    """Drop waypoints whose incoming edge is a negligible fraction of the path."""
    pts, rad = list(tube.waypoints), list(tube.radii)
    i = 1
    while i < len(pts) and len(pts) > 2:
        L = sum(np.linalg.norm(pts[k] - pts[k - 1]) for k in range(1, len(pts)))
        if np.linalg.norm(pts[i] - pts[i - 1]) < MERGE_FRACTION * L and i < len(pts) - 1:
            trial = SafeTube(np.delete(np.array(pts), i, 0), np.delete(np.array(rad), i, 0))
            if not trial.violations(p0, inf):
                log.warning("dropping waypoint %d: zero-length tube edge", i)
                pts, rad = list(trial.waypoints), list(trial.radii)
                continue
        i += 1
    return SafeTube(np.array(pts), np.array(rad))


def durations_for(tube: SafeTube, T: float) -> np.ndarray:
    lengths = np.linalg.norm(np.diff(tube.waypoints, axis=0), axis=1)
    return lengths / lengths.sum() * T


def _straight_line_hint(tube: SafeTube, Np: int) -> np.ndarray:
    Ns = tube.n_segments
    x = np.empty(3 * Ns * (Np + 1))
    s = np.linspace(0.0, 1.0, Np + 1)
    for i in range(Ns):
        seg = tube.waypoints[i] + s[:, None] * (tube.waypoints[i + 1] - tube.waypoints[i])
        for a in range(3):
            for j in range(Np + 1):
                x[var_index(i, j, a, Ns, Np)] = seg[j, a]
    return x


def polish_start(ctrl: np.ndarray, p0, v0, delta0: float) -> np.ndarray:
    """Set the first four control points to their closed-form values."""
    Np = ctrl.shape[1] - 1
    c = ctrl.copy()
    c[0, 0] = p0
    c[0, 1] = p0 + delta0 * np.asarray(v0) / Np
    c[0, 2] = 2 * c[0, 1] - c[0, 0]
    c[0, 3] = 3 * c[0, 2] - 3 * c[0, 1] + c[0, 0]
    return c


def synthesize(
    tube: SafeTube,
    B: BoundSet,
    sc: Scenario,
    inf: InflatedScenario,
    params: SynthParams,
    m: float,
    g: float,
) -> SynthResult:
    hold = tube.n_segments == 0
    if hold:
        # start already in the target: one segment that stays in the target box
        tube = SafeTube(np.repeat(tube.waypoints, 2, 0), np.repeat(tube.radii, 2, 0))
    else:
        tube = merge_short_edges(tube, sc.p0, inf)
    if not hold and np.any(np.linalg.norm(np.diff(tube.waypoints, axis=0), axis=1) <= 0):
        return SynthResult(False, None, None, [], tube, "tube has a zero-length edge that cannot be merged")
    lim = trajectory_limits(B, sc, m, g, params.eps, params.terminal_rest)
    Ns, Np = tube.n_segments, params.Np
    z_start = var_index(0, 0, 2, Ns, Np)
    hint = _straight_line_hint(tube, Np)
    attempts = []
    T = params.T0
    last = ""
    for k in range(params.max_outer_iters):
        T = params.T0 * params.alpha_T**k
        delta = np.array([T]) if hold else durations_for(tube, T)
        prob = assemble(tube.waypoints, tube.radii, delta, lim, Np)
        sol = solve_feasibility(prob, x_hint=hint, block_order=lambda j: 0 if j >= z_start else 1)
        attempts.append(Attempt(float(T), sol.status, sol.iterations))
        log.info("T = %.4f: %s (%d pivots)", T, sol.status, sol.iterations)
        last = sol.status
        if sol.feasible:
            ctrl = polish_start(unpack(sol.x, Ns, Np), sc.p0, sc.v0, delta[0])
            return SynthResult(True, PiecewiseBezier(delta, ctrl), float(T), attempts, tube)
    return SynthResult(False, None, None, attempts, tube, f"no feasible horizon found; last LP status {last}")


@dataclass
class CurveCheck:
    worst: dict
    ok: bool


def verify_curve(
    curve: PiecewiseBezier,
    tube: SafeTube,
    B: BoundSet,
    sc: Scenario,
    inf: InflatedScenario,
    m: float,
    g: float,
    eps: float,
    n_per_segment: int = 10_000,
    tol: float = 1e-9,
) -> CurveCheck:
    """Dense-sampling check of every continuous-time trajectory condition.

    `worst` maps each condition to its largest violation (<= 0 means met).
    """
    _, P = curve.sample(n_per_segment, 0)
    _, V = curve.sample(n_per_segment, 1)
    _, A = curve.sample(n_per_segment, 2)
    seg = np.repeat(np.arange(curve.n_segments), n_per_segment)
    lo = tube.waypoints[seg] - tube.radii[seg]
    hi = tube.waypoints[seg] + tube.radii[seg]
    worst = {}
    worst["tube"] = float(max(np.max(lo - P), np.max(P - hi)))
    worst["domain"] = float(max(np.max(inf.domain.lo - P), np.max(P - inf.domain.hi)))
    clear = -np.inf
    for ob in inf.obstacles:
        # positive when a sample lies inside the inflated obstacle
        depth = np.min(np.minimum(P - ob.lo, ob.hi - P), axis=1)
        clear = max(clear, float(np.max(depth)))
    worst["obstacles"] = clear
    worst["velocity"] = float(np.max(np.abs(V) - (sc.v_max - B.Lv)))
    acc_env = np.abs(A + np.array([0.0, 0.0, g]))
    worst["acceleration"] = float(np.max(acc_env - sc.a_max))
    worst["thrust_floor"] = float(np.max((B.Lf - m * g + eps) - m * A[:, 2]))
    end = curve.eval(curve.T, 0)
    worst["terminal"] = float(max(np.max(inf.target.lo - end), np.max(end - inf.target.hi)))
    start = curve.derivatives(0.0, 3)
    worst["initial"] = float(
        max(
            np.max(np.abs(start[0] - sc.p0)),
            np.max(np.abs(start[1] - sc.v0)),
            np.max(np.abs(start[2])),
            np.max(np.abs(start[3])),
        )
    )
    ok = all(v <= tol for k, v in worst.items() if k not in ("obstacles", "initial")) and worst["obstacles"] < 0
    ok = ok and worst["initial"] <= 1e-12
    return CurveCheck(worst, ok)
