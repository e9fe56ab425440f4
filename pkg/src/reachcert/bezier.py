"""Piecewise Bezier curves in the Bernstein basis and the LP that shapes them.

Constraint tally produced by `assemble` for N_s segments of degree N_p
(rest=False):

    equalities   12 + 15 (N_s - 1)
    inequalities 6 N_s (N_p + 1)      tube boxes
               + 6 N_s N_p            velocity
               + 6 N_s (N_p - 1)      acceleration envelope
               +   N_s (N_p - 1)      vertical-thrust floor
               + 6                    terminal box

Terminal rest adds 6 equalities (zero velocity and acceleration at T).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .lp import LpProblem

MAX_ORDER = 4


def bernstein(i: int, N: int, t: float) -> float:
    if not (0 <= i <= N):
        raise ValueError("bernstein index out of range")
    if not (0.0 <= t <= 1.0):
        raise ValueError("bernstein parameter must lie in [0, 1]")
    # python's 0.0 ** 0 == 1.0 gives the 0^0 := 1 convention
    return math.comb(N, i) * t**i * (1.0 - t) ** (N - i)


def bernstein_row(N: int, t: float) -> np.ndarray:
    i = np.arange(N + 1)
    binom = np.array([math.comb(N, k) for k in i], dtype=float)
    return binom * np.power(t, i) * np.power(1.0 - t, N - i)


def de_casteljau(pts: np.ndarray, s: float) -> np.ndarray:
    """Evaluate a Bezier curve by repeated interpolation a + s (b - a),
    which reproduces repeated control points exactly."""
    pts = np.asarray(pts, dtype=float)
    while len(pts) > 1:
        pts = pts[:-1] + s * (pts[1:] - pts[:-1])
    return pts[0]


def difference_points(ctrl: np.ndarray, k: int) -> np.ndarray:
    """k-fold forward differences of the control points (no scaling)."""
    return np.diff(ctrl, n=k, axis=0) if k else ctrl


def falling(N: int, k: int) -> float:
    return float(math.perm(N, k))


@dataclass
class PiecewiseBezier:
    durations: np.ndarray  # (N_s,)
    control_points: np.ndarray  # (N_s, N_p + 1, 3)

    def __post_init__(self):
        self.durations = np.asarray(self.durations, dtype=float)
        self.control_points = np.asarray(self.control_points, dtype=float)
        if self.control_points.ndim != 3 or self.control_points.shape[2] != 3:
            raise ValueError("control points must have shape (N_s, N_p + 1, 3)")
        if len(self.durations) != len(self.control_points):
            raise ValueError("one duration per segment is required")
        if np.any(self.durations <= 0):
            raise ValueError("segment durations must be positive")
        if self.degree < MAX_ORDER:
            raise ValueError("degree must be at least 4 for fourth-derivative continuity")
        self.knots = np.concatenate([[0.0], np.cumsum(self.durations)])
        # derivative control points, pre-scaled: deriv[k][i] has N_p - k + 1 rows
        Np = self.degree
        self._deriv = [
            [falling(Np, k) / d**k * difference_points(c, k) for c, d in zip(self.control_points, self.durations)]
            for k in range(MAX_ORDER + 1)
        ]

    @property
    def n_segments(self) -> int:
        return len(self.durations)

    @property
    def degree(self) -> int:
        return self.control_points.shape[1] - 1

    @property
    def T(self) -> float:
        return float(self.knots[-1])

    def segment_at(self, t: float) -> int:
        """Right-continuous segment lookup; t = T maps to the last segment."""
        if not (0.0 <= t <= self.T):
            raise ValueError(f"t = {t} outside [0, {self.T}]")
        i = int(np.searchsorted(self.knots, t, side="right")) - 1
        return min(max(i, 0), self.n_segments - 1)

    def _local(self, t: float):
        i = self.segment_at(t)
        s = (t - self.knots[i]) / self.durations[i]
        return i, min(max(s, 0.0), 1.0)

    def eval(self, t: float, order: int = 0) -> np.ndarray:
        if not 0 <= order <= MAX_ORDER:
            raise ValueError("derivative order must be in [0, 4]")
        i, s = self._local(t)
        return de_casteljau(self._deriv[order][i], s)

    def derivatives(self, t: float, max_order: int = 3) -> np.ndarray:
        """Rows 0..max_order: position and its time derivatives at t."""
        i, s = self._local(t)
        return np.stack([de_casteljau(self._deriv[k][i], s) for k in range(max_order + 1)])

    def __call__(self, t: float) -> np.ndarray:
        return self.derivatives(t, 3)

    def sample(self, n_per_segment: int, order: int = 0) -> tuple[np.ndarray, np.ndarray]:
        """Vectorised dense sampling; returns (times, values) including both ends of every segment."""
        s = np.linspace(0.0, 1.0, n_per_segment)
        Np = self.degree - order
        i = np.arange(Np + 1)
        binom = np.array([math.comb(Np, k) for k in i], dtype=float)
        basis = binom * s[:, None] ** i * (1.0 - s[:, None]) ** (Np - i)
        ts, vals = [], []
        for seg in range(self.n_segments):
            ts.append(self.knots[seg] + s * self.durations[seg])
            vals.append(basis @ self._deriv[order][seg])
        return np.concatenate(ts), np.concatenate(vals)

    def to_dict(self) -> dict:
        return {
            "segments": [
                {"duration": float(d), "control_points": c.tolist()}
                for d, c in zip(self.durations, self.control_points)
            ]
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "PiecewiseBezier":
        segs = d["segments"]
        return cls([s["duration"] for s in segs], [s["control_points"] for s in segs])


def var_index(seg: int, j: int, axis: int, Ns: int, Np: int) -> int:
    """Variables are stored axis-major so each axis is a contiguous block."""
    return (axis * Ns + seg) * (Np + 1) + j


@dataclass(frozen=True)
class TrajectoryLimits:
    """Everything the LP needs beyond the tube itself."""

    p0: np.ndarray
    v0: np.ndarray
    v_limit: np.ndarray  # v_max - Lv
    a_max: np.ndarray
    g: float
    accel_floor: float  # (Lf - m g + eps) / m, lower bound on the vertical acceleration
    terminal_rest: bool = False


class _Rows:
    def __init__(self, n):
        self.n = n
        self.eq, self.beq, self.ub, self.bub = [], [], [], []

    def _row(self, coeffs):
        r = np.zeros(self.n)
        for idx, c in coeffs:
            r[idx] += c
        return r

    def equal(self, coeffs, rhs):
        self.eq.append(self._row(coeffs))
        self.beq.append(rhs)

    def upper(self, coeffs, rhs):
        self.ub.append(self._row(coeffs))
        self.bub.append(rhs)

    def lower(self, coeffs, rhs):
        self.upper([(i, -c) for i, c in coeffs], -rhs)

    def problem(self) -> LpProblem:
        return LpProblem(
            self.n,
            np.array(self.eq).reshape(-1, self.n),
            np.array(self.beq),
            np.array(self.ub).reshape(-1, self.n),
            np.array(self.bub),
        )


BINOM4 = [np.array([1.0]), np.array([-1.0, 1.0]), np.array([1.0, -2.0, 1.0]),
          np.array([-1.0, 3.0, -3.0, 1.0]), np.array([1.0, -4.0, 6.0, -4.0, 1.0])]


def assemble(waypoints, radii, durations, lim: TrajectoryLimits, Np: int) -> LpProblem:
    """Linear constraints on the control points for fixed segment durations."""
    P = np.asarray(waypoints, float)
    Rr = np.asarray(radii, float)
    delta = np.asarray(durations, float)
    Ns = len(delta)
    if P.shape != (Ns + 1, 3) or Rr.shape != (Ns + 1, 3):
        raise ValueError("need N_s + 1 waypoints and radii for N_s durations")
    if Np < MAX_ORDER:
        raise ValueError("degree must be at least 4")
    n = 3 * Ns * (Np + 1)
    rows = _Rows(n)
    idx = lambda i, j, a: var_index(i, j, a, Ns, Np)  # noqa: E731

    def diff(i, start, k, a, scale=1.0):
        return [(idx(i, start + q, a), scale * c) for q, c in enumerate(BINOM4[k])]

    for a in range(3):
        # initial position, velocity, zero acceleration and jerk
        rows.equal([(idx(0, 0, a), 1.0)], lim.p0[a])
        rows.equal(diff(0, 0, 1, a, Np / delta[0]), lim.v0[a])
        rows.equal(diff(0, 0, 2, a), 0.0)
        rows.equal(diff(0, 0, 3, a), 0.0)

    for i in range(Ns):
        lo_box, hi_box = P[i] - Rr[i], P[i] + Rr[i]
        for a in range(3):
            for j in range(Np + 1):
                rows.upper([(idx(i, j, a), 1.0)], hi_box[a])
                rows.lower([(idx(i, j, a), 1.0)], lo_box[a])

    for i in range(Ns - 1):
        for a in range(3):
            # C0 .. C4 at the junction, each derivative scaled by delta^-k
            for k in range(MAX_ORDER + 1):
                left = diff(i, Np - k, k, a, 1.0 / delta[i] ** k)
                right = diff(i + 1, 0, k, a, -1.0 / delta[i + 1] ** k)
                rows.equal(left + right, 0.0)

    for i in range(Ns):
        kv = Np / delta[i]
        ka = Np * (Np - 1) / delta[i] ** 2
        for a in range(3):
            for j in range(Np):
                rows.upper(diff(i, j, 1, a, kv), lim.v_limit[a])
                rows.lower(diff(i, j, 1, a, kv), -lim.v_limit[a])
            for j in range(Np - 1):
                g = lim.g if a == 2 else 0.0
                rows.upper(diff(i, j, 2, a, ka), lim.a_max[a] - g)
                rows.lower(diff(i, j, 2, a, ka), -lim.a_max[a] - g)
        for j in range(Np - 1):
            rows.lower(diff(i, j, 2, 2, ka), lim.accel_floor)

    last = Ns - 1
    for a in range(3):
        rows.upper([(idx(last, Np, a), 1.0)], P[Ns, a] + Rr[Ns, a])
        rows.lower([(idx(last, Np, a), 1.0)], P[Ns, a] - Rr[Ns, a])

    if lim.terminal_rest:
        for a in range(3):
            rows.equal(diff(last, Np - 1, 1, a), 0.0)
            rows.equal(diff(last, Np - 2, 2, a), 0.0)

    return rows.problem()


def constraint_tally(Ns: int, Np: int, terminal_rest: bool = False) -> tuple[int, int]:
    eq = 12 + 15 * (Ns - 1) + (6 if terminal_rest else 0)
    ub = 6 * Ns * (Np + 1) + 6 * Ns * Np + 6 * Ns * (Np - 1) + Ns * (Np - 1) + 6
    return eq, ub


def unpack(x, Ns: int, Np: int) -> np.ndarray:
    """LP vector -> control points (N_s, N_p + 1, 3)."""
    return np.asarray(x, float).reshape(3, Ns, Np + 1).transpose(1, 2, 0).copy()
