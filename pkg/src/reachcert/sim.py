"""Closed-loop simulation (Dormand-Prince 5(4)) and trace certification.

Several initial states can be integrated together as one batch: they
share a step-size sequence chosen so that every member meets the
tolerance.  A batch of one is the plain single-run integrator.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .bezier import de_casteljau
from .bounds import BoundConfig, BoundSet, Gains, LyapunovMatrices, PhysicalParams, L_of_t_array
from .controller import E3, SingularityError, control
from .geometry import Scenario
from .so3 import hat_batch

# Dormand-Prince tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4

MIN_STEP = 1e-12


class IntegrationError(RuntimeError):
    pass


@dataclass
class QuadState:
    p: np.ndarray
    v: np.ndarray
    R: np.ndarray
    w: np.ndarray

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.p, self.v, np.asarray(self.R).reshape(9), self.w])

    @classmethod
    def from_vector(cls, y) -> "QuadState":
        y = np.asarray(y, dtype=float)
        return cls(y[0:3].copy(), y[3:6].copy(), y[6:15].reshape(3, 3).copy(), y[15:18].copy())


@dataclass(frozen=True)
class SimOptions:
    atol: float = 1e-9
    rtol: float = 1e-8
    sample_rate: float = 100.0
    h0: float = 1e-3
    h_max: float = 0.05
    max_steps: int = 2_000_000
    force: bool = False


def state_derivative(p, v, R, w, f, tau, params: PhysicalParams):
    """Rigid-body equations: returns (p_dot, v_dot, R_dot, w_dot)."""
    J = params.J
    b3 = R[..., :, 2]
    v_dot = -params.g * E3 + np.asarray(f)[..., None] * b3 / params.m
    Jw = np.einsum("ij,...j->...i", J, w)
    w_dot = np.linalg.solve(J, (np.cross(-w, Jw) + tau).T).T
    return v, v_dot, R @ hat_batch(w), w_dot


def _unpack(Y):
    return Y[:, 0:3], Y[:, 3:6], Y[:, 6:15].reshape(-1, 3, 3), Y[:, 15:18]


def polar_project(R, tol: float = 1e-12, max_iter: int = 20):
    """Batched Newton polar iteration R <- (R + R^-T)/2."""
    R = np.array(R, dtype=float)
    eye = np.eye(3)
    for _ in range(max_iter):
        drift = np.max(np.abs(np.swapaxes(R, -1, -2) @ R - eye))
        if drift < tol:
            break
        R = 0.5 * (R + np.swapaxes(np.linalg.inv(R), -1, -2))
    return R


class ReferenceSignal:
    """Curve evaluation that continues the end polynomials slightly past
    [0, T], so centred differences at the horizon ends stay defined."""

    def __init__(self, curve):
        self.curve = curve

    def __call__(self, t):
        c = self.curve
        i = int(np.searchsorted(c.knots, t, side="right")) - 1
        i = min(max(i, 0), c.n_segments - 1)
        s = (t - c.knots[i]) / c.durations[i]
        return np.stack([de_casteljau(c._deriv[k][i], s) for k in range(4)])


def _rhs(t, Y, ref, gains, params):
    p, v, R, w = _unpack(Y)
    try:
        out = control(p, v, R, w, t, ref, gains, params)
    except SingularityError as exc:
        raise SingularityError(str(exc), t=t, state=Y.copy()) from None
    pd, vd, Rd, wd = state_derivative(p, v, R, w, out.f, out.tau, params)
    return np.concatenate([pd, vd, Rd.reshape(-1, 9), wd], axis=1)


CSV_HEADER = (
    ["t", "px", "py", "pz", "vx", "vy", "vz"]
    + [f"r{i}{j}" for i in range(1, 4) for j in range(1, 4)]
    + ["wx", "wy", "wz", "ep", "ev", "V1", "V2", "V", "f", "Fd3"]
)


@dataclass
class SimulationTrace:
    """Sampled closed-loop run.  ep/ev are error norms; the full error
    vectors are kept when the trace comes straight from the integrator."""

    t: np.ndarray
    p: np.ndarray
    v: np.ndarray
    R: np.ndarray
    w: np.ndarray
    ep: np.ndarray
    ev: np.ndarray
    V1: np.ndarray
    V2: np.ndarray
    f: np.ndarray
    Fd3: np.ndarray
    errors: dict | None = field(default=None, repr=False)
    steps: int = 0

    @property
    def V(self) -> np.ndarray:
        return self.V1 + self.V2

    @property
    def orthonormality_drift(self) -> float:
        RtR = np.swapaxes(self.R, -1, -2) @ self.R
        return float(np.max(np.abs(RtR - np.eye(3))))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for k in range(len(self.t)):
            row = [self.t[k], *self.p[k], *self.v[k], *self.R[k].reshape(9), *self.w[k]]
            row += [self.ep[k], self.ev[k], self.V1[k], self.V2[k], self.V1[k] + self.V2[k], self.f[k], self.Fd3[k]]
            w.writerow([repr(float(x)) for x in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "SimulationTrace":
        rows = list(csv.reader(io.StringIO(text)))
        if rows[0] != CSV_HEADER:
            raise ValueError("unexpected trace CSV header")
        A = np.array([[float(x) for x in r] for r in rows[1:]]).reshape(-1, len(CSV_HEADER))
        return cls(
            t=A[:, 0], p=A[:, 1:4], v=A[:, 4:7], R=A[:, 7:16].reshape(-1, 3, 3), w=A[:, 16:19],
            ep=A[:, 19], ev=A[:, 20], V1=A[:, 21], V2=A[:, 22], f=A[:, 24], Fd3=A[:, 25],
        )


def _sample_times(T: float, rate: float, knots) -> np.ndarray:
    n = int(math.floor(T * rate + 1e-9))
    grid = np.arange(n + 1) / rate
    return np.unique(np.concatenate([grid, np.asarray(knots, dtype=float), [T]]))


def integrate(
    x0,
    curve,
    gains: Gains,
    params: PhysicalParams,
    L: LyapunovMatrices,
    opts: SimOptions = SimOptions(),
    t_end: float | None = None,
    cfg: BoundConfig = BoundConfig(),
) -> list:
    """Integrate one or more initial states (QuadState or list of them).

    Every start must lie in the initial set unless opts.force is set."""
    from .initial_set import initial_set_check

    states = [x0] if isinstance(x0, QuadState) else list(x0)
    ref = ReferenceSignal(curve)
    if not opts.force:
        for k, s in enumerate(states):
            rep = initial_set_check(s, ref, gains, params, L, cfg)
            if not rep.member:
                raise ValueError(f"initial state {k} is outside the initial set: {rep}")
    Y = np.array([s.to_vector() for s in states])
    Y[:, 6:15] = polar_project(Y[:, 6:15].reshape(-1, 3, 3)).reshape(-1, 9)
    T = curve.T if t_end is None else float(t_end)
    stops = _sample_times(T, opts.sample_rate, [k for k in curve.knots if k <= T])

    records = []

    def record(t, Y):
        p, v, R, w = _unpack(Y)
        out = control(p, v, R, w, t, ref, gains, params)
        e = out.errors
        z = np.concatenate([e.e_p, e.e_v], axis=1)
        V1 = np.einsum("bi,ij,bj->b", z, L.M1, z)
        V2 = (
            0.5 * np.einsum("bi,ij,bj->b", e.e_w, params.J, e.e_w)
            + gains.kR * e.psi
            + L.c2 * np.einsum("bi,bi->b", e.e_R, e.e_w)
        )
        records.append((t, Y.copy(), e, V1, V2, out.f, out.F_d[:, 2]))

    t = 0.0
    h = opts.h0
    steps = 0
    record(t, Y)
    k1 = _rhs(t, Y, ref, gains, params)
    for stop in stops[1:]:
        while t < stop:
            h_try = min(h, stop - t, opts.h_max)
            last = h_try >= stop - t
            K = [k1]
            for s in range(1, 7):
                Ys = Y + h_try * sum(a * K[q] for q, a in enumerate(_A[s]) if a != 0.0)
                K.append(_rhs(t + _C[s] * h_try, Ys, ref, gains, params))
            Y5 = Y + h_try * sum(b * K[q] for q, b in enumerate(_B5) if b != 0.0)
            err = h_try * sum(e * K[q] for q, e in enumerate(_E) if e != 0.0)
            scale = opts.atol + opts.rtol * np.maximum(np.abs(Y), np.abs(Y5))
            err_norm = float(np.max(np.sqrt(np.mean((err / scale) ** 2, axis=1))))
            if err_norm <= 1.0:
                t = stop if last else t + h_try
                Y = Y5
                Y[:, 6:15] = polar_project(Y[:, 6:15].reshape(-1, 3, 3)).reshape(-1, 9)
                k1 = _rhs(t, Y, ref, gains, params)
                steps += 1
                grow = 5.0 if err_norm == 0 else min(5.0, 0.9 * err_norm**-0.2)
                if not last or grow < 1.0:
                    h = h_try * max(grow, 0.2)
            else:
                h = h_try * max(0.2, 0.9 * err_norm**-0.2)
                if h < MIN_STEP:
                    raise IntegrationError(f"step size underflow at t = {t:.6g}")
            if steps > opts.max_steps:
                raise IntegrationError("maximum number of steps exceeded")
        record(t, Y)

    traces = []
    ts = np.array([r[0] for r in records])
    for b in range(len(states)):
        Ys = np.array([r[1][b] for r in records])
        traces.append(
            SimulationTrace(
                t=ts,
                p=Ys[:, 0:3],
                v=Ys[:, 3:6],
                R=Ys[:, 6:15].reshape(-1, 3, 3),
                w=Ys[:, 15:18],
                ep=np.array([np.linalg.norm(r[2].e_p[b]) for r in records]),
                ev=np.array([np.linalg.norm(r[2].e_v[b]) for r in records]),
                V1=np.array([r[3][b] for r in records]),
                V2=np.array([r[4][b] for r in records]),
                f=np.array([r[5][b] for r in records]),
                Fd3=np.array([r[6][b] for r in records]),
                errors={
                    name: np.array([getattr(r[2], name)[b] for r in records])
                    for name in ("e_p", "e_v", "e_R", "e_w", "psi")
                },
                steps=steps,
            )
        )
    return traces


@dataclass
class CheckResult:
    name: str
    violations: int
    first_time: float | None
    worst_excess: float
    worst_value: float | None = None

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "violations": self.violations,
            "first_violation_time": self.first_time,
            "worst_excess": self.worst_excess,
            "largest_value_at_violation": self.worst_value,
        }


@dataclass
class CertificationReport:
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def violated(self) -> list:
        return [c.name for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        return {"passed": self.passed, "checks": {c.name: c.to_dict() for c in self.checks}}


def _check(name, t, excess, values=None) -> CheckResult:
    """values: the monitored quantity, reported at the violating samples."""
    excess = np.asarray(excess, dtype=float)
    bad = excess > 0
    worst_value = None
    if values is not None and bad.any():
        worst_value = float(np.max(np.asarray(values)[bad]))
    return CheckResult(
        name,
        int(bad.sum()),
        float(t[np.argmax(bad)]) if bad.any() else None,
        float(np.max(excess)) if len(excess) else 0.0,
        worst_value,
    )


def certify_trace(tr: SimulationTrace, B: BoundSet, sc: Scenario, rel_tol: float = 1e-6) -> CertificationReport:
    """Check every recorded sample against the certified bounds and the task."""
    t = tr.t
    ep, ev = tr.ep, tr.ev
    checks = [
        _check("position_error", t, ep - B.Lp),
        _check("velocity_error", t, ev - B.Lv),
        _check("velocity_limit", t, np.max(np.abs(tr.v) - sc.v_max, axis=1)),
        _check("thrust_bound", t, np.abs(tr.f) - B.Fbar),
        _check("thrust_positive", t, np.where(tr.Fd3 > 0, -tr.Fd3, 1.0)),
    ]
    V1_0, V2_0 = max(tr.V1[0], 0.0), max(tr.V2[0], 0.0)
    bound = L_of_t_array(V1_0, V2_0, t - t[0], B.constants) * (1 + rel_tol)
    rootV = np.sqrt(np.maximum(tr.V, 0.0))
    checks.append(_check("lyapunov_bound", t, rootV - bound, rootV))
    decay = V2_0 * np.exp(-2 * B.beta * (t - t[0])) * (1 + rel_tol)
    checks.append(_check("attitude_decay", t, tr.V2 - decay, tr.V2))
    safe = np.array([sc.is_safe(p) for p in tr.p])
    checks.append(_check("safe_set", t, np.where(safe, -1.0, 1.0)))
    reached = sc.target.contains(tr.p[-1])
    checks.append(_check("target_reached", t[-1:], np.array([-1.0 if reached else 1.0])))
    return CertificationReport(checks)
