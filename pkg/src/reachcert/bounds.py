"""Lyapunov tracking-error bounds for the geometric controller.

The chain is: gains -> Lyapunov matrices (M1, W1, M21, M22, W2) ->
stability constants (beta, alpha0..2) -> time-varying bound L(x, y, t) ->
its peak over t -> uniform bounds on position, velocity and PD-force error.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .so3 import induced_norm2, lambda_min, spd_inv_sqrt

DEGENERATE_RATE = 1e-12

_I3 = np.eye(3)
_Z3 = np.zeros((3, 3))


@dataclass(frozen=True)
class PhysicalParams:
    m: float = 4.34
    J: np.ndarray = field(default_factory=lambda: np.diag([0.0820, 0.0845, 0.1377]))
    g: float = 9.81

    def __post_init__(self):
        J = np.asarray(self.J, dtype=float)
        object.__setattr__(self, "J", J)
        if self.m <= 0 or self.g <= 0:
            raise ValueError("mass and gravity must be positive")
        if J.shape != (3, 3) or not np.allclose(J, J.T) or np.linalg.eigvalsh(J)[0] <= 0:
            raise ValueError("inertia matrix must be symmetric positive definite")

    @property
    def J_min(self) -> float:
        return lambda_min(self.J)


@dataclass(frozen=True)
class Gains:
    kp: float
    kv: float
    kR: float
    kw: float
    gamma1: float
    gamma2: float

    def __post_init__(self):
        if min(self.kp, self.kv, self.kR, self.kw) <= 0:
            raise ValueError("control gains must be positive")
        if not (0 < self.gamma1 < 1 and 0 < self.gamma2 < 1):
            raise ValueError("gamma1, gamma2 must lie in (0, 1)")

    def as_vector(self) -> np.ndarray:
        return np.array([self.kp, self.kv, self.kR, self.kw, self.gamma1, self.gamma2])

    @classmethod
    def from_vector(cls, x) -> "Gains":
        return cls(*(float(v) for v in x))

    def to_dict(self) -> dict:
        return asdict(self)


PUBLISHED_GAINS = Gains(18.5058, 5.6704, 23.5537, 1.4309, 0.55, 0.6047)


@dataclass(frozen=True)
class BoundConfig:
    psi_bar: float = 0.005
    alpha_psi: float = 0.4
    V1_bar: float = 0.4
    a_max: tuple = (1.0, 1.0, 10.0)
    eps: float = 1e-6

    def __post_init__(self):
        if not 0 < self.psi_bar < 2:
            raise ValueError("psi_bar must lie in (0, 2)")
        if not 0 < self.alpha_psi < 1:
            raise ValueError("alpha_psi must lie in (0, 1)")
        if self.V1_bar <= 0 or self.eps <= 0:
            raise ValueError("V1_bar and eps must be positive")
        a = tuple(float(v) for v in self.a_max)
        if len(a) != 3 or min(a) <= 0:
            raise ValueError("a_max must be three positive numbers")
        object.__setattr__(self, "a_max", a)

    @property
    def a_max_vec(self) -> np.ndarray:
        return np.array(self.a_max)


@dataclass(frozen=True)
class LyapunovMatrices:
    gains: Gains
    c1: float
    c2: float
    M1: np.ndarray
    W1: np.ndarray
    M21: np.ndarray
    M22: np.ndarray
    W2: np.ndarray


@dataclass(frozen=True)
class StabilityConstants:
    beta: float
    alpha0: float
    alpha1: float
    alpha2: float


@dataclass(frozen=True)
class BoundSet:
    c1: float
    c2: float
    beta: float
    alpha0: float
    alpha1: float
    alpha2: float
    vbar2: float
    Lu: float
    Lp: float
    Lv: float
    Lf: float
    Fbar: float

    @property
    def constants(self) -> StabilityConstants:
        return StabilityConstants(self.beta, self.alpha0, self.alpha1, self.alpha2)

    def to_dict(self) -> dict:
        return {k: float(v) for k, v in asdict(self).items()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False)

    @classmethod
    def from_dict(cls, d: dict) -> "BoundSet":
        return cls(**{k: float(d[k]) for k in cls.__dataclass_fields__})


class BoundComputationError(RuntimeError):
    pass


def c_limits(gains: Gains, params: PhysicalParams) -> tuple[float, float]:
    """Upper limits on c1, c2 that keep all five Lyapunov matrices definite."""
    kp, kv, kR, kw = gains.kp, gains.kv, gains.kR, gains.kw
    m, lJ = params.m, params.J_min
    c1_max = min(math.sqrt(kp * m), 4 * m * kp * kv / (kv**2 + 4 * m * kp))
    c2_max = min(math.sqrt(kR * lJ), 4 * lJ * kR * kw / (kw**2 + 4 * lJ * kR))
    return c1_max, c2_max


def build_matrices(gains: Gains, params: PhysicalParams, cfg: BoundConfig) -> LyapunovMatrices:
    kp, kv, kR, kw = gains.kp, gains.kv, gains.kR, gains.kw
    m, J = params.m, params.J
    c1_max, c2_max = c_limits(gains, params)
    c1 = gains.gamma1 * c1_max
    c2 = gains.gamma2 * c2_max
    Jinv = np.linalg.inv(J)

    M1 = 0.5 * np.block([[kp * _I3, c1 * _I3], [c1 * _I3, m * _I3]])
    W1 = np.block(
        [[c1 * kp / m * _I3, c1 * kv / (2 * m) * _I3], [c1 * kv / (2 * m) * _I3, (kv - c1) * _I3]]
    )
    M21 = 0.5 * np.block([[kR * _I3, c2 * _I3], [c2 * _I3, J]])
    M22 = 0.5 * np.block([[2 * kR / (2 - cfg.psi_bar) * _I3, c2 * _I3], [c2 * _I3, J]])
    W2 = np.block([[c2 * kR * Jinv, c2 * kw / 2 * Jinv], [c2 * kw / 2 * Jinv, (kw - c2) * _I3]])
    W2 = 0.5 * (W2 + W2.T)

    for name, M in (("M1", M1), ("W1", W1), ("M21", M21), ("M22", M22), ("W2", W2)):
        lo = lambda_min(M)
        if not lo > 0:
            raise BoundComputationError(f"{name} is not positive definite (min eig {lo:.3e})")
    return LyapunovMatrices(gains, c1, c2, M1, W1, M21, M22, W2)


def _selectors(L: LyapunovMatrices, params: PhysicalParams):
    g = L.gains
    return {
        "pos": np.hstack([_I3, _Z3]),
        "vel": np.hstack([_Z3, _I3]),
        "force": np.hstack([g.kp * _I3, g.kv * _I3]),
        "mixed": np.hstack([L.c1 / params.m * _I3, _I3]),
    }


def stability_constants(
    L: LyapunovMatrices, params: PhysicalParams, cfg: BoundConfig
) -> StabilityConstants:
    M1is = spd_inv_sqrt(L.M1)
    M22is = spd_inv_sqrt(L.M22)
    M21is = spd_inv_sqrt(L.M21)
    beta = lambda_min(M22is @ L.W2 @ M22is) / 2
    alpha0 = min(lambda_min(M1is @ L.W1 @ M1is), 2 * beta)

    sel = _selectors(L, params)
    psi_factor = math.sqrt(2 / (2 - cfg.psi_bar))
    n_mixed = induced_norm2(sel["mixed"] @ M1is)
    n_force = induced_norm2(sel["force"] @ M1is)
    n_rot = induced_norm2(sel["pos"] @ M21is)
    alpha1 = n_mixed * n_force * n_rot * psi_factor
    alpha2 = params.m * float(np.linalg.norm(cfg.a_max_vec)) * n_mixed * n_rot * psi_factor
    return StabilityConstants(beta, alpha0, alpha1, alpha2)


def _decay_integral(rate: float, t: float) -> float:
    """Integral of exp(rate*s) over [0, t]."""
    if abs(rate) < DEGENERATE_RATE:
        return t
    return math.expm1(rate * t) / rate


def L_of_t(x: float, y: float, t: float, c: StabilityConstants) -> float:
    if x < 0 or y < 0 or t < 0:
        raise ValueError("L_of_t is defined for non-negative arguments only")
    growth = math.exp(c.alpha1 * math.sqrt(y) / (2 * c.beta))
    decay = math.exp(-c.alpha0 / 2 * t)
    L1 = growth * math.sqrt(x + y) * decay
    L2 = growth * c.alpha2 * math.sqrt(y) / 2 * decay * _decay_integral(c.alpha0 / 2 - c.beta, t)
    return L1 + L2


def L_of_t_array(x: float, y: float, t, c: StabilityConstants) -> np.ndarray:
    """Vectorised L_of_t over an array of times."""
    t = np.asarray(t, dtype=float)
    growth = math.exp(c.alpha1 * math.sqrt(y) / (2 * c.beta))
    decay = np.exp(-c.alpha0 / 2 * t)
    rate = c.alpha0 / 2 - c.beta
    integral = t if abs(rate) < DEGENERATE_RATE else np.expm1(rate * t) / rate
    return growth * decay * (math.sqrt(x + y) + c.alpha2 * math.sqrt(y) / 2 * integral)


def t_max(x: float, y: float, c: StabilityConstants) -> float:
    """Time at which L(x, y, .) peaks."""
    if x < 0 or y < 0:
        raise ValueError("t_max is defined for non-negative arguments only")
    a0, a2, beta = c.alpha0, c.alpha2, c.beta
    sy, sxy = math.sqrt(y), math.sqrt(x + y)
    push = a2 * sy
    if push <= 0:
        return 0.0  # pure decay: the peak is at the start
    if abs(a0 / 2 - beta) < DEGENERATE_RATE:
        return max(2 / a0 - 2 * sxy / push, 0.0)
    num = beta * push / (2 * beta - a0)
    den = a0 / 2 * sxy + a0 * push / (2 * (2 * beta - a0))
    ratio = num / den
    if not ratio > 1:
        return 0.0
    # rate is beta - alpha0/2 > 0 here; see the decisions log for the sign.
    return math.log(ratio) / (beta - a0 / 2)


def L_u(x: float, y: float, c: StabilityConstants) -> float:
    return L_of_t(x, y, t_max(x, y, c), c)


def vbar2(gains: Gains, c2: float, params: PhysicalParams, cfg: BoundConfig) -> float:
    cross = 2 * c2 * math.sqrt(gains.kR / params.J_min * cfg.alpha_psi * (1 - cfg.alpha_psi))
    return (gains.kR + cross) * cfg.psi_bar


def uniform_bounds(
    L: LyapunovMatrices,
    c: StabilityConstants,
    cfg: BoundConfig,
    params: PhysicalParams,
    x: float | None = None,
    y: float | None = None,
) -> BoundSet:
    """Uniform bounds at (x, y); defaults to (V1_bar, vbar2)."""
    vb2 = vbar2(L.gains, L.c2, params, cfg)
    x = cfg.V1_bar if x is None else x
    y = vb2 if y is None else y
    Lu = L_u(x, y, c)
    M1is = spd_inv_sqrt(L.M1)
    sel = _selectors(L, params)
    Lp = induced_norm2(sel["pos"] @ M1is) * Lu
    Lv = induced_norm2(sel["vel"] @ M1is) * Lu
    Lf = induced_norm2(sel["force"] @ M1is) * Lu
    Fbar = Lf + params.m * float(np.linalg.norm(cfg.a_max_vec))
    return BoundSet(L.c1, L.c2, c.beta, c.alpha0, c.alpha1, c.alpha2, vb2, Lu, Lp, Lv, Lf, Fbar)


def compute_bounds(gains: Gains, params: PhysicalParams, cfg: BoundConfig) -> BoundSet:
    L = build_matrices(gains, params, cfg)
    c = stability_constants(L, params, cfg)
    return uniform_bounds(L, c, cfg, params)


def thrust_compatible(B: BoundSet, f_max: float) -> bool:
    """m*|a_max| + Lf <= f_max, i.e. the thrust bound can never be exceeded."""
    return B.Fbar <= f_max


def eval_V1(e_p, e_v, L: LyapunovMatrices) -> float:
    z = np.concatenate([e_p, e_v])
    return float(z @ L.M1 @ z)


def eval_V2(e_R, e_w, psi: float, L: LyapunovMatrices, params: PhysicalParams) -> float:
    e_R = np.asarray(e_R)
    e_w = np.asarray(e_w)
    return float(0.5 * e_w @ params.J @ e_w + L.gains.kR * psi + L.c2 * e_R @ e_w)


def eval_V(e_p, e_v, e_R, e_w, psi, L: LyapunovMatrices, params: PhysicalParams) -> float:
    return eval_V1(e_p, e_v, L) + eval_V2(e_R, e_w, psi, L, params)


@dataclass(frozen=True)
class MembershipReport:
    psi0: float
    rot_energy0: float
    V1_0: float
    psi_limit: float
    rot_energy_limit: float
    V1_limit: float

    @property
    def member(self) -> bool:
        return (
            self.psi0 <= self.psi_limit
            and self.rot_energy0 <= self.rot_energy_limit
            and self.V1_0 <= self.V1_limit
        )


def membership_from_errors(
    e_p, e_v, psi0: float, e_w, L: LyapunovMatrices, cfg: BoundConfig, params: PhysicalParams
) -> MembershipReport:
    e_w = np.asarray(e_w, dtype=float)
    return MembershipReport(
        psi0=float(psi0),
        rot_energy0=float(0.5 * e_w @ params.J @ e_w),
        V1_0=eval_V1(e_p, e_v, L),
        psi_limit=cfg.alpha_psi * cfg.psi_bar,
        rot_energy_limit=L.gains.kR * (1 - cfg.alpha_psi) * cfg.psi_bar,
        V1_limit=cfg.V1_bar,
    )
