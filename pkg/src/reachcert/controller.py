"""Geometric tracking controller on SO(3).

Every function accepts a leading batch shape: vectors are (..., 3) and
rotations (..., 3, 3).  Scalar use is just the empty batch.

The reference is any callable ``ref(t) -> array (4, 3)`` returning the
desired position and its first three time derivatives.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bounds import Gains, PhysicalParams
from .so3 import exp_so3_batch, hat_batch, vee_batch

E3 = np.array([0.0, 0.0, 1.0])
SINGULAR_TOL = 1e-9
FD_STEP = 1e-6


class SingularityError(RuntimeError):
    """The desired attitude is undefined: |F_d| + F_d3 vanished (or |F_d| did)."""

    def __init__(self, msg, t=None, state=None):
        super().__init__(msg)
        self.t = t
        self.state = state


@dataclass(frozen=True)
class DesiredState:
    p: np.ndarray
    v: np.ndarray
    a: np.ndarray
    jerk: np.ndarray
    R: np.ndarray
    w: np.ndarray
    w_dot: np.ndarray


@dataclass(frozen=True)
class TrackingErrors:
    e_p: np.ndarray
    e_v: np.ndarray
    e_R: np.ndarray
    e_w: np.ndarray
    psi: np.ndarray


@dataclass(frozen=True)
class ControlOutput:
    f: np.ndarray
    tau: np.ndarray
    F_d: np.ndarray
    delta_f: np.ndarray
    desired: DesiredState
    errors: TrackingErrors


def _mT(A):
    return np.swapaxes(A, -1, -2)


def config_error(R_d, R):
    """Psi = tr(I - R_d^T R)/2, evaluated as |R_d - R|_F^2 / 4.

    The two agree on SO(3); the squared-difference form has no
    cancellation when R is close to R_d.
    """
    D = np.asarray(R_d) - np.asarray(R)
    return 0.25 * np.sum(D * D, axis=(-1, -2))


def attitude_errors(R, w, R_d, w_d):
    RtRd = _mT(R) @ R_d
    e_R = vee_batch(_mT(R_d) @ R)  # skew part of R_d^T R is (R_d^T R - R^T R_d)/2
    e_w = w - np.einsum("...ij,...j->...i", RtRd, w_d)
    return e_R, e_w, config_error(R_d, R)


def tracking_errors(p, v, R, w, d: DesiredState) -> TrackingErrors:
    e_R, e_w, psi = attitude_errors(R, w, d.R, d.w)
    return TrackingErrors(p - d.p, v - d.v, e_R, e_w, psi)


def desired_force(e_p, e_v, acc_d, gains: Gains, params: PhysicalParams):
    m = params.m
    return -gains.kp * e_p - gains.kv * e_v + m * params.g * E3 + m * acc_d


def _check_regular(F, n, s, t=None):
    bad = (n <= 0) | (s < SINGULAR_TOL * np.maximum(1.0, n))
    if np.any(bad):
        raise SingularityError(
            "desired attitude undefined: need |F_d| > 0 and |F_d| + F_d3 > 0", t=t, state=F
        )


def desired_attitude(F, t=None):
    F = np.asarray(F, dtype=float)
    n = np.linalg.norm(F, axis=-1)
    s = n + F[..., 2]
    _check_regular(F, n, s, t)
    F1, F2, F3 = F[..., 0], F[..., 1], F[..., 2]
    b1 = np.stack([F3 + F2**2 / s, -F1 * F2 / s, -F1], axis=-1) / n[..., None]
    b2 = np.stack([-F1 * F2 / s, F3 + F1**2 / s, -F2], axis=-1) / n[..., None]
    b3 = F / n[..., None]
    return np.stack([b1, b2, b3], axis=-1)


def attitude_partials(F):
    """dR[..., i, j, k] = d R_d[i, j] / d F_k, in closed form."""
    F = np.asarray(F, dtype=float)
    n = np.linalg.norm(F, axis=-1)
    s = n + F[..., 2]
    _check_regular(F, n, s)
    F1, F2, F3 = F[..., 0], F[..., 1], F[..., 2]
    eye = np.eye(3)
    ds = F / n[..., None] + E3  # d s / d F_k
    dn = F / n[..., None]  # d n / d F_k

    u = np.stack([F3 + F2**2 / s, -F1 * F2 / s, -F1], axis=-1)
    w = np.stack([-F1 * F2 / s, F3 + F1**2 / s, -F2], axis=-1)
    s_ = s[..., None]
    cross = -(eye[0] * F2[..., None] + F1[..., None] * eye[1]) / s_ + (F1 * F2)[..., None] / s_**2 * ds
    du = np.stack(
        [
            eye[2] + 2 * F2[..., None] * eye[1] / s_ - (F2**2)[..., None] / s_**2 * ds,
            cross,
            -np.broadcast_to(eye[0], ds.shape),
        ],
        axis=-2,
    )
    dw = np.stack(
        [
            cross,
            eye[2] + 2 * F1[..., None] * eye[0] / s_ - (F1**2)[..., None] / s_**2 * ds,
            -np.broadcast_to(eye[1], ds.shape),
        ],
        axis=-2,
    )
    dv = np.broadcast_to(eye, ds.shape[:-1] + (3, 3))  # d F_i / d F_k

    def unit_partial(x, dx):
        # d(x/n)/dF = dx/n - x dn^T / n^2
        return dx / n[..., None, None] - x[..., :, None] * dn[..., None, :] / (n**2)[..., None, None]

    db1 = unit_partial(u, du)
    db2 = unit_partial(w, dw)
    db3 = unit_partial(F, dv)
    return np.stack([db1, db2, db3], axis=-2)  # [..., i, column, k]


def thrust_mismatch(F, R):
    """Delta_f = |F|((b3d . b3) b3 - b3d)."""
    b3 = R[..., :, 2]
    return np.einsum("...i,...i->...", F, b3)[..., None] * b3 - F


def _core(p, v, R, t, ref, gains: Gains, params: PhysicalParams):
    """Desired quantities that need no angular-acceleration information."""
    d = ref(t)
    e_p = p - d[0]
    e_v = v - d[1]
    F = desired_force(e_p, e_v, d[2], gains, params)
    R_d = desired_attitude(F, t)
    delta = thrust_mismatch(F, R)
    F_dot = (
        -gains.kp * e_v
        - gains.kv / params.m * (-gains.kp * e_p - gains.kv * e_v + delta)
        + params.m * d[3]
    )
    dR = attitude_partials(F)
    Rd_dot = np.einsum("...ijk,...k->...ij", dR, F_dot)
    w_d = vee_batch(_mT(R_d) @ Rd_dot)
    return d, e_p, e_v, F, R_d, w_d, delta


def _accel(F, R, params):
    b3 = R[..., :, 2]
    f = np.einsum("...i,...i->...", F, b3)
    return f, -params.g * E3 + f[..., None] * b3 / params.m


def desired_rates(p, v, R, w, t, ref, gains: Gains, params: PhysicalParams, h: float = FD_STEP):
    """(w_d, w_d_dot): the rate follows from the analytic partials of R_d,
    its derivative by a central difference along the closed-loop flow."""
    _, _, _, F, _, w_d, _ = _core(p, v, R, t, ref, gains, params)
    _, acc = _accel(F, R, params)
    return w_d, _rate_derivative(p, v, R, w, acc, t, ref, gains, params, h)


def _rate_derivative(p, v, R, w, acc, t, ref, gains, params, h):
    step = exp_so3_batch(h * w)
    out = []
    for sgn in (1.0, -1.0):
        Rs = R @ (step if sgn > 0 else _mT(step))
        out.append(_core(p + sgn * h * v, v + sgn * h * acc, Rs, t + sgn * h, ref, gains, params)[5])
    return (out[0] - out[1]) / (2 * h)


def control(p, v, R, w, t, ref, gains: Gains, params: PhysicalParams, h: float = FD_STEP) -> ControlOutput:
    d, e_p, e_v, F, R_d, w_d, delta = _core(p, v, R, t, ref, gains, params)
    f, acc = _accel(F, R, params)
    w_d_dot = _rate_derivative(p, v, R, w, acc, t, ref, gains, params, h)

    e_R, e_w, psi = attitude_errors(R, w, R_d, w_d)
    J = params.J
    RtRd = _mT(R) @ R_d
    Jw = np.einsum("ij,...j->...i", J, w)
    ff = np.einsum("...ij,...jk,...k->...i", hat_batch(w), RtRd, w_d) - np.einsum(
        "...ij,...j->...i", RtRd, w_d_dot
    )
    tau = -gains.kR * e_R - gains.kw * e_w + np.cross(w, Jw) - np.einsum("ij,...j->...i", J, ff)

    desired = DesiredState(d[0], d[1], d[2], d[3], R_d, w_d, w_d_dot)
    errors = TrackingErrors(e_p, e_v, e_R, e_w, psi)
    return ControlOutput(f, tau, F, delta, desired, errors)
