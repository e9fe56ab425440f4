"""Initial-set membership and the samplers built on it."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bounds import BoundConfig, Gains, LyapunovMatrices, MembershipReport, PhysicalParams, membership_from_errors
from .controller import _core, attitude_errors, config_error
from .so3 import exp_so3_batch

RECIPES = ("position", "attitude")


def initial_lhs(p, v, R, w, ref, gains: Gains, params: PhysicalParams, L: LyapunovMatrices, t0: float = 0.0):
    """Batched left-hand sides (psi, rotational energy, V1) at time t0."""
    p, v, w = (np.asarray(x, dtype=float).reshape(-1, 3) for x in (p, v, w))
    R = np.asarray(R, dtype=float).reshape(-1, 3, 3)
    _, e_p, e_v, _, R_d, w_d, _ = _core(p, v, R, t0, ref, gains, params)
    _, e_w, psi = attitude_errors(R, w, R_d, w_d)
    z = np.concatenate([e_p, e_v], axis=1)
    V1 = np.einsum("bi,ij,bj->b", z, L.M1, z)
    rot = 0.5 * np.einsum("bi,ij,bj->b", e_w, params.J, e_w)
    return psi, rot, V1


def limits(gains: Gains, cfg: BoundConfig):
    return cfg.alpha_psi * cfg.psi_bar, gains.kR * (1 - cfg.alpha_psi) * cfg.psi_bar, cfg.V1_bar


def initial_set_check(state, ref, gains, params, L, cfg: BoundConfig, t0: float = 0.0) -> MembershipReport:
    psi, rot, V1 = initial_lhs(state.p, state.v, state.R, state.w, ref, gains, params, L, t0)
    lp, lr, lv = limits(gains, cfg)
    return MembershipReport(float(psi[0]), float(rot[0]), float(V1[0]), lp, lr, lv)


@dataclass
class SimulationStart:
    p: np.ndarray
    v: np.ndarray
    R: np.ndarray
    w: np.ndarray
    candidates: int


def sample_simulation_states(
    ref, n, rng, gains, params, L, cfg, pos_box=0.3, vel_box=0.3, rot_box=0.5, rate_box=1.0,
    batch=100_000, max_candidates=50_000_000,
) -> SimulationStart:
    """Box-perturbed initial states around the reference start, kept only
    when they lie in the initial set.  Candidates are drawn in fixed-size
    batches so the accepted states depend only on the generator state."""
    d0 = ref(0.0)
    lp, lr, lv = limits(gains, cfg)
    keep = []
    drawn = 0
    while sum(len(k[0]) for k in keep) < n:
        if drawn >= max_candidates:
            raise RuntimeError(f"only {sum(len(k[0]) for k in keep)} of {n} initial states accepted")
        p = d0[0] + rng.uniform(-pos_box, pos_box, (batch, 3))
        v = d0[1] + rng.uniform(-vel_box, vel_box, (batch, 3))
        R = exp_so3_batch(rng.uniform(-rot_box, rot_box, (batch, 3)))
        w = rng.uniform(-rate_box, rate_box, (batch, 3))
        drawn += batch
        psi, rot, V1 = initial_lhs(p, v, R, w, ref, gains, params, L)
        ok = (psi <= lp) & (rot <= lr) & (V1 <= lv)
        keep.append((p[ok], v[ok], R[ok], w[ok]))
    cat = [np.concatenate([k[i] for k in keep])[:n] for i in range(4)]
    return SimulationStart(*cat, candidates=drawn)


def sample_error_perturbations(recipe: str, n: int, rng, gains, params, L, cfg, scale=None):
    """Error-space samples: 'position' perturbs e_p only, 'attitude' sets
    R = exp(hat(u)) against a level desired attitude with the other errors zero.

    Returns a list of records (perturbation, member, psi, rot_energy, V1)."""
    if recipe not in RECIPES:
        raise ValueError(f"unknown recipe {recipe!r}; expected one of {RECIPES}")
    scale = (0.21 if recipe == "position" else 0.1) if scale is None else scale
    u = rng.uniform(-scale, scale, (n, 3))
    zero = np.zeros(3)
    out = []
    if recipe == "attitude":
        psi_all = config_error(np.eye(3), exp_so3_batch(u))
    for k in range(n):
        if recipe == "position":
            rep = membership_from_errors(u[k], zero, 0.0, zero, L, cfg, params)
        else:
            rep = membership_from_errors(zero, zero, float(psi_all[k]), zero, L, cfg, params)
        out.append(
            {
                "perturbation": u[k].tolist(),
                "member": rep.member,
                "psi": rep.psi0,
                "rot_energy": rep.rot_energy0,
                "V1": rep.V1_0,
            }
        )
    return out
