"""Simulated-annealing search over gains and Lyapunov coefficients."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bounds import BoundComputationError, BoundConfig, Gains, PhysicalParams, compute_bounds

GAMMA_MARGIN = 1e-6
STEP_FRACTION = 0.1  # proposal std = STEP_FRACTION * temperature * box width


@dataclass(frozen=True)
class Schedule:
    T0: float = 1.0
    cooling: float = 0.95
    iters_per_epoch: int = 200
    epochs: int = 100

    def __post_init__(self):
        if self.T0 < 0 or not 0 < self.cooling < 1 or self.iters_per_epoch < 1 or self.epochs < 0:
            raise ValueError("need T0 >= 0, cooling in (0, 1), positive iteration counts")


@dataclass(frozen=True)
class TuneSpec:
    weights: tuple = (15.0, 1.0, 1.0)
    k_lo: float = 0.1
    k_hi: float = 30.0
    initial: Gains = Gains(10.0, 10.0, 10.0, 10.0, 0.5, 0.5)
    schedule: Schedule = field(default_factory=Schedule)
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.k_lo < self.k_hi:
            raise ValueError("need 0 < k_lo < k_hi")
        if len(self.weights) != 3 or min(self.weights) <= 0:
            raise ValueError("three positive weights are required")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        x = self.initial.as_vector()
        if np.any(x[:4] < self.k_lo) or np.any(x[:4] > self.k_hi):
            raise ValueError("initial gains lie outside the box")

    def to_dict(self) -> dict:
        return {
            "weights": list(self.weights),
            "k_lo": self.k_lo,
            "k_hi": self.k_hi,
            "initial": self.initial.to_dict(),
            "schedule": vars(self.schedule).copy(),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TuneSpec":
        return cls(
            weights=tuple(d.get("weights", (15.0, 1.0, 1.0))),
            k_lo=float(d.get("k_lo", 0.1)),
            k_hi=float(d.get("k_hi", 30.0)),
            initial=Gains(**d["initial"]) if "initial" in d else Gains(10.0, 10.0, 10.0, 10.0, 0.5, 0.5),
            schedule=Schedule(**d.get("schedule", {})),
            seed=int(d.get("seed", 0)),
        )


def objective(g: Gains, weights, params: PhysicalParams, cfg: BoundConfig) -> float:
    B = compute_bounds(g, params, cfg)
    w1, w2, w3 = weights
    return w1 * B.Lp + w2 * B.Lv + w3 * B.Lf


def _safe_objective(x, spec, params, cfg) -> float:
    try:
        val = objective(Gains.from_vector(x), spec.weights, params, cfg)
    except (BoundComputationError, ValueError, ArithmeticError, np.linalg.LinAlgError):
        return math.inf
    return val if math.isfinite(val) else math.inf


def _reflect(x, lo, hi):
    width = hi - lo
    y = np.mod(x - lo, 2 * width)
    return lo + np.where(y > width, 2 * width - y, y)


@dataclass
class TuneResult:
    gains: Gains
    objective: float
    initial_objective: float
    accepted: int
    evaluated: int
    rejected_invalid: int


def tune(spec: TuneSpec, params: PhysicalParams, cfg: BoundConfig) -> TuneResult:
    """One Metropolis chain; returns the best point seen (never worse than the start)."""
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    lo = np.array([spec.k_lo] * 4 + [GAMMA_MARGIN] * 2)
    hi = np.array([spec.k_hi] * 4 + [1 - GAMMA_MARGIN] * 2)
    x = spec.initial.as_vector()
    fx = _safe_objective(x, spec, params, cfg)
    if not math.isfinite(fx):
        raise BoundComputationError("objective is undefined at the initial gains")
    f0 = fx
    best, fbest = x.copy(), fx
    accepted = evaluated = invalid = 0
    sched = spec.schedule
    for epoch in range(sched.epochs):
        T = sched.T0 * sched.cooling**epoch
        for _ in range(sched.iters_per_epoch):
            step = rng.standard_normal(6) * STEP_FRACTION * T * (hi - lo)
            y = np.clip(_reflect(x + step, lo, hi), lo, hi)
            fy = _safe_objective(y, spec, params, cfg)
            evaluated += 1
            u = rng.random()
            if not math.isfinite(fy):
                invalid += 1
                continue
            if fy <= fx or (T > 0 and u < math.exp(-(fy - fx) / T)):
                x, fx = y, fy
                accepted += 1
                if fx < fbest:
                    best, fbest = x.copy(), fx
    return TuneResult(Gains.from_vector(best), fbest, f0, accepted, evaluated, invalid)


def tune_best_of(spec: TuneSpec, params: PhysicalParams, cfg: BoundConfig, chains: int = 1) -> TuneResult:
    """Independent chains seeded seed, seed+1, ...; the lowest objective wins
    (earliest chain on ties)."""
    if chains < 1:
        raise ValueError("chains must be positive")
    results = []
    for k in range(chains):
        sub = TuneSpec(spec.weights, spec.k_lo, spec.k_hi, spec.initial, spec.schedule, (spec.seed + k) % 2**64)
        results.append(tune(sub, params, cfg))
    return min(results, key=lambda r: r.objective)
