"""Axis-aligned boxes, safe boxes/strips/regions and scenario files.

Safe regions are always symmetric about their anchor point y, so a region
is stored as (y, rad) and its box is [y - rad, y + rad] evaluated in
floating point.  Radii are nudged down until the computed
box satisfies containment and disjointness exactly (each nudge is one ulp
of the larger of radius and anchor), so later checks on
the same float expressions can never disagree with the construction.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class GeometryError(ValueError):
    pass


class InfeasibleGeometryError(GeometryError):
    pass


@dataclass(frozen=True)
class Box3:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float).reshape(3)
        hi = np.asarray(self.hi, dtype=float).reshape(3)
        if np.any(lo > hi):
            raise GeometryError(f"box lower corner exceeds upper corner: {lo} > {hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    @property
    def radius(self) -> np.ndarray:
        return 0.5 * (self.hi - self.lo)

    def contains(self, x) -> bool:
        x = np.asarray(x)
        return bool((self.lo <= x).all() and (x <= self.hi).all())

    def contains_box(self, other: "Box3") -> bool:
        return bool((self.lo <= other.lo).all() and (other.hi <= self.hi).all())

    def intersects(self, other: "Box3") -> bool:
        """Closed boxes: touching faces count as intersecting."""
        return bool((self.lo <= other.hi).all() and (other.lo <= self.hi).all())

    def to_dict(self) -> dict:
        return {"lo": self.lo.tolist(), "hi": self.hi.tolist()}

    @classmethod
    def from_dict(cls, d) -> "Box3":
        return cls(d["lo"], d["hi"])

    def __eq__(self, other):
        return isinstance(other, Box3) and np.array_equal(self.lo, other.lo) and np.array_equal(self.hi, other.hi)

    def __hash__(self):
        return hash((self.lo.tobytes(), self.hi.tobytes()))


def inflate(b: Box3, r: float) -> Box3:
    return Box3(b.lo - r, b.hi + r)


def deflate(b: Box3, r: float) -> Box3:
    if np.any(b.radius < r):
        raise InfeasibleGeometryError("deflation margin exceeds the box half-width")
    return Box3(b.lo + r, b.hi - r)


def closest_point(x, b: Box3) -> np.ndarray:
    """Infinity-norm projection onto a box: clamp per coordinate."""
    return np.minimum(np.maximum(np.asarray(x, dtype=float), b.lo), b.hi)


def inf_distance(x, b: Box3) -> float:
    x = np.asarray(x, dtype=float)
    return float(np.max(np.abs(x - closest_point(x, b))))


def _fit_inside(y, rad, lo, hi):
    """Shrink rad until lo <= y - rad and y + rad <= hi hold in floats."""
    rad = np.maximum(rad, 0.0)
    for a in np.flatnonzero((y - rad < lo) | (y + rad > hi)):
        while rad[a] > 0 and (y[a] - rad[a] < lo[a] or y[a] + rad[a] > hi[a]):
            rad[a] = max(rad[a] - max(np.spacing(rad[a]), np.spacing(y[a])), 0.0)
    return rad


def safe_box_radius(v, b: Box3) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    lo, hi = b.lo, b.hi
    if not ((lo <= v).all() and (v <= hi).all()):
        raise GeometryError("safe_box requires the anchor point to lie in the box")
    rad = 0.5 * (hi - lo) - np.abs(0.5 * (lo + hi) - v)
    return _fit_inside(v, rad, lo, hi)


def safe_box(v, b: Box3) -> Box3:
    v = np.asarray(v, dtype=float)
    rad = safe_box_radius(v, b)
    return Box3(v - rad, v + rad)


@dataclass(frozen=True)
class Strip:
    """The slab |z[axis] - center| <= half_width."""

    axis: int
    center: float
    half_width: float

    def contains(self, z) -> bool:
        return bool(abs(z[self.axis] - self.center) <= self.half_width)


def _clear_half_width(xa: float, hw: float, lo: float, hi: float) -> float:
    """Shrink hw until the slab [xa - hw, xa + hw] misses the closed interval [lo, hi]."""
    while hw > 0 and xa - hw <= hi and xa + hw >= lo:
        hw = max(hw - max(np.spacing(hw), np.spacing(xa)), 0.0)
    return hw


def safe_strip(x, b: Box3, alpha: float) -> Strip:
    x = np.asarray(x, dtype=float)
    if not 0.0 <= alpha < 1.0:
        raise GeometryError("alpha must lie in [0, 1)")
    if b.contains(x):
        raise GeometryError("safe_strip requires a point outside the box")
    gap = np.abs(x - closest_point(x, b))
    axis = int(np.argmax(gap))  # first maximiser: lowest axis wins ties
    hw = _clear_half_width(float(x[axis]), alpha * float(gap[axis]), b.lo[axis], b.hi[axis])
    return Strip(axis, float(x[axis]), hw)


def _strips(y, lo, hi, alpha):
    """safe_strip for many boxes at once: (axes, half-widths)."""
    gap = np.abs(y - np.minimum(np.maximum(y, lo), hi))
    axes = np.argmax(gap, axis=1)
    rows = np.arange(len(lo))
    hw = alpha * gap[rows, axes]
    ya = y[axes]
    lo_a, hi_a = lo[rows, axes], hi[rows, axes]
    for k in np.flatnonzero((hw > 0) & (ya - hw <= hi_a) & (ya + hw >= lo_a)):
        hw[k] = _clear_half_width(float(ya[k]), float(hw[k]), lo_a[k], hi_a[k])
    return axes, hw


@dataclass(frozen=True)
class SafeRegion:
    anchor: np.ndarray
    rad: np.ndarray

    @property
    def box(self) -> Box3:
        return Box3(self.anchor - self.rad, self.anchor + self.rad)


@dataclass
class Scenario:
    domain: Box3
    obstacles: list
    target: Box3
    p0: np.ndarray
    v0: np.ndarray
    v_max: np.ndarray
    f_max: float
    a_max: np.ndarray = field(default_factory=lambda: np.array([1.0, 1.0, 10.0]))
    name: str = "scenario"

    def __post_init__(self):
        self.p0 = np.asarray(self.p0, dtype=float)
        self.v0 = np.asarray(self.v0, dtype=float)
        self.v_max = np.asarray(self.v_max, dtype=float)
        self.a_max = np.asarray(self.a_max, dtype=float)
        self.validate()

    def validate(self):
        if not self.domain.contains_box(self.target):
            raise GeometryError("scenario invariant violated: target must lie inside the operating domain")
        for k, ob in enumerate(self.obstacles):
            if ob.intersects(self.target):
                raise GeometryError(f"scenario invariant violated: target meets obstacle {k}")
        if not (np.all(self.domain.lo < self.p0) and np.all(self.p0 < self.domain.hi)):
            raise GeometryError("scenario invariant violated: p0 must lie in the interior of the operating domain")
        for k, ob in enumerate(self.obstacles):
            if ob.contains(self.p0):
                raise GeometryError(f"scenario invariant violated: p0 lies inside obstacle {k}")
        if np.any(np.abs(self.v0) >= self.v_max):
            raise GeometryError("scenario invariant violated: |v0| must be below v_max")
        if not self.f_max > 0:
            raise GeometryError("scenario invariant violated: f_max must be positive")
        if np.any(self.a_max <= 0):
            raise GeometryError("scenario invariant violated: a_max must be positive")

    def is_safe(self, p) -> bool:
        return self.domain.contains(p) and not any(ob.contains(p) for ob in self.obstacles)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "operating_domain": self.domain.to_dict(),
            "obstacles": [ob.to_dict() for ob in self.obstacles],
            "target": self.target.to_dict(),
            "p0": self.p0.tolist(),
            "v0": self.v0.tolist(),
            "v_max": self.v_max.tolist(),
            "f_max": float(self.f_max),
            "a_max": self.a_max.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        return cls(
            domain=Box3.from_dict(d["operating_domain"]),
            obstacles=[Box3.from_dict(o) for o in d.get("obstacles", [])],
            target=Box3.from_dict(d["target"]),
            p0=d["p0"],
            v0=d["v0"],
            v_max=d["v_max"],
            f_max=float(d["f_max"]),
            a_max=d.get("a_max", [1.0, 1.0, 10.0]),
            name=d.get("name", "scenario"),
        )

    @classmethod
    def load(cls, path) -> "Scenario":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class InflatedScenario:
    domain: Box3
    obstacles: list
    target: Box3
    margin: float

    def __post_init__(self):
        self._lo = np.array([o.lo for o in self.obstacles]).reshape(-1, 3)
        self._hi = np.array([o.hi for o in self.obstacles]).reshape(-1, 3)

    def in_free_space(self, y) -> bool:
        y = np.asarray(y)
        if not self.domain.contains(y):
            return False
        if len(self._lo) == 0:
            return True
        return not bool(((self._lo <= y) & (y <= self._hi)).all(axis=1).any())

    def free_mask(self, Y) -> np.ndarray:
        """Vectorised in_free_space over rows of Y."""
        Y = np.asarray(Y)
        ok = np.all((self.domain.lo <= Y) & (Y <= self.domain.hi), axis=1)
        if len(self._lo):
            hit = np.all((self._lo[None] <= Y[:, None]) & (Y[:, None] <= self._hi[None]), axis=2)
            ok &= ~hit.any(axis=1)
        return ok

    def box_is_free(self, lo, hi) -> bool:
        """[lo, hi] inside the domain and strictly clear of every closed obstacle."""
        if not ((self.domain.lo <= lo).all() and (hi <= self.domain.hi).all()):
            return False
        if len(self._lo) == 0:
            return True
        return not bool(((lo <= self._hi) & (self._lo <= hi)).all(axis=1).any())


def inflate_scenario(sc: Scenario, margin: float) -> InflatedScenario:
    inf = InflatedScenario(
        domain=deflate(sc.domain, margin),
        obstacles=[inflate(o, margin) for o in sc.obstacles],
        target=deflate(sc.target, margin),
        margin=float(margin),
    )
    if not inf.in_free_space(sc.p0):
        raise InfeasibleGeometryError("p0 is not clear of the inflated obstacles / deflated domain")
    for k, ob in enumerate(inf.obstacles):
        if ob.intersects(inf.target):
            raise InfeasibleGeometryError(f"deflated target meets inflated obstacle {k}")
    return inf


def safe_region(y, inf: InflatedScenario, alpha: float) -> SafeRegion:
    """Safe box in the deflated domain intersected with one slab per obstacle."""
    y = np.asarray(y, dtype=float)
    if not inf.in_free_space(y):
        raise GeometryError("safe_region requires a point in the free space")
    rad = safe_box_radius(y, inf.domain)
    if len(inf.obstacles):
        axes, hw = _strips(y, inf._lo, inf._hi, alpha)
        np.minimum.at(rad, axes, hw)
    return SafeRegion(y, rad)
