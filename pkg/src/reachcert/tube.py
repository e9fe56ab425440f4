"""RRT over safe boxes and extraction of the safe tube."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .geometry import InflatedScenario, SafeRegion, closest_point, safe_box_radius, safe_region

MAX_REJECTIONS = 10_000


class PlanningError(RuntimeError):
    pass


@dataclass(frozen=True)
class RrtParams:
    n_vertices: int = 400
    c_sample: float = 0.9
    alpha: float = 0.9
    seed: int = 0

    def __post_init__(self):
        if self.n_vertices < 1:
            raise ValueError("n_vertices must be positive")
        if not 0 < self.c_sample <= 1:
            raise ValueError("c_sample must lie in (0, 1]")
        if not 0 <= self.alpha < 1:
            raise ValueError("alpha must lie in [0, 1)")


@dataclass
class Tree:
    vertices: list
    parents: list
    regions: list  # cached SafeRegion per vertex
    goal: int | None = None
    samples: int = 0

    @property
    def success(self) -> bool:
        return self.goal is not None

    def path_to(self, k: int) -> list:
        path = []
        while k is not None and k >= 0:
            path.append(k)
            k = self.parents[k]
        return path[::-1]


@dataclass
class SafeTube:
    waypoints: np.ndarray  # (N_s + 1, 3)
    radii: np.ndarray  # (N_s + 1, 3)

    def __post_init__(self):
        self.waypoints = np.asarray(self.waypoints, dtype=float).reshape(-1, 3)
        self.radii = np.asarray(self.radii, dtype=float).reshape(-1, 3)
        if self.waypoints.shape != self.radii.shape:
            raise ValueError("one radius per waypoint is required")

    @property
    def n_segments(self) -> int:
        return len(self.waypoints) - 1

    def box(self, i: int):
        return self.waypoints[i] - self.radii[i], self.waypoints[i] + self.radii[i]

    def violations(self, p0, inf: InflatedScenario) -> list:
        """Exact check of the four tube conditions; empty list means valid."""
        out = []
        if not np.array_equal(self.waypoints[0], np.asarray(p0, dtype=float)):
            out.append("first waypoint is not p0")
        if np.any(self.radii < 0):
            out.append("negative radius")
        Ns = self.n_segments
        for i in range(Ns):
            lo, hi = self.box(i)
            nxt = self.waypoints[i + 1]
            if not (np.all(lo <= nxt) and np.all(nxt <= hi)):
                out.append(f"waypoint {i + 1} outside box {i}")
            if not inf.box_is_free(lo, hi):
                out.append(f"box {i} not inside the free space")
        lo, hi = self.box(Ns)
        if not (np.all(inf.target.lo <= lo) and np.all(hi <= inf.target.hi)):
            out.append("last box not inside the deflated target")
        return out

    def to_list(self) -> list:
        return [{"waypoint": w.tolist(), "radius": r.tolist()} for w, r in zip(self.waypoints, self.radii)]

    def to_json(self) -> str:
        return json.dumps(self.to_list(), indent=2)

    @classmethod
    def from_list(cls, recs) -> "SafeTube":
        return cls([r["waypoint"] for r in recs], [r["radius"] for r in recs])


def _sample_free(rng, inf: InflatedScenario) -> np.ndarray:
    lo, hi = inf.domain.lo, inf.domain.hi
    for _ in range(MAX_REJECTIONS):
        x = rng.uniform(lo, hi)
        if inf.in_free_space(x):
            return x
    raise PlanningError("rejection sampling of the free space exceeded its cap")


def build_rrt(inf: InflatedScenario, params: RrtParams, p0, rng=None) -> Tree:
    rng = np.random.default_rng(params.seed) if rng is None else rng
    p0 = np.asarray(p0, dtype=float)
    first = safe_region(p0, inf, params.alpha)
    tree = Tree([p0], [-1], [first])
    los = [first.box.lo]
    his = [first.box.hi]
    if inf.target.contains(p0):
        tree.goal = 0
        return tree
    explore = params.c_sample * params.n_vertices
    i = 1
    while i <= params.n_vertices:
        if i <= explore:
            xs = _sample_free(rng, inf)
        else:
            xs = rng.uniform(inf.target.lo, inf.target.hi)
        tree.samples += 1
        L, H = np.array(los), np.array(his)
        proj = np.minimum(np.maximum(xs, L), H)
        dist = np.max(np.abs(xs - proj), axis=1)
        near = int(np.argmin(dist))  # first minimiser = lowest index
        i += 1
        x_new = closest_point(xs, tree.regions[near].box)
        region = safe_region(x_new, inf, params.alpha)
        tree.vertices.append(x_new)
        tree.parents.append(near)
        tree.regions.append(region)
        los.append(region.box.lo)
        his.append(region.box.hi)
        if inf.target.contains(x_new):
            tree.goal = len(tree.vertices) - 1
            break
    return tree


def extract_tube(tree: Tree, inf: InflatedScenario, p0) -> SafeTube:
    if not tree.success:
        raise PlanningError("tree never reached the target")
    path = tree.path_to(tree.goal)
    pts = np.array([tree.vertices[k] for k in path])
    radii = [tree.regions[k].rad for k in path[:-1]]
    radii.append(safe_box_radius(pts[-1], inf.target))
    tube = SafeTube(pts, np.array(radii))
    bad = tube.violations(p0, inf)
    if bad:
        raise PlanningError("extracted tube failed verification: " + "; ".join(bad))
    return tube


@dataclass
class PlanResult:
    success: bool
    tube: SafeTube | None
    tree: Tree = field(repr=False, default=None)


def plan_tube(inf: InflatedScenario, params: RrtParams, p0) -> PlanResult:
    tree = build_rrt(inf, params, p0)
    if not tree.success:
        return PlanResult(False, None, tree)
    return PlanResult(True, extract_tube(tree, inf, p0), tree)
