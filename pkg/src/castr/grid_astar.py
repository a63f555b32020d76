"""Discretized-action A* baseline.

Foot displacements are sampled on a regular grid inside the kinematic
polytopes; a successor is kept when the displaced foot point lands on a
surface. The search skeleton (priority, tie-breaking, surface-left filter,
goal test) mirrors :func:`castr.search.plan`.
"""
from __future__ import annotations

import heapq
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import geom
from .errors import EmptyActionSet, NoPlanExists, TimedOut
from .geom import Surface
from .proximity import distance
from .search import (
    Effector, Goal, KinematicConstraints, SearchParams, SearchStats, Start,
    find_surface, surface_left_filter,
)

log = logging.getLogger(__name__)

DEFAULT_GRANULARITY = 0.05
CONTAINS_TOL = 1e-7
PLANE_TOL = 1e-4


@dataclass(frozen=True, eq=False)
class ActionSet:
    """Grid displacements in the stance-foot frame, keyed by stance foot."""

    displacements: dict  # Effector (stance) -> (n, 3) array
    granularity: float = DEFAULT_GRANULARITY
    max_stride: float = 0.0

    def for_stance(self, stance: Effector) -> np.ndarray:
        return self.displacements[stance]


def grid_points(poly: geom.Polytope, granularity: float) -> np.ndarray:
    """Points of the axis-aligned grid anchored at the bounding-box minimum
    that lie inside ``poly``, in lexicographic (x, y, z) order."""
    lo, hi = poly.bounds()
    counts = np.floor((hi - lo) / granularity + 1e-9).astype(int) + 1
    axes = [lo[k] + granularity * np.arange(counts[k]) for k in range(3)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    return grid[geom.contains_each(poly, grid, tol=CONTAINS_TOL)]


def discretize(kin: KinematicConstraints, granularity: float = DEFAULT_GRANULARITY) -> ActionSet:
    if not granularity > 0:
        raise ValueError("granularity must be positive")
    disp = {}
    for stance in Effector:
        pts = grid_points(kin.for_stance(stance), granularity)
        if len(pts) == 0:
            raise EmptyActionSet(f"no grid point at {granularity} m inside the {stance.value}-stance polytope")
        disp[stance] = pts
    return ActionSet(disp, granularity, kin.max_stride)


@dataclass(eq=False)
class GridNode:
    effector: Effector  # foot in contact
    surface: Surface
    position: np.ndarray
    yaw: float
    parent: Optional["GridNode"] = None
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    g: float = 0.0
    depth: int = 0

    @property
    def surface_id(self) -> int:
        return self.surface.id

    def chain(self) -> list:
        out = []
        n = self
        while n is not None:
            out.append(n)
            n = n.parent
        return out[::-1]


@dataclass(frozen=True, eq=False)
class DiscreteStep:
    effector: Effector
    surface: Surface
    position: np.ndarray
    yaw: float
    rotation: np.ndarray

    @property
    def surface_id(self) -> int:
        return self.surface.id


@dataclass(frozen=True, eq=False)
class DiscretePlan:
    stance_position: np.ndarray
    stance_effector: Effector
    stance_yaw: float
    steps: tuple
    stats: SearchStats

    def __len__(self):
        return len(self.steps)


def goal_tolerance(params: SearchParams, granularity: float) -> float:
    return max(granularity, params.goal_tolerance)


def _goal_distance(p: np.ndarray, goal: Goal) -> float:
    if goal.is_point:
        return float(np.linalg.norm(p - goal.region.vertices[0]))
    return distance(goal.region, p).distance


def _heuristic(n: GridNode, d: float, goal: Goal, max_stride: float, weight: float) -> float:
    h = weight * d / max_stride
    if goal.effector is not None and n.effector is not goal.effector:
        h = max(h, 1.0)
    return h


def _yaw_step(params: SearchParams) -> float:
    offs = sorted(set(params.active_yaw_offsets))
    diffs = [b - a for a, b in zip(offs, offs[1:]) if b - a > 1e-12]
    return min(diffs) if diffs else 2 * math.pi


def plan_discrete(
    env: Sequence[Surface],
    actions: ActionSet,
    start: Start,
    goal: Goal,
    params: SearchParams = SearchParams(),
) -> DiscretePlan:
    t0 = time.perf_counter()
    deadline = t0 + params.timeout / 1000.0
    stats = SearchStats()
    gran = actions.granularity
    tol = goal_tolerance(params, gran)
    yaw_step = _yaw_step(params)
    env = list(env)
    bounds = [s.bounds() for s in env]

    def key(n: GridNode):
        return (n.effector, tuple(np.round(n.position / gran).astype(int)), round(n.yaw / yaw_step))

    stance = start.stance
    pose = start.pose(stance)
    s0 = find_surface(env, pose.position)
    root = GridNode(stance, s0, pose.position.copy(), pose.yaw, rotation=s0.frame @ geom.rot_z(pose.yaw))
    d0 = _goal_distance(root.position, goal)
    h0 = _heuristic(root, d0, goal, actions.max_stride, params.heuristic_weight)
    queue = [(h0, h0, 0, root)]
    counter = 1
    closed = set()
    best_g = {key(root): 0.0}

    while queue:
        if time.perf_counter() > deadline:
            stats.time_ms = (time.perf_counter() - t0) * 1000.0
            raise TimedOut(f"no plan within {params.timeout:.0f} ms", stats)
        _, _, _, node = heapq.heappop(queue)
        k = key(node)
        if k in closed:
            continue
        closed.add(k)
        stats.expanded += 1
        stats.expansion_log.append((node.effector.value, node.surface_id, round(node.yaw, 9),
                                    tuple(np.round(node.position, 9))))
        if (node.depth > 0 and (goal.effector is None or node.effector is goal.effector)
                and _goal_distance(node.position, goal) <= tol):
            stats.time_ms = (time.perf_counter() - t0) * 1000.0
            chain = node.chain()
            steps = tuple(DiscreteStep(n.effector, n.surface, n.position, n.yaw, n.rotation) for n in chain[1:])
            return DiscretePlan(root.position, root.effector, root.yaw, steps, stats)

        disp = actions.for_stance(node.effector)
        mover = node.effector.other
        for theta in params.active_yaw_offsets:
            yaw = node.yaw + theta
            if params.clamp_yaw:
                yaw = min(max(yaw, -math.pi), math.pi)
            q = node.surface.frame @ geom.rot_z(yaw)
            pts = node.position + disp @ q.T
            landed = np.full(len(pts), -1)
            for si, (s, (lo, hi)) in enumerate(zip(env, bounds)):
                free = landed < 0
                if not free.any():
                    break
                inside = np.all((pts >= lo - PLANE_TOL) & (pts <= hi + PLANE_TOL), axis=1) & free
                if not inside.any():
                    continue
                idx = np.nonzero(inside)[0]
                ok = s.contains_points(pts[idx], plane_tol=PLANE_TOL, tol=1e-9)
                landed[idx[ok]] = si
            g = node.g + 1.0 + params.yaw_cost * abs(theta)
            for i in np.nonzero(landed >= 0)[0]:
                child = GridNode(mover, env[landed[i]], pts[i], yaw, node, q, g, node.depth + 1)
                ck = key(child)
                if ck in closed or best_g.get(ck, math.inf) <= g:
                    continue
                if surface_left_filter(child):
                    continue
                best_g[ck] = g
                d = _goal_distance(child.position, goal)
                h = _heuristic(child, d, goal, actions.max_stride, params.heuristic_weight)
                heapq.heappush(queue, (g + h, h, counter, child))
                counter += 1
                stats.generated += 1

    stats.time_ms = (time.perf_counter() - t0) * 1000.0
    raise NoPlanExists("search space exhausted", stats)
