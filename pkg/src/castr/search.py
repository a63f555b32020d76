"""Continuous A* over contact-surface patches.

A node holds a convex patch of one surface: every point of it can be reached
in one step from some point of the parent's patch. Children are obtained by
rotating the swing-foot reachability polytope, summing it with the parent
patch, and cutting the result with every surface of the environment.
"""
from __future__ import annotations

import enum
import heapq
import logging
import math
import time
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Optional, Sequence

import numpy as np

from . import geom
from .errors import InvalidGeometry, InvalidKinematics, NoPlanExists, TimedOut
from .geom import Polytope, Surface
from .proximity import distance

log = logging.getLogger(__name__)

DEFAULT_YAW_OFFSETS = tuple(math.radians(d) for d in (-30, -20, -10, 0, 10, 20, 30))


class Effector(enum.Enum):
    LEFT = "left"
    RIGHT = "right"

    @property
    def other(self) -> "Effector":
        return Effector.RIGHT if self is Effector.LEFT else Effector.LEFT


@dataclass(frozen=True, eq=False)
class KinematicConstraints:
    """Swing-foot reachability polytopes, each in the stance-foot frame.

    ``right_to_left`` holds left-foot positions reachable with the right foot
    in contact; ``left_to_right`` the converse.
    """

    right_to_left: Polytope
    left_to_right: Polytope
    max_stride: float = field(init=False)

    def __post_init__(self):
        rl = geom.canonicalize(self.right_to_left.vertices)
        lr = geom.canonicalize(self.left_to_right.vertices)
        object.__setattr__(self, "right_to_left", rl)
        object.__setattr__(self, "left_to_right", lr)
        stride = max(np.linalg.norm(rl.vertices, axis=1).max(), np.linalg.norm(lr.vertices, axis=1).max())
        object.__setattr__(self, "max_stride", float(stride))

    def for_stance(self, stance: Effector) -> Polytope:
        return self.right_to_left if stance is Effector.RIGHT else self.left_to_right


@dataclass(frozen=True)
class SearchParams:
    yaw_offsets: tuple = DEFAULT_YAW_OFFSETS
    heuristic_weight: float = 1.0
    dedup_threshold: float = 0.02
    goal_tolerance: float = 1e-3
    timeout: float = 10_000.0  # ms
    rotation_enabled: bool = True
    yaw_cost: float = 0.0
    clamp_yaw: bool = False

    def __post_init__(self):
        object.__setattr__(self, "yaw_offsets", tuple(float(y) for y in self.yaw_offsets))
        if self.rotation_enabled and not self.yaw_offsets:
            raise ValueError("yaw_offsets must be non-empty when rotation is enabled")
        if self.heuristic_weight < 1:
            raise ValueError("heuristic_weight must be >= 1")
        if self.dedup_threshold <= 0 or self.goal_tolerance <= 0 or self.timeout <= 0:
            raise ValueError("thresholds and timeout must be positive")
        if self.yaw_cost < 0:
            raise ValueError("yaw_cost must be >= 0")

    @property
    def active_yaw_offsets(self) -> tuple:
        return self.yaw_offsets if self.rotation_enabled else (0.0,)


@dataclass(frozen=True)
class FootPose:
    position: np.ndarray
    yaw: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float).reshape(3))


@dataclass(frozen=True)
class Start:
    left: FootPose
    right: FootPose
    first_moving: Effector = Effector.LEFT

    @property
    def stance(self) -> Effector:
        return self.first_moving.other

    def pose(self, e: Effector) -> FootPose:
        return self.left if e is Effector.LEFT else self.right


@dataclass(frozen=True, eq=False)
class Goal:
    """Target region (a 1-vertex polytope for a point) and required foot."""

    region: Polytope
    effector: Optional[Effector] = None

    @classmethod
    def point(cls, p, effector: Optional[Effector] = None) -> "Goal":
        return cls(Polytope(np.asarray(p, dtype=float).reshape(1, 3)), effector)

    @property
    def is_point(self) -> bool:
        return len(self.region.vertices) == 1


@dataclass(eq=False)
class Node:
    effector: Effector  # foot in contact
    surface: Surface
    patch: np.ndarray  # CCW 2D polygon in the surface frame
    yaw: float
    parent: Optional["Node"] = None
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))  # used to reach this node
    g: float = 0.0
    depth: int = 0
    offset: float = 0.0  # yaw offset relative to the parent

    @property
    def surface_id(self) -> int:
        return self.surface.id

    @cached_property
    def extreme_points(self) -> np.ndarray:
        return self.surface.to_world(self.patch)

    @cached_property
    def polytope(self) -> Polytope:
        return Polytope(self.extreme_points)

    @cached_property
    def centroid(self) -> np.ndarray:
        return geom.centroid(self.extreme_points)

    @cached_property
    def perimeter(self) -> float:
        return geom.perimeter_length(self.extreme_points)

    def chain(self) -> list:
        out = []
        n = self
        while n is not None:
            out.append(n)
            n = n.parent
        return out[::-1]


@dataclass(frozen=True, eq=False)
class SequenceStep:
    surface: Surface
    patch: np.ndarray  # 3D extreme points
    yaw: float
    effector: Effector
    rotation: np.ndarray  # Q mapping the stance-frame polytope onto this step

    @property
    def surface_id(self) -> int:
        return self.surface.id


@dataclass(frozen=True, eq=False)
class SurfaceSequence:
    stance_position: np.ndarray
    stance_effector: Effector
    stance_surface: Surface
    stance_yaw: float
    steps: tuple

    def __len__(self):
        return len(self.steps)


@dataclass
class SearchStats:
    expanded: int = 0
    generated: int = 0
    time_ms: float = 0.0
    expansion_log: list = field(default_factory=list)


@dataclass(frozen=True, eq=False)
class PlanResult:
    sequence: SurfaceSequence
    stats: SearchStats
    goal_node: Node


def find_surface(env: Sequence[Surface], point, plane_tol: float = 1e-4, tol: float = 1e-6) -> Surface:
    for s in env:
        if s.contains_points(point, plane_tol=plane_tol, tol=tol)[0]:
            return s
    raise InvalidGeometry(f"point {np.round(point, 4).tolist()} is not on any surface")


def root_node(env: Sequence[Surface], start: Start) -> Node:
    stance = start.stance
    pose = start.pose(stance)
    s = find_surface(env, pose.position)
    return Node(
        effector=stance,
        surface=s,
        patch=s.to_local(pose.position),
        yaw=pose.yaw,
        rotation=s.frame @ geom.rot_z(pose.yaw),
    )


def stance_rotation(n: Node, yaw: float) -> np.ndarray:
    """Stance surface tilt applied after the yaw about the ground normal."""
    return n.surface.frame @ geom.rot_z(yaw)


def expand_node(n: Node, env: Sequence[Surface], kin: KinematicConstraints, params: SearchParams) -> list:
    kin_poly = kin.for_stance(n.effector)
    children = []
    for theta in params.active_yaw_offsets:
        yaw = n.yaw + theta
        if params.clamp_yaw:
            yaw = min(max(yaw, -math.pi), math.pi)
        q = stance_rotation(n, yaw)
        reach = geom.minkowski_sum(geom.rotate(kin_poly, q), n.polytope)
        lo, hi = reach.bounds()
        for s in env:
            slo, shi = s.bounds()
            if np.any(shi < lo - 1e-9) or np.any(slo > hi + 1e-9):
                continue
            section = geom.plane_section(reach, s)
            if section is None:
                continue
            patch = geom.polygon_intersect(section, s.polygon)
            if patch is None:
                continue
            children.append(
                Node(
                    effector=n.effector.other,
                    surface=s,
                    patch=patch,
                    yaw=yaw,
                    parent=n,
                    rotation=q,
                    g=n.g + 1.0 + params.yaw_cost * abs(theta),
                    depth=n.depth + 1,
                    offset=theta,
                )
            )
    return children


class ExpandedSet:
    """Expanded nodes bucketed by (effector, surface)."""

    def __init__(self, nodes: Iterable[Node] = ()):
        self._buckets: dict = {}
        for n in nodes:
            self.add(n)

    def add(self, n: Node):
        self._buckets.setdefault((n.effector, n.surface_id), []).append((n.centroid, n.perimeter))

    def matches(self, n: Node, threshold: float) -> bool:
        for c, p in self._buckets.get((n.effector, n.surface_id), ()):
            if np.linalg.norm(c - n.centroid) < threshold and abs(p - n.perimeter) < threshold:
                return True
        return False


def node_already_expanded(n: Node, expanded, threshold: float) -> bool:
    """Same foot, same surface, and both the patch centroids and the patch
    perimeter lengths closer than ``threshold``."""
    if not isinstance(expanded, ExpandedSet):
        expanded = ExpandedSet(expanded)
    return expanded.matches(n, threshold)


def surface_left_filter(n: Node) -> bool:
    """True when ``n`` puts a foot back on a surface that foot has left."""
    history = []
    a = n.parent
    while a is not None:
        if a.effector is n.effector:
            history.append(a.surface_id)
        a = a.parent
    if not history or history[0] == n.surface_id:
        return False
    return n.surface_id in history[1:]


def _goal_region(goal) -> Polytope:
    if isinstance(goal, Goal):
        return goal.region
    if isinstance(goal, Polytope):
        return goal
    return Polytope(np.atleast_2d(np.asarray(goal, dtype=float)))


def goal_distance(n: Node, goal) -> float:
    cached = n.__dict__.get("_goal_distance")
    if cached is None or cached[0] is not goal:
        cached = (goal, distance(n.polytope, _goal_region(goal)).distance)
        n.__dict__["_goal_distance"] = cached
    return cached[1]


def heuristic(n: Node, goal, kin: KinematicConstraints, weight: float = 1.0) -> float:
    """Weighted lower bound on the remaining steps: distance from the patch
    to the goal region over the longest possible stride."""
    if kin.max_stride <= 0:
        raise InvalidKinematics("max_stride must be positive")
    return weight * goal_distance(n, goal) / kin.max_stride


def search_heuristic(n: Node, goal: Goal, kin: KinematicConstraints, weight: float = 1.0) -> float:
    """Queue estimate: :func:`heuristic`, but at least one step while the
    required foot is not the one in contact."""
    h = heuristic(n, goal, kin, weight)
    if goal.effector is not None and n.effector is not goal.effector:
        h = max(h, 1.0)
    return h


def is_goal(n: Node, goal: Goal, tolerance: float) -> bool:
    if n.depth == 0:
        return False
    if goal.effector is not None and n.effector is not goal.effector:
        return False
    return goal_distance(n, goal) <= tolerance


def to_sequence(goal_node: Node) -> SurfaceSequence:
    chain = goal_node.chain()
    root = chain[0]
    steps = tuple(
        SequenceStep(
            surface=n.surface,
            patch=n.extreme_points,
            yaw=n.yaw,
            effector=n.effector,
            rotation=n.rotation,
        )
        for n in chain[1:]
    )
    return SurfaceSequence(
        stance_position=root.extreme_points[0],
        stance_effector=root.effector,
        stance_surface=root.surface,
        stance_yaw=root.yaw,
        steps=steps,
    )


def plan(
    env: Sequence[Surface],
    kin: KinematicConstraints,
    start: Start,
    goal: Goal,
    params: SearchParams = SearchParams(),
) -> PlanResult:
    """Best-first search on g + h; equal priorities pop in insertion order.

    Raises NoPlanExists when the queue empties and TimedOut when the wall
    clock exceeds ``params.timeout``; both carry the search statistics.
    """
    t0 = time.perf_counter()
    deadline = t0 + params.timeout / 1000.0
    stats = SearchStats()
    root = root_node(env, start)
    h0 = search_heuristic(root, goal, kin, params.heuristic_weight)
    # priority (f, h): among equal f the node closer to the goal pops first,
    # remaining ties by insertion order
    queue = [(h0, h0, 0, root)]
    counter = 1
    expanded = ExpandedSet()

    while queue:
        if time.perf_counter() > deadline:
            stats.time_ms = (time.perf_counter() - t0) * 1000.0
            raise TimedOut(f"no plan within {params.timeout:.0f} ms", stats)
        _, _, _, node = heapq.heappop(queue)
        if expanded.matches(node, params.dedup_threshold):
            continue
        expanded.add(node)
        stats.expanded += 1
        stats.expansion_log.append(
            (node.effector.value, node.surface_id, round(node.yaw, 9), tuple(np.round(node.centroid, 9)))
        )
        if is_goal(node, goal, params.goal_tolerance):
            stats.time_ms = (time.perf_counter() - t0) * 1000.0
            log.debug("plan found: %d steps, %d nodes", node.depth, stats.expanded)
            return PlanResult(to_sequence(node), stats, node)
        for child in expand_node(node, env, kin, params):
            if surface_left_filter(child):
                continue
            h = search_heuristic(child, goal, kin, params.heuristic_weight)
            heapq.heappush(queue, (child.g + h, h, counter, child))
            counter += 1
            stats.generated += 1

    stats.time_ms = (time.perf_counter() - t0) * 1000.0
    raise NoPlanExists("search space exhausted", stats)
