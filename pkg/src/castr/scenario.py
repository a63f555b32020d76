"""Scenario model, YAML file format and builtin environments.

The builtin environments are reconstructions meant to show the qualitative
behaviour of each case (straight climb, dead-end valley, gap that can only be
crossed sideways); their dimensions are our own.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from . import geom
from .errors import CastrError, InvalidGeometry, ParseError, ValidationError
from .geom import Polytope, Surface
from .search import Effector, FootPose, Goal, KinematicConstraints, SearchParams, Start

FORMAT_VERSION = 1
BUILTIN = ("flat", "stairs", "local_minima", "narrow_passage", "small_world")
# builtin environments run a scaled heuristic, see SearchParams.heuristic_weight
BUILTIN_WEIGHT = 3.0


@dataclass(frozen=True, eq=False)
class Scenario:
    surfaces: tuple
    kinematics: KinematicConstraints
    start: Start
    goal: Goal
    params: SearchParams = field(default_factory=SearchParams)
    name: str = "scenario"
    symmetric: bool = False

    def surface(self, sid: int) -> Surface:
        for s in self.surfaces:
            if s.id == sid:
                return s
        raise KeyError(sid)

    def with_params(self, **changes) -> "Scenario":
        return replace(self, params=replace(self.params, **changes))


# ---------------------------------------------------------------------------
# kinematics
# ---------------------------------------------------------------------------

def box_kinematics(sagittal=(-0.30, 0.35), lateral=(0.15, 0.40), vertical=(-0.25, 0.25), chamfer=0.05):
    """Octagonal prism reachability for a biped.

    ``right_to_left`` keeps the left foot at least ``lateral[0]`` to the left
    of the right foot; ``left_to_right`` is its mirror image.
    """
    x0, x1 = sagittal
    y0, y1 = lateral
    c = chamfer
    ring = [(x0 + c, y0), (x1 - c, y0), (x1, y0 + c), (x1, y1 - c),
            (x1 - c, y1), (x0 + c, y1), (x0, y1 - c), (x0, y0 + c)]
    right_to_left = np.array([(x, y, z) for z in vertical for x, y in ring])
    left_to_right = right_to_left * np.array([1.0, -1.0, 1.0])
    return KinematicConstraints(Polytope(right_to_left), Polytope(left_to_right))


def default_kinematics() -> KinematicConstraints:
    return box_kinematics()


def mirrored(a: Polytope, b: Polytope, tol: float = 1e-6) -> bool:
    """Is ``b`` the reflection of ``a`` across the sagittal (y = 0) plane?"""
    flipped = a.vertices * np.array([1.0, -1.0, 1.0])
    if len(flipped) != len(b.vertices):
        return False
    d = np.linalg.norm(flipped[:, None, :] - b.vertices[None, :, :], axis=2)
    return bool(np.all(d.min(axis=1) <= tol) and np.all(d.min(axis=0) <= tol))


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

def _surfaces_overlap(a: Surface, b: Surface) -> bool:
    if abs(abs(a.normal @ b.normal) - 1.0) > 1e-9 or abs(a.offset - b.offset * (a.normal @ b.normal)) > 1e-6:
        return False
    inter = geom.polygon_intersect(a.to_local(b.vertices), a.polygon, area_eps=1e-9, length_eps=np.inf)
    return inter is not None


def validate(sc: Scenario) -> Scenario:
    ids = [s.id for s in sc.surfaces]
    if len(set(ids)) != len(ids):
        raise ValidationError("surface ids must be unique", "surface-ids-unique")
    for i, a in enumerate(sc.surfaces):
        for b in sc.surfaces[i + 1:]:
            if _surfaces_overlap(a, b):
                raise ValidationError(f"surfaces {a.id} and {b.id} overlap", "surfaces-disjoint")
    for e in Effector:
        pos = sc.start.pose(e).position
        if not any(s.contains_points(pos, plane_tol=1e-4, tol=1e-6)[0] for s in sc.surfaces):
            raise ValidationError(f"{e.value} start foot is not on a surface", "start-on-surface")
    lo = np.min([s.bounds()[0] for s in sc.surfaces], axis=0) - 2.0
    hi = np.max([s.bounds()[1] for s in sc.surfaces], axis=0) + 2.0
    g = sc.goal.region.vertices
    if np.any(g < lo) or np.any(g > hi):
        raise ValidationError("goal lies outside the environment bounds inflated by 2 m", "goal-in-bounds")
    if sc.symmetric and not mirrored(sc.kinematics.right_to_left, sc.kinematics.left_to_right):
        raise ValidationError("kinematic polytopes are not mirror images", "kinematics-symmetric")
    return sc


# ---------------------------------------------------------------------------
# file format
# ---------------------------------------------------------------------------

class _Dumper(yaml.SafeDumper):
    pass


def _repr_list(dumper, data):
    flow = all(not isinstance(x, (list, dict)) for x in data) or all(
        isinstance(x, list) and all(not isinstance(y, (list, dict)) for y in x) for x in data
    )
    return dumper.represent_sequence("tag:yaml.org,2002:seq", data, flow_style=flow and len(data) > 0)


_Dumper.add_representer(list, _repr_list)


def _num(x: float) -> float:
    # 12 decimals (picometres) drops float noise such as 2.4000000000000004
    x = round(float(x), 12)
    return 0.0 if x == 0 else x


def _deg(rad: float) -> float:
    return _num(round(math.degrees(rad), 9))


def _pts(a) -> list:
    return [[_num(c) for c in row] for row in np.asarray(a, dtype=float).tolist()]


def _params_doc(p: SearchParams) -> dict:
    return {
        "yaw_offsets_deg": [_deg(y) for y in p.yaw_offsets],
        "heuristic_weight": _num(p.heuristic_weight),
        "dedup_threshold_m": _num(p.dedup_threshold),
        "goal_tolerance_m": _num(p.goal_tolerance),
        "timeout_ms": _num(p.timeout),
        "rotation_enabled": bool(p.rotation_enabled),
        "yaw_cost": _num(p.yaw_cost),
    }


def to_document(sc: Scenario) -> dict:
    goal: dict = {}
    if sc.goal.is_point:
        goal["point"] = _pts(sc.goal.region.vertices)[0]
    else:
        goal["polytope"] = _pts(sc.goal.region.vertices)
    goal["effector"] = sc.goal.effector.value if sc.goal.effector else "either"
    kin = {
        "right_to_left": _pts(sc.kinematics.right_to_left.vertices),
        "left_to_right": _pts(sc.kinematics.left_to_right.vertices),
    }
    if sc.symmetric:
        kin["symmetric"] = True
    return {
        "version": FORMAT_VERSION,
        "name": sc.name,
        "units": {"length": "m", "angle": "deg"},
        "surfaces": [{"id": s.id, "vertices": _pts(s.vertices)} for s in sc.surfaces],
        "kinematics": kin,
        "start": {
            "left": {"pos": _pts([sc.start.left.position])[0], "yaw": _deg(sc.start.left.yaw)},
            "right": {"pos": _pts([sc.start.right.position])[0], "yaw": _deg(sc.start.right.yaw)},
            "first_moving": sc.start.first_moving.value,
        },
        "goal": goal,
        "params": _params_doc(sc.params),
    }


def dumps(sc: Scenario) -> str:
    return yaml.dump(to_document(sc), Dumper=_Dumper, sort_keys=False, width=100)


def save(sc: Scenario, path) -> None:
    Path(path).write_text(dumps(sc))


class _Reader:
    """Typed field access that reports the failing field and its line."""

    def __init__(self, root_node):
        self.root = root_node

    def line_of(self, path: str) -> Optional[int]:
        node = self.root
        line = node.start_mark.line + 1 if node is not None else None
        for part in path.split("."):
            if isinstance(node, yaml.MappingNode):
                nxt = next((v for k, v in node.value if k.value == part), None)
            elif isinstance(node, yaml.SequenceNode) and part.isdigit() and int(part) < len(node.value):
                nxt = node.value[int(part)]
            else:
                nxt = None
            if nxt is None:
                break
            node = nxt
            line = node.start_mark.line + 1
        return line

    def fail(self, path, message):
        raise ParseError(message, field=path, line=self.line_of(path))

    def get(self, doc, path: str, key: str, required=True, default=None):
        full = f"{path}.{key}" if path else key
        if not isinstance(doc, dict):
            self.fail(path or "<root>", "expected a mapping")
        if key not in doc:
            if required:
                self.fail(full, "missing required field")
            return default
        return doc[key]

    def number(self, value, path):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.fail(path, "expected a number")
        if not math.isfinite(value):
            self.fail(path, "expected a finite number")
        return float(value)

    def point(self, value, path):
        if not isinstance(value, list) or len(value) != 3:
            self.fail(path, "expected [x, y, z]")
        return np.array([self.number(v, f"{path}.{i}") for i, v in enumerate(value)])

    def points(self, value, path, minimum=1):
        if not isinstance(value, list) or len(value) < minimum:
            self.fail(path, f"expected a list of at least {minimum} points")
        return np.array([self.point(v, f"{path}.{i}") for i, v in enumerate(value)])

    def effector(self, value, path, allow_either=False):
        names = {"left": Effector.LEFT, "right": Effector.RIGHT}
        if allow_either and value == "either":
            return None
        if value not in names:
            self.fail(path, "expected 'left' or 'right'" + (" or 'either'" if allow_either else ""))
        return names[value]


def loads(text: str, name: Optional[str] = None) -> Scenario:
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
        doc = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        raise ParseError(f"invalid YAML: {exc.problem}", line=mark.line + 1 if mark else None) from None
    except yaml.YAMLError as exc:
        raise ParseError(f"invalid YAML: {exc}") from None
    r = _Reader(root)
    if not isinstance(doc, dict):
        raise ParseError("scenario document must be a mapping", line=1)

    version = r.get(doc, "", "version")
    if version != FORMAT_VERSION:
        r.fail("version", f"unsupported version {version!r}")
    units = r.get(doc, "", "units")
    if r.get(units, "units", "length") != "m" or r.get(units, "units", "angle") != "deg":
        r.fail("units", "units must be {length: m, angle: deg}")

    raw_surfaces = r.get(doc, "", "surfaces")
    if not isinstance(raw_surfaces, list) or not raw_surfaces:
        r.fail("surfaces", "expected a non-empty list")
    surfaces = []
    for i, raw in enumerate(raw_surfaces):
        path = f"surfaces.{i}"
        sid = r.get(raw, path, "id")
        if isinstance(sid, bool) or not isinstance(sid, int):
            r.fail(f"{path}.id", "expected an integer")
        verts = r.points(r.get(raw, path, "vertices"), f"{path}.vertices", minimum=3)
        try:
            surfaces.append(Surface.from_vertices(sid, verts))
        except InvalidGeometry as exc:
            invariant = "surface-convex" if "convex" in str(exc) else "surface-geometry"
            raise ValidationError(str(exc), invariant) from None

    kin_doc = r.get(doc, "", "kinematics")
    try:
        kin = KinematicConstraints(
            Polytope(r.points(r.get(kin_doc, "kinematics", "right_to_left"), "kinematics.right_to_left")),
            Polytope(r.points(r.get(kin_doc, "kinematics", "left_to_right"), "kinematics.left_to_right")),
        )
    except InvalidGeometry as exc:
        raise ValidationError(str(exc), "kinematics-nonempty") from None
    symmetric = r.get(kin_doc, "kinematics", "symmetric", required=False, default=False)
    if not isinstance(symmetric, bool):
        r.fail("kinematics.symmetric", "expected a boolean")

    st = r.get(doc, "", "start")
    poses = {}
    for foot in ("left", "right"):
        pd = r.get(st, "start", foot)
        pos = r.point(r.get(pd, f"start.{foot}", "pos"), f"start.{foot}.pos")
        yaw = math.radians(r.number(r.get(pd, f"start.{foot}", "yaw"), f"start.{foot}.yaw"))
        poses[foot] = FootPose(pos, yaw)
    first = r.effector(r.get(st, "start", "first_moving"), "start.first_moving")
    start = Start(poses["left"], poses["right"], first)

    gd = r.get(doc, "", "goal")
    if not isinstance(gd, dict):
        r.fail("goal", "expected a mapping")
    if ("point" in gd) == ("polytope" in gd):
        r.fail("goal", "exactly one of 'point' or 'polytope' is required")
    if "point" in gd:
        region = Polytope(r.point(gd["point"], "goal.point")[None, :])
    else:
        region = geom.canonicalize(r.points(gd["polytope"], "goal.polytope"))
    goal = Goal(region, r.effector(r.get(gd, "goal", "effector"), "goal.effector", allow_either=True))

    params = SearchParams()
    pd = r.get(doc, "", "params", required=False, default=None)
    if pd is not None:
        if not isinstance(pd, dict):
            r.fail("params", "expected a mapping")
        kw = {}
        if "yaw_offsets_deg" in pd:
            ys = pd["yaw_offsets_deg"]
            if not isinstance(ys, list):
                r.fail("params.yaw_offsets_deg", "expected a list")
            kw["yaw_offsets"] = tuple(
                math.radians(r.number(y, f"params.yaw_offsets_deg.{i}")) for i, y in enumerate(ys)
            )
        for key, attr in (("heuristic_weight", "heuristic_weight"), ("dedup_threshold_m", "dedup_threshold"),
                          ("goal_tolerance_m", "goal_tolerance"), ("timeout_ms", "timeout"),
                          ("yaw_cost", "yaw_cost")):
            if key in pd:
                kw[attr] = r.number(pd[key], f"params.{key}")
        if "rotation_enabled" in pd:
            if not isinstance(pd["rotation_enabled"], bool):
                r.fail("params.rotation_enabled", "expected a boolean")
            kw["rotation_enabled"] = pd["rotation_enabled"]
        try:
            params = SearchParams(**kw)
        except ValueError as exc:
            raise ValidationError(str(exc), "params-valid") from None

    sc_name = doc.get("name", name or "scenario")
    if not isinstance(sc_name, str):
        r.fail("name", "expected a string")
    sc = Scenario(tuple(surfaces), kin, start, goal, params, sc_name, symmetric)
    return validate(sc)


def load(path) -> Scenario:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {p}: {exc.strerror}") from None
    return loads(text, name=p.stem)


# ---------------------------------------------------------------------------
# builtin environments
# ---------------------------------------------------------------------------

def rectangle(sid, x0, x1, y0, y1, z=0.0) -> Surface:
    return Surface.from_vertices(sid, [[x0, y0, z], [x1, y0, z], [x1, y1, z], [x0, y1, z]])


def _standard_start(x=0.0, y=0.0, z=0.0, half_width=0.1) -> Start:
    return Start(FootPose([x, y + half_width, z]), FootPose([x, y - half_width, z]), Effector.LEFT)


def _params(rotation: bool, **kw) -> SearchParams:
    return SearchParams(rotation_enabled=rotation, heuristic_weight=kw.pop("heuristic_weight", BUILTIN_WEIGHT), **kw)


def flat(seed: int = 0, size: float = 4.0, rotation: bool = True) -> Scenario:
    """One large square of side ``size``; the seed draws the goal."""
    rng = np.random.default_rng(seed)
    half = size / 2
    ground = rectangle(0, -half, half, -half, half)
    margin = 0.3
    goal = rng.uniform(-half + margin, half - margin, size=2)
    sc = Scenario(
        (ground,), default_kinematics(), _standard_start(),
        Goal.point([goal[0], goal[1], 0.0], Effector.LEFT), _params(rotation),
        name=f"flat_{seed}", symmetric=True,
    )
    return validate(sc)


def stairs(seed: int = 0, treads: int = 24, depth: float = 0.3, rise: float = 0.1,
           width: float = 1.0, rotation: bool = False) -> Scenario:
    """Start platform followed by a straight run of ascending treads.
    The goal is a standing left-foot position on the last tread."""
    surfaces = [rectangle(0, -0.6, 0.3, -width / 2, width / 2, 0.0)]
    for k in range(1, treads + 1):
        x0 = 0.3 + (k - 1) * depth
        surfaces.append(rectangle(k, x0, x0 + depth, -width / 2, width / 2, k * rise))
    last = surfaces[-1]
    goal = last.origin + np.array([0.0, 0.1, 0.0])  # left foot of a standing pose
    sc = Scenario(
        tuple(surfaces), default_kinematics(), _standard_start(),
        Goal.point(goal, Effector.LEFT), _params(rotation), name="stairs", symmetric=True,
    )
    return validate(sc)


def local_minima(seed: int = 0, trap_stones: int = 4, goal_gap: float = 0.9, lane_y: float = 0.77,
                 stone=(0.31, 0.53), spacing: float = 0.09, rotation: bool = False) -> Scenario:
    """Stepping stones lead straight at the goal but stop short of it by a
    gap no stride can cover; a parallel lane of stones off to the side is
    the way through."""
    sx, sy = stone
    surfaces = [rectangle(0, -0.3, 0.3, -0.35, 0.35)]
    x = 0.3
    for _ in range(trap_stones):
        surfaces.append(rectangle(len(surfaces), x + spacing, x + spacing + sx, -sy / 2, sy / 2))
        x += spacing + sx
    gx0 = x + goal_gap
    surfaces.append(rectangle(len(surfaces), gx0, gx0 + 0.6, -0.35, 0.35))
    xs = -0.2
    while xs < gx0 + 0.6:
        surfaces.append(rectangle(len(surfaces), xs, xs + sx, lane_y - sy / 2, lane_y + sy / 2))
        xs += sx + spacing
    sc = Scenario(
        tuple(surfaces), default_kinematics(), _standard_start(),
        Goal.point([gx0 + 0.3, 0.0, 0.0], Effector.LEFT), _params(rotation), name="local_minima", symmetric=True,
    )
    return validate(sc)


def narrow_passage(seed: int = 0, width: float = 0.1, length: float = 1.5, rotation: bool = True) -> Scenario:
    """A strip narrower than the minimum lateral foot spacing joins two
    platforms: crossing it needs the feet turned."""
    x_in = 0.6
    surfaces = [
        rectangle(0, -0.6, x_in, -0.8, 0.8),
        rectangle(1, x_in, x_in + length, -width / 2, width / 2),
        rectangle(2, x_in + length, x_in + length + 1.0, -0.8, 0.8),
    ]
    goal = [x_in + length + 0.5, 0.0, 0.0]
    sc = Scenario(
        tuple(surfaces), default_kinematics(), _standard_start(),
        Goal.point(goal, Effector.LEFT), _params(rotation), name="narrow_passage", symmetric=True,
    )
    return validate(sc)


def small_world(seed: int = 0, rotation: bool = False, heuristic_weight: float = 1.0) -> Scenario:
    """Start platform, up to three random stepping stones and a goal stone;
    five surfaces at most."""
    rng = np.random.default_rng(seed)
    surfaces = [rectangle(0, -0.4, 0.3, -0.5, 0.5)]
    x = 0.3
    n_stones = int(rng.integers(1, 4))
    for k in range(1, n_stones + 1):
        gap = rng.uniform(0.05, 0.2)
        size = rng.uniform(0.15, 0.3)
        y0 = rng.uniform(-0.5, 0.3)
        z = float(rng.choice([0.0, 0.05, 0.1, -0.05]))
        surfaces.append(rectangle(k, x + gap, x + gap + size, y0, y0 + rng.uniform(0.2, 0.6), z))
        x += gap + size
    gap = rng.uniform(0.05, 0.2)
    goal_stone = rectangle(n_stones + 1, x + gap, x + gap + 0.4, -0.4, 0.4, 0.0)
    surfaces.append(goal_stone)
    goal = goal_stone.origin + np.array([rng.uniform(-0.1, 0.1), rng.uniform(-0.2, 0.2), 0.0])
    sc = Scenario(
        tuple(surfaces), default_kinematics(), _standard_start(),
        Goal.point(goal, Effector.LEFT),
        SearchParams(rotation_enabled=rotation, heuristic_weight=heuristic_weight),
        name=f"small_world_{seed}", symmetric=True,
    )
    return validate(sc)


_GENERATORS = {
    "flat": flat,
    "stairs": stairs,
    "local_minima": local_minima,
    "narrow_passage": narrow_passage,
    "small_world": small_world,
}


def generate(name: str, seed: int = 0, **scale) -> Scenario:
    if name not in _GENERATORS:
        raise CastrError(f"unknown scenario '{name}'; expected one of {', '.join(BUILTIN)}")
    return _GENERATORS[name](seed=seed, **scale)
