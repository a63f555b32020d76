"""Plan documents and an independent validator.

The validator re-checks a plan against its scenario file using only the two
documents: it rebuilds rotations itself and tests reachability by linear
programming over the kinematic polytope vertices rather than through the
planner's half-space code.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import yaml
from scipy.optimize import linprog

from .errors import ParseError
from .scenario import _Dumper, _deg, _num

PLAN_VERSION = 1


@dataclass
class PlanStep:
    effector: str
    surface_id: int
    position: np.ndarray
    yaw: float  # radians
    margin: float
    degenerate: bool = False


@dataclass
class PlanDocument:
    scenario: str
    planner: str
    status: str
    start_effector: str
    start_position: np.ndarray
    start_yaw: float
    alpha: float
    objective: float
    goal_tolerance: float
    steps: list = field(default_factory=list)
    report: dict = field(default_factory=dict)


def to_yaml(doc: PlanDocument) -> str:
    data = {
        "version": PLAN_VERSION,
        "kind": "plan",
        "scenario": doc.scenario,
        "planner": doc.planner,
        "status": doc.status,
        "units": {"length": "m", "angle": "deg"},
        "start": {
            "effector": doc.start_effector,
            "pos": [_num(c) for c in doc.start_position],
            "yaw": _deg(doc.start_yaw),
        },
        "alpha": _num(doc.alpha),
        "objective": _num(doc.objective),
        "goal_tolerance": _num(doc.goal_tolerance),
        "steps": [
            {
                "effector": s.effector,
                "surface_id": int(s.surface_id),
                "position": [_num(c) for c in s.position],
                "yaw": _deg(s.yaw),
                "margin": _num(s.margin),
                "degenerate": bool(s.degenerate),
            }
            for s in doc.steps
        ],
        "report": doc.report,
    }
    return yaml.dump(data, Dumper=_Dumper, sort_keys=False, width=100)


def save(doc: PlanDocument, path) -> None:
    Path(path).write_text(to_yaml(doc))


def loads(text: str) -> PlanDocument:
    try:
        d = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        line = getattr(getattr(exc, "problem_mark", None), "line", None)
        raise ParseError(f"invalid YAML: {exc}", line=None if line is None else line + 1) from None
    try:
        if d["version"] != PLAN_VERSION or d.get("kind") != "plan":
            raise ParseError("not a version-1 plan document", field="version")
        st = d["start"]
        steps = [
            PlanStep(s["effector"], int(s["surface_id"]), np.array(s["position"], dtype=float),
                     math.radians(s["yaw"]), float(s["margin"]), bool(s.get("degenerate", False)))
            for s in d["steps"] or []
        ]
        return PlanDocument(
            scenario=d["scenario"], planner=d["planner"], status=d["status"],
            start_effector=st["effector"], start_position=np.array(st["pos"], dtype=float),
            start_yaw=math.radians(st["yaw"]), alpha=float(d["alpha"]), objective=float(d["objective"]),
            goal_tolerance=float(d["goal_tolerance"]), steps=steps, report=d.get("report") or {},
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed plan document: {exc!r}") from None


def load(path) -> PlanDocument:
    try:
        return loads(Path(path).read_text())
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from None


# ---------------------------------------------------------------------------
# independent validation, from the documents alone
# ---------------------------------------------------------------------------

def _plane(vertices):
    v = np.asarray(vertices, float)
    c = v.mean(axis=0)
    _, _, vt = np.linalg.svd(v - c)
    n = vt[2]
    if n[2] < 0 or (n[2] == 0 and (n[1] < 0 or (n[1] == 0 and n[0] < 0))):
        n = -n
    return c, n


def _tilt(n):
    """Smallest rotation taking +z onto the unit vector n."""
    z = np.array([0.0, 0.0, 1.0])
    c = float(z @ n)
    if c > 1 - 1e-15:
        return np.eye(3)
    if c < -1 + 1e-15:
        return np.diag([1.0, -1.0, -1.0])
    k = np.cross(z, n)
    k /= np.linalg.norm(k)
    kx = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    s = math.sqrt(max(0.0, 1 - c * c))
    return np.eye(3) + s * kx + (1 - c) * kx @ kx


def _yaw(t):
    c, s = math.cos(t), math.sin(t)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _in_hull_lp(vertices, x, tol):
    """Distance-tolerant membership: min L_inf residual of a convex combination."""
    v = np.asarray(vertices, float)
    n = len(v)
    # variables lam (n), r ; minimise r s.t. |V^T lam - x| <= r
    c = np.zeros(n + 1)
    c[-1] = 1.0
    a_ub = np.vstack([np.hstack([v.T, -np.ones((3, 1))]), np.hstack([-v.T, -np.ones((3, 1))])])
    b_ub = np.concatenate([x, -x])
    a_eq = np.hstack([np.ones((1, n)), np.zeros((1, 1))])
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=[1.0], bounds=[(0, None)] * (n + 1), method="highs")
    return res.status == 0 and res.fun <= tol


def _polygon_slack(vertices, normal, x):
    """Minimum signed distance from x (on the plane) to the polygon's edges,
    positive inside."""
    v = np.asarray(vertices, float)
    out = []
    for a, b in zip(v, np.roll(v, -1, axis=0)):
        e = b - a
        inward = np.cross(normal, e)
        inward /= np.linalg.norm(inward)
        out.append(float(inward @ (x - a)))
    return min(out)


def validate_documents(scenario_doc: dict, plan: PlanDocument, tol: float = 1e-6) -> list:
    """Problems found in ``plan`` (empty when valid). ``scenario_doc`` is the
    raw mapping loaded from a scenario file."""
    problems = []
    if plan.status != "Success":
        if plan.steps:
            problems.append("non-success plan lists steps")
        return problems
    if not plan.steps:
        problems.append("success plan has no steps")
        return problems
    surfaces = {}
    for s in scenario_doc["surfaces"]:
        v = np.asarray(s["vertices"], float)
        c, n = _plane(v)
        # orient the polygon counter-clockwise about the upward normal
        if np.cross(v[1] - v[0], v[2] - v[0]) @ n < 0:
            v = v[::-1]
        surfaces[s["id"]] = (v, c, n)
    kin = {
        "right": np.asarray(scenario_doc["kinematics"]["right_to_left"], float),  # right in contact
        "left": np.asarray(scenario_doc["kinematics"]["left_to_right"], float),
    }

    def surface_under(x):
        for sid, (v, c, n) in surfaces.items():
            if abs((x - c) @ n) <= 1e-4 and _polygon_slack(v, n, x - (x - c) @ n * n) >= -1e-6:
                return sid
        return None

    prev_x = plan.start_position
    prev_e = plan.start_effector
    prev_sid = surface_under(prev_x)
    if prev_sid is None:
        problems.append("start foot is not on a surface")
        return problems
    for i, st in enumerate(plan.steps):
        tag = f"step {i + 1}"
        if st.effector == prev_e:
            problems.append(f"{tag}: feet do not alternate")
        if st.surface_id not in surfaces:
            problems.append(f"{tag}: unknown surface {st.surface_id}")
            break
        v, c, n = surfaces[st.surface_id]
        x = st.position
        if abs((x - c) @ n) > tol:
            problems.append(f"{tag}: {abs((x - c) @ n):.2e} m off the surface plane")
        slack = _polygon_slack(v, n, x)
        need = 0.0 if st.degenerate else plan.alpha
        if slack < need - tol:
            problems.append(f"{tag}: edge distance {slack:.6f} below alpha {need:.6f}")
        q = _tilt(surfaces[prev_sid][2]) @ _yaw(st.yaw)
        local = q.T @ (x - prev_x)
        if not _in_hull_lp(kin[prev_e], local, tol):
            problems.append(f"{tag}: outside the reachable set of the previous foot")
        prev_x, prev_e, prev_sid = x, st.effector, st.surface_id

    goal = scenario_doc["goal"]
    want = goal.get("effector", "either")
    if want != "either" and plan.steps[-1].effector != want:
        problems.append("last step uses the wrong foot")
    last = plan.steps[-1].position
    if "point" in goal:
        d = float(np.linalg.norm(last - np.asarray(goal["point"], float)))
        if d > plan.goal_tolerance * math.sqrt(3) + tol:
            problems.append(f"last foothold {d:.4f} m from the goal")
    elif not _in_hull_lp(np.asarray(goal["polytope"], float), last, plan.goal_tolerance + tol):
        problems.append("last foothold outside the goal region")
    if plan.alpha < 0:
        problems.append("negative alpha")
    return problems


def validate_files(scenario_path, plan_path, tol: float = 1e-6) -> list:
    try:
        scenario_doc = yaml.safe_load(Path(scenario_path).read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ParseError(f"cannot read scenario {scenario_path}: {exc}") from None
    return validate_documents(scenario_doc, load(plan_path), tol)
