"""Foot placement along a surface sequence as a convex QP.

Each foothold x_i is written in its surface frame, x_i = o_i + U_i u_i, which
turns plane membership into a parameterisation. The program is

    min  c(X) - w * alpha
    s.t. N_i (x_i - x_{i-1}) <= d_i          (reachability from x_{i-1})
         E_i u_i + alpha <= e_i              (surface edges, unit normals)
         alpha >= 0

with c(X) = sum_{i>=2} |x_i - x_{i-2}|^2 or c = 0.
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional

import clarabel
import numpy as np
from scipy import sparse

from . import geom
from .errors import DegenerateGeometry, Infeasible, MaxIterations, NumericalFailure
from .geom import HRep, Surface
from .search import Effector, Goal, KinematicConstraints, Start, SurfaceSequence

MARGIN_WEIGHT = 10.0
COST_MODES = ("stride", "none")


@dataclass(frozen=True, eq=False)
class StepRows:
    effector: Effector
    surface: Surface
    yaw: float
    reach: HRep  # rows on x_i - x_{i-1}, world frame
    edges: HRep  # rows on u_i, surface frame
    degenerate: bool  # patch below the area threshold: no margin term

    @property
    def pin(self):
        """Plane equality n . x = offset, enforced by the parameterisation."""
        return self.surface.normal, self.surface.offset


@dataclass(frozen=True, eq=False)
class PlacementProblem:
    start: np.ndarray  # x_0
    start_rotation: np.ndarray
    start_effector: Effector
    steps: tuple
    cost: str = "stride"
    margin_weight: float = MARGIN_WEIGHT
    goal: Optional[HRep] = None  # rows on the last foothold, world frame

    def __post_init__(self):
        if self.cost not in COST_MODES:
            raise ValueError(f"cost must be one of {COST_MODES}")
        if self.margin_weight < 0:
            raise ValueError("margin_weight must be >= 0")

    def __len__(self):
        return len(self.steps)

    @property
    def row_count(self) -> int:
        n = sum(len(s.reach) + len(s.edges) + 1 for s in self.steps)
        return n + (len(self.goal) if self.goal is not None else 0)


@dataclass(frozen=True, eq=False)
class FootstepPlan:
    start: np.ndarray
    start_effector: Effector
    positions: np.ndarray  # (l, 3)
    yaws: tuple
    effectors: tuple
    surface_ids: tuple
    alpha: float
    objective: float
    margins: tuple  # per-step minimum edge slack
    degenerate: tuple
    solve_ms: float = 0.0
    iterations: int = 0

    def __len__(self):
        return len(self.positions)


def surface_rows(s: Surface) -> HRep:
    """Edge half-planes of the surface polygon in its own frame, outward unit
    normals: n . u <= n . p_k."""
    poly = s.polygon
    nxt = np.roll(poly, -1, axis=0)
    edge = nxt - poly
    normals = np.column_stack([edge[:, 1], -edge[:, 0]])
    lengths = np.linalg.norm(normals, axis=1)
    if np.any(lengths < geom.HULL_TOL):
        raise DegenerateGeometry(f"surface {s.id} has a zero-length edge")
    normals /= lengths[:, None]
    return HRep(normals, np.einsum("ij,ij->i", normals, poly))


def reach_rows(kin_poly: geom.Polytope, q: np.ndarray) -> HRep:
    return geom.v_to_h(geom.rotate(kin_poly, q))


def goal_rows(goal: Goal, tol: float) -> HRep:
    if goal.is_point:
        g = goal.region.vertices[0]
        eye = np.eye(3)
        return HRep(np.vstack([eye, -eye]), np.concatenate([g + tol, -g + tol]))
    h = goal.region.hrep
    return HRep(h.normals, h.offsets + tol)


def build_problem(
    seq: SurfaceSequence,
    kin: KinematicConstraints,
    start: Optional[Start] = None,
    goal: Optional[Goal] = None,
    goal_tolerance: float = 1e-3,
    cost: str = "stride",
    margin_weight: float = MARGIN_WEIGHT,
) -> PlacementProblem:
    """Constraint rows for every step of ``seq``.

    When ``goal`` is given the last foothold is also kept within
    ``goal_tolerance`` of it, which the search guarantees is attainable.
    """
    if len(seq) == 0:
        raise ValueError("surface sequence is empty")
    if start is not None:
        if start.stance is not seq.stance_effector:
            raise ValueError("sequence stance foot does not match the start")
        if np.linalg.norm(start.pose(start.stance).position - seq.stance_position) > 1e-9:
            raise ValueError("sequence stance position does not match the start")
    rows = []
    prev = seq.stance_effector
    for i, st in enumerate(seq.steps):
        if st.effector is prev:
            raise ValueError(f"step {i} does not alternate feet")
        area = abs(geom.polygon_area(st.surface.to_local(st.patch))) if len(st.patch) >= 3 else 0.0
        rows.append(StepRows(
            effector=st.effector,
            surface=st.surface,
            yaw=st.yaw,
            reach=reach_rows(kin.for_stance(prev), st.rotation),
            edges=surface_rows(st.surface),
            degenerate=area < geom.AREA_EPS,
        ))
        prev = st.effector
    g = goal_rows(goal, goal_tolerance) if goal is not None else None
    return PlacementProblem(
        start=np.asarray(seq.stance_position, dtype=float),
        start_rotation=seq.stance_surface.frame @ geom.rot_z(seq.stance_yaw),
        start_effector=seq.stance_effector,
        steps=tuple(rows),
        cost=cost,
        margin_weight=margin_weight,
        goal=g,
    )


def _affine_maps(p: PlacementProblem):
    """x_i = offs[i] + maps[i] @ z for the stacked variable z = (u_1..u_l, alpha)."""
    l = len(p.steps)
    nz = 2 * l + 1
    offs = [p.start]
    maps = [np.zeros((3, nz))]
    for i, st in enumerate(p.steps):
        m = np.zeros((3, nz))
        m[:, 2 * i:2 * i + 2] = st.surface.basis
        offs.append(st.surface.origin)
        maps.append(m)
    return offs, maps


def assemble(p: PlacementProblem):
    """Clarabel data (P, q, A, b) with every row in the nonnegative cone."""
    l = len(p.steps)
    nz = 2 * l + 1
    ia = nz - 1
    offs, maps = _affine_maps(p)
    a_rows, b_rows = [], []
    any_margin = False
    for i, st in enumerate(p.steps, start=1):
        n, d = st.reach.normals, st.reach.offsets
        a_rows.append(n @ (maps[i] - maps[i - 1]))
        b_rows.append(d - n @ (offs[i] - offs[i - 1]))
        e = np.zeros((len(st.edges), nz))
        e[:, 2 * (i - 1):2 * i] = st.edges.normals
        if not st.degenerate:
            e[:, ia] = 1.0
            any_margin = True
        a_rows.append(e)
        b_rows.append(st.edges.offsets)
    if p.goal is not None:
        a_rows.append(p.goal.normals @ maps[l])
        b_rows.append(p.goal.offsets - p.goal.normals @ offs[l])
    # alpha >= 0, and alpha <= 0 when no step carries a margin term
    lo = np.zeros((1, nz))
    lo[0, ia] = -1.0
    a_rows.append(lo)
    b_rows.append([0.0])
    if not any_margin:
        a_rows.append(-lo)
        b_rows.append([0.0])
    a = np.vstack(a_rows)
    b = np.concatenate([np.ravel(x) for x in b_rows])

    q = np.zeros(nz)
    q[ia] = -p.margin_weight
    pm = np.zeros((nz, nz))
    const = 0.0
    if p.cost == "stride":
        for i in range(2, l + 1):
            jm = maps[i] - maps[i - 2]
            jo = offs[i] - offs[i - 2]
            pm += 2.0 * jm.T @ jm
            q += 2.0 * jm.T @ jo
            const += jo @ jo
    return pm, q, a, b, const


def evaluate(p: PlacementProblem, positions: np.ndarray, alpha: float) -> float:
    x = np.vstack([p.start, positions])
    c = 0.0
    if p.cost == "stride":
        c = float(sum(np.sum((x[i] - x[i - 2]) ** 2) for i in range(2, len(x))))
    return c - p.margin_weight * alpha


def step_margins(p: PlacementProblem, positions: np.ndarray) -> np.ndarray:
    out = []
    for st, x in zip(p.steps, positions):
        u = st.surface.to_local(x).reshape(2)
        out.append(float(np.min(st.edges.slack(u))))
    return np.array(out)


def solve(p: PlacementProblem, max_iter: int = 200, tol: float = 1e-9) -> FootstepPlan:
    t0 = time.perf_counter()
    pm, q, a, b, const = assemble(p)
    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.max_iter = max_iter
    settings.tol_gap_abs = tol
    settings.tol_gap_rel = tol
    settings.tol_feas = tol
    solver = clarabel.DefaultSolver(
        sparse.triu(sparse.csc_matrix(pm), format="csc"), q, sparse.csc_matrix(a), b,
        [clarabel.NonnegativeConeT(len(b))], settings,
    )
    sol = solver.solve()
    status = str(sol.status)
    if status in ("PrimalInfeasible", "AlmostPrimalInfeasible"):
        raise Infeasible("no foothold assignment satisfies the constraints")
    if status == "MaxIterations":
        raise MaxIterations(f"placement QP not solved in {max_iter} iterations")
    if status not in ("Solved", "AlmostSolved"):
        raise NumericalFailure(f"placement QP failed: {status}")
    z = np.asarray(sol.x)
    offs, maps = _affine_maps(p)
    positions = np.array([offs[i] + maps[i] @ z for i in range(1, len(p.steps) + 1)])
    alpha = max(float(z[-1]), 0.0)
    margins = step_margins(p, positions)
    return FootstepPlan(
        start=p.start.copy(),
        start_effector=p.start_effector,
        positions=positions,
        yaws=tuple(st.yaw for st in p.steps),
        effectors=tuple(st.effector for st in p.steps),
        surface_ids=tuple(st.surface.id for st in p.steps),
        alpha=alpha,
        objective=evaluate(p, positions, alpha),
        margins=tuple(0.0 if st.degenerate else float(m) for st, m in zip(p.steps, margins)),
        degenerate=tuple(st.degenerate for st in p.steps),
        solve_ms=(time.perf_counter() - t0) * 1000.0,
        iterations=int(sol.iterations),
    )


def check_plan(p: PlacementProblem, plan: FootstepPlan, tol: float = 1e-6) -> list:
    """Constraint violations of ``plan`` (empty when feasible)."""
    bad = []
    prev = p.start
    for i, (st, x) in enumerate(zip(p.steps, plan.positions)):
        if np.abs(st.surface.signed_distance(x)).max() > tol:
            bad.append(f"step {i}: off the surface plane")
        r = st.reach.slack(x - prev)
        if r.min() < -tol:
            bad.append(f"step {i}: reachability violated by {-r.min():.2e}")
        slack = st.edges.slack(st.surface.to_local(x).reshape(2)) - (0.0 if st.degenerate else plan.alpha)
        if slack.min() < -tol:
            bad.append(f"step {i}: surface margin violated by {-slack.min():.2e}")
        prev = x
    if p.goal is not None and p.goal.slack(plan.positions[-1]).min() < -tol:
        bad.append("last foothold misses the goal")
    if plan.alpha < 0:
        bad.append("negative alpha")
    return bad
