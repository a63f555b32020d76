import numpy as np
import pytest

from castr import geom, placer, search
from castr import scenario as scn
from castr.errors import Infeasible
from castr.geom import Polytope
from castr.scenario import rectangle
from castr.search import (Effector, FootPose, Goal, KinematicConstraints, SearchParams, SequenceStep, Start,
                          SurfaceSequence)

import oracles

PAD = rectangle(0, -0.1, 0.1, -0.1, 0.1)
SQUARE = rectangle(1, 0.4, 0.8, -0.2, 0.2)


def box(x, y, z=(-0.3, 0.3)):
    return np.array([[a, b, c] for a in x for b in y for c in z], float)


def box_kin(x, y):
    v = box(x, y)
    return KinematicConstraints(Polytope(v), Polytope(v * [1, -1, 1]))


def one_step(surface, kin):
    """Right foot at the origin on PAD, left foot steps onto ``surface``."""
    start = Start(FootPose([0.0, 0.05, 0.0]), FootPose([0.0, 0.0, 0.0]), Effector.LEFT)
    step = SequenceStep(surface, surface.vertices, 0.0, Effector.LEFT, np.eye(3))
    seq = SurfaceSequence(np.zeros(3), Effector.RIGHT, PAD, 0.0, (step,))
    return placer.build_problem(seq, kin, start, cost="none")


def test_row_count_one_step():
    kin = box_kin((-1, 1), (-1, 1))
    p = one_step(SQUARE, kin)
    facets = len(geom.v_to_h(kin.right_to_left))
    assert p.row_count == facets + 4 + 1
    assert np.allclose(np.linalg.norm(p.steps[0].reach.normals, axis=1), 1.0)
    assert np.allclose(np.linalg.norm(p.steps[0].edges.normals, axis=1), 1.0)


def test_square_centre_maximin():
    plan = placer.solve(one_step(SQUARE, box_kin((-1, 1), (-1, 1))))
    assert plan.alpha == pytest.approx(0.2, abs=1e-6)
    assert np.allclose(plan.positions[0], [0.6, 0.0, 0.0], atol=1e-5)


@pytest.mark.parametrize("ylim", [(-0.05, 0.05), (0.15, 0.35), (-0.35, -0.12)])
def test_clipped_square_matches_grid_oracle(ylim):
    kin = box_kin((-1, 1), ylim)
    plan = placer.solve(one_step(SQUARE, kin))
    best, _ = oracles.maximin_grid(SQUARE.vertices, kin.right_to_left.vertices, np.zeros(3))
    assert plan.alpha == pytest.approx(best, abs=2e-3)
    assert plan.alpha >= best - 1e-9  # the grid can only under-estimate
    assert ylim[0] - 1e-7 <= plan.positions[0][1] <= ylim[1] + 1e-7


def test_edge_strip_margin():
    # the reachable set leaves a 0.4 x 0.05 strip along the square's far edge
    plan = placer.solve(one_step(SQUARE, box_kin((-1, 1), (0.15, 0.35))))
    assert plan.alpha == pytest.approx(0.05, abs=1e-6)


def test_disjoint_reach_is_infeasible():
    with pytest.raises(Infeasible):
        placer.solve(one_step(SQUARE, box_kin((0.0, 0.2), (-0.1, 0.1))))


def test_objective_below_reference_point():
    kin = box_kin((-1, 1), (-0.05, 0.05))
    p = one_step(SQUARE, kin)
    plan = placer.solve(p)
    ref = np.array([[0.6, 0.0, 0.0]])  # centroid of the clipped strip
    ref_alpha = float(placer.step_margins(p, ref).min())
    assert plan.objective <= placer.evaluate(p, ref, ref_alpha) + 1e-9


def plan_for(sc, cost):
    res = search.plan(sc.surfaces, sc.kinematics, sc.start, sc.goal, sc.params)
    p = placer.build_problem(res.sequence, sc.kinematics, sc.start, sc.goal, sc.params.goal_tolerance, cost=cost)
    return p, placer.solve(p)


SCENARIOS = [scn.stairs(treads=8), scn.local_minima(), scn.narrow_passage(), scn.flat(1), scn.small_world(2)]


@pytest.mark.parametrize("sc", SCENARIOS, ids=lambda s: s.name)
def test_scenarios_feasible_with_margin(sc):
    p, plan = plan_for(sc, "stride")
    assert placer.check_plan(p, plan) == []
    p0, plan0 = plan_for(sc, "none")
    assert placer.check_plan(p0, plan0) == []
    assert plan0.alpha > 0
    # the margin left by the solver equals its alpha
    live = [m for m, d in zip(plan0.margins, plan0.degenerate) if not d]
    assert min(live) == pytest.approx(plan0.alpha, abs=1e-6)
    # the maximin placement is a feasible reference point for the stride objective
    ref_alpha = max(0.0, min(m for m, d in zip(placer.step_margins(p, plan0.positions), plan0.degenerate) if not d))
    assert plan.objective <= placer.evaluate(p, plan0.positions, ref_alpha) + 1e-6


def feasible(p, positions, tol=1e-9):
    prev = p.start
    for st, x in zip(p.steps, positions):
        if st.reach.slack(x - prev).min() < -tol:
            return False
        if st.edges.slack(st.surface.to_local(x).reshape(2)).min() < -tol:
            return False
        prev = x
    return p.goal is None or p.goal.slack(positions[-1]).min() >= -tol


@pytest.mark.parametrize("sc", SCENARIOS[:3], ids=lambda s: s.name)
def test_perturbation_never_improves_margin(sc):
    p, plan = plan_for(sc, "none")
    live = ~np.array(plan.degenerate)
    dirs = [np.array([np.cos(t), np.sin(t)]) for t in np.arange(8) * np.pi / 4]
    for i, st in enumerate(p.steps):
        for d in dirs:
            moved = plan.positions.copy()
            moved[i] = moved[i] + st.surface.basis @ (0.01 * d)
            if not feasible(p, moved):
                continue
            m = placer.step_margins(p, moved)[live].min()
            assert m <= plan.alpha + 1e-4


def test_stride_cost_equalizes_corridor():
    ground = rectangle(0, -0.5, 6.0, -0.5, 0.5)
    sc = scn.Scenario((ground,), scn.default_kinematics(), scn._standard_start(),
                      Goal.point([5.0, 0.1, 0.0], Effector.LEFT),
                      SearchParams(rotation_enabled=False, heuristic_weight=3), name="corridor", symmetric=True)
    _, plan = plan_for(sc, "stride")
    x = np.vstack([sc.start.right.position, plan.positions])
    strides = np.array([np.linalg.norm(x[i] - x[i - 2]) for i in range(2, len(x))])
    interior = strides[2:-2]
    assert len(interior) >= 6
    assert np.ptp(interior) < 1e-4


def test_all_degenerate_pins_alpha():
    # a segment-wide surface: the only patch is degenerate
    line = geom.Surface.from_vertices(1, [[0.4, -0.2, 0.0], [0.8, -0.2, 0.0], [0.8, 0.2, 0.0], [0.4, 0.2, 0.0]])
    kin = box_kin((-1, 1), (0.2, 0.5))
    start = Start(FootPose([0.0, 0.05, 0.0]), FootPose([0.0, 0.0, 0.0]), Effector.LEFT)
    seg = np.array([[0.4, 0.2, 0.0], [0.8, 0.2, 0.0]])
    seq = SurfaceSequence(np.zeros(3), Effector.RIGHT, PAD, 0.0, (SequenceStep(line, seg, 0.0, Effector.LEFT, np.eye(3)),))
    p = placer.build_problem(seq, kin, start, cost="none")
    plan = placer.solve(p)
    assert p.steps[0].degenerate
    assert plan.alpha == pytest.approx(0.0, abs=1e-9)
    assert plan.positions[0][1] == pytest.approx(0.2, abs=1e-6)


def test_bad_inputs():
    kin = box_kin((-1, 1), (-1, 1))
    with pytest.raises(ValueError):
        placer.build_problem(SurfaceSequence(np.zeros(3), Effector.RIGHT, PAD, 0.0, ()), kin)
    step = SequenceStep(SQUARE, SQUARE.vertices, 0.0, Effector.RIGHT, np.eye(3))
    with pytest.raises(ValueError):
        placer.build_problem(SurfaceSequence(np.zeros(3), Effector.RIGHT, PAD, 0.0, (step,)), kin)
    with pytest.raises(ValueError):
        placer.PlacementProblem(np.zeros(3), np.eye(3), Effector.RIGHT, (), cost="average")
