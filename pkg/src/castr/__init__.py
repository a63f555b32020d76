"""Footstep planning over convex contact surfaces with continuous reachability
sets, a discretized-action baseline, and a QP foothold placer."""
from .errors import (
    CastrError, DegenerateGeometry, EmptyActionSet, Infeasible, InvalidGeometry, InvalidKinematics,
    InvalidRotation, MaxIterations, NoPlanExists, NumericalFailure, ParseError, PlanFailure, TimedOut,
    ValidationError,
)
from .geom import Polytope, Surface
from .search import Effector, FootPose, Goal, KinematicConstraints, SearchParams, Start, plan

__version__ = "0.1.0"
