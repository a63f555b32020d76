"""Distance between convex polytopes via GJK on the Minkowski difference.

Only separation distance is computed. Overlapping sets report distance 0 and
``intersecting=True``; penetration depth is not needed by the planner.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .errors import NumericalFailure
from .geom import Polytope, centroid

MAX_ITERATIONS = 128
GAP_TOL = 1e-9
ZERO_TOL = 1e-12
_DEGENERATE = 1e-14

_SUBSETS = {k: [s for r in range(1, k + 1) for s in itertools.combinations(range(k), r)] for k in range(1, 5)}


@dataclass(frozen=True, eq=False)
class DistanceResult:
    distance: float
    witness_a: np.ndarray
    witness_b: np.ndarray
    intersecting: bool


def _as_polytope(x) -> Polytope:
    if isinstance(x, Polytope):
        return x
    return Polytope(np.atleast_2d(np.asarray(x, dtype=float)))


def support_index(p: Polytope, d) -> int:
    # np.argmax returns the first maximum: lowest index wins ties
    return int(np.argmax(p.vertices @ np.asarray(d, dtype=float)))


def support(p: Polytope, d) -> np.ndarray:
    """Vertex of ``p`` maximising ``d . v``; ties go to the lowest index."""
    return p.vertices[support_index(p, d)]


def _dot(a, b):
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


def _sub(a, b):
    return (a[0] - b[0], a[1] - b[1], a[2] - b[2])


def _project(pts, subset):
    """Affine projection of the origin onto the points in ``subset``.

    Returns (barycentric weights, point) or None when the subset is
    degenerate or the projection falls outside its convex hull.
    """
    k = len(subset)
    p0 = pts[subset[0]]
    if k == 1:
        return (1.0,), p0
    cols = [_sub(pts[i], p0) for i in subset[1:]]
    m = k - 1
    gram = [[_dot(cols[r], cols[c]) for c in range(m)] for r in range(m)]
    rhs = [-_dot(cols[r], p0) for r in range(m)]
    if m == 1:
        g = gram[0][0]
        if g <= _DEGENERATE:
            return None
        t = [rhs[0] / g]
    elif m == 2:
        det = gram[0][0] * gram[1][1] - gram[0][1] * gram[1][0]
        if det <= _DEGENERATE * max(gram[0][0], gram[1][1], 1e-300):
            return None
        t = [
            (rhs[0] * gram[1][1] - gram[0][1] * rhs[1]) / det,
            (gram[0][0] * rhs[1] - gram[1][0] * rhs[0]) / det,
        ]
    else:
        g = np.array(gram)
        scale = max(gram[0][0], gram[1][1], gram[2][2], 1e-300)
        if abs(np.linalg.det(g)) <= _DEGENERATE * scale**3:
            return None
        t = list(np.linalg.solve(g, np.array(rhs)))
    bary = (1.0 - sum(t),) + tuple(t)
    if min(bary) < -1e-12:
        return None
    point = tuple(p0[j] + sum(t[r] * cols[r][j] for r in range(m)) for j in range(3))
    return bary, point


def closest_point_on_simplex(pts):
    """Closest point to the origin of the hull of 1..4 points.

    Every face of the simplex is tried; the closest valid affine projection
    is the exact answer because the optimum lies in the relative interior of
    some face.
    """
    best = None
    for subset in _SUBSETS[len(pts)]:
        res = _project(pts, subset)
        if res is None:
            continue
        bary, point = res
        dist2 = _dot(point, point)
        if best is None or dist2 < best[0] - 1e-24:
            best = (dist2, subset, bary, point)
    if best is None:
        raise NumericalFailure("no valid sub-simplex projection")
    return best


def min_distance(a, b, max_iterations: int = MAX_ITERATIONS, gap_tol: float = GAP_TOL) -> DistanceResult:
    """Minimum Euclidean distance between two convex sets.

    ``a`` and ``b`` are polytopes or bare points. Raises NumericalFailure if
    the iteration cap is reached before the duality gap drops below
    ``gap_tol``.
    """
    a = _as_polytope(a)
    b = _as_polytope(b)
    va, vb = a.vertices, b.vertices

    d = centroid(b) - centroid(a)
    if np.linalg.norm(d) < ZERO_TOL:
        d = np.array([1.0, 0.0, 0.0])

    def support_diff(direction):
        ia = int(np.argmax(va @ direction))
        ib = int(np.argmax(vb @ -direction))
        return ia, ib, tuple(va[ia] - vb[ib])

    # search towards the origin from the Minkowski-difference side
    ia, ib, w = support_diff(-d)
    simplex = [(ia, ib)]
    pts = [w]
    bary = (1.0,)
    v = w
    dist2 = _dot(v, v)

    def result(intersecting):
        wa = sum(lam * va[i] for lam, (i, _) in zip(bary, simplex))
        wb = sum(lam * vb[j] for lam, (_, j) in zip(bary, simplex))
        if intersecting:
            return DistanceResult(0.0, wa, wa.copy(), True)
        return DistanceResult(float(np.linalg.norm(wa - wb)), wa, wb, False)

    for _ in range(max_iterations):
        norm = dist2**0.5
        if norm <= ZERO_TOL:
            return result(True)
        ia, ib, w = support_diff(-np.array(v))
        if norm - _dot(v, w) / norm < gap_tol or (ia, ib) in simplex:
            return result(False)
        simplex.append((ia, ib))
        pts.append(w)
        new2, subset, bary, v = closest_point_on_simplex(pts)
        simplex = [simplex[i] for i in subset]
        pts = [pts[i] for i in subset]
        if len(pts) == 4 or new2 <= ZERO_TOL**2:
            dist2 = 0.0
            return result(True)
        if new2 >= dist2:
            # no progress: numerically converged at the previous estimate
            return result(False)
        dist2 = new2
    raise NumericalFailure(f"GJK did not converge in {max_iterations} iterations")


def fallback_distance(a, b) -> DistanceResult:
    """Slow but simple distance: minimise |A la - B mu| over two simplices."""
    a = _as_polytope(a)
    b = _as_polytope(b)
    na, nb = len(a.vertices), len(b.vertices)

    def split(z):
        return z[:na], z[na:]

    def objective(z):
        la, mu = split(z)
        diff = la @ a.vertices - mu @ b.vertices
        return diff @ diff

    def grad(z):
        la, mu = split(z)
        diff = la @ a.vertices - mu @ b.vertices
        return np.concatenate([2 * a.vertices @ diff, -2 * b.vertices @ diff])

    z0 = np.concatenate([np.full(na, 1.0 / na), np.full(nb, 1.0 / nb)])
    cons = [
        {"type": "eq", "fun": lambda z: np.sum(z[:na]) - 1.0},
        {"type": "eq", "fun": lambda z: np.sum(z[na:]) - 1.0},
    ]
    res = minimize(objective, z0, jac=grad, bounds=[(0, 1)] * (na + nb), constraints=cons,
                   method="SLSQP", options={"ftol": 1e-16, "maxiter": 500})
    la, mu = split(res.x)
    wa, wb = la @ a.vertices, mu @ b.vertices
    dist = float(np.linalg.norm(wa - wb))
    if dist <= 1e-9:
        return DistanceResult(0.0, wa, wa.copy(), True)
    return DistanceResult(dist, wa, wb, False)


def distance(a, b) -> DistanceResult:
    """GJK, falling back to the direct minimisation on numerical failure."""
    try:
        return min_distance(a, b)
    except NumericalFailure:
        return fallback_distance(a, b)
