"""Convex geometry kernel.

Polytopes are stored by their extreme points (V-representation). Contact
surfaces are planar convex polygons; patches cut out of a surface are kept as
counter-clockwise 2D polygons in that surface's local frame and lifted back to
3D on demand.

All lengths are meters, all angles radians.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Union

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .errors import DegenerateGeometry, InvalidGeometry, InvalidRotation

# Coplanarity / collinearity tolerance used by every hull computation.
HULL_TOL = 1e-9
# A clipped patch is kept when its area reaches AREA_EPS, or, when it
# collapses to a segment, when that segment is longer than LENGTH_EPS.
AREA_EPS = 1e-6
LENGTH_EPS = 1e-3
ROTATION_TOL = 1e-9


def _as_points(points, dim=3) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        raise InvalidGeometry("empty point set")
    pts = pts.reshape(-1, dim)
    if not np.all(np.isfinite(pts)):
        raise InvalidGeometry("non-finite coordinates")
    return pts


def _affine_frame(pts: np.ndarray):
    """Centroid, orthonormal basis of the affine hull (columns) and its rank."""
    c = pts.mean(axis=0)
    if len(pts) == 1:
        return c, np.zeros((pts.shape[1], 0)), 0
    _, s, vt = np.linalg.svd(pts - c, full_matrices=False)
    rank = int(np.sum(s > HULL_TOL))
    return c, vt[:rank].T, rank


# ---------------------------------------------------------------------------
# 2D polygons
# ---------------------------------------------------------------------------

def _monotone_chain(uv: np.ndarray, idx) -> list:
    pts = uv.tolist()
    order = sorted(idx, key=lambda i: (pts[i][0], pts[i][1]))
    kept = [order[0]]
    for i in order[1:]:
        a, b = pts[i], pts[kept[-1]]
        if max(abs(a[0] - b[0]), abs(a[1] - b[1])) > HULL_TOL:
            kept.append(i)
    if len(kept) <= 2:
        return kept

    def turn(o, a, b):
        ox, oy = pts[o]
        ax, ay = pts[a][0] - ox, pts[a][1] - oy
        bx, by = pts[b][0] - ox, pts[b][1] - oy
        scale = max((ax * ax + ay * ay) ** 0.5, (bx * bx + by * by) ** 0.5)
        return ax * by - ay * bx > HULL_TOL * scale

    lower: list = []
    for i in kept:
        while len(lower) >= 2 and not turn(lower[-2], lower[-1], i):
            lower.pop()
        lower.append(i)
    upper: list = []
    for i in reversed(kept):
        while len(upper) >= 2 and not turn(upper[-2], upper[-1], i):
            upper.pop()
        upper.append(i)
    return lower[:-1] + upper[:-1]


def hull2d_indices(uv: np.ndarray) -> np.ndarray:
    """Indices of the counter-clockwise convex hull of 2D points.

    Collinear and duplicate points are dropped. One index is returned for a
    single (possibly repeated) point and two for a segment.
    """
    uv = np.asarray(uv, dtype=float)
    idx = range(len(uv))
    if len(uv) > 8:
        # Qhull prunes the interior quickly; the chain then cleans up
        # near-collinear survivors deterministically.
        try:
            idx = ConvexHull(uv).vertices.tolist()
        except QhullError:
            pass
    return np.array(_monotone_chain(uv, idx), dtype=int)


def convex_hull_2d(uv) -> np.ndarray:
    uv = _as_points(uv, dim=2)
    return uv[hull2d_indices(uv)]


def polygon_area(poly) -> float:
    """Signed shoelace area; positive for counter-clockwise 2D polygons."""
    p = np.asarray(poly, dtype=float)
    if len(p) < 3:
        return 0.0
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def polygon_diameter(poly) -> float:
    p = np.asarray(poly, dtype=float)
    if len(p) < 2:
        return 0.0
    d = p[:, None, :] - p[None, :, :]
    return float(np.sqrt((d**2).sum(-1)).max())


def is_degenerate_patch(poly, area_eps: float = AREA_EPS, length_eps: float = LENGTH_EPS) -> bool:
    if len(poly) >= 3 and polygon_area(poly) >= area_eps:
        return False
    return polygon_diameter(poly) <= length_eps


def _clip_halfplane(poly: np.ndarray, normal: np.ndarray, offset: float) -> np.ndarray:
    """Keep the part of ``poly`` where normal . p <= offset."""
    sd = poly @ normal - offset
    if np.all(sd <= HULL_TOL):
        return poly
    if np.all(sd > HULL_TOL):
        return poly[:0]
    out = []
    n = len(poly)
    for k in range(n):
        cur, nxt = poly[k], poly[(k + 1) % n]
        sc, sn = sd[k], sd[(k + 1) % n]
        if sc <= HULL_TOL:
            out.append(cur)
        if (sc < -HULL_TOL and sn > HULL_TOL) or (sc > HULL_TOL and sn < -HULL_TOL):
            t = sc / (sc - sn)
            out.append(cur + t * (nxt - cur))
    return np.array(out).reshape(-1, 2)


def polygon_intersect(
    a,
    b,
    area_eps: float = AREA_EPS,
    length_eps: float = LENGTH_EPS,
) -> Optional[np.ndarray]:
    """Intersection of two convex CCW polygons given in the same 2D frame.

    ``a`` may be degenerate (a segment or a point); ``b`` must have at least
    three vertices. Returns None when the overlap is below the degeneracy
    threshold.
    """
    a = _as_points(a, dim=2)
    b = _as_points(b, dim=2)
    if np.any(a.max(0) < b.min(0) - HULL_TOL) or np.any(b.max(0) < a.min(0) - HULL_TOL):
        return None
    poly = a
    m = len(b)
    for k in range(m):
        p0, p1 = b[k], b[(k + 1) % m]
        edge = p1 - p0
        length = np.hypot(*edge)
        if length <= HULL_TOL:
            continue
        normal = np.array([edge[1], -edge[0]]) / length
        poly = _clip_halfplane(poly, normal, float(normal @ p0))
        if len(poly) == 0:
            return None
    poly = convex_hull_2d(poly)
    if is_degenerate_patch(poly, area_eps, length_eps):
        return None
    return poly


def point_in_polygon(uv, poly, tol: float = 0.0) -> np.ndarray:
    """Vectorised membership of 2D points in a convex CCW polygon."""
    uv = np.atleast_2d(np.asarray(uv, dtype=float))
    poly = np.asarray(poly, dtype=float)
    inside = np.ones(len(uv), dtype=bool)
    m = len(poly)
    for k in range(m):
        p0, p1 = poly[k], poly[(k + 1) % m]
        edge = p1 - p0
        length = np.hypot(*edge)
        normal = np.array([edge[1], -edge[0]]) / length
        inside &= (uv - p0) @ normal <= tol
    return inside


# ---------------------------------------------------------------------------
# Polytopes
# ---------------------------------------------------------------------------

def _simplex_edges(simplices: np.ndarray) -> np.ndarray:
    pairs = np.concatenate([simplices[:, [0, 1]], simplices[:, [1, 2]], simplices[:, [0, 2]]])
    pairs.sort(axis=1)
    return np.unique(pairs, axis=0)


@dataclass(frozen=True, eq=False)
class Polytope:
    """Convex hull of a finite set of 3D points."""

    vertices: np.ndarray

    def __post_init__(self):
        v = _as_points(self.vertices).copy()
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    def __len__(self):
        return len(self.vertices)

    @cached_property
    def dim(self) -> int:
        return _affine_frame(self.vertices)[2]

    @cached_property
    def hrep(self) -> "HRep":
        return v_to_h(self)

    @cached_property
    def edges(self) -> np.ndarray:
        """Vertex index pairs covering every edge of the hull (may include
        diagonals of coplanar facets, which lie on the boundary anyway)."""
        n = len(self.vertices)
        if self.dim == 3:
            try:
                return _simplex_edges(ConvexHull(self.vertices).simplices)
            except QhullError:
                pass
        i, j = np.triu_indices(n, k=1)
        return np.stack([i, j], axis=1)

    def translate(self, t) -> "Polytope":
        return Polytope(self.vertices + np.asarray(t, dtype=float))

    def bounds(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)


@dataclass(frozen=True, eq=False)
class HRep:
    """Half-space description: normals[k] . p <= offsets[k], unit normals."""

    normals: np.ndarray
    offsets: np.ndarray

    def __len__(self):
        return len(self.offsets)

    def slack(self, x) -> np.ndarray:
        return self.offsets - self.normals @ np.asarray(x, dtype=float)

    def contains(self, x, tol: float = 1e-9) -> bool:
        return bool(np.all(self.slack(x) >= -tol))


def canonicalize(points) -> Polytope:
    """Reduce a point set to the extreme points of its convex hull.

    Returned vertices keep their input order. Lower-dimensional inputs
    (coincident, collinear or coplanar points) are handled explicitly.
    """
    pts = _as_points(points)
    c, basis, rank = _affine_frame(pts)
    if rank == 3:
        try:
            hull = ConvexHull(pts)
        except QhullError:
            # numerically flat: treat as planar
            _, _, vt = np.linalg.svd(pts - c, full_matrices=False)
            basis, rank = vt[:2].T, 2
        else:
            idx = np.sort(hull.vertices)
            out = Polytope(pts[idx])
            remap = np.full(len(pts), -1)
            remap[idx] = np.arange(len(idx))
            out.__dict__["edges"] = _simplex_edges(remap[hull.simplices])
            out.__dict__["dim"] = 3
            return out
    if rank == 0:
        return Polytope(pts[:1])
    if rank == 1:
        t = (pts - c) @ basis[:, 0]
        idx = sorted({int(np.argmin(t)), int(np.argmax(t))})
        return Polytope(pts[idx])
    uv = (pts - c) @ basis[:, :2]
    idx = np.sort(hull2d_indices(uv))
    return Polytope(pts[idx])


def minkowski_sum(a: Polytope, b: Polytope) -> Polytope:
    sums = a.vertices[:, None, :] + b.vertices[None, :, :]
    return canonicalize(sums.reshape(-1, 3))


def rot_z(yaw: float) -> np.ndarray:
    c, s = np.cos(yaw), np.sin(yaw)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rot_x(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def check_rotation(q, tol: float = ROTATION_TOL) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.shape != (3, 3) or not np.all(np.isfinite(q)):
        raise InvalidRotation("rotation must be a finite 3x3 matrix")
    if np.max(np.abs(q.T @ q - np.eye(3))) > tol or abs(np.linalg.det(q) - 1.0) > tol:
        raise InvalidRotation("matrix is not a proper rotation")
    return q


def rotate(p: Polytope, q) -> Polytope:
    q = check_rotation(q)
    return Polytope(p.vertices @ q.T)


def frame_from_normal(normal) -> np.ndarray:
    """Minimal rotation taking the world z-axis onto ``normal``."""
    n = np.asarray(normal, dtype=float)
    n = n / np.linalg.norm(n)
    z = np.array([0.0, 0.0, 1.0])
    axis = np.cross(z, n)
    s = np.linalg.norm(axis)
    c = float(n @ z)
    if s < 1e-12:
        if c > 0:
            return np.eye(3)
        return np.diag([1.0, -1.0, -1.0])
    k = axis / s
    kx = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    return np.eye(3) + s * kx + (1.0 - c) * (kx @ kx)


# ---------------------------------------------------------------------------
# Surfaces
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Surface:
    """Planar convex contact polygon, vertices CCW about ``normal``."""

    id: int
    vertices: np.ndarray
    normal: np.ndarray
    frame: np.ndarray

    @classmethod
    def from_vertices(cls, id: int, vertices, tol: float = 1e-6) -> "Surface":
        v = _as_points(vertices)
        if len(v) < 3:
            raise DegenerateGeometry(f"surface {id}: needs at least 3 vertices")
        # Newell's method
        nxt = np.roll(v, -1, axis=0)
        normal = np.array(
            [
                np.sum((v[:, 1] - nxt[:, 1]) * (v[:, 2] + nxt[:, 2])),
                np.sum((v[:, 2] - nxt[:, 2]) * (v[:, 0] + nxt[:, 0])),
                np.sum((v[:, 0] - nxt[:, 0]) * (v[:, 1] + nxt[:, 1])),
            ]
        )
        norm = np.linalg.norm(normal)
        if norm < 1e-12:
            raise DegenerateGeometry(f"surface {id}: zero area")
        normal = normal / norm
        if normal[2] < 0:
            v = v[::-1].copy()
            normal = -normal
        dist = (v - v.mean(axis=0)) @ normal
        if np.max(np.abs(dist)) > tol:
            raise InvalidGeometry(f"surface {id}: vertices are not coplanar")
        frame = frame_from_normal(normal)
        uv = (v - v.mean(axis=0)) @ frame[:, :2]
        m = len(uv)
        for k in range(m):
            e0 = uv[(k + 1) % m] - uv[k]
            e1 = uv[(k + 2) % m] - uv[(k + 1) % m]
            if e0[0] * e1[1] - e0[1] * e1[0] < -tol * max(np.hypot(*e0), np.hypot(*e1)):
                raise InvalidGeometry(f"surface {id}: polygon is not convex")
        if polygon_area(uv) < AREA_EPS:
            raise DegenerateGeometry(f"surface {id}: area below {AREA_EPS} m^2")
        v.setflags(write=False)
        return cls(int(id), v, normal, frame)

    @cached_property
    def origin(self) -> np.ndarray:
        return self.vertices.mean(axis=0)

    @cached_property
    def offset(self) -> float:
        return float(self.normal @ self.origin)

    @cached_property
    def basis(self) -> np.ndarray:
        """3x2 orthonormal in-plane basis (images of the x and y axes)."""
        return self.frame[:, :2]

    @cached_property
    def polygon(self) -> np.ndarray:
        """The surface as a CCW 2D polygon in its own frame."""
        return convex_hull_2d(self.to_local(self.vertices))

    @cached_property
    def area(self) -> float:
        return polygon_area(self.polygon)

    def to_local(self, points) -> np.ndarray:
        return (np.atleast_2d(points) - self.origin) @ self.basis

    def to_world(self, uv) -> np.ndarray:
        return self.origin + np.atleast_2d(uv) @ self.basis.T

    def signed_distance(self, points) -> np.ndarray:
        return np.atleast_2d(points) @ self.normal - self.offset

    def contains_points(self, points, plane_tol: float = 1e-4, tol: float = 1e-9) -> np.ndarray:
        pts = np.atleast_2d(points)
        on_plane = np.abs(self.signed_distance(pts)) <= plane_tol
        return on_plane & point_in_polygon(self.to_local(pts), self.polygon, tol)

    def bounds(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)


def plane_section(p: Polytope, s: Surface, tol: float = HULL_TOL) -> Optional[np.ndarray]:
    """Cross-section of ``p`` with the plane of ``s``, as a 2D polygon in the
    surface frame (not clipped to the surface). None when ``p`` misses the
    plane."""
    v = p.vertices
    sd = v @ s.normal - s.offset
    if sd.min() > tol or sd.max() < -tol:
        return None
    pieces = [v[np.abs(sd) <= tol]]
    e = p.edges
    si, sj = sd[e[:, 0]], sd[e[:, 1]]
    cross = ((si < -tol) & (sj > tol)) | ((si > tol) & (sj < -tol))
    if np.any(cross):
        i, j = e[cross, 0], e[cross, 1]
        t = (si[cross] / (si[cross] - sj[cross]))[:, None]
        pieces.append(v[i] + t * (v[j] - v[i]))
    pts = np.concatenate(pieces)
    if len(pts) == 0:
        return None
    return convex_hull_2d(s.to_local(pts))


def v_to_h(p: Polytope, tol: float = HULL_TOL) -> HRep:
    """H-representation with unit normals.

    Planar polytopes get their in-plane edge rows plus the two opposing rows
    pinning the plane. Points and segments raise DegenerateGeometry.
    """
    v = p.vertices
    c, basis, rank = _affine_frame(v)
    if rank == 3:
        try:
            eq = ConvexHull(v).equations
        except QhullError:
            rank = 2
        else:
            normals = eq[:, :3]
            offsets = -eq[:, 3]
            scale = np.linalg.norm(normals, axis=1)
            normals = normals / scale[:, None]
            offsets = offsets / scale
            rows_n: list[np.ndarray] = []
            rows_d: list[float] = []
            for n, d in zip(normals, offsets):
                if any(np.max(np.abs(n - m)) < 1e-7 and abs(d - e) < 1e-7 for m, e in zip(rows_n, rows_d)):
                    continue
                rows_n.append(n)
                rows_d.append(d)
            return HRep(np.array(rows_n), np.array(rows_d))
    if rank < 2:
        raise DegenerateGeometry("cannot build an H-representation of a point or segment")
    _, _, vt = np.linalg.svd(v - c, full_matrices=False)
    u = vt[:2].T
    normal = np.cross(u[:, 0], u[:, 1])
    if normal[np.argmax(np.abs(normal))] < 0:
        normal = -normal
        u = u[:, ::-1]
    uv = (v - c) @ u
    ring = uv[hull2d_indices(uv)]
    rows_n = []
    rows_d = []
    for k in range(len(ring)):
        a, b = ring[k], ring[(k + 1) % len(ring)]
        edge = b - a
        n2 = np.array([edge[1], -edge[0]]) / np.hypot(*edge)
        n3 = u @ n2
        rows_n.append(n3)
        rows_d.append(float(n3 @ (c + u @ a)))
    rows_n += [normal, -normal]
    rows_d += [float(normal @ c), -float(normal @ c)]
    return HRep(np.array(rows_n), np.array(rows_d))


def contains(p: Union[Polytope, HRep], x, tol: float = 1e-9) -> bool:
    x = np.asarray(x, dtype=float)
    if isinstance(p, HRep):
        return p.contains(x, tol)
    if p.dim >= 2:
        return p.hrep.contains(x, tol)
    a = p.vertices[0]
    if p.dim == 0:
        return bool(np.linalg.norm(x - a) <= tol)
    b = p.vertices[1]
    t = np.clip((x - a) @ (b - a) / ((b - a) @ (b - a)), 0.0, 1.0)
    return bool(np.linalg.norm(x - (a + t * (b - a))) <= tol)


def contains_each(p: Polytope, points, tol: float = 1e-9) -> np.ndarray:
    """Vectorised :func:`contains` over the rows of ``points``."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if p.dim >= 2:
        h = p.hrep
        return np.all(pts @ h.normals.T <= h.offsets + tol, axis=1)
    return np.array([contains(p, x, tol) for x in pts], dtype=bool)


def centroid(poly) -> np.ndarray:
    v = poly.vertices if isinstance(poly, Polytope) else np.asarray(poly, dtype=float)
    return v.mean(axis=0)


def perimeter_length(polygon) -> float:
    v = polygon.vertices if isinstance(polygon, Polytope) else np.asarray(polygon, dtype=float)
    if len(v) < 2:
        return 0.0
    return float(np.linalg.norm(np.roll(v, -1, axis=0) - v, axis=1).sum())
