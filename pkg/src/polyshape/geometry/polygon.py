"""
Polygonal inclusions and outer domains.

The inclusion is a simple counterclockwise vertex loop.  Edge ``i`` runs
from vertex ``i-1`` to vertex ``i`` (cyclically), so vertex ``i`` joins
edges ``i`` and ``i+1`` and the tangent of an edge points toward its end
vertex.  Each vertex carries its interior angle, the rotation ``theta_i``
of the local polar frame (theta = 0 along the outgoing edge, theta =
alpha_i along the incoming edge, interior sector in between), and a
cut-off radius ``r_i`` whose disks are pairwise disjoint, stay inside the
outer domain and meet the inclusion boundary only in the two adjacent
edges.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from matplotlib.path import Path

__all__ = [
    "GeometryError",
    "SelfIntersection",
    "CollinearVertex",
    "NotInsideOuterDomain",
    "DegeneratePerturbation",
    "OuterDomain",
    "Polygon",
    "build_polygon",
    "deform",
]

TWO_PI = 2.0 * np.pi


class GeometryError(ValueError):
    pass


class SelfIntersection(GeometryError):
    pass


class CollinearVertex(GeometryError):
    pass


class NotInsideOuterDomain(GeometryError):
    pass


class DegeneratePerturbation(GeometryError):
    pass


@dataclass(frozen=True)
class OuterDomain:
    """Simply connected outer domain: unit-style disk or axis-aligned box.

    Only these two shapes are supported; both have analytic boundary
    parameterizations by arc length, which keeps boundary quadrature and
    Fourier driving currents exact.
    """

    kind: str
    center: tuple = (0.0, 0.0)
    radius: float = 1.0
    corners: tuple = ()  # (x0, y0, x1, y1) for rectangles

    @staticmethod
    def disk(radius=1.0, center=(0.0, 0.0)):
        return OuterDomain("disk", center=tuple(center), radius=float(radius))

    @staticmethod
    def rectangle(x0, y0, x1, y1):
        if not (x1 > x0 and y1 > y0):
            raise GeometryError("rectangle corners must satisfy x1 > x0, y1 > y0")
        return OuterDomain("rectangle", corners=(x0, y0, x1, y1))

    @property
    def perimeter(self):
        if self.kind == "disk":
            return TWO_PI * self.radius
        x0, y0, x1, y1 = self.corners
        return 2.0 * ((x1 - x0) + (y1 - y0))

    def contains(self, points, margin=0.0):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.kind == "disk":
            d = np.hypot(pts[:, 0] - self.center[0], pts[:, 1] - self.center[1])
            return d <= self.radius - margin
        x0, y0, x1, y1 = self.corners
        return (
            (pts[:, 0] >= x0 + margin)
            & (pts[:, 0] <= x1 - margin)
            & (pts[:, 1] >= y0 + margin)
            & (pts[:, 1] <= y1 - margin)
        )

    def distance_to_boundary(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.kind == "disk":
            d = np.hypot(pts[:, 0] - self.center[0], pts[:, 1] - self.center[1])
            return self.radius - d
        x0, y0, x1, y1 = self.corners
        return np.minimum.reduce(
            [pts[:, 0] - x0, x1 - pts[:, 0], pts[:, 1] - y0, y1 - pts[:, 1]]
        )

    def boundary_segments(self):
        """Closed boundary as parametric pieces (point_fn, t0, t1, projector).

        The disk is one periodic arc; the rectangle is four straight sides
        traversed counterclockwise.  ``projector`` snaps inserted points
        back onto the exact boundary.
        """
        if self.kind == "disk":
            cx, cy = self.center
            R = self.radius

            def arc(t):
                t = np.asarray(t, dtype=float)
                return np.stack([cx + R * np.cos(t), cy + R * np.sin(t)], axis=-1)

            def project(p):
                v = np.asarray(p, dtype=float) - np.array([cx, cy])
                return np.array([cx, cy]) + v * (R / np.hypot(v[0], v[1]))

            return [(arc, 0.0, TWO_PI, project)]
        x0, y0, x1, y1 = self.corners
        cs = [(x0, y0), (x1, y0), (x1, y1), (x0, y1)]
        segs = []
        for a, b in zip(cs, cs[1:] + cs[:1]):
            a = np.array(a)
            b = np.array(b)

            def line(t, a=a, b=b):
                t = np.asarray(t, dtype=float)[..., None]
                return a + t * (b - a)

            segs.append((line, 0.0, 1.0, None))
        return segs

    def arc_coordinate(self, points):
        """Arc length along the boundary for points lying on it."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.kind == "disk":
            ang = np.arctan2(pts[:, 1] - self.center[1], pts[:, 0] - self.center[0])
            return np.mod(ang, TWO_PI) * self.radius
        x0, y0, x1, y1 = self.corners
        w, h = x1 - x0, y1 - y0
        s = np.empty(len(pts))
        for j, (x, y) in enumerate(pts):
            if abs(y - y0) < 1e-12 * max(w, h) and x < x1:
                s[j] = x - x0
            elif abs(x - x1) < 1e-12 * max(w, h) and y < y1:
                s[j] = w + (y - y0)
            elif abs(y - y1) < 1e-12 * max(w, h):
                s[j] = w + h + (x1 - x)
            else:
                s[j] = 2 * w + h + (y1 - y)
        return s


def _segments_intersect(p1, p2, p3, p4):
    """Proper or improper intersection of segments p1p2 and p3p4."""

    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        scale = max(
            abs(b[0] - a[0]), abs(b[1] - a[1]), abs(c[0] - a[0]), abs(c[1] - a[1]), 1e-300
        )
        if abs(v) < 1e-14 * scale * scale:
            return 0
        return 1 if v > 0 else -1

    def on_seg(a, b, c):
        return (
            min(a[0], b[0]) - 1e-14 <= c[0] <= max(a[0], b[0]) + 1e-14
            and min(a[1], b[1]) - 1e-14 <= c[1] <= max(a[1], b[1]) + 1e-14
        )

    o1, o2 = orient(p1, p2, p3), orient(p1, p2, p4)
    o3, o4 = orient(p3, p4, p1), orient(p3, p4, p2)
    if o1 != o2 and o3 != o4:
        return True
    if o1 == 0 and on_seg(p1, p2, p3):
        return True
    if o2 == 0 and on_seg(p1, p2, p4):
        return True
    if o3 == 0 and on_seg(p3, p4, p1):
        return True
    if o4 == 0 and on_seg(p3, p4, p2):
        return True
    return False


def _point_segment_distance(p, a, b):
    ab = b - a
    t = np.clip(np.dot(p - a, ab) / np.dot(ab, ab), 0.0, 1.0)
    return float(np.hypot(*(p - (a + t * ab))))


class Polygon:
    """Simple counterclockwise polygon with per-vertex corner data.

    Immutable after construction; use :func:`build_polygon`.
    """

    def __init__(self, vertices, outer=None, _validated=False):
        vertices = np.asarray(vertices, dtype=float)
        if not _validated:
            raise TypeError("use build_polygon() to construct a Polygon")
        self.vertices = vertices
        self.outer = outer
        self.n = len(vertices)
        prev = np.roll(vertices, 1, axis=0)
        self.edge_vectors = vertices - prev  # edge i: vertex i-1 -> vertex i
        self.edge_lengths = np.hypot(self.edge_vectors[:, 0], self.edge_vectors[:, 1])
        self.tangents = self.edge_vectors / self.edge_lengths[:, None]
        self.normals = np.stack([self.tangents[:, 1], -self.tangents[:, 0]], axis=1)

        # interior angle at vertex i between incoming edge i and outgoing edge i+1
        to_prev = -self.tangents  # direction from vertex i back along edge i
        to_next = np.roll(self.tangents, -1, axis=0)  # direction of edge i+1
        ang_prev = np.arctan2(to_prev[:, 1], to_prev[:, 0])
        ang_next = np.arctan2(to_next[:, 1], to_next[:, 0])
        self.thetas = ang_next
        self.alphas = np.mod(ang_prev - ang_next, TWO_PI)

        self._path = Path(np.vstack([vertices, vertices[:1]]), closed=True)
        self.radii = self._cutoff_radii()

    # -- derived quantities -------------------------------------------------

    @property
    def area(self):
        x, y = self.vertices[:, 0], self.vertices[:, 1]
        return 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)

    @property
    def barycenter(self):
        return self.vertices.mean(axis=0)

    @property
    def perimeter(self):
        return float(self.edge_lengths.sum())

    def contains(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return self._path.contains_points(pts)

    def edge_point(self, edge, s):
        """Point at arc length ``s`` from the start of edge ``edge``."""
        s = np.asarray(s, dtype=float)
        start = self.vertices[edge - 1]
        return start + np.multiply.outer(s, self.tangents[edge])

    def local_polar(self, i, points):
        """Polar coordinates (r, theta) in the frame of vertex ``i``.

        theta = 0 on the outgoing edge, theta = alpha_i on the incoming
        edge; the interior sector is 0 < theta < alpha_i.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float)) - self.vertices[i]
        r = np.hypot(pts[:, 0], pts[:, 1])
        theta = np.mod(np.arctan2(pts[:, 1], pts[:, 0]) - self.thetas[i], TWO_PI)
        return r, theta

    def local_point(self, i, r, theta):
        """Inverse of :meth:`local_polar`."""
        ang = self.thetas[i] + np.asarray(theta, dtype=float)
        r = np.asarray(r, dtype=float)
        return self.vertices[i] + np.stack([r * np.cos(ang), r * np.sin(ang)], axis=-1)

    def distance_to_edges(self, points):
        """Distance from points to the polygon boundary."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.full(len(pts), np.inf)
        for e in range(self.n):
            a = self.vertices[e - 1]
            t = self.tangents[e]
            rel = pts - a
            proj = np.clip(rel @ t, 0.0, self.edge_lengths[e])
            foot = a + proj[:, None] * t
            out = np.minimum(out, np.hypot(*(pts - foot).T))
        return out

    def interior_bisector(self, i):
        ang = self.thetas[i] + 0.5 * self.alphas[i]
        return np.array([np.cos(ang), np.sin(ang)])

    # -- construction helpers ----------------------------------------------

    def _cutoff_radii(self):
        v = self.vertices
        n = self.n
        radii = np.empty(n)
        for i in range(n):
            cands = [self.edge_lengths[i], self.edge_lengths[(i + 1) % n]]
            d_verts = np.hypot(*(v - v[i]).T)
            d_verts[i] = np.inf
            cands.append(0.5 * d_verts.min())
            for e in range(n):
                if e == i or e == (i + 1) % n:
                    continue
                cands.append(_point_segment_distance(v[i], v[e - 1], v[e]))
            if self.outer is not None:
                cands.append(float(self.outer.distance_to_boundary(v[i])[0]))
            radii[i] = 0.45 * min(cands)
        return radii


def build_polygon(vertices, outer=None) -> Polygon:
    """Validate a vertex loop and compute the per-vertex corner data.

    The orientation is normalized to counterclockwise.  Rejects loops with
    fewer than three vertices, self-intersections, collinear vertices
    (interior angle pi within 1e-12) and, when ``outer`` is given,
    inclusions whose cut-off disks are not strictly inside it.
    """
    v = np.asarray(vertices, dtype=float)
    if v.ndim != 2 or v.shape[1] != 2:
        raise GeometryError("vertices must be an (n, 2) array")
    n = len(v)
    if n < 3:
        raise GeometryError("a polygon needs at least 3 vertices")
    if len(np.unique(v.round(14), axis=0)) != n:
        raise SelfIntersection("repeated vertex")

    x, y = v[:, 0], v[:, 1]
    signed_area = 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)
    if abs(signed_area) < 1e-14:
        raise SelfIntersection("degenerate (zero-area) loop")
    if signed_area < 0:
        v = v[::-1].copy()

    # simplicity: no two non-adjacent edges intersect
    for i in range(n):
        a1, a2 = v[i - 1], v[i]
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j or abs(i - j) == n - 1:
                continue
            if _segments_intersect(a1, a2, v[j - 1], v[j]):
                raise SelfIntersection(f"edges {i} and {j} intersect")

    poly = Polygon(v, outer=outer, _validated=True)
    if np.any(np.abs(poly.alphas - np.pi) <= 1e-12):
        bad = int(np.argmin(np.abs(poly.alphas - np.pi)))
        raise CollinearVertex(f"vertex {bad} has interior angle pi")
    if outer is not None:
        if not np.all(outer.contains(v)):
            raise NotInsideOuterDomain("polygon vertex outside the outer domain")
        if np.any(outer.distance_to_boundary(v) <= 1e-12):
            raise NotInsideOuterDomain("polygon touches the outer boundary")
    return poly


def deform(polygon: Polygon, h, t: float) -> Polygon:
    """Polygon with vertices moved to ``x_i + t * h(x_i)``.

    Since the perturbation is affine on each edge and continuous at the
    vertices, the deformed inclusion is again a polygon with the same
    vertex count.  Raises ``DegeneratePerturbation`` when the moved loop
    self-intersects or produces a straight (angle pi) vertex.
    """
    new_vertices = polygon.vertices + t * h.vertex_values
    try:
        return build_polygon(new_vertices, outer=polygon.outer)
    except GeometryError as exc:
        raise DegeneratePerturbation(f"t = {t}: {exc}") from exc
