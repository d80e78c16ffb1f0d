"""
Boundary perturbation fields and their domain extensions.

A perturbation field h lives on the inclusion boundary; both Cartesian
components are affine on every edge and continuous at the vertices, so h
is determined by its vertex values (the linear-spline class for which the
perturbed inclusion stays a polygon).

The extension H inflates h into a compactly supported W^{1,infty} field on
the whole domain: two buffer polygons are placed just inside and outside
the inclusion, the ring between each buffer and the inclusion boundary is
split into one convex quadrangle per edge, and on each quadrangle

    x = c(1-d) x_i + cd x_{i+1} + (1-c)(1-d) x_i' + (1-c)d x_{i+1}',
    H(x) = c * h((1-d) x_i + d x_{i+1}),

so that H = h on the inclusion boundary (c = 1) and H = 0 on the buffers
(c = 0) and beyond.  The map h -> H is linear, with a realized bound
``|H|_{W^{1,inf}} <= C * |h|_{W^{1,inf}}`` reported from dense sampling.
"""

from __future__ import annotations

import numpy as np
from matplotlib.path import Path

from .polygon import GeometryError, Polygon

__all__ = [
    "PerturbationField",
    "ExtensionGeometry",
    "ExtensionField",
    "NonconvexQuadrangle",
    "ClearanceTooSmall",
    "extend_field",
    "vertex_motion",
    "coordinate_motion",
    "dilation",
    "edge_normal",
]


class NonconvexQuadrangle(GeometryError):
    pass


class ClearanceTooSmall(GeometryError):
    pass


class PerturbationField:
    """Linear-spline vector field on the inclusion boundary."""

    def __init__(self, polygon: Polygon, vertex_values):
        vertex_values = np.asarray(vertex_values, dtype=float)
        if vertex_values.shape != (polygon.n, 2):
            raise ValueError("vertex_values must have shape (n, 2)")
        self.polygon = polygon
        self.vertex_values = vertex_values

    def __add__(self, other):
        return PerturbationField(self.polygon, self.vertex_values + other.vertex_values)

    def __sub__(self, other):
        return PerturbationField(self.polygon, self.vertex_values - other.vertex_values)

    def __mul__(self, a):
        return PerturbationField(self.polygon, a * self.vertex_values)

    __rmul__ = __mul__

    def on_edge(self, edge, s):
        """Vector values at arc length(s) ``s`` along edge ``edge``."""
        s = np.asarray(s, dtype=float)
        frac = s / self.polygon.edge_lengths[edge]
        a = self.vertex_values[edge - 1]
        b = self.vertex_values[edge % self.polygon.n]
        return a + np.multiply.outer(frac, b - a)

    def h_dot_nu(self, edge, s):
        """Normal component h.nu along edge ``edge`` (affine in s)."""
        nu = self.polygon.normals[edge]
        return self.on_edge(edge, s) @ nu

    @property
    def vertex_limits(self):
        """(h_i^-, h_i^+): one-sided normal limits at each vertex.

        h_i^- is the limit of h.nu along the incoming edge i, h_i^+ along
        the outgoing edge i+1.
        """
        n = self.polygon.n
        hv = self.vertex_values
        h_minus = np.einsum("ij,ij->i", hv, self.polygon.normals)
        h_plus = np.einsum("ij,ij->i", hv, np.roll(self.polygon.normals, -1, axis=0))
        return h_minus, h_plus

    @property
    def norm_w1inf(self):
        """max over edges of sup|h| + sup|dh/dtau| (Euclidean norms)."""
        hv = self.vertex_values
        n = self.polygon.n
        worst = 0.0
        for e in range(n):
            a, b = hv[e - 1], hv[e % n]
            sup = max(np.hypot(*a), np.hypot(*b))
            slope = np.hypot(*(b - a)) / self.polygon.edge_lengths[e]
            worst = max(worst, sup + slope)
        return worst


# -- presets -----------------------------------------------------------------


def vertex_motion(polygon, vertex, direction):
    """Move one vertex along ``direction``; affine taper on adjacent edges."""
    vals = np.zeros((polygon.n, 2))
    vals[vertex] = np.asarray(direction, dtype=float)
    return PerturbationField(polygon, vals)


def coordinate_motion(polygon, vertex, axis):
    """Unit motion of a single vertex coordinate (Jacobian basis field)."""
    vals = np.zeros((polygon.n, 2))
    vals[vertex, axis] = 1.0
    return PerturbationField(polygon, vals)


def dilation(polygon, center=None):
    """h(x) = x - center (uniform scaling field about the barycenter)."""
    c = polygon.barycenter if center is None else np.asarray(center, dtype=float)
    return PerturbationField(polygon, polygon.vertices - c)


def edge_normal(polygon, edge):
    """Outward normal of one edge, tapering linearly on the two neighbours."""
    vals = np.zeros((polygon.n, 2))
    nu = polygon.normals[edge]
    vals[edge - 1] = nu
    vals[edge % polygon.n] = nu
    return PerturbationField(polygon, vals)


# -- extension geometry --------------------------------------------------------


def _quad_is_convex(quad):
    q = np.asarray(quad)
    crosses = []
    for i in range(4):
        a = q[(i + 1) % 4] - q[i]
        b = q[(i + 2) % 4] - q[(i + 1) % 4]
        crosses.append(a[0] * b[1] - a[1] * b[0])
    crosses = np.asarray(crosses)
    return np.all(crosses > 0) or np.all(crosses < 0)


class ExtensionGeometry:
    """Buffer polygons and convex quadrangle rings around the inclusion.

    Depends only on the inclusion and the outer domain, so it is shared by
    every perturbation field on the same polygon (the convex coordinates
    of any evaluation point are field-independent).
    """

    def __init__(self, polygon: Polygon, buffer_fraction=0.4, _retries=3):
        self.polygon = polygon
        n = polygon.n
        frac = buffer_fraction
        for attempt in range(_retries + 1):
            offsets = frac * polygon.radii
            if np.any(offsets <= 1e-14):
                raise ClearanceTooSmall("vanishing corner clearance")
            bis = np.array([polygon.interior_bisector(i) for i in range(n)])
            inner = polygon.vertices + offsets[:, None] * bis
            outer_v = polygon.vertices - offsets[:, None] * bis
            if self._rings_valid(polygon, inner, outer_v):
                break
            frac *= 0.6
        else:
            raise NonconvexQuadrangle(
                "could not build convex buffer quadrangles (after shrink retries)"
            )
        self.buffer_fraction = frac
        self.inner_vertices = inner
        self.outer_vertices = outer_v
        self._path_inner = Path(np.vstack([inner, inner[:1]]), closed=True)
        self._path_outer = Path(np.vstack([outer_v, outer_v[:1]]), closed=True)
        self._path_poly = polygon._path

    @staticmethod
    def _rings_valid(polygon, inner, outer_v):
        n = polygon.n
        for e in range(n):
            i0, i1 = (e - 1) % n, e
            quad_in = [polygon.vertices[i0], polygon.vertices[i1], inner[i1], inner[i0]]
            quad_out = [polygon.vertices[i0], polygon.vertices[i1], outer_v[i1], outer_v[i0]]
            if not (_quad_is_convex(quad_in) and _quad_is_convex(quad_out)):
                return False
        if polygon.outer is not None:
            if not np.all(polygon.outer.contains(outer_v)):
                return False
        return np.all(polygon.contains(inner))

    def constraint_polylines(self):
        """Buffer edges and vertex connectors, for mesh conformity."""
        n = self.polygon.n
        lines = []
        for ring in (self.inner_vertices, self.outer_vertices):
            for e in range(n):
                lines.append(np.array([ring[e - 1], ring[e]]))
        for i in range(n):
            lines.append(np.array([self.polygon.vertices[i], self.inner_vertices[i]]))
            lines.append(np.array([self.polygon.vertices[i], self.outer_vertices[i]]))
        return lines

    def _ring_corners(self, edge, side):
        """Quadrangle corners (x_i, x_{i+1}, x_i', x_{i+1}') for an edge."""
        n = self.polygon.n
        i0, i1 = (edge - 1) % n, edge % n
        ring = self.inner_vertices if side == "in" else self.outer_vertices
        return (
            self.polygon.vertices[i0],
            self.polygon.vertices[i1],
            ring[i0],
            ring[i1],
        )

    def locate(self, points):
        """Convex coordinates of points inside the quadrangle rings.

        Returns (side, edge, c, d, grad_c, grad_d) arrays; ``side`` is +1
        in the inner ring, -1 in the outer ring and 0 where the extension
        vanishes (inside the inner buffer or beyond the outer one).
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        m = len(pts)
        side = np.zeros(m, dtype=np.int8)
        in_poly = self._path_poly.contains_points(pts, radius=-1e-13)
        in_inner = self._path_inner.contains_points(pts, radius=-1e-13)
        in_outer = self._path_outer.contains_points(pts, radius=1e-13)
        side[in_poly & ~in_inner] = 1
        side[~in_poly & in_outer] = -1

        edge = np.full(m, -1, dtype=int)
        c = np.zeros(m)
        d = np.zeros(m)
        grad_c = np.zeros((m, 2))
        grad_d = np.zeros((m, 2))
        n = self.polygon.n
        for sgn, ring_name in ((1, "in"), (-1, "out")):
            sel = np.flatnonzero(side == sgn)
            if len(sel) == 0:
                continue
            remaining = sel.copy()
            for e in range(n):
                if len(remaining) == 0:
                    break
                q = self._ring_corners(e, ring_name)
                quad_path = Path([q[0], q[1], q[3], q[2], q[0]], closed=True)
                hit = quad_path.contains_points(pts[remaining], radius=1e-12)
                take = remaining[hit]
                if len(take) == 0:
                    continue
                cc, dd, gc, gd = _inverse_bilinear(pts[take], *q)
                edge[take] = e
                c[take], d[take] = cc, dd
                grad_c[take], grad_d[take] = gc, gd
                remaining = remaining[~hit]
            if len(remaining):
                # boundary-roundoff points: assign to the nearest edge quad
                for idx in remaining:
                    best, bdist = 0, np.inf
                    for e in range(n):
                        q = self._ring_corners(e, ring_name)
                        mid = 0.25 * (q[0] + q[1] + q[2] + q[3])
                        dd2 = np.hypot(*(pts[idx] - mid))
                        if dd2 < bdist:
                            best, bdist = e, dd2
                    q = self._ring_corners(best, ring_name)
                    cc, dd, gc, gd = _inverse_bilinear(pts[idx][None, :], *q)
                    edge[idx] = best
                    c[idx], d[idx] = cc[0], dd[0]
                    grad_c[idx], grad_d[idx] = gc[0], gd[0]
        return side, edge, c, d, grad_c, grad_d


def _inverse_bilinear(pts, x0, x1, y0, y1):
    """Invert x = c(1-d)x0 + cd x1 + (1-c)(1-d)y0 + (1-c)d y1 by Newton.

    Quadrangles are convex by construction, so a fixed iteration from the
    center converges; coordinates are clipped to [0, 1] at the end.
    """
    m = len(pts)
    c = np.full(m, 0.5)
    d = np.full(m, 0.5)
    for _ in range(25):
        omc, omd = 1.0 - c, 1.0 - d
        pos = (
            (c * omd)[:, None] * x0
            + (c * d)[:, None] * x1
            + (omc * omd)[:, None] * y0
            + (omc * d)[:, None] * y1
        )
        res = pos - pts
        dxdc = omd[:, None] * (x0 - y0) + d[:, None] * (x1 - y1)
        dxdd = c[:, None] * (x1 - x0) + omc[:, None] * (y1 - y0)
        det = dxdc[:, 0] * dxdd[:, 1] - dxdc[:, 1] * dxdd[:, 0]
        det = np.where(np.abs(det) < 1e-300, 1e-300, det)
        dc = (res[:, 0] * dxdd[:, 1] - res[:, 1] * dxdd[:, 0]) / det
        dd = (dxdc[:, 0] * res[:, 1] - dxdc[:, 1] * res[:, 0]) / det
        c = np.clip(c - dc, -0.25, 1.25)
        d = np.clip(d - dd, -0.25, 1.25)
        if max(np.abs(dc).max(initial=0.0), np.abs(dd).max(initial=0.0)) < 1e-15:
            break
    c = np.clip(c, 0.0, 1.0)
    d = np.clip(d, 0.0, 1.0)
    omc, omd = 1.0 - c, 1.0 - d
    dxdc = omd[:, None] * (x0 - y0) + d[:, None] * (x1 - y1)
    dxdd = c[:, None] * (x1 - x0) + omc[:, None] * (y1 - y0)
    det = (dxdc[:, 0] * dxdd[:, 1] - dxdc[:, 1] * dxdd[:, 0])[:, None]
    grad_c = np.stack([dxdd[:, 1], -dxdd[:, 0]], axis=1) / det
    grad_d = np.stack([-dxdc[:, 1], dxdc[:, 0]], axis=1) / det
    return c, d, grad_c, grad_d


class ExtensionField:
    """Compactly supported extension H of a boundary perturbation field."""

    def __init__(self, geometry: ExtensionGeometry, h: PerturbationField, samples=64):
        if h.polygon is not geometry.polygon:
            raise ValueError("perturbation field and geometry refer to different polygons")
        self.geometry = geometry
        self.h = h
        self._norm, self._sup_value, self._sup_jacobian = self._sampled_norms(samples)

    # -- evaluation ---------------------------------------------------------

    def _edge_values(self, edge, d):
        n = self.geometry.polygon.n
        a = self.h.vertex_values[(edge - 1) % n]
        b = self.h.vertex_values[edge % n]
        return a + d[:, None] * (b - a), (b - a)

    def evaluate(self, points, located=None):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        side, edge, c, d, _, _ = located if located is not None else self.geometry.locate(pts)
        out = np.zeros_like(pts)
        act = side != 0
        if np.any(act):
            hvals = np.zeros_like(pts)
            for e in np.unique(edge[act]):
                sel = act & (edge == e)
                hvals[sel] = self._edge_values(e, d[sel])[0]
            out[act] = c[act, None] * hvals[act]
        return out

    def jacobian(self, points, located=None):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        side, edge, c, d, gc, gd = (
            located if located is not None else self.geometry.locate(pts)
        )
        out = np.zeros((len(pts), 2, 2))
        act = side != 0
        if np.any(act):
            for e in np.unique(edge[act]):
                sel = act & (edge == e)
                hv, dh = self._edge_values(e, d[sel])
                out[sel] = hv[:, :, None] * gc[sel][:, None, :] + (
                    c[sel, None, None] * dh[None, :, None] * gd[sel][:, None, :]
                )
        return out

    # -- norms ----------------------------------------------------------------

    def _sampled_norms(self, samples):
        g = self.geometry
        n = g.polygon.n
        u = (np.arange(samples) + 0.5) / samples
        cc, dd = np.meshgrid(u, u)
        cc, dd = cc.ravel(), dd.ravel()
        sup_v = 0.0
        sup_j = 0.0
        for ring in ("in", "out"):
            for e in range(n):
                x0, x1, y0, y1 = g._ring_corners(e, ring)
                pts = (
                    (cc * (1 - dd))[:, None] * x0
                    + (cc * dd)[:, None] * x1
                    + ((1 - cc) * (1 - dd))[:, None] * y0
                    + ((1 - cc) * dd)[:, None] * y1
                )
                loc = g.locate(pts)
                H = self.evaluate(pts, located=loc)
                DH = self.jacobian(pts, located=loc)
                sup_v = max(sup_v, np.hypot(H[:, 0], H[:, 1]).max(initial=0.0))
                sup_j = max(sup_j, np.linalg.norm(DH, ord=2, axis=(1, 2)).max(initial=0.0))
        return max(sup_v, sup_j), sup_v, sup_j

    @property
    def norm_w1inf(self):
        return self._norm

    @property
    def extension_constant(self):
        """Realized C with |H|_{W^{1,inf}} <= C |h|_{W^{1,inf}} (C >= 1)."""
        hn = self.h.norm_w1inf
        if hn == 0.0:
            return 1.0
        return max(1.0, self._norm / hn)


def extend_field(h: PerturbationField, polygon=None, geometry=None) -> ExtensionField:
    """Extend a boundary field into the quadrangle rings (zero elsewhere)."""
    if geometry is None:
        geometry = ExtensionGeometry(h.polygon if polygon is None else polygon)
    return ExtensionField(geometry, h)
