"""
Interface-conforming, corner-graded triangulations.

The generator places points deterministically (boundary subdivisions whose
local density follows a corner-graded spacing field, radial point fans
around every polygon vertex, and a hexagonal background lattice filtered
by a KD-tree clearance test), triangulates them with Delaunay, and then
repairs conformity by midpoint insertion until every constraint segment
(inclusion edges, outer boundary, optional extra polylines) is a union of
mesh edges.  Near each vertex the edge lengths shrink geometrically with
the requested grading ratio down to ``hmax * grading**levels``.

Interface nodes can be duplicated into plus/minus twins so transmission
solves can impose value jumps as affine constraints between twin
unknowns; the twin carries the interior (minus) side.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import Delaunay, cKDTree

from .polygon import GeometryError, OuterDomain, Polygon

__all__ = ["Mesh", "MeshFailure", "generate_mesh", "write_mesh", "read_mesh"]


class MeshFailure(GeometryError):
    pass


def _spacing_field(polygon, hmax, grading, levels):
    corners = polygon.vertices
    delta = hmax * grading**levels

    def spacing(pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        s = np.full(len(pts), hmax)
        if grading < 1.0:
            for c in corners:
                r = np.hypot(pts[:, 0] - c[0], pts[:, 1] - c[1])
                s = np.minimum(s, np.clip(r * (1.0 - grading), delta, hmax))
        return s

    return spacing, delta


def _subdivide(point_fn, t0, t1, spacing, nsample=2048):
    """Parameter breakpoints so arc steps track the spacing field."""
    t = np.linspace(t0, t1, nsample)
    pts = point_fn(t)
    dv = np.diff(pts, axis=0)
    seglen = np.hypot(dv[:, 0], dv[:, 1])
    mids = 0.5 * (pts[1:] + pts[:-1])
    dens = seglen / spacing(mids)
    W = np.concatenate([[0.0], np.cumsum(dens)])
    M = max(1, int(round(W[-1])))
    targets = W[-1] * np.arange(M + 1) / M
    return np.interp(targets, W, t)


class _NodePool:
    """Append-only node store with exact-coordinate deduplication."""

    def __init__(self):
        self.coords = []
        self._index = {}

    def add(self, p):
        key = (round(float(p[0]), 12), round(float(p[1]), 12))
        idx = self._index.get(key)
        if idx is None:
            idx = len(self.coords)
            self.coords.append((float(p[0]), float(p[1])))
            self._index[key] = idx
        return idx

    def array(self):
        return np.asarray(self.coords, dtype=float)


def _fan_points(polygon, geometry_rays, hmax, grading, delta, spacing, outer):
    """Graded radial rings around each vertex, between constraint rays."""
    if grading >= 1.0:
        return np.zeros((0, 2)), 0.0
    r_fan = hmax / (1.0 - grading)
    pts = []
    for i in range(polygon.n):
        rays = np.sort(np.asarray(geometry_rays[i]))
        rho = delta
        radii = []
        while rho < r_fan:
            radii.append(rho)
            rho += float(np.clip(rho * (1.0 - grading), delta, hmax))
        for rho in radii:
            sval = float(np.clip(rho * (1.0 - grading), delta, hmax))
            bounds = np.concatenate([rays, [rays[0] + 2 * np.pi]])
            for a, b in zip(bounds[:-1], bounds[1:]):
                arc = (b - a) * rho
                m = max(1, int(round(arc / sval)))
                th = a + (b - a) * np.arange(1, m) / m
                if len(th):
                    pts.append(polygon.local_point(i, np.full(len(th), rho), th))
    if not pts:
        return np.zeros((0, 2)), r_fan
    pts = np.vstack(pts)
    keep = outer.contains(pts, margin=0.35 * hmax)
    return pts[keep], r_fan


def _hex_lattice(outer, hmax, seed):
    if outer.kind == "disk":
        cx, cy = outer.center
        R = outer.radius
        xmin, xmax, ymin, ymax = cx - R, cx + R, cy - R, cy + R
    else:
        xmin, ymin, xmax, ymax = outer.corners
    a = hmax
    phi = 0.0 if seed == 0 else (seed * 0.7548776662466927) % (np.pi / 3)
    ox = (seed * 0.381966) % 1.0 * a
    oy = (seed * 0.618034) % 1.0 * a
    pad = 2 * a
    ny = int(np.ceil((ymax - ymin + 2 * pad) / (a * np.sqrt(3) / 2))) + 1
    nx = int(np.ceil((xmax - xmin + 2 * pad) / a)) + 1
    jj, ii = np.meshgrid(np.arange(ny), np.arange(nx), indexing="ij")
    xs = xmin - pad + ii * a + (jj % 2) * a / 2 + ox
    ys = ymin - pad + jj * (a * np.sqrt(3) / 2) + oy
    pts = np.stack([xs.ravel(), ys.ravel()], axis=1)
    if phi:
        c0 = np.array([(xmin + xmax) / 2, (ymin + ymax) / 2])
        rot = np.array([[np.cos(phi), -np.sin(phi)], [np.sin(phi), np.cos(phi)]])
        pts = (pts - c0) @ rot.T + c0
    return pts


def _triangle_min_angles(nodes, tris):
    p = nodes[tris]
    a = np.hypot(*(p[:, 1] - p[:, 2]).T)
    b = np.hypot(*(p[:, 2] - p[:, 0]).T)
    c = np.hypot(*(p[:, 0] - p[:, 1]).T)
    angles = []
    for x, y, z in ((a, b, c), (b, c, a), (c, a, b)):
        cosv = np.clip((y**2 + z**2 - x**2) / (2 * y * z), -1.0, 1.0)
        angles.append(np.arccos(cosv))
    return np.min(angles, axis=0)


def generate_mesh(
    polygon: Polygon,
    outer: OuterDomain,
    hmax: float,
    grading: float = 0.5,
    levels: int = 6,
    duplicate_interface: bool = False,
    constraints=(),
    seed: int = 0,
    min_angle_deg: float = 20.0,
    smooth_passes: int = 2,
) -> "Mesh":
    """Conforming graded triangulation of the outer domain minus nothing.

    ``constraints`` is an optional list of extra polylines (arrays of
    points) the mesh must also conform to, e.g. extension buffer edges.
    """
    if hmax <= 0:
        raise MeshFailure("hmax must be positive")
    if not (0 < grading <= 1.0):
        raise MeshFailure("grading ratio must be in (0, 1]")
    spacing, delta = _spacing_field(polygon, hmax, grading, levels)
    pool = _NodePool()
    chains = []  # (node id list, closed, projector, tag)

    # outer boundary
    boundary_chain = []
    for point_fn, t0, t1, projector in outer.boundary_segments():
        ts = _subdivide(point_fn, t0, t1, spacing)
        pts = point_fn(ts)
        ids = [pool.add(p) for p in pts[:-1]]
        boundary_chain.extend(ids)
    chains.append((boundary_chain, True, outer, "outer"))

    # inclusion edges
    corner_ids = [pool.add(p) for p in polygon.vertices]
    interface_chain_idx = []
    for e in range(polygon.n):
        a = polygon.vertices[e - 1]
        b = polygon.vertices[e]

        def line(t, a=a, b=b):
            return a + np.asarray(t, dtype=float)[..., None] * (b - a)

        ts = _subdivide(line, 0.0, 1.0, spacing)
        ids = [corner_ids[e - 1]]
        ids += [pool.add(p) for p in line(ts[1:-1])]
        ids.append(corner_ids[e % polygon.n])
        interface_chain_idx.append(len(chains))
        chains.append((ids, False, None, ("interface", e)))

    # extra constraint polylines
    for line_pts in constraints:
        line_pts = np.asarray(line_pts, dtype=float)
        for k in range(len(line_pts) - 1):
            a, b = line_pts[k], line_pts[k + 1]

            def line(t, a=a, b=b):
                return a + np.asarray(t, dtype=float)[..., None] * (b - a)

            ts = _subdivide(line, 0.0, 1.0, spacing)
            ids = [pool.add(p) for p in line(ts)]
            chains.append((ids, False, None, "constraint"))

    structured = pool.array()
    n_structured = len(structured)

    # constraint rays per vertex steer the fan sectors
    rays = []
    for i in range(polygon.n):
        r = [0.0, polygon.alphas[i]]
        vi = polygon.vertices[i]
        for line_pts in constraints:
            line_pts = np.asarray(line_pts, dtype=float)
            for k in range(len(line_pts) - 1):
                for p, q in ((line_pts[k], line_pts[k + 1]), (line_pts[k + 1], line_pts[k])):
                    if np.hypot(*(p - vi)) < 1e-12:
                        _, th = polygon.local_polar(i, q[None, :])
                        r.append(float(th[0]))
        rays.append(sorted(set(np.round(r, 12))))

    fan_pts, r_fan = _fan_points(polygon, rays, hmax, grading, delta, spacing, outer)

    # clearance filter: structured nodes plus phantom segment midpoints
    phantom = []
    for ids, closed, _, _ in chains:
        seq = ids + [ids[0]] if closed else ids
        arr = structured[np.asarray(seq)]
        phantom.append(0.5 * (arr[1:] + arr[:-1]))
    filter_pts = np.vstack([structured] + phantom)
    tree = cKDTree(filter_pts)

    accepted = [structured]
    if len(fan_pts):
        d, _ = tree.query(fan_pts)
        keep = d >= 0.62 * spacing(fan_pts)
        fan_pts = fan_pts[keep]
        # fans may self-collide where two corners interact
        if len(fan_pts):
            ftree = cKDTree(fan_pts)
            pairs = ftree.query_pairs(r=float(np.max(spacing(fan_pts))), output_type="ndarray")
            drop = np.zeros(len(fan_pts), dtype=bool)
            if len(pairs):
                smid = 0.55 * np.minimum(
                    spacing(fan_pts[pairs[:, 0]]), spacing(fan_pts[pairs[:, 1]])
                )
                dd = np.hypot(*(fan_pts[pairs[:, 0]] - fan_pts[pairs[:, 1]]).T)
                for (ia, ib), too_close in zip(pairs, dd < smid):
                    if too_close and not drop[ia]:
                        drop[ib] = True
            fan_pts = fan_pts[~drop]
        accepted.append(fan_pts)

    lattice = _hex_lattice(outer, hmax, seed)
    inside = outer.contains(lattice, margin=0.62 * hmax)
    lattice = lattice[inside]
    s_lat = spacing(lattice)
    lattice = lattice[s_lat >= 0.55 * hmax]
    all_struct = np.vstack(accepted)
    tree2 = cKDTree(np.vstack([filter_pts] + ([fan_pts] if len(fan_pts) else [])))
    d, _ = tree2.query(lattice)
    lattice = lattice[d >= 0.74 * spacing(lattice)]
    accepted.append(lattice)

    for ids in accepted[1:]:
        for p in ids:
            pool.add(p)
    nodes = pool.array()
    movable = np.zeros(len(nodes), dtype=bool)
    movable[n_structured + len(fan_pts):] = True

    tris = None
    for attempt in range(smooth_passes + 1):
        nodes, tris, chains = _triangulate_conforming(nodes, chains)
        if attempt == len(range(smooth_passes + 1)) - 1:
            break
        movable2 = np.zeros(len(nodes), dtype=bool)
        movable2[: len(movable)] = movable
        moved = _smooth_lattice(nodes, tris, movable2, polygon, r_fan, min_angle_deg)
        if not moved:
            break
        movable = movable2

    bary = nodes[tris].mean(axis=1)
    region = polygon.contains(bary).astype(np.int8)

    mesh = Mesh(
        nodes=nodes,
        triangles=tris,
        tri_region=region,
        polygon=polygon,
        outer=outer,
        boundary_loop=np.asarray(chains[0][0], dtype=int),
        interface_chains=[np.asarray(chains[i][0], dtype=int) for i in interface_chain_idx],
        corner_nodes=np.asarray(corner_ids, dtype=int),
        fan_radius=r_fan,
        hmax=hmax,
        grading=grading,
        levels=levels,
    )
    minang = np.degrees(mesh.quality_min_angle(exclude_fans=True))
    if minang < min_angle_deg - 8.0:
        raise MeshFailure(
            f"triangle quality unattainable at hmax={hmax}: min angle {minang:.1f} deg"
        )
    if duplicate_interface:
        mesh._duplicate_interface()
    return mesh


def _triangulate_conforming(nodes, chains, max_rounds=8):
    """Delaunay plus midpoint-insertion repair of constraint segments."""
    nodes = np.asarray(nodes, dtype=float)
    chains = [(list(ids), closed, proj, tag) for ids, closed, proj, tag in chains]
    for _ in range(max_rounds):
        tri = Delaunay(nodes)
        simplices = tri.simplices
        edge_set = set()
        for k in range(3):
            a = simplices[:, k]
            b = simplices[:, (k + 1) % 3]
            edge_set.update(zip(np.minimum(a, b).tolist(), np.maximum(a, b).tolist()))
        new_pts = []
        any_missing = False
        for ci, (ids, closed, proj, tag) in enumerate(chains):
            seq = ids + [ids[0]] if closed else ids
            out = [ids[0]]
            for a, b in zip(seq[:-1], seq[1:]):
                key = (min(a, b), max(a, b))
                if key not in edge_set:
                    any_missing = True
                    p = 0.5 * (nodes[a] + nodes[b])
                    if isinstance(proj, OuterDomain):
                        segs = proj.boundary_segments()
                        if proj.kind == "disk":
                            p = segs[0][3](p)
                    elif callable(proj):
                        p = proj(p)
                    new_id = len(nodes) + len(new_pts)
                    new_pts.append(p)
                    out.append(new_id)
                out.append(b)
            if closed:
                out = out[:-1]
            chains[ci] = (out, closed, proj, tag)
        if not any_missing:
            # normalize orientation to counterclockwise
            p = nodes[simplices]
            det = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (
                p[:, 1, 1] - p[:, 0, 1]
            ) * (p[:, 2, 0] - p[:, 0, 0])
            flip = det < 0
            simplices = simplices.copy()
            simplices[flip, 1], simplices[flip, 2] = simplices[flip, 2], simplices[flip, 1]
            return nodes, simplices, chains
        nodes = np.vstack([nodes] + [np.asarray(p)[None, :] for p in new_pts])
    raise MeshFailure("constraint conformity not reached after midpoint insertion")


def _smooth_lattice(nodes, tris, movable, polygon, r_fan, min_angle_deg):
    """Laplacian nudge of lattice nodes in badly shaped triangles."""
    minang = np.degrees(_triangle_min_angles(nodes, tris))
    fan_mask = np.zeros(len(tris), dtype=bool)
    bary = nodes[tris].mean(axis=1)
    for c in polygon.vertices:
        fan_mask |= np.hypot(bary[:, 0] - c[0], bary[:, 1] - c[1]) < 1.2 * r_fan
    bad = (minang < min_angle_deg + 5.0) & ~fan_mask
    if not np.any(bad):
        return False
    target = np.unique(tris[bad].ravel())
    target = target[movable[target]]
    if len(target) == 0:
        return False
    neigh = {int(t): set() for t in target}
    tset = set(int(t) for t in target)
    for t in tris:
        for k in range(3):
            a, b = int(t[k]), int(t[(k + 1) % 3])
            if a in tset:
                neigh[a].add(b)
            if b in tset:
                neigh[b].add(a)
    for nid in sorted(tset):
        nbrs = np.asarray(sorted(neigh[nid]), dtype=int)
        if len(nbrs) >= 3:
            nodes[nid] = nodes[nbrs].mean(axis=0)
    return True


class Mesh:
    """Triangulation with region tags, interface/boundary structures.

    ``triangles`` always refers to geometric node indices.  When the
    interface is duplicated, ``tri_dofs`` remaps the interior triangles'
    interface vertices to twin unknowns and ``twin_pairs`` lists
    (plus_dof, minus_dof) per interface node.
    """

    def __init__(
        self,
        nodes,
        triangles,
        tri_region,
        polygon,
        outer,
        boundary_loop,
        interface_chains,
        corner_nodes,
        fan_radius,
        hmax,
        grading,
        levels,
    ):
        self.nodes = nodes
        self.triangles = triangles
        self.tri_region = tri_region
        self.polygon = polygon
        self.outer = outer
        self.boundary_loop = boundary_loop
        self.interface_chains = interface_chains
        self.corner_nodes = corner_nodes
        self.fan_radius = fan_radius
        self.hmax = hmax
        self.grading = grading
        self.levels = levels

        self.duplicated = False
        self.tri_dofs = triangles
        self.n_dofs = len(nodes)
        self.twin_pairs = np.zeros((0, 2), dtype=int)
        self.twin_of = {}

        self._cache = {}

    # -- duplication ---------------------------------------------------------

    def _duplicate_interface(self):
        iface_nodes = np.unique(np.concatenate(self.interface_chains))
        twin = {}
        nxt = len(self.nodes)
        for nid in iface_nodes.tolist():
            twin[nid] = nxt
            nxt += 1
        tri_dofs = self.triangles.copy()
        inside = self.tri_region == 1
        remap = np.arange(len(self.nodes) + len(iface_nodes))
        for nid, t in twin.items():
            remap[nid] = t
        tri_dofs[inside] = remap[tri_dofs[inside]]
        self.duplicated = True
        self.tri_dofs = tri_dofs
        self.n_dofs = len(self.nodes) + len(iface_nodes)
        self.twin_of = twin
        self.twin_pairs = np.array([[nid, twin[nid]] for nid in iface_nodes], dtype=int)

    def dof_coordinates(self):
        if not self.duplicated:
            return self.nodes
        extra = self.nodes[self.twin_pairs[:, 0]]
        return np.vstack([self.nodes, extra])

    # -- geometric precomputations --------------------------------------------

    def _cached(self, key, fn):
        if key not in self._cache:
            self._cache[key] = fn()
        return self._cache[key]

    @property
    def tri_areas(self):
        def build():
            p = self.nodes[self.triangles]
            return 0.5 * (
                (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0])
            )

        return self._cached("areas", build)

    @property
    def tri_grads(self):
        """Gradients of the three P1 basis functions per triangle, (M,3,2)."""

        def build():
            p = self.nodes[self.triangles]
            area2 = 2.0 * self.tri_areas
            g = np.empty((len(self.triangles), 3, 2))
            for k in range(3):
                opp1 = p[:, (k + 1) % 3]
                opp2 = p[:, (k + 2) % 3]
                g[:, k, 0] = (opp1[:, 1] - opp2[:, 1]) / area2
                g[:, k, 1] = (opp2[:, 0] - opp1[:, 0]) / area2
            return g

        return self._cached("grads", build)

    @property
    def boundary_edges(self):
        def build():
            loop = self.boundary_loop
            pairs = np.stack([loop, np.roll(loop, -1)], axis=1)
            return pairs

        return self._cached("bedges", build)

    @property
    def boundary_edge_lengths(self):
        def build():
            e = self.boundary_edges
            d = self.nodes[e[:, 1]] - self.nodes[e[:, 0]]
            return np.hypot(d[:, 0], d[:, 1])

        return self._cached("belens", build)

    @property
    def boundary_arc(self):
        """Arc-length coordinate of each boundary-loop node."""

        def build():
            return self.outer.arc_coordinate(self.nodes[self.boundary_loop])

        return self._cached("barc", build)

    @property
    def interface_edges(self):
        """Records per interface sub-edge, ordered along the boundary.

        Each record: (node_a, node_b, parent_edge, s_a, s_b) with s the
        arc length from the parent edge start vertex.
        """

        def build():
            recs = []
            for e, chain in enumerate(self.interface_chains):
                start = self.polygon.vertices[e - 1]
                rel = self.nodes[chain] - start
                s = rel @ self.polygon.tangents[e]
                for k in range(len(chain) - 1):
                    recs.append((chain[k], chain[k + 1], e, s[k], s[k + 1]))
            return recs

        return self._cached("iedges", build)

    @property
    def interface_edge_tris(self):
        """(minus_tri, plus_tri) adjacent triangle per interface sub-edge."""

        def build():
            edge_map = {}
            for t, tri in enumerate(self.triangles):
                for k in range(3):
                    a, b = tri[k], tri[(k + 1) % 3]
                    edge_map.setdefault((min(a, b), max(a, b)), []).append(t)
            out = []
            for a, b, _, _, _ in self.interface_edges:
                ts = edge_map[(min(a, b), max(a, b))]
                minus = [t for t in ts if self.tri_region[t] == 1]
                plus = [t for t in ts if self.tri_region[t] == 0]
                if len(minus) != 1 or len(plus) != 1:
                    raise MeshFailure("interface edge without a triangle on each side")
                out.append((minus[0], plus[0]))
            return out

        return self._cached("iedgetris", build)

    def quality_min_angle(self, exclude_fans=False):
        ang = _triangle_min_angles(self.nodes, self.triangles)
        if not exclude_fans and len(ang):
            return float(ang.min())
        bary = self.nodes[self.triangles].mean(axis=1)
        mask = np.ones(len(ang), dtype=bool)
        for c in self.polygon.vertices:
            mask &= np.hypot(bary[:, 0] - c[0], bary[:, 1] - c[1]) >= 1.2 * max(
                self.fan_radius, 1e-30
            )
        return float(ang[mask].min()) if np.any(mask) else float(ang.min())

    # -- field evaluation ------------------------------------------------------

    @property
    def _mpl_tri(self):
        def build():
            import matplotlib.tri as mtri

            return mtri.Triangulation(self.nodes[:, 0], self.nodes[:, 1], self.triangles)

        return self._cached("mpltri", build)

    def interpolate(self, node_values, points, region=None):
        """Linear interpolation of nodal values at points.

        ``region`` restricts evaluation to triangles of one region (useful
        for one-sided values of duplicated fields); points outside give
        NaN.
        """
        import matplotlib.tri as mtri

        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if region is None:
            interp = mtri.LinearTriInterpolator(self._mpl_tri, node_values)
            out = interp(pts[:, 0], pts[:, 1])
            return np.asarray(out.filled(np.nan))
        key = f"mpltri_region{region}"

        def build():
            import matplotlib.tri as mtri

            tris = self.triangles[self.tri_region == region]
            return mtri.Triangulation(self.nodes[:, 0], self.nodes[:, 1], tris)

        tri = self._cached(key, build)
        interp = mtri.LinearTriInterpolator(tri, node_values)
        out = interp(pts[:, 0], pts[:, 1])
        return np.asarray(out.filled(np.nan))

    def geometric_values(self, dof_values, side="plus"):
        """Map dof values to geometric nodes, choosing a side at the interface."""
        vals = np.asarray(dof_values, dtype=float)
        if not self.duplicated:
            return vals
        out = vals[: len(self.nodes)].copy()
        if side == "minus":
            out[self.twin_pairs[:, 0]] = vals[self.twin_pairs[:, 1]]
        return out


def write_mesh(mesh: Mesh, path):
    """Serialize in the plain-text mesh format (header 'polyshape-mesh v1')."""
    lines = ["polyshape-mesh v1"]
    lines.append(f"nodes {len(mesh.nodes)}")
    for i, (x, y) in enumerate(mesh.nodes):
        lines.append(f"{i} {float(x)!r} {float(y)!r}")
    lines.append(f"triangles {len(mesh.triangles)}")
    for i, (t, r) in enumerate(zip(mesh.triangles, mesh.tri_region)):
        lines.append(f"{i} {t[0]} {t[1]} {t[2]} {int(r)}")
    iface = mesh.interface_edges
    lines.append(f"interface {len(iface)}")
    for a, b, e, _, _ in iface:
        lines.append(f"{a} {b} {e}")
    bed = mesh.boundary_edges
    lines.append(f"boundary {len(bed)}")
    for a, b in bed:
        lines.append(f"{a} {b}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_mesh(path):
    """Read back the raw blocks of the text format as arrays."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if lines[0] != "polyshape-mesh v1":
        raise GeometryError("not a polyshape-mesh v1 file")
    pos = 1
    out = {}
    for block in ("nodes", "triangles", "interface", "boundary"):
        name, count = lines[pos].split()
        if name != block:
            raise GeometryError(f"expected block {block}, found {name}")
        count = int(count)
        rows = [lines[pos + 1 + k].split() for k in range(count)]
        pos += 1 + count
        if block == "nodes":
            out[block] = np.array([[float(r[1]), float(r[2])] for r in rows])
        elif block == "triangles":
            out[block] = np.array([[int(r[1]), int(r[2]), int(r[3]), int(r[4])] for r in rows])
        else:
            out[block] = np.array([[int(v) for v in r] for r in rows])
    return out
