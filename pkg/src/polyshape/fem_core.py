"""
Piecewise-linear finite elements for the two-phase conductivity problem.

All solves share the same skeleton: a P1 stiffness operator with the
piecewise-constant conductivity (k inside the inclusion, 1 outside), a
Neumann load on the outer boundary, and the zero-boundary-mean condition
imposed through a single Lagrange multiplier row, which keeps the system
symmetric and uniquely solvable.  Variants:

* forward conductivity solve (finite contrast),
* insulating / perfectly conducting degenerate solves on the exterior
  region (natural resp. essential condition on the inclusion boundary),
* material-derivative solve, whose right-hand side pairs the forward
  gradient with the deformation matrix (div H) I - DH - DH^T of a
  compactly supported extension field,
* jump solve on a duplicated-interface mesh, where prescribed interface
  value jumps are affine constraints between twin unknowns and flux data
  enters the load as interface integrals.

Boundary data live in ``BoundaryFunction``: nodal values along the outer
boundary with the exact piecewise-linear measure, so loads, inner
products and mean normalization are mutually consistent (this makes the
discrete reciprocity identity hold to solver precision).
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .corner_analysis import Contrast
from .geometry import Mesh

__all__ = [
    "BoundaryFunction",
    "FemField",
    "FemError",
    "NonZeroMeanCurrent",
    "IncompatibleData",
    "SolverDivergence",
    "fourier_current",
    "inner_cross_mesh",
    "distance_l2",
    "ForwardSolver",
    "solve_forward",
    "solve_degenerate",
    "solve_material",
    "material_load",
    "deformation_matrix",
    "solve_jump",
    "JumpSolver",
    "interface_flux_load",
    "boundary_trace",
    "check_compatibility",
    "assemble_stiffness",
    "boundary_mass_matrix",
    "boundary_weights",
    "sigma_per_triangle",
    "volume_load",
    "TRI_QUAD_DEG5",
]

# 3-point degree-2 rule (stiffness-grade) and 7-point degree-5 rule (loads)
TRI_QUAD_DEG2 = (
    np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]]),
    np.array([1 / 3, 1 / 3, 1 / 3]),
)
_a1, _b1 = 0.059715871789770, 0.470142064105115
_a2, _b2 = 0.797426985353087, 0.101286507323456
TRI_QUAD_DEG5 = (
    np.array(
        [
            [1 / 3, 1 / 3, 1 / 3],
            [_a1, _b1, _b1],
            [_b1, _a1, _b1],
            [_b1, _b1, _a1],
            [_a2, _b2, _b2],
            [_b2, _a2, _b2],
            [_b2, _b2, _a2],
        ]
    ),
    np.array(
        [0.225, 0.132394152788506, 0.132394152788506, 0.132394152788506,
         0.125939180544827, 0.125939180544827, 0.125939180544827]
    ),
)


class FemError(RuntimeError):
    pass


class NonZeroMeanCurrent(FemError):
    pass


class IncompatibleData(FemError):
    pass


class SolverDivergence(FemError):
    pass


# ---------------------------------------------------------------------------
# boundary functions
# ---------------------------------------------------------------------------


class BoundaryFunction:
    """Function on the outer boundary, nodal along the mesh boundary loop.

    Values are stored in boundary-loop order; all integrals use the exact
    piecewise-linear measure of the loop.  Optionally remembers a Fourier
    descriptor (mode, kind) when created by :func:`fourier_current`.
    """

    def __init__(self, mesh: Mesh, values, descriptor=None, normalize=False):
        self.mesh = mesh
        self.values = np.asarray(values, dtype=float).copy()
        self.descriptor = descriptor
        if len(self.values) != len(mesh.boundary_loop):
            raise ValueError("values must match the boundary loop length")
        if normalize:
            self.values -= self.mean

    @property
    def arc(self):
        return self.mesh.boundary_arc

    def _edge_data(self):
        L = self.mesh.boundary_edge_lengths
        va = self.values
        vb = np.roll(self.values, -1)
        return L, va, vb

    @property
    def mean(self):
        L, va, vb = self._edge_data()
        total = float(np.sum(L * (va + vb) / 2))
        return total / float(np.sum(L))

    def inner(self, other: "BoundaryFunction"):
        """Exact L2 inner product with a function on the same mesh."""
        if other.mesh is not self.mesh:
            return inner_cross_mesh(self, other)
        L, va, vb = self._edge_data()
        ga, gb = other.values, np.roll(other.values, -1)
        return float(np.sum(L / 6.0 * (2 * va * ga + va * gb + vb * ga + 2 * vb * gb)))

    def norm(self):
        return float(np.sqrt(max(self.inner(self), 0.0)))

    def normalized(self):
        return BoundaryFunction(self.mesh, self.values - self.mean, self.descriptor)

    def sample(self, arcs):
        """Periodic linear interpolation at arbitrary arc-length positions."""
        s = self.arc
        order = np.argsort(s)
        ss = s[order]
        vv = self.values[order]
        P = float(self.mesh.outer.perimeter)
        ss_ext = np.concatenate([ss, [ss[0] + P]])
        vv_ext = np.concatenate([vv, [vv[0]]])
        return np.interp(np.mod(arcs, P), ss_ext, vv_ext)

    def to_dof_vector(self, n_dofs=None):
        n = self.mesh.n_dofs if n_dofs is None else n_dofs
        out = np.zeros(n)
        out[self.mesh.boundary_loop] = self.values
        return out

    def __add__(self, other):
        return BoundaryFunction(self.mesh, self.values + other.values)

    def __sub__(self, other):
        return BoundaryFunction(self.mesh, self.values - other.values)

    def __mul__(self, a):
        return BoundaryFunction(self.mesh, a * self.values)

    __rmul__ = __mul__


def inner_cross_mesh(f: BoundaryFunction, g: BoundaryFunction):
    """L2(boundary) inner product of functions living on different meshes."""
    P = float(f.mesh.outer.perimeter)
    arcs = np.unique(np.concatenate([np.mod(f.arc, P), np.mod(g.arc, P)]))
    arcs = np.concatenate([arcs, [arcs[0] + P]])
    fa = f.sample(arcs)
    ga = g.sample(arcs)
    L = np.diff(arcs)
    va, vb = fa[:-1], fa[1:]
    wa, wb = ga[:-1], ga[1:]
    return float(np.sum(L / 6.0 * (2 * va * wa + va * wb + vb * wa + 2 * vb * wb)))


def distance_l2(f: BoundaryFunction, g: BoundaryFunction):
    d2 = inner_cross_mesh(f, f) - 2 * inner_cross_mesh(f, g) + inner_cross_mesh(g, g)
    return float(np.sqrt(max(d2, 0.0)))


def fourier_current(mesh: Mesh, mode: int, kind: str = "cos"):
    """Unit-L2-norm zero-mean Fourier current on a disk boundary."""
    if mesh.outer.kind != "disk":
        raise ValueError("Fourier currents require a disk outer domain")
    if mode < 1:
        raise ValueError("mode must be >= 1 (mode 0 has nonzero mean)")
    R = mesh.outer.radius
    theta = mesh.boundary_arc / R
    scale = 1.0 / np.sqrt(np.pi * R)
    vals = scale * (np.cos(mode * theta) if kind == "cos" else np.sin(mode * theta))
    f = BoundaryFunction(mesh, vals, descriptor=(mode, kind))
    return f.normalized()


# ---------------------------------------------------------------------------
# fields
# ---------------------------------------------------------------------------


class FemField:
    """Nodal P1 field on a mesh (dof vector; twins used when duplicated)."""

    def __init__(self, mesh: Mesh, dof_values, contrast=None):
        self.mesh = mesh
        self.dof_values = np.asarray(dof_values, dtype=float)
        self.contrast = contrast
        self._grads = None

    @property
    def values_plus(self):
        """Values at geometric nodes seen from the exterior side."""
        return self.mesh.geometric_values(self.dof_values, side="plus")

    @property
    def values_minus(self):
        return self.mesh.geometric_values(self.dof_values, side="minus")

    @property
    def tri_gradients(self):
        if self._grads is None:
            vals = self.dof_values[self.mesh.tri_dofs]
            self._grads = np.einsum("tk,tkd->td", vals, self.mesh.tri_grads)
        return self._grads

    def __call__(self, points, region=None):
        side = "minus" if region == 1 else "plus"
        vals = self.mesh.geometric_values(self.dof_values, side=side)
        return self.mesh.interpolate(vals, points, region=region)

    def energy(self, sigma_per_tri):
        g = self.tri_gradients
        return float(np.sum(sigma_per_tri * self.mesh.tri_areas * np.sum(g * g, axis=1)))


def boundary_trace(field: FemField) -> BoundaryFunction:
    """Mean-normalized restriction to the outer boundary."""
    vals = field.dof_values[field.mesh.boundary_loop]
    return BoundaryFunction(field.mesh, vals, normalize=True)


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------


def sigma_per_triangle(mesh: Mesh, contrast: Contrast):
    if contrast.kind == "finite":
        return np.where(mesh.tri_region == 1, contrast.k, 1.0)
    # degenerate solves assemble on the exterior region only
    return np.where(mesh.tri_region == 1, 0.0, 1.0)


def assemble_stiffness(mesh: Mesh, sigma, tri_mask=None):
    tris = mesh.tri_dofs
    areas = mesh.tri_areas
    grads = mesh.tri_grads
    if tri_mask is not None:
        tris, areas, grads = tris[tri_mask], areas[tri_mask], grads[tri_mask]
        sigma = sigma[tri_mask] if np.ndim(sigma) else sigma
    coef = sigma * areas
    rows, cols, vals = [], [], []
    for i in range(3):
        for j in range(3):
            rows.append(tris[:, i])
            cols.append(tris[:, j])
            vals.append(coef * np.einsum("td,td->t", grads[:, i], grads[:, j]))
    K = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(mesh.n_dofs, mesh.n_dofs),
    )
    return K.tocsr()


def boundary_mass_matrix(mesh: Mesh):
    e = mesh.boundary_edges
    L = mesh.boundary_edge_lengths
    rows = np.concatenate([e[:, 0], e[:, 1], e[:, 0], e[:, 1]])
    cols = np.concatenate([e[:, 0], e[:, 1], e[:, 1], e[:, 0]])
    vals = np.concatenate([L / 3, L / 3, L / 6, L / 6])
    return sp.coo_matrix((vals, (rows, cols)), shape=(mesh.n_dofs, mesh.n_dofs)).tocsr()


def boundary_weights(mesh: Mesh):
    """Row sums of the boundary mass matrix (integral of each hat)."""
    w = np.zeros(mesh.n_dofs)
    e = mesh.boundary_edges
    L = mesh.boundary_edge_lengths
    np.add.at(w, e[:, 0], L / 2)
    np.add.at(w, e[:, 1], L / 2)
    return w


def volume_load(mesh: Mesh, fn, sigma=None, tri_mask=None, rule=TRI_QUAD_DEG5):
    """Load vector for int f(x) w dx via per-element quadrature.

    ``fn`` receives an (m, 2) array of points plus a parallel region array
    and returns values; ``sigma`` optionally weights per triangle.
    """
    bary, wq = rule
    tris = mesh.tri_dofs
    sel = np.arange(len(tris)) if tri_mask is None else np.flatnonzero(tri_mask)
    if len(sel) == 0:
        return np.zeros(mesh.n_dofs)
    p = mesh.nodes[mesh.triangles[sel]]
    areas = mesh.tri_areas[sel]
    out = np.zeros(mesh.n_dofs)
    pts = np.einsum("qk,tkd->tqd", bary, p).reshape(-1, 2)
    regs = np.repeat(mesh.tri_region[sel], len(wq))
    vals = np.asarray(fn(pts, regs), dtype=float).reshape(len(sel), len(wq))
    if sigma is not None:
        vals = vals * np.asarray(sigma)[sel][:, None]
    for k in range(3):
        contrib = areas * np.einsum("tq,q,q->t", vals, wq, bary[:, k])
        np.add.at(out, tris[sel, k], contrib)
    return out


# ---------------------------------------------------------------------------
# constrained solver
# ---------------------------------------------------------------------------


def twin_constraint_matrix(mesh: Mesh):
    """Sparse rows u[plus] - u[minus], one per twin pair."""
    P = len(mesh.twin_pairs)
    rows = np.repeat(np.arange(P), 2)
    cols = mesh.twin_pairs.ravel()
    vals = np.tile([1.0, -1.0], P)
    return sp.coo_matrix((vals, (rows, cols)), shape=(P, mesh.n_dofs)).tocsr()


class ConstrainedSystem:
    """Symmetric stiffness plus affine constraint rows, solved directly.

    The factorization is cached, so repeated solves with new right-hand
    sides (multiple driving currents, material-derivative loads) are
    cheap.
    """

    def __init__(self, K, constraint_rows, free_mask=None):
        self.n = K.shape[0]
        self.free_mask = free_mask
        mats = []
        for r in constraint_rows:
            if sp.issparse(r):
                mats.append(r.tocsr())
            else:
                mats.append(sp.csr_matrix(np.atleast_2d(np.asarray(r, dtype=float))))
        C = sp.vstack(mats).tocsr() if mats else None
        self.m = 0 if C is None else C.shape[0]
        if free_mask is not None:
            idx = np.flatnonzero(free_mask)
            self._idx = idx
            K = K[idx][:, idx]
            C = C[:, idx] if C is not None else None
        else:
            self._idx = None
        blocks = [[K, C.T if C is not None else None], [C, None]]
        if C is None:
            A = K.tocsc()
        else:
            A = sp.bmat(blocks, format="csc")
        try:
            self._lu = spla.splu(A)
        except RuntimeError as exc:
            raise SolverDivergence(f"direct factorization failed: {exc}") from exc

    def solve(self, b, constraint_values=None):
        rhs_c = np.zeros(self.m) if constraint_values is None else np.asarray(constraint_values)
        if self._idx is not None:
            b = np.asarray(b)[self._idx]
        else:
            b = np.asarray(b)
        full = np.concatenate([b, rhs_c]) if self.m else b
        sol = self._lu.solve(full)
        x = sol[: len(b)]
        if self._idx is not None:
            out = np.zeros(self.n)
            out[self._idx] = x
            return out, sol[len(b):]
        return x, sol[len(b):]


# ---------------------------------------------------------------------------
# the solves
# ---------------------------------------------------------------------------


def _current_values(mesh, f):
    if isinstance(f, BoundaryFunction):
        vals = f.values
    else:
        vals = np.asarray(f, dtype=float)
    bf = BoundaryFunction(mesh, vals)
    if abs(bf.mean) > 1e-9 * (np.abs(vals).max() + 1e-300):
        raise NonZeroMeanCurrent(f"driving current has boundary mean {bf.mean:.3e}")
    return vals


class ForwardSolver:
    """Factorized conductivity solver for one mesh and contrast.

    ``kind`` selects the finite-contrast transmission solve or one of the
    degenerate formulations (insulating: natural condition on the
    inclusion boundary, exterior region only; conducting: grounded
    inclusion boundary).
    """

    def __init__(self, mesh: Mesh, contrast: Contrast):
        self.mesh = mesh
        self.contrast = contrast
        self.sigma = sigma_per_triangle(mesh, contrast)
        kind = contrast.kind
        self._Mb = boundary_mass_matrix(mesh)
        bw = boundary_weights(mesh)
        if kind == "finite":
            K = assemble_stiffness(mesh, self.sigma)
            rows = [bw]
            # duplicated meshes carry independent twin unknowns; a forward
            # solve is continuous, so tie every twin pair to zero gap
            if mesh.duplicated:
                rows.append(twin_constraint_matrix(mesh))
            self.system = ConstrainedSystem(K, rows)
            self.active = np.ones(mesh.n_dofs, dtype=bool)
        else:
            mask = mesh.tri_region == 0
            K = assemble_stiffness(mesh, np.ones(len(mesh.tri_dofs)), tri_mask=mask)
            active = np.zeros(mesh.n_dofs, dtype=bool)
            active[np.unique(mesh.tri_dofs[mask])] = True
            if kind == "conducting":
                iface = np.unique(np.concatenate(mesh.interface_chains))
                active[iface] = False
                self.system = ConstrainedSystem(K, [], free_mask=active)
            else:
                self.system = ConstrainedSystem(K, [bw[: mesh.n_dofs]], free_mask=active)
            self.active = active

    def solve_current(self, f) -> FemField:
        vals = _current_values(self.mesh, f)
        b = np.zeros(self.mesh.n_dofs)
        bf = BoundaryFunction(self.mesh, vals)
        b += self._Mb @ bf.to_dof_vector()
        x, _ = self.system.solve(b)
        return FemField(self.mesh, x, self.contrast)

    def solve_load(self, b) -> FemField:
        x, _ = self.system.solve(b)
        return FemField(self.mesh, x, self.contrast)


def solve_forward(mesh: Mesh, contrast: Contrast, f) -> FemField:
    """Potential driven by a zero-mean boundary current (finite contrast)."""
    if contrast.kind != "finite":
        return solve_degenerate(mesh, contrast.kind, f)
    return ForwardSolver(mesh, contrast).solve_current(f)


def solve_degenerate(mesh: Mesh, kind: str, f) -> FemField:
    """Insulating or perfectly conducting forward solve."""
    contrast = Contrast.insulating() if kind == "insulating" else Contrast.conducting()
    return ForwardSolver(mesh, contrast).solve_current(f)


def deformation_matrix(DH):
    """(div H) I - DH - DH^T for a batch of Jacobians, shape (m, 2, 2)."""
    div = DH[:, 0, 0] + DH[:, 1, 1]
    A = -(DH + np.transpose(DH, (0, 2, 1)))
    A[:, 0, 0] += div
    A[:, 1, 1] += div
    return A


def material_load(mesh: Mesh, contrast: Contrast, u: FemField, extension):
    """Load vector -int sigma grad(u) . (A_H grad(w)) dx."""
    bary, wq = TRI_QUAD_DEG5
    poly = mesh.polygon
    margin = 1.5 * float(np.max(extension.geometry.buffer_fraction * poly.radii)) + 2 * mesh.hmax
    centers = mesh.nodes[mesh.triangles].mean(axis=1)
    near = poly.distance_to_edges(centers) <= margin
    sel = np.flatnonzero(near)
    out = np.zeros(mesh.n_dofs)
    if len(sel) == 0:
        return out
    sigma = sigma_per_triangle(mesh, contrast)
    p = mesh.nodes[mesh.triangles[sel]]
    pts = np.einsum("qk,tkd->tqd", bary, p).reshape(-1, 2)
    loc = extension.geometry.locate(pts)
    DH = extension.jacobian(pts, located=loc)
    A = deformation_matrix(DH).reshape(len(sel), len(wq), 2, 2)
    gu = u.tri_gradients[sel]
    # per-triangle integral of A^T grad u, quadrature-weighted
    Agu = np.einsum("tqij,ti,q->tqj", A, gu, wq).sum(axis=1)
    coef = -sigma[sel] * mesh.tri_areas[sel]
    grads = mesh.tri_grads[sel]
    for k in range(3):
        contrib = coef * np.einsum("tj,tj->t", Agu, grads[:, k])
        np.add.at(out, mesh.tri_dofs[sel, k], contrib)
    return out


def solve_material(mesh: Mesh, contrast: Contrast, u: FemField, extension,
                   solver: ForwardSolver | None = None) -> FemField:
    """Material derivative of the potential for an extension field H.

    Solves the same operator as the forward problem with the load
    -int sigma grad(u) . (A_H grad(w)); for the degenerate contrasts the
    form is restricted to the exterior region (with the grounded condition
    kept homogeneous in the conducting case).
    """
    if solver is None:
        solver = ForwardSolver(mesh, contrast)
    b = material_load(mesh, contrast, u, extension)
    return solver.solve_load(b)


class JumpSolver:
    """Transmission solve with prescribed interface jumps on a twin mesh."""

    def __init__(self, mesh: Mesh, contrast: Contrast):
        if not mesh.duplicated:
            raise FemError("solve_jump requires a duplicated-interface mesh")
        self.mesh = mesh
        self.contrast = contrast
        sigma = sigma_per_triangle(mesh, contrast)
        K = assemble_stiffness(mesh, sigma)
        self._Mb = boundary_mass_matrix(mesh)
        self.system = ConstrainedSystem(
            K, [twin_constraint_matrix(mesh), boundary_weights(mesh)]
        )

    def solve(self, phi_per_interface_node, load=None, outer_neumann=None) -> FemField:
        b = np.zeros(self.mesh.n_dofs)
        if load is not None:
            b = b + load
        if outer_neumann is not None:
            bf = BoundaryFunction(self.mesh, outer_neumann)
            b = b + self._Mb @ bf.to_dof_vector()
        cvals = np.concatenate([np.asarray(phi_per_interface_node, dtype=float), [0.0]])
        x, _ = self.system.solve(b, cvals)
        return FemField(self.mesh, x, self.contrast)


def solve_jump(mesh: Mesh, contrast: Contrast, phi, psi=None, F=None,
               psi_load=None, outer_neumann=None) -> FemField:
    """Regular-part solve: [w] = phi via twin constraints, flux data in the load.

    ``phi`` maps interface nodes to the prescribed value jump (array in
    ``mesh.twin_pairs`` order or callable on coordinates).  Classically
    integrable flux jumps ``psi`` are integrated edge by edge with
    ``int psi w ds`` entering the load with a minus sign; distributional
    data should come pre-assembled through ``psi_load``.  ``F`` is a
    volume source callable.
    """
    if callable(phi):
        phi_vals = phi(mesh.nodes[mesh.twin_pairs[:, 0]])
    else:
        phi_vals = np.asarray(phi, dtype=float)
    load = np.zeros(mesh.n_dofs)
    if F is not None:
        load += volume_load(mesh, F)
    if psi is not None:
        load -= interface_flux_load(mesh, psi)
    if psi_load is not None:
        load += psi_load
    return JumpSolver(mesh, contrast).solve(phi_vals, load=load, outer_neumann=outer_neumann)


def interface_flux_load(mesh: Mesh, psi, npoints=4):
    """Assemble int_interface psi w ds against plus-side hat functions."""
    gx, gw = np.polynomial.legendre.leggauss(npoints)
    gx = 0.5 * (gx + 1.0)
    gw = 0.5 * gw
    out = np.zeros(mesh.n_dofs)
    for a, b, e, sa, sb in mesh.interface_edges:
        length = sb - sa
        svals = sa + gx * length
        pts = mesh.polygon.edge_point(e, svals)
        vals = np.asarray(psi(pts, e, svals), dtype=float)
        wa = np.sum(gw * vals * (1 - gx)) * length
        wb = np.sum(gw * vals * gx) * length
        out[a] += wa
        out[b] += wb
    return out


def check_compatibility(mesh: Mesh, F_total, flux_rep, deltas):
    """Net-source balance sum int F - int_{interface minus disks} psi.

    ``flux_rep`` must expose ``integral_excluding(delta)`` giving the flux
    integral over the interface with disks of radius ``delta * r_i``
    removed around the vertices (the classical truncation of the
    distributional data).  Returns one residual per delta; solvability of
    the regular part corresponds to the residuals tending to zero.
    """
    total_F = 0.0
    if F_total is not None:
        load = volume_load(mesh, F_total)
        total_F = float(load.sum())
    return np.array([total_F - flux_rep.integral_excluding(d) for d in deltas])
