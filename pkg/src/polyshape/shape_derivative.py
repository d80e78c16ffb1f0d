"""
Shape derivative of the boundary measurements, by independent routes.

Route 1 (boundary integral): the derivative of the measurements paired
against a test current g is

    (1 - k) int_interface (h.nu) grad(u-) . (M grad(v_g-)) ds,

where M has eigenvalue 1 along the tangent and k along the normal, i.e.
the integrand is dtau(u) dtau(v) + k dnu(u-) dnu(v-).  The one-sided
interface gradients behave like r^{gamma1 - 1} at the vertices, so the
integral uses composite Gauss panels graded geometrically toward each
vertex, and the raw finite element traces are replaced by the fitted
leading corner expansion close to the vertices, where elementwise P1
gradients are unreliable.  Degenerate contrasts keep only the tangential
(insulating) resp. normal (conducting, with a minus sign) term.

Route 2 (material derivative): the trace of the material-derivative solve
equals the shape derivative of the measurements for any admissible
extension of h; the domain derivative of the potential itself is
recovered pointwise as ``u' = udot - H . grad(u)``, which is
discontinuous across the interface.

The module also provides the Taylor-remainder study (re-mesh the deformed
polygon, compare against the linearization, fit the log-log slope) and a
uniform-boundedness scan of the derivative operator over neighbouring
polygons.
"""

from __future__ import annotations

import numpy as np

from .corner_analysis import Contrast, CornerSpectrum
from .fem_core import (
    BoundaryFunction,
    FemField,
    ForwardSolver,
    boundary_trace,
    fourier_current,
    solve_material,
)
from .geometry import (
    ExtensionField,
    Mesh,
    PerturbationField,
    deform,
    extend_field,
    generate_mesh,
)

__all__ = [
    "InterfaceQuadrature",
    "InterfaceTraces",
    "TraceEvaluator",
    "anisotropy_matrix",
    "boundary_gradients",
    "shape_derivative_pairing",
    "shape_derivative_boundary",
    "default_test_currents",
    "domain_derivative",
    "taylor_remainder",
    "derivative_norm_scan",
    "MeshMismatch",
    "RequiresDuplicatedMesh",
]


class MeshMismatch(ValueError):
    pass


class RequiresDuplicatedMesh(MeshMismatch):
    pass


# ---------------------------------------------------------------------------
# graded interface quadrature
# ---------------------------------------------------------------------------


class InterfaceQuadrature:
    """Composite Gauss nodes on the inclusion boundary, graded to vertices.

    Each edge is split at its midpoint; each half carries ``panels``
    geometrically shrinking panels (ratio ``ratio``) plus one closing
    panel down to the vertex, so the weights sum exactly to the edge
    length while no node touches a vertex.

    When per-vertex exponents ``gamma1`` are supplied, the closing panel
    is a Gauss-Jacobi rule for the weight r^{2 gamma1 - 2}, so integrands
    with the one-sided-gradient-product singularity are captured to
    near-spectral accuracy; ``w_singular`` holds the corresponding
    weights (the plain weights ``w`` keep summing to the edge lengths).
    """

    def __init__(self, polygon, panels=12, ratio=0.5, npoints=4, gamma1=None):
        from scipy.special import roots_jacobi

        gx, gw = np.polynomial.legendre.leggauss(npoints)
        gx = 0.5 * (gx + 1.0)
        gw = 0.5 * gw
        self.polygon = polygon
        n = polygon.n
        edge_s, edge_w, edge_ws = [], [], []
        for e in range(n):
            L = polygon.edge_lengths[e]
            half = 0.5 * L
            borders = half * ratio ** np.arange(panels + 1)
            s_parts, w_parts, ws_parts = [], [], []
            for hi, lo in zip(borders[:-1], borders[1:]):
                width = hi - lo
                s_parts.append(lo + gx * width)
                w_parts.append(gw * width)
                ws_parts.append(gw * width)
            # closing panel [0, eps]: per-half exponent of the adjacent vertex
            s_close, w_close, ws_close = {}, {}, {}
            eps = borders[-1]
            for vkey, vertex in (("lo", (e - 1) % n), ("hi", e % n)):
                if gamma1 is not None:
                    alpha = 2.0 * float(gamma1[vertex]) - 2.0
                    xj, wj = roots_jacobi(npoints, 0.0, alpha)
                    rj = eps * (xj + 1.0) / 2.0
                    Wj = (eps / 2.0) ** (alpha + 1.0) * wj
                    ws_close[vkey] = Wj * rj ** (-alpha)
                    # interpolatory plain weights on the same nodes
                    V = np.vander(rj, increasing=True).T
                    mom = eps ** np.arange(1, npoints + 1) / np.arange(1, npoints + 1)
                    w_close[vkey] = np.linalg.solve(V, mom)
                    s_close[vkey] = rj
                else:
                    s_close[vkey] = eps * gx
                    w_close[vkey] = gw * eps
                    ws_close[vkey] = gw * eps
            s_lo = np.concatenate([s_close["lo"]] + s_parts)
            w_lo = np.concatenate([w_close["lo"]] + w_parts)
            ws_lo = np.concatenate([ws_close["lo"]] + ws_parts)
            s_hi = np.concatenate([s_close["hi"]] + s_parts)
            w_hi = np.concatenate([w_close["hi"]] + w_parts)
            ws_hi = np.concatenate([ws_close["hi"]] + ws_parts)
            s = np.concatenate([s_lo, L - s_hi])
            w = np.concatenate([w_lo, w_hi])
            ws = np.concatenate([ws_lo, ws_hi])
            order = np.argsort(s)
            edge_s.append(s[order])
            edge_w.append(w[order])
            edge_ws.append(ws[order])
        self.edge_s = edge_s
        self.edge_w = edge_w
        self.edges = np.concatenate(
            [np.full(len(s), e) for e, s in enumerate(edge_s)]
        ).astype(int)
        self.s = np.concatenate(edge_s)
        self.w = np.concatenate(edge_w)
        self.w_singular = np.concatenate(edge_ws)
        lengths = polygon.edge_lengths[self.edges]
        near_end = self.s > 0.5 * lengths
        self.vertex = np.where(near_end, self.edges % n, (self.edges - 1) % n)
        self.r = np.where(near_end, lengths - self.s, self.s)
        self.role = np.where(near_end, "before", "after")
        self.points = np.vstack([polygon.edge_point(e, s) for e, s in enumerate(edge_s)])

    def h_dot_nu(self, h: PerturbationField):
        vals = np.empty(len(self.s))
        pos = 0
        for e, s in enumerate(self.edge_s):
            vals[pos : pos + len(s)] = h.h_dot_nu(e, s)
            pos += len(s)
        return vals


def anisotropy_matrix(polygon, edge, k):
    """M = tau tau^T + k nu nu^T for one edge of the inclusion."""
    tau = polygon.tangents[edge]
    nu = polygon.normals[edge]
    return np.outer(tau, tau) + k * np.outer(nu, nu)


# ---------------------------------------------------------------------------
# one-sided interface traces
# ---------------------------------------------------------------------------


def _edge_trace_coefficients(spectrum: CornerSpectrum, i, role, kind):
    """(tau, nu-, nu+) coefficients of the leading corner term.

    The one-sided derivatives on an adjacent edge at distance r from
    vertex i equal ``beta1 * coef * r^{gamma1 - 1}`` with these
    coefficients ("after" = edge leaving the vertex, "before" = edge
    arriving at it).
    """
    ef = spectrum.y1[i]
    g = spectrum.gamma1(i)
    if kind == "finite":
        k = spectrum.contrast.k
        c1, s1 = spectrum.cs1(i)
        if role == "after":
            tau = g * ef.A_minus
            num = -g * ef.B_minus
        else:
            tau = -g * (ef.A_minus * c1 + ef.B_minus * s1)
            num = g * (ef.B_minus * c1 - ef.A_minus * s1)
        return tau, num, k * num
    c2, s2 = np.cos(2 * np.pi * g), np.sin(2 * np.pi * g)
    ca, sa = spectrum.cs1(i)
    if kind == "insulating":
        if role == "after":
            tau = g * (ef.A_plus * c2 + ef.B_plus * s2)
        else:
            tau = -g * (ef.A_plus * ca + ef.B_plus * sa)
        return tau, 0.0, 0.0
    # conducting: tangential trace vanishes, normal derivative one-sided
    if role == "after":
        nup = -g * (-ef.A_plus * s2 + ef.B_plus * c2)
    else:
        nup = g * (-ef.A_plus * sa + ef.B_plus * ca)
    return 0.0, 0.0, nup


class InterfaceTraces:
    """One-sided interface derivatives of one field at quadrature nodes."""

    def __init__(self, quadrature, dtau, dnu_minus, dnu_plus):
        self.quadrature = quadrature
        self.dtau = dtau
        self.dnu_minus = dnu_minus
        self.dnu_plus = dnu_plus


def _side_patch_gradients(mesh: Mesh, field: FemField):
    """Area-weighted gradient per interface sub-edge and side."""
    key = "iface_patch_incidence"
    if key not in mesh._cache:
        node_tris = {}
        for t, tri in enumerate(mesh.triangles):
            for nid in tri:
                node_tris.setdefault(int(nid), []).append(t)
        incidence = []
        for a, b, _, _, _ in mesh.interface_edges:
            per_side = []
            for region in (1, 0):
                ts = sorted(
                    {
                        t
                        for nid in (a, b)
                        for t in node_tris.get(int(nid), [])
                        if mesh.tri_region[t] == region
                    }
                )
                per_side.append(np.asarray(ts, dtype=int))
            incidence.append(per_side)
        mesh._cache[key] = incidence
    incidence = mesh._cache[key]
    grads = field.tri_gradients
    areas = mesh.tri_areas
    gm = np.zeros((len(incidence), 2))
    gp = np.zeros((len(incidence), 2))
    for j, (ts_minus, ts_plus) in enumerate(incidence):
        if len(ts_minus):
            wgt = areas[ts_minus]
            gm[j] = (grads[ts_minus] * wgt[:, None]).sum(axis=0) / wgt.sum()
        if len(ts_plus):
            wgt = areas[ts_plus]
            gp[j] = (grads[ts_plus] * wgt[:, None]).sum(axis=0) / wgt.sum()
    return gm, gp


def _j1_gradient(polygon, spectrum, i, pts, inside):
    """Cartesian gradient of y1(theta) r^{gamma1} around vertex i, one-sided."""
    ef = spectrum.y1[i]
    g = spectrum.gamma1(i)
    r, th = polygon.local_polar(i, np.atleast_2d(pts))
    safe = np.where(r > 0, r, 1.0)
    rp = safe ** (g - 1.0)
    dr = g * ef(th, inside=inside) * rp
    dth = ef.dtheta(th, inside=inside) * rp
    ang = polygon.thetas[i] + th
    e_r = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    e_t = np.stack([-np.sin(ang), np.cos(ang)], axis=1)
    out = dr[:, None] * e_r + dth[:, None] * e_t
    return np.where(r[:, None] > 0, out, 0.0)


def _corner_patch_averages(mesh, spectrum, fraction):
    """Patch-average of the unit j1 gradient per corner sub-edge and side.

    For each interface sub-edge within ``fraction * r_i`` of its adjacent
    vertex, the same area-weighted average that the raw P1 patch gradient
    realizes is applied to the analytic leading singular gradient; the
    difference (exact value at the edge point minus this average) is the
    defect that the trace evaluator corrects, scaled by the fitted beta1.
    """
    key = ("corner_j1_avg", spectrum.contrast.kind,
           round(getattr(spectrum.contrast, "k", 0.0), 12), round(fraction, 12))
    if key in mesh._cache:
        return mesh._cache[key]
    from .fem_core import TRI_QUAD_DEG5

    poly = mesh.polygon
    incidence = mesh._cache["iface_patch_incidence"]
    bq, wq = TRI_QUAD_DEG5
    out = {}  # (sub_edge_index, side) -> (vertex, avg gradient 2-vector)
    n = poly.n
    for j, (a, b, e, sa, sb) in enumerate(mesh.interface_edges):
        L = poly.edge_lengths[e]
        mid = 0.5 * (sa + sb)
        if mid <= 0.5 * L:
            vertex, r = (e - 1) % n, mid
        else:
            vertex, r = e % n, L - mid
        if r >= fraction * poly.radii[vertex]:
            continue
        ts_minus, ts_plus = incidence[j]
        for side, ts in (("minus", ts_minus), ("plus", ts_plus)):
            if len(ts) == 0:
                continue
            p = mesh.nodes[mesh.triangles[ts]]
            areas = mesh.tri_areas[ts]
            pts = np.einsum("qk,tkd->tqd", bq, p).reshape(-1, 2)
            grads = _j1_gradient(poly, spectrum, vertex, pts, inside=(side == "minus"))
            grads = grads.reshape(len(ts), len(wq), 2)
            per_tri = np.einsum("q,tqd->td", wq, grads)
            avg = (per_tri * areas[:, None]).sum(axis=0) / areas.sum()
            out[(j, side)] = (vertex, avg)
    mesh._cache[key] = out
    return out


class TraceEvaluator:
    """One-sided interface derivatives of a field, anywhere on the boundary.

    Away from the vertices the values come from the P1 gradients of the
    elements adjacent to each interface sub-edge (patch-averaged per
    side).  Within ``substitute_fraction * r_i`` of a vertex, where raw P1
    gradients cannot track the r^{gamma1-1} blow-up, two modes exist:

    * ``mode="correct"`` (default): the fitted leading singular part is
      handled exactly -- its patch average is subtracted from the raw
      gradients (cancelling their systematic defect) and its exact
      one-sided edge values are added back.  This keeps the genuine
      higher-order trace content and is the accurate choice for
      quadrature of the derivative pairings and for transmission data.
    * ``mode="substitute"``: the traces are replaced outright by the
      fitted leading term.  This drops everything beyond the first
      singular term but makes the leading-order cancellation against the
      singular functions exact, which is what the net-source
      compatibility diagnostic probes.

    Requires per-vertex ``fits`` (objects with a ``beta1`` attribute);
    without them the raw values are used everywhere.
    """

    def __init__(self, mesh, field, spectrum=None, fits=None, substitute_fraction=0.2,
                 mode="correct"):
        self.mesh = mesh
        self.field = field
        self.spectrum = spectrum
        self.fits = fits
        self.substitute_fraction = substitute_fraction
        self.mode = mode
        self.kind = field.contrast.kind if field.contrast is not None else "finite"
        # below a few graded layers the raw patches carry no information at
        # all; the fitted leading term is the only defensible value there
        self.resolution_floor = 4.0 * mesh.hmax * mesh.grading**mesh.levels
        self._gm, self._gp = _side_patch_gradients(mesh, field)
        self._corr = (
            _corner_patch_averages(mesh, spectrum, substitute_fraction)
            if (fits is not None and spectrum is not None and mode == "correct")
            else {}
        )
        sub_by_edge = {}
        for j, (_, _, e, sa, sb) in enumerate(mesh.interface_edges):
            sub_by_edge.setdefault(e, []).append((sa, j))
        self._sub_starts = {}
        self._sub_index = {}
        for e, items in sub_by_edge.items():
            items.sort()
            self._sub_starts[e] = np.array([x[0] for x in items])
            self._sub_index[e] = np.array([x[1] for x in items])

    def _beta(self, vertex):
        fit = self.fits[vertex]
        return fit.beta1 if hasattr(fit, "beta1") else float(fit)

    def values(self, edge, s):
        """(dtau, dnu_minus, dnu_plus) at arc positions ``s`` on ``edge``."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        poly = self.mesh.polygon
        starts = self._sub_starts[edge]
        which = self._sub_index[edge][np.clip(np.searchsorted(starts, s) - 1, 0, len(starts) - 1)]
        tau = poly.tangents[edge]
        nu = poly.normals[edge]
        gmins = self._gm[which].copy()
        gplus = self._gp[which].copy()

        corr_tau = np.zeros(len(s))
        corr_num = np.zeros(len(s))
        corr_nup = np.zeros(len(s))
        if self._corr:
            L = poly.edge_lengths[edge]
            n = poly.n
            for role, vertex, r in (
                ("after", (edge - 1) % n, s),
                ("before", edge % n, L - s),
            ):
                rows = [(idx, self._corr.get((j, "minus")), self._corr.get((j, "plus")))
                        for idx, j in enumerate(which)
                        if (j, "plus") in self._corr or (j, "minus") in self._corr]
                if not rows:
                    continue
                beta = self._beta(vertex)
                sel = np.zeros(len(s), dtype=bool)
                for idx, cm, cp in rows:
                    take = False
                    if cm is not None and cm[0] == vertex:
                        gmins[idx] -= beta * cm[1]
                        take = True
                    if cp is not None and cp[0] == vertex:
                        gplus[idx] -= beta * cp[1]
                        take = True
                    sel[idx] = take
                if not np.any(sel):
                    continue
                tc, nmc, npc = _edge_trace_coefficients(self.spectrum, vertex, role, self.kind)
                rp = np.where(r[sel] > 0, r[sel], 1.0) ** (self.spectrum.gamma1(vertex) - 1.0)
                corr_tau[sel] += beta * tc * rp
                corr_num[sel] += beta * nmc * rp
                corr_nup[sel] += beta * npc * rp

        if self.kind == "insulating":
            dtau = gplus @ tau + corr_tau
            dnum = np.zeros_like(dtau)
            dnup = np.zeros_like(dtau)
        elif self.kind == "conducting":
            dnup = gplus @ nu + corr_nup
            dtau = np.zeros_like(dnup)
            dnum = np.zeros_like(dnup)
        else:
            dtau = 0.5 * (gmins + gplus) @ tau + corr_tau
            dnum = gmins @ nu + corr_num
            dnup = gplus @ nu + corr_nup

        if self.fits is not None and self.spectrum is not None:
            L = poly.edge_lengths[edge]
            n = poly.n
            for role, vertex, r in (
                ("after", (edge - 1) % n, s),
                ("before", edge % n, L - s),
            ):
                cut = self.substitute_fraction * poly.radii[vertex]
                if self.mode == "correct":
                    cut = min(cut, self.resolution_floor)
                sel = r < cut
                if not np.any(sel):
                    continue
                beta = self._beta(vertex)
                tc, nmc, npc = _edge_trace_coefficients(self.spectrum, vertex, role, self.kind)
                rp = np.where(r[sel] > 0, r[sel], 1.0) ** (self.spectrum.gamma1(vertex) - 1.0)
                dtau[sel] = beta * tc * rp
                dnum[sel] = beta * nmc * rp
                dnup[sel] = beta * npc * rp
        return dtau, dnum, dnup


def boundary_gradients(
    field: FemField,
    mesh: Mesh,
    spectrum: CornerSpectrum | None = None,
    fits=None,
    quadrature: InterfaceQuadrature | None = None,
    substitute_fraction=0.2,
) -> InterfaceTraces:
    """One-sided interface derivatives at the graded quadrature nodes."""
    poly = mesh.polygon
    if quadrature is None:
        if spectrum is not None:
            key = ("iface_quadrature", spectrum.contrast.kind,
                   round(getattr(spectrum.contrast, "k", 0.0), 12))
            quadrature = mesh._cached(
                key, lambda: InterfaceQuadrature(poly, gamma1=spectrum.gammas[:, 1])
            )
        else:
            quadrature = mesh._cached("iface_quadrature", lambda: InterfaceQuadrature(poly))
    ev = TraceEvaluator(mesh, field, spectrum, fits, substitute_fraction)
    dtau = np.empty(len(quadrature.s))
    dnum = np.empty_like(dtau)
    dnup = np.empty_like(dtau)
    pos = 0
    for e in range(poly.n):
        s = quadrature.edge_s[e]
        dtau[pos : pos + len(s)], dnum[pos : pos + len(s)], dnup[pos : pos + len(s)] = (
            ev.values(e, s)
        )
        pos += len(s)
    return InterfaceTraces(quadrature, dtau, dnum, dnup)


# ---------------------------------------------------------------------------
# pairings and boundary reconstruction
# ---------------------------------------------------------------------------


def shape_derivative_pairing(
    contrast: Contrast,
    h: PerturbationField,
    traces_u: InterfaceTraces,
    traces_v: InterfaceTraces,
) -> float:
    """<dLambda h, g> from the interface integral of the two solutions."""
    q = traces_u.quadrature
    if traces_v.quadrature is not q:
        raise MeshMismatch("traces must share one interface quadrature")
    hn = q.h_dot_nu(h)
    if contrast.kind == "insulating":
        integrand = traces_u.dtau * traces_v.dtau
        factor = 1.0
    elif contrast.kind == "conducting":
        integrand = -traces_u.dnu_plus * traces_v.dnu_plus
        factor = 1.0
    else:
        k = contrast.k
        integrand = traces_u.dtau * traces_v.dtau + k * traces_u.dnu_minus * traces_v.dnu_minus
        factor = 1.0 - k
    return float(factor * np.sum(q.w_singular * hn * integrand))


def default_test_currents(mesh: Mesh, n_modes=8):
    """Orthonormal zero-mean Fourier family (cos and sin up to n_modes)."""
    out = []
    for m in range(1, n_modes + 1):
        out.append(fourier_current(mesh, m, "cos"))
        out.append(fourier_current(mesh, m, "sin"))
    return out


def shape_derivative_boundary(
    mesh: Mesh,
    contrast: Contrast,
    traces_u: InterfaceTraces,
    h: PerturbationField,
    test_traces,
) -> BoundaryFunction:
    """Galerkin reconstruction of dLambda_f h from pairings with a family.

    ``test_traces`` is a list of (current, traces_of_v_g) pairs; the
    currents must be orthonormal in L2 of the outer boundary.
    """
    vals = np.zeros(len(mesh.boundary_loop))
    for g, tr_v in test_traces:
        coef = shape_derivative_pairing(contrast, h, traces_u, tr_v)
        vals += coef * g.values
    return BoundaryFunction(mesh, vals, normalize=True)


# ---------------------------------------------------------------------------
# domain derivative of the potential
# ---------------------------------------------------------------------------


def _nodal_side_gradients(mesh: Mesh, field: FemField, region):
    """Area-weighted nodal gradients from one region's triangles."""
    sel = np.flatnonzero(mesh.tri_region == region)
    grads = field.tri_gradients[sel]
    areas = mesh.tri_areas[sel]
    acc = np.zeros((len(mesh.nodes), 2))
    wsum = np.zeros(len(mesh.nodes))
    tris = mesh.triangles[sel]
    for kcol in range(3):
        np.add.at(acc, tris[:, kcol], grads * areas[:, None])
        np.add.at(wsum, tris[:, kcol], areas)
    nz = wsum > 0
    acc[nz] /= wsum[nz, None]
    return acc, nz


def domain_derivative(udot: FemField, u: FemField, extension: ExtensionField) -> FemField:
    """u' = udot - H . grad(u), nodally, on the duplicated mesh.

    The result jumps across the interface; outside the support of H it
    coincides with the material derivative exactly.
    """
    mesh = udot.mesh
    if not mesh.duplicated:
        raise RequiresDuplicatedMesh("domain_derivative requires a duplicated-interface mesh")
    g_plus, has_plus = _nodal_side_gradients(mesh, u, 0)
    g_minus, has_minus = _nodal_side_gradients(mesh, u, 1)
    Hn = extension.evaluate(mesh.nodes)
    out = udot.dof_values.copy()
    # plus-side (original) dofs: exterior gradient where available
    gsel = np.where(has_plus[:, None], g_plus, g_minus)
    out[: len(mesh.nodes)] -= np.einsum("nd,nd->n", Hn, gsel)
    # twin (minus) dofs
    tp = mesh.twin_pairs
    out[tp[:, 1]] = udot.dof_values[tp[:, 1]] - np.einsum(
        "nd,nd->n", Hn[tp[:, 0]], g_minus[tp[:, 0]]
    )
    return FemField(mesh, out, u.contrast)


# ---------------------------------------------------------------------------
# Taylor remainder and operator-norm scan
# ---------------------------------------------------------------------------


def _resample(bf: BoundaryFunction, mesh: Mesh) -> BoundaryFunction:
    if bf.mesh is mesh:
        return bf
    return BoundaryFunction(mesh, bf.sample(mesh.boundary_arc), normalize=True)


def taylor_remainder(
    polygon,
    outer,
    contrast: Contrast,
    current,
    h: PerturbationField,
    t_list,
    hmax,
    derivative: BoundaryFunction | None = None,
    mesh_kwargs=None,
    threads=1,
):
    """Remainder table for Lambda(D_th) - Lambda(D) - t dLambda(D)h.

    ``current`` is a Fourier descriptor (mode, kind).  The perturbed
    measurements come from freshly generated meshes of the deformed
    polygons (independent per t, optionally solved concurrently); the
    derivative defaults to the material-derivative route on the base
    mesh.  Returns (t, remainder) rows plus the fitted log-log slope.
    """
    mesh_kwargs = dict(mesh_kwargs or {})
    mode, kind = current
    base_mesh, dlam, lam0 = _material_route(
        polygon, outer, contrast, current, h, hmax, mesh_kwargs
    )
    if derivative is not None:
        dlam = _resample(derivative, base_mesh)

    def remainder_at(t):
        if t == 0.0:
            return (0.0, 0.0)
        poly_t = deform(polygon, h, t)
        mesh_t = generate_mesh(poly_t, outer, hmax, **mesh_kwargs)
        u_t = ForwardSolver(mesh_t, contrast).solve_current(
            fourier_current(mesh_t, mode, kind)
        )
        lam_t = _resample(boundary_trace(u_t), base_mesh)
        rem = BoundaryFunction(
            base_mesh, lam_t.values - lam0.values - t * dlam.values
        ).norm()
        return (float(t), rem)

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(remainder_at, t_list))
    else:
        rows = [remainder_at(t) for t in t_list]
    ts = np.array([r[0] for r in rows if r[0] > 0 and r[1] > 0])
    rs = np.array([r[1] for r in rows if r[0] > 0 and r[1] > 0])
    slope = float(np.polyfit(np.log(ts), np.log(rs), 1)[0]) if len(ts) >= 2 else np.nan
    return rows, slope


def _material_route(polygon, outer, contrast, current, h, hmax, mesh_kwargs):
    from .geometry import ExtensionGeometry

    geo = ExtensionGeometry(polygon)
    mesh = generate_mesh(
        polygon, outer, hmax, constraints=geo.constraint_polylines(), **mesh_kwargs
    )
    solver = ForwardSolver(mesh, contrast)
    mode, kind = current
    f = fourier_current(mesh, mode, kind)
    u = solver.solve_current(f)
    H = extend_field(h, geometry=geo)
    udot = solve_material(mesh, contrast, u, H, solver=solver)
    return mesh, boundary_trace(udot), boundary_trace(u)


def derivative_norm_scan(
    polygons,
    outer,
    contrast: Contrast,
    current,
    basis_builder,
    hmax,
    n_modes=8,
    levels=8,
):
    """Realized operator norms of dLambda over neighbouring polygons.

    ``basis_builder(polygon)`` returns the perturbation basis; each field
    is normalized in W^{1,inf} before the derivative norm is taken.  The
    theory guarantees a common bound for all polygons close to a fixed
    one, so the scan reports max-over-basis norms per polygon.
    """
    from .verification_recon import corner_probe_fits

    out = []
    for poly in polygons:
        from .geometry import ExtensionGeometry

        geo = ExtensionGeometry(poly)
        mesh = generate_mesh(poly, outer, hmax, levels=levels,
                             constraints=geo.constraint_polylines())
        solver = ForwardSolver(mesh, contrast)
        mode, kind = current
        u = solver.solve_current(fourier_current(mesh, mode, kind))
        from .corner_analysis import build_spectrum

        spectrum = build_spectrum(poly.alphas, contrast)
        fits = corner_probe_fits(mesh, poly, spectrum, u)
        tr_u = boundary_gradients(u, mesh, spectrum, fits=fits)
        tests = []
        for gbf in default_test_currents(mesh, n_modes):
            vg = solver.solve_current(gbf)
            fits_v = corner_probe_fits(mesh, poly, spectrum, vg)
            tests.append((gbf, boundary_gradients(vg, mesh, spectrum, fits=fits_v)))
        worst = 0.0
        for hfield in basis_builder(poly):
            nrm = hfield.norm_w1inf
            if nrm == 0:
                continue
            hunit = (1.0 / nrm) * hfield
            dlam = shape_derivative_boundary(mesh, contrast, tr_u, hunit, tests)
            worst = max(worst, dlam.norm())
        out.append(worst)
    return np.asarray(out)
