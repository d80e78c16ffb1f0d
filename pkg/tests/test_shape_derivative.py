"""Interface quadrature, traces, pairings, and the derivative routes."""

import numpy as np
import pytest

from polyshape.corner_analysis import Contrast, build_spectrum
from polyshape.fem_core import (
    ForwardSolver,
    boundary_trace,
    distance_l2,
    fourier_current,
    solve_forward,
    solve_material,
)
from polyshape.geometry import (
    PerturbationField,
    build_polygon,
    deform,
    dilation,
    extend_field,
    generate_mesh,
    vertex_motion,
)
from polyshape.shape_derivative import (
    InterfaceQuadrature,
    TraceEvaluator,
    anisotropy_matrix,
    boundary_gradients,
    default_test_currents,
    derivative_norm_scan,
    domain_derivative,
    shape_derivative_boundary,
    shape_derivative_pairing,
    taylor_remainder,
)
from polyshape.verification_recon import corner_probe_fits


@pytest.fixture(scope="module")
def traces_u(forward_002, mesh_002, spectrum2, fits_002):
    return boundary_gradients(forward_002, mesh_002, spectrum2, fits=fits_002)


@pytest.fixture(scope="module")
def test_family(solver_002, mesh_002, square, spectrum2):
    out = []
    for g in default_test_currents(mesh_002, 8):
        vg = solver_002.solve_current(g)
        fv = corner_probe_fits(mesh_002, square, spectrum2, vg)
        out.append((g, boundary_gradients(vg, mesh_002, spectrum2, fits=fv)))
    return out


class TestInterfaceQuadrature:
    def test_weights_sum_to_edge_lengths(self, square):
        q = InterfaceQuadrature(square)
        for e in range(square.n):
            assert q.edge_w[e].sum() == pytest.approx(square.edge_lengths[e], abs=1e-12)

    def test_nodes_avoid_vertices_weights_positive(self, square):
        q = InterfaceQuadrature(square)
        assert (q.w > 0).all()
        assert q.r.min() > 0
        assert q.s.min() > 0

    def test_jacobi_weights_integrate_power_exactly(self, square, spectrum2):
        """Closing-panel oracle: integral of r^{2 g1 - 2} over an edge."""
        g1 = spectrum2.gammas[:, 1]
        q = InterfaceQuadrature(square, gamma1=g1)
        a = 2 * g1[0] - 2.0
        e = 1
        L = square.edge_lengths[e]
        sel = q.edges == e
        val = np.sum(q.w_singular[sel] * q.r[sel] ** a)
        exact = 2 * (L / 2) ** (a + 1) / (a + 1)
        assert val == pytest.approx(exact, rel=1e-6)

    def test_plain_weights_integrate_smooth(self, square, spectrum2):
        q = InterfaceQuadrature(square, gamma1=spectrum2.gammas[:, 1])
        e = 0
        L = square.edge_lengths[e]
        sel = q.edges == e
        val = np.sum(q.w[sel] * np.sin(q.s[sel]))
        assert val == pytest.approx(1 - np.cos(L), rel=1e-10)


class TestAnisotropyMatrix:
    def test_eigenvectors(self, square):
        for e in range(4):
            M = anisotropy_matrix(square, e, 2.0)
            tau, nu = square.tangents[e], square.normals[e]
            np.testing.assert_allclose(M @ tau, tau, atol=1e-12)
            np.testing.assert_allclose(M @ nu, 2.0 * nu, atol=1e-12)


class TestTraces:
    def test_k1_exact_linear_field(self, square, outer):
        """An exactly representable field has exact traces."""
        mesh = generate_mesh(square, outer, hmax=0.05)
        c1 = Contrast.finite(1.0, k1_testing=True)
        from polyshape.fem_core import FemField

        vals = 0.7 * mesh.nodes[:, 0] - 0.2 * mesh.nodes[:, 1]
        u = FemField(mesh, vals, c1)
        ev = TraceEvaluator(mesh, u)
        grad = np.array([0.7, -0.2])
        for e in range(4):
            s = np.linspace(0.1, square.edge_lengths[e] - 0.1, 5)
            dtau, dnum, dnup = ev.values(e, s)
            np.testing.assert_allclose(dtau, grad @ square.tangents[e], atol=1e-12)
            np.testing.assert_allclose(dnum, grad @ square.normals[e], atol=1e-12)

    def test_transmission_flux_consistency(self, traces_u, contrast2):
        """dnu+ = k dnu- at mid-edge nodes, within O(hmax)."""
        q = traces_u.quadrature
        mid = (q.r > 0.2) & (q.r < 0.31)
        gap = traces_u.dnu_plus[mid] - contrast2.k * traces_u.dnu_minus[mid]
        scale = np.abs(traces_u.dnu_plus[mid]).max()
        assert np.abs(gap).max() < 0.15 * scale

    def test_near_vertex_exponent_slope(self, mesh_002, forward_002, square,
                                        spectrum2, fits_002, traces_u):
        """|dtau| ~ r^{gamma1 - 1} close to the vertices (fit oracle).

        The substituted traces realize the leading exponent exactly; the
        full (corrected) traces carry the genuine second singular term,
        which bends the apparent single-power slope, so the bound on them
        is loose.
        """
        tr_sub = boundary_gradients(
            forward_002, mesh_002, spectrum2, fits=fits_002, substitute_fraction=0.2,
        )
        from polyshape.shape_derivative import TraceEvaluator

        ev = TraceEvaluator(mesh_002, forward_002, spectrum2, fits_002,
                            mode="substitute")
        ri = square.radii[0]
        rs = np.geomspace(0.02 * ri, 0.18 * ri, 12)
        dtau, _, _ = ev.values(1, rs)  # edge leaving vertex 0
        slope = np.polyfit(np.log(rs), np.log(np.abs(dtau)), 1)[0]
        assert slope == pytest.approx(spectrum2.gamma1(0) - 1.0, abs=1e-6)
        q = traces_u.quadrature
        sel = (q.vertex == 0) & (q.r > 0.02 * ri) & (q.r < 0.2 * ri)
        full_slope = np.polyfit(np.log(q.r[sel]), np.log(np.abs(traces_u.dtau[sel])), 1)[0]
        assert full_slope == pytest.approx(spectrum2.gamma1(0) - 1.0, abs=0.2)


class TestPairing:
    def test_tangential_field_gives_zero(self, square, contrast2, traces_u):
        # per-edge tangential slide: h.nu = 0 on every edge
        h = PerturbationField(square, np.zeros((4, 2)))
        assert shape_derivative_pairing(contrast2, h, traces_u, traces_u) == 0.0

    def test_k1_pairing_zero(self, square, outer):
        mesh = generate_mesh(square, outer, hmax=0.05)
        c1 = Contrast.finite(1.0, k1_testing=True)
        u = solve_forward(mesh, c1, fourier_current(mesh, 1, "cos"))
        tr = boundary_gradients(u, mesh)
        h = dilation(square)
        assert shape_derivative_pairing(c1, h, tr, tr) == pytest.approx(0.0, abs=1e-14)

    def test_bilinearity_in_h(self, square, contrast2, traces_u):
        h1 = vertex_motion(square, 0, (1.0, 0.0))
        h2 = vertex_motion(square, 2, (0.0, 1.0))
        p1 = shape_derivative_pairing(contrast2, h1, traces_u, traces_u)
        p2 = shape_derivative_pairing(contrast2, h2, traces_u, traces_u)
        p12 = shape_derivative_pairing(contrast2, 2.0 * h1 + 3.0 * h2, traces_u, traces_u)
        assert p12 == pytest.approx(2 * p1 + 3 * p2, rel=1e-12)

    def test_sign_and_finite_difference_oracle(self, square, outer, contrast2,
                                               traces_u, mesh_002):
        """Central differences of re-solved perturbed polygons."""
        h = dilation(square)
        pair = shape_derivative_pairing(contrast2, h, traces_u, traces_u)
        t = 1e-3
        vals = []
        for tt in (t, -t):
            poly_t = deform(square, h, tt)
            mesh_t = generate_mesh(poly_t, outer, hmax=0.02, levels=7)
            u_t = solve_forward(mesh_t, contrast2, fourier_current(mesh_t, 1, "cos"))
            vals.append(boundary_trace(u_t).inner(fourier_current(mesh_t, 1, "cos")))
        fd = (vals[0] - vals[1]) / (2 * t)
        assert fd < 0  # enlarging a better conductor lowers <Lambda_f, f>
        assert pair == pytest.approx(fd, rel=0.02)


class TestBoundaryReconstruction:
    def test_zero_field(self, mesh_002, contrast2, traces_u, test_family, square):
        h0 = PerturbationField(square, np.zeros((4, 2)))
        out = shape_derivative_boundary(mesh_002, contrast2, traces_u, h0, test_family)
        assert out.norm() == 0.0

    def test_linearity(self, mesh_002, contrast2, traces_u, test_family, square):
        h1 = vertex_motion(square, 0, (1.0, 0.0))
        h2 = vertex_motion(square, 1, (0.0, 1.0))
        o1 = shape_derivative_boundary(mesh_002, contrast2, traces_u, h1, test_family)
        o2 = shape_derivative_boundary(mesh_002, contrast2, traces_u, h2, test_family)
        o12 = shape_derivative_boundary(
            mesh_002, contrast2, traces_u, 2.0 * h1 - 1.5 * h2, test_family
        )
        np.testing.assert_allclose(o12.values, 2 * o1.values - 1.5 * o2.values, atol=1e-12)

    def test_agreement_with_material_route(self, mesh_002, square, contrast2,
                                           solver_002, forward_002, traces_u,
                                           test_family, ext_geometry):
        h = vertex_motion(square, 0, (1.0, 1.0))
        dlam = shape_derivative_boundary(mesh_002, contrast2, traces_u, h, test_family)
        H = extend_field(h, geometry=ext_geometry)
        udot = solve_material(mesh_002, contrast2, forward_002, H, solver=solver_002)
        tr = boundary_trace(udot)
        assert distance_l2(dlam, tr) / tr.norm() < 0.03


class TestMaterialAndDomainDerivative:
    def test_h_zero_gives_zero(self, mesh_002, contrast2, forward_002, solver_002,
                               square, ext_geometry):
        H0 = extend_field(PerturbationField(square, np.zeros((4, 2))),
                          geometry=ext_geometry)
        udot = solve_material(mesh_002, contrast2, forward_002, H0, solver=solver_002)
        assert np.abs(udot.dof_values).max() == 0.0

    def test_deformation_matrix_bound(self, square, ext_geometry, mesh_002):
        from polyshape.fem_core import deformation_matrix

        h = vertex_motion(square, 0, (1.0, 1.0))
        H = extend_field(h, geometry=ext_geometry)
        pts = mesh_002.nodes[mesh_002.triangles].mean(axis=1)
        A = deformation_matrix(H.jacobian(pts))
        assert np.linalg.norm(A, ord=2, axis=(1, 2)).max() <= 4 * H.norm_w1inf + 1e-9

    def test_extension_independence(self, mesh_002, square, contrast2, solver_002,
                                    forward_002, ext_geometry):
        """Two different valid extensions of the same h give the same trace."""
        from polyshape.geometry import ExtensionGeometry

        h = vertex_motion(square, 0, (1.0, 1.0))
        H1 = extend_field(h, geometry=ext_geometry)
        geo2 = ExtensionGeometry(square, buffer_fraction=0.25)
        H2 = extend_field(h, geometry=geo2)
        t1 = boundary_trace(solve_material(mesh_002, contrast2, forward_002, H1,
                                           solver=solver_002))
        t2 = boundary_trace(solve_material(mesh_002, contrast2, forward_002, H2,
                                           solver=solver_002))
        # H2's rings are not mesh-conforming, so allow a larger quadrature gap
        assert distance_l2(t1, t2) / t1.norm() < 0.05

    def test_domain_derivative_far_field(self, mesh_002, square, contrast2,
                                         solver_002, forward_002, ext_geometry):
        h = vertex_motion(square, 0, (1.0, 1.0))
        H = extend_field(h, geometry=ext_geometry)
        udot = solve_material(mesh_002, contrast2, forward_002, H, solver=solver_002)
        uprime = domain_derivative(udot, forward_002, H)
        far = np.hypot(*mesh_002.nodes.T) > 0.85
        gap = uprime.dof_values[: len(mesh_002.nodes)][far] - udot.dof_values[
            : len(mesh_002.nodes)][far]
        assert np.abs(gap).max() == 0.0

    def test_domain_derivative_jump(self, mesh_002, square, contrast2, solver_002,
                                    forward_002, ext_geometry, spectrum2, fits_002):
        """[u'] = (1-k)(h.nu) dnu(u-) at mid-edge interface nodes, in L2."""
        h = vertex_motion(square, 0, (1.0, 1.0))
        H = extend_field(h, geometry=ext_geometry)
        udot = solve_material(mesh_002, contrast2, forward_002, H, solver=solver_002)
        uprime = domain_derivative(udot, forward_002, H)
        tp = mesh_002.twin_pairs
        jump = uprime.dof_values[tp[:, 0]] - uprime.dof_values[tp[:, 1]]
        ev = TraceEvaluator(mesh_002, forward_002, spectrum2, fits_002)
        node_pos = {}
        for e, chain in enumerate(mesh_002.interface_chains):
            start = square.vertices[e - 1]
            svals = (mesh_002.nodes[chain] - start) @ square.tangents[e]
            for nid, s in zip(chain, svals):
                node_pos[int(nid)] = (e, float(s))
        got, want = [], []
        for row, (plus, _minus) in enumerate(tp):
            e, s = node_pos[int(plus)]
            L = square.edge_lengths[e]
            if min(s, L - s) < 0.25 * L:
                continue
            _, dnum, _ = ev.values(e, np.array([s]))
            hnu = h.h_dot_nu(e, np.array([s]))[0]
            got.append(jump[row])
            want.append((1 - contrast2.k) * hnu * dnum[0])
        got, want = np.asarray(got), np.asarray(want)
        rel = np.linalg.norm(got - want) / np.linalg.norm(want)
        assert rel < 0.05

    def test_neumann_residual_on_outer_boundary(self, mesh_002, contrast2,
                                                solver_002, forward_002, square,
                                                ext_geometry):
        """Discrete flux functional of udot vanishes on the outer boundary."""
        from polyshape.fem_core import assemble_stiffness, material_load

        h = vertex_motion(square, 0, (1.0, 1.0))
        H = extend_field(h, geometry=ext_geometry)
        udot = solve_material(mesh_002, contrast2, forward_002, H, solver=solver_002)
        K = assemble_stiffness(mesh_002, solver_002.sigma)
        resid = K @ udot.dof_values - material_load(mesh_002, contrast2, forward_002, H)
        # remove the multiplier component along the mean-constraint row
        from polyshape.fem_core import boundary_weights

        bw = boundary_weights(mesh_002)
        resid = resid - bw * (bw @ resid) / (bw @ bw)
        rng = np.random.default_rng(8)
        for _ in range(5):
            w = np.zeros(mesh_002.n_dofs)
            w[mesh_002.boundary_loop] = rng.standard_normal(len(mesh_002.boundary_loop))
            w -= bw * (bw @ w) / (bw @ bw)
            assert abs(w @ resid) < 1e-8 * max(1.0, np.linalg.norm(w))


class TestTaylor:
    def test_zero_t_row(self, square, outer, contrast2):
        h = dilation(square)
        rows, slope = taylor_remainder(
            square, outer, contrast2, (1, "cos"), h, [0.0, 0.05], hmax=0.04,
            mesh_kwargs={"levels": 5},
        )
        assert rows[0] == (0.0, 0.0)

    def test_remainder_symmetry_in_t_and_h(self, square, outer, contrast2):
        """remainder(t, 2h) equals remainder(2t, h): same perturbed domain."""
        h = vertex_motion(square, 0, (0.5, 0.5))
        rows_a, _ = taylor_remainder(
            square, outer, contrast2, (1, "cos"), 2.0 * h, [0.02], hmax=0.03,
            mesh_kwargs={"levels": 5},
        )
        rows_b, _ = taylor_remainder(
            square, outer, contrast2, (1, "cos"), h, [0.04], hmax=0.03,
            mesh_kwargs={"levels": 5},
        )
        assert rows_a[0][1] == pytest.approx(rows_b[0][1], rel=0.2)

    def test_slope_near_two(self, square, outer, contrast2):
        h = vertex_motion(square, 0, (0.70710678, 0.70710678))
        rows, slope = taylor_remainder(
            square, outer, contrast2, (1, "cos"), h, [0.08, 0.04, 0.02],
            hmax=0.02, mesh_kwargs={"levels": 6},
        )
        assert 1.7 <= slope <= 2.3


class TestDegenerateReduction:
    def test_insulating_limit_of_small_k(self, square, outer):
        """The k -> 0 tangential pairing term approaches the insulating
        pairing (continuity sanity; trend, not a theorem)."""
        h = vertex_motion(square, 0, (1.0, 1.0))
        values = {}
        for contrast in (Contrast.finite(1e-4), Contrast.insulating()):
            mesh = generate_mesh(square, outer, hmax=0.012, levels=8)
            solver = ForwardSolver(mesh, contrast)
            u = solver.solve_current(fourier_current(mesh, 1, "cos"))
            spectrum = build_spectrum(square.alphas, contrast)
            fits = corner_probe_fits(mesh, square, spectrum, u)
            tr = boundary_gradients(u, mesh, spectrum, fits=fits)
            q = tr.quadrature
            hn = q.h_dot_nu(h)
            # tangential term of the pairing only
            tang = float(np.sum(q.w_singular * hn * tr.dtau**2))
            factor = 1.0 - contrast.k if contrast.is_finite else 1.0
            values[contrast.kind] = factor * tang
        assert values["finite"] == pytest.approx(values["insulating"], rel=0.02)


class TestNormScan:
    def test_uniformity_over_jitter(self, square, outer, contrast2):
        rng = np.random.default_rng(12)
        polys = [square]
        for _ in range(2):
            jitter = rng.uniform(-0.02, 0.02, size=(4, 2))
            polys.append(build_polygon(square.vertices + jitter, outer=outer))

        def basis(poly):
            from polyshape.geometry import coordinate_motion

            return [coordinate_motion(poly, v, ax) for v in range(poly.n) for ax in (0, 1)]

        norms = derivative_norm_scan(polys, outer, contrast2, (1, "cos"), basis,
                                     hmax=0.04, n_modes=4)
        assert norms.max() / norms.min() < 1.5
        assert (norms > 0).all()
