"""Polygons, perturbation fields, extensions, meshes."""

import numpy as np
import pytest

from polyshape.geometry import (
    CollinearVertex,
    DegeneratePerturbation,
    ExtensionGeometry,
    NotInsideOuterDomain,
    OuterDomain,
    PerturbationField,
    SelfIntersection,
    build_polygon,
    deform,
    dilation,
    edge_normal,
    extend_field,
    generate_mesh,
    read_mesh,
    vertex_motion,
    write_mesh,
)


class TestPolygon:
    def test_right_triangle_angles(self):
        tri = build_polygon([(0, 0), (1, 0), (0, 1)])
        assert tri.alphas[0] == pytest.approx(np.pi / 2)
        assert tri.alphas[1] == pytest.approx(np.pi / 4)
        assert tri.alphas[2] == pytest.approx(np.pi / 4)
        assert tri.alphas.sum() == pytest.approx(np.pi, abs=1e-12)

    def test_square_angles(self):
        sq = build_polygon([(0.3, 0.3), (-0.3, 0.3), (-0.3, -0.3), (0.3, -0.3)])
        np.testing.assert_allclose(sq.alphas, np.pi / 2, atol=1e-14)

    def test_clockwise_input_normalized(self):
        ccw = build_polygon([(0, 0), (1, 0), (0, 1)])
        cw = build_polygon([(0, 0), (0, 1), (1, 0)])
        assert cw.area > 0
        np.testing.assert_allclose(np.sort(cw.alphas), np.sort(ccw.alphas))

    def test_angle_sum_identity_random_polygons(self):
        rng = np.random.default_rng(5)
        for n in (3, 4, 5, 6, 8):
            for _ in range(5):
                angles = np.sort(rng.uniform(0, 2 * np.pi, n))
                radii = rng.uniform(0.5, 1.0, n)
                pts = np.stack([radii * np.cos(angles), radii * np.sin(angles)], axis=1)
                try:
                    poly = build_polygon(pts)
                except Exception:
                    continue
                assert poly.alphas.sum() == pytest.approx((n - 2) * np.pi, abs=1e-10)

    def test_nonconvex_polygon_reflex_angle(self):
        poly = build_polygon([(0, 0), (2, 0), (2, 2), (1, 0.5), (0, 2)])
        assert np.sum(poly.alphas > np.pi) == 1
        assert poly.alphas.sum() == pytest.approx(3 * np.pi, abs=1e-10)

    def test_rejections(self):
        with pytest.raises(SelfIntersection):
            build_polygon([(0, 0), (1, 1), (1, 0), (0, 1)])  # bowtie
        with pytest.raises(CollinearVertex):
            build_polygon([(0, 0), (1, 0), (2, 0), (1, 1)])
        with pytest.raises(NotInsideOuterDomain):
            build_polygon([(0, 0), (3, 0), (0, 3)], outer=OuterDomain.disk(1.0))

    def test_cutoff_disks_disjoint_and_inside(self, square, outer):
        r = square.radii
        v = square.vertices
        for i in range(4):
            assert outer.distance_to_boundary(v[i])[0] > r[i]
            for j in range(i + 1, 4):
                assert np.hypot(*(v[i] - v[j])) > r[i] + r[j]

    def test_local_polar_frames(self, square):
        # theta = 0 along the outgoing edge, alpha along the incoming one
        for i in range(4):
            nxt = square.vertices[(i + 1) % 4]
            prv = square.vertices[i - 1]
            r, th = square.local_polar(i, [0.9 * square.vertices[i] + 0.1 * nxt])
            wrapped = min(th[0], 2 * np.pi - th[0])  # 0 and 2*pi coincide
            assert wrapped == pytest.approx(0.0, abs=1e-12)
            r, th = square.local_polar(i, [0.9 * square.vertices[i] + 0.1 * prv])
            assert th[0] == pytest.approx(square.alphas[i], abs=1e-12)


class TestDeform:
    def test_t_zero_identity(self, square):
        h = dilation(square)
        d = deform(square, h, 0.0)
        np.testing.assert_allclose(d.vertices, square.vertices)

    def test_dilation_scales_about_barycenter(self, square):
        h = dilation(square)
        d = deform(square, h, 0.1)
        np.testing.assert_allclose(d.vertices, 1.1 * square.vertices, atol=1e-14)

    def test_vertex_motion_angles_recomputed(self, square):
        """Angles of the deformed polygon match direct recomputation."""
        diag = (square.vertices[0] - square.barycenter)
        diag /= np.hypot(*diag)
        h = vertex_motion(square, 0, diag)
        d = deform(square, h, 0.05)
        expected = build_polygon(square.vertices + 0.05 * h.vertex_values)
        np.testing.assert_allclose(d.alphas, expected.alphas, atol=1e-14)
        assert np.sum(np.abs(d.alphas - square.alphas) > 1e-12) == 3

    def test_degenerate_rejected(self, square):
        h = vertex_motion(square, 0, (-1.0, -1.0))
        with pytest.raises(DegeneratePerturbation):
            deform(square, h, 1.2)  # vertex pushed through the far corner


class TestPerturbationField:
    def test_vertex_limits(self, square):
        h = vertex_motion(square, 0, (1.0, 1.0))
        h_minus, h_plus = h.vertex_limits
        nu_in = square.normals[0]  # edge arriving at vertex 0
        nu_out = square.normals[1]
        assert h_minus[0] == pytest.approx(np.dot((1, 1), nu_in))
        assert h_plus[0] == pytest.approx(np.dot((1, 1), nu_out))
        assert np.abs(h_minus[1:]).max() == 0.0

    def test_h_dot_nu_affine(self, square):
        h = vertex_motion(square, 1, (0.5, -0.2))
        e = 1  # edge from vertex 0 to vertex 1
        s = np.linspace(0, square.edge_lengths[e], 7)
        vals = h.h_dot_nu(e, s)
        # affine means second differences vanish
        assert np.abs(np.diff(vals, 2)).max() < 1e-12

    def test_norm(self, square):
        h = dilation(square)
        # |h| peaks at the corners (0.3*sqrt(2)), slope 1 along each edge
        assert h.norm_w1inf == pytest.approx(0.3 * np.sqrt(2) + 1.0)


class TestExtension:
    def test_zero_field(self, square, ext_geometry):
        h0 = PerturbationField(square, np.zeros((4, 2)))
        H = extend_field(h0, geometry=ext_geometry)
        pts = np.random.default_rng(0).uniform(-0.9, 0.9, size=(50, 2))
        assert np.abs(H.evaluate(pts)).max() == 0.0

    def test_trace_identity_on_edge_samples(self, square, ext_geometry):
        h = edge_normal(square, 2)
        H = extend_field(h, geometry=ext_geometry)
        for e in range(4):
            s = np.linspace(1e-6, square.edge_lengths[e] - 1e-6, 50)
            pts = square.edge_point(e, s)
            np.testing.assert_allclose(H.evaluate(pts), h.on_edge(e, s), atol=1e-10)

    def test_vanishes_on_buffers_and_beyond(self, square, ext_geometry):
        h = dilation(square)
        H = extend_field(h, geometry=ext_geometry)
        inner_sample = ext_geometry.inner_vertices.mean(axis=0)  # deep inside D1
        assert np.abs(H.evaluate([inner_sample])).max() < 1e-14
        assert np.abs(H.evaluate([(0.9, 0.0), (-0.85, 0.3)])).max() == 0.0

    def test_linearity_pointwise(self, square, ext_geometry):
        h1 = vertex_motion(square, 0, (1.0, 0.0))
        h2 = vertex_motion(square, 2, (0.0, 1.0))
        H1 = extend_field(h1, geometry=ext_geometry)
        H2 = extend_field(h2, geometry=ext_geometry)
        H12 = extend_field(2.0 * h1 + 3.0 * h2, geometry=ext_geometry)
        rng = np.random.default_rng(1)
        pts = rng.uniform(-0.5, 0.5, size=(200, 2))
        np.testing.assert_allclose(
            H12.evaluate(pts), 2 * H1.evaluate(pts) + 3 * H2.evaluate(pts), atol=1e-12
        )

    def test_jacobian_against_finite_differences(self, square, ext_geometry):
        """Dense-sampling oracle: DH from central differences of H."""
        h = dilation(square)
        H = extend_field(h, geometry=ext_geometry)
        rng = np.random.default_rng(2)
        # points safely inside the outer ring, away from zone boundaries
        mids = []
        for e in range(4):
            x0, x1, y0, y1 = ext_geometry._ring_corners(e, "out")
            mids.append(0.25 * (x0 + x1 + y0 + y1))
        pts = np.asarray(mids)
        eps = 1e-7
        DH = H.jacobian(pts)
        for d, vec in ((0, np.array([eps, 0])), (1, np.array([0, eps]))):
            fd = (H.evaluate(pts + vec) - H.evaluate(pts - vec)) / (2 * eps)
            np.testing.assert_allclose(DH[:, :, d], fd, atol=1e-6)

    def test_constant_field_bound(self, square, ext_geometry):
        c = np.array([0.3, -0.1])
        h = PerturbationField(square, np.tile(c, (4, 1)))
        H = extend_field(h, geometry=ext_geometry)
        assert H.extension_constant >= 1.0
        # sampled sup of |H| cannot exceed sup |h| (convex combination times c <= 1)
        assert H._sup_value <= np.hypot(*c) + 1e-12

    def test_extension_constant_reported(self, square, ext_geometry):
        h = vertex_motion(square, 0, (1.0, 1.0))
        H = extend_field(h, geometry=ext_geometry)
        assert H.norm_w1inf <= H.extension_constant * h.norm_w1inf + 1e-12


class TestMesh:
    def test_conformity_exhaustive(self, mesh_002):
        edges = set()
        for t in mesh_002.triangles:
            for k in range(3):
                a, b = int(t[k]), int(t[(k + 1) % 3])
                edges.add((min(a, b), max(a, b)))
        for chain in mesh_002.interface_chains:
            for a, b in zip(chain[:-1], chain[1:]):
                assert (min(a, b), max(a, b)) in edges

    def test_positive_areas_and_quality(self, mesh_002):
        assert (mesh_002.tri_areas > 0).all()
        assert np.degrees(mesh_002.quality_min_angle(exclude_fans=True)) >= 20.0

    def test_region_tags_match_point_in_polygon(self, mesh_002, square):
        bary = mesh_002.nodes[mesh_002.triangles].mean(axis=1)
        np.testing.assert_array_equal(
            mesh_002.tri_region.astype(bool), square.contains(bary)
        )

    def test_grading_smallest_edge(self, square, outer):
        mesh = generate_mesh(square, outer, hmax=0.1, grading=0.5, levels=5)
        lens = [
            np.hypot(*(mesh.nodes[b] - mesh.nodes[a]))
            for chain in mesh.interface_chains
            for a, b in zip(chain[:-1], chain[1:])
        ]
        target = 0.1 * 0.5**5
        assert target / 2 <= min(lens) <= target * 2

    def test_uniform_grading_is_uniform(self, square, outer):
        mesh = generate_mesh(square, outer, hmax=0.1, grading=1.0)
        lens = np.array([
            np.hypot(*(mesh.nodes[b] - mesh.nodes[a]))
            for chain in mesh.interface_chains
            for a, b in zip(chain[:-1], chain[1:])
        ])
        assert lens.min() > 0.03  # no corner refinement requested

    def test_duplication_pairs(self, mesh_002):
        iface = np.unique(np.concatenate(mesh_002.interface_chains))
        assert len(mesh_002.twin_pairs) == len(iface)
        coords = mesh_002.dof_coordinates()
        gap = coords[mesh_002.twin_pairs[:, 0]] - coords[mesh_002.twin_pairs[:, 1]]
        assert np.abs(gap).max() == 0.0

    def test_interface_edges_have_both_sides(self, mesh_002):
        assert len(mesh_002.interface_edge_tris) == len(mesh_002.interface_edges)

    def test_determinism(self, square, outer):
        m1 = generate_mesh(square, outer, hmax=0.08, seed=4)
        m2 = generate_mesh(square, outer, hmax=0.08, seed=4)
        assert np.array_equal(m1.nodes, m2.nodes)
        assert np.array_equal(m1.triangles, m2.triangles)
        m3 = generate_mesh(square, outer, hmax=0.08, seed=5)
        assert m3.nodes.shape != m1.nodes.shape or not np.array_equal(m3.nodes, m1.nodes)

    def test_rectangle_outer_domain(self, square):
        rect = OuterDomain.rectangle(-1.2, -1.0, 1.2, 1.0)
        sq = build_polygon(
            [(0.3, 0.3), (-0.3, 0.3), (-0.3, -0.3), (0.3, -0.3)], outer=rect
        )
        mesh = generate_mesh(sq, rect, hmax=0.1, grading=0.5, levels=4)
        assert (mesh.tri_areas > 0).all()
        # boundary nodes land on the rectangle
        assert np.all(np.abs(rect.distance_to_boundary(mesh.nodes[mesh.boundary_loop])) < 1e-9)

    def test_text_format_roundtrip(self, square, outer, tmp_path):
        mesh = generate_mesh(square, outer, hmax=0.15, grading=0.5, levels=3)
        path = tmp_path / "mesh.txt"
        write_mesh(mesh, path)
        first = path.read_text().splitlines()[0]
        assert first == "polyshape-mesh v1"
        data = read_mesh(path)
        np.testing.assert_allclose(data["nodes"], mesh.nodes)
        np.testing.assert_array_equal(data["triangles"][:, :3], mesh.triangles)
        np.testing.assert_array_equal(data["triangles"][:, 3], mesh.tri_region)
        assert len(data["interface"]) == len(mesh.interface_edges)
        assert len(data["boundary"]) == len(mesh.boundary_loop)
