"""Meshes, tangent atlases and gauge-equivariant convolutions."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from equivar import gauge_mesh as GM
from equivar.errors import KernelConstraintViolated, NonManifold

RNG = np.random.default_rng(2718)


class TestMeshes:
    def test_icosahedron(self):
        ico = GM.icosahedron()
        assert ico.n_vertices == 12 and len(ico.faces) == 20
        assert np.max(np.abs(np.linalg.norm(ico.vertices, axis=1) - 1.0)) < 1e-12

    def test_icosphere_counts(self):
        assert GM.icosphere(1).n_vertices == 42
        assert GM.icosphere(2).n_vertices == 162

    def test_random_sphere_mesh(self):
        mesh = GM.random_sphere_mesh(200, RNG)
        assert mesh.n_vertices == 200
        GM.build_atlas(mesh)  # must be manifold and orientable

    def test_degenerate_face_rejected(self):
        with pytest.raises(NonManifold):
            GM.TriMesh(np.array([[0, 0, 0], [1, 0, 0], [2, 0, 0]]), np.array([[0, 1, 2]]))

    def test_split_fan_rejected(self):
        # two triangles sharing only one vertex: fan at vertex 0 splits
        verts = np.array(
            [[0, 0, 0], [1, 0, 0], [0, 1, 0], [-1, 0, 0.2], [0, -1, 0.2]], dtype=float
        )
        faces = np.array([[0, 1, 2], [0, 3, 4]])
        with pytest.raises(NonManifold):
            GM.TriMesh(verts, faces).vertex_rings()


class TestAtlas:
    def test_flat_mesh_normals(self):
        atlas = GM.build_atlas(GM.flat_grid_mesh(5, 4))
        normals = atlas.frames[:, 2]
        assert np.max(np.abs(normals - normals[0])) == 0.0

    def test_icosahedron_rings(self):
        atlas = GM.build_atlas(GM.icosahedron())
        assert all(len(r) == 5 for r in atlas.rings)

    def test_deterministic(self):
        mesh = GM.random_sphere_mesh(80, np.random.default_rng(5), jitter=0.02)
        a1, a2 = GM.build_atlas(mesh), GM.build_atlas(mesh)
        assert np.array_equal(a1.frames, a2.frames)
        assert all(np.array_equal(x, y) for x, y in zip(a1.angle, a2.angle))
        assert a1.transport == a2.transport

    def test_frames_orthonormal(self):
        atlas = GM.build_atlas(GM.random_sphere_mesh(100, RNG))
        for F in atlas.frames:
            assert np.max(np.abs(F @ F.T - np.eye(3))) < 1e-12


class TestLogMap:
    def test_hex_ring_angles(self):
        atlas = GM.build_atlas(GM.hex_one_ring())
        th = np.sort(atlas.angle[0])
        gaps = np.diff(np.concatenate([th, [th[0] + 2 * math.pi]]))
        assert_allclose(gaps, math.pi / 3, atol=1e-12)
        assert_allclose(atlas.radius[0], 1.0, atol=1e-12)

    def test_flat_radius_is_edge_length(self):
        mesh = GM.flat_grid_mesh(4, 4, spacing=0.7)
        atlas = GM.build_atlas(mesh)
        for i in range(mesh.n_vertices):
            for j, r, _ in atlas.neighbours(i):
                assert abs(r - np.linalg.norm(mesh.vertices[j] - mesh.vertices[i])) < 1e-12

    def test_normalized_angle_sum(self):
        mesh = GM.random_sphere_mesh(60, RNG)
        atlas = GM.build_atlas(mesh)
        rings, closed = mesh.vertex_rings(with_flags=True)
        for i in range(mesh.n_vertices):
            if not closed[i]:
                continue
            th = np.sort(atlas.angle[i])
            total = np.sum(np.diff(np.concatenate([th, [th[0] + 2 * math.pi]])))
            assert abs(total - 2 * math.pi) < 1e-10


class TestTransport:
    def test_flat_aligned_frames_zero(self):
        atlas = GM.build_atlas(GM.flat_grid_mesh(5, 5))
        for phi in atlas.transport.values():
            assert abs(np.exp(1j * phi) - 1.0) < 1e-12

    def test_antisymmetry(self):
        atlas = GM.build_atlas(GM.random_sphere_mesh(150, RNG))
        for (j, i), phi in atlas.transport.items():
            assert abs(np.exp(1j * atlas.transport[(i, j)]) - np.conj(np.exp(1j * phi))) < 1e-12

    def test_frame_rotation_shifts_transport(self):
        # rotating the frame at j by +delta shifts phi_{j->i} by +delta
        # (the sign convention the gauge audit then certifies end to end)
        atlas = GM.build_atlas(GM.flat_grid_mesh(5, 5))
        j = 12
        delta = 0.7
        angles = np.zeros(25)
        angles[j] = delta
        rotated = GM.rotate_frames(atlas, angles)
        for (jj, ii), phi in atlas.transport.items():
            if jj == j and ii != j:
                shift = (rotated.transport[(jj, ii)] - phi) % (2 * math.pi)
                assert abs(shift - delta) < 1e-12


class TestHarmonicConv:
    def test_zero_input(self):
        atlas = GM.build_atlas(GM.icosahedron())
        out = GM.harmonic_conv(atlas, np.zeros(12, dtype=complex), 1.0, 0.0, 1, 0)
        assert np.max(np.abs(out)) == 0.0

    def test_flat_symmetric_ring_order_zero(self):
        # m = 0, constant radial profile, constant input: the phase-free sum
        atlas = GM.build_atlas(GM.hex_one_ring())
        f = np.full(7, 2.0 + 0.0j)
        out = GM.harmonic_conv(atlas, f, 1.0, 0.0, 0, 0)
        expect = 2.0 * np.sum(atlas.weights[atlas.rings[0]])
        assert abs(out[0] - expect) < 1e-12

    def test_single_vertex_phase_law(self):
        atlas = GM.build_atlas(GM.icosahedron())
        f = RNG.standard_normal(12) + 1j * RNG.standard_normal(12)
        m = 2
        out = GM.harmonic_conv(atlas, f, lambda r: np.exp(-r), 0.2, m, 0)
        phi = 0.9
        angles = np.zeros(12)
        angles[3] = phi
        out2 = GM.harmonic_conv(GM.rotate_frames(atlas, angles), f,
                                lambda r: np.exp(-r), 0.2, m, 0)
        assert abs(out2[3] - out[3] * np.exp(-1j * m * phi)) < 1e-12
        mask = np.ones(12, dtype=bool)
        mask[3] = False
        assert np.max(np.abs((out2 - out)[mask])) == 0.0

    @pytest.mark.parametrize("mesh_fn", [GM.icosahedron, lambda: GM.random_sphere_mesh(200, RNG)])
    def test_gauge_phase_law(self, mesh_fn):
        mesh = mesh_fn()
        atlas = GM.build_atlas(mesh)
        V = mesh.n_vertices
        f = RNG.standard_normal(V) + 1j * RNG.standard_normal(V)
        m, m_in, beta = 1, 1, 0.37
        radial = lambda r: np.exp(-r)
        out = GM.harmonic_conv(atlas, f, radial, beta, m, m_in)
        for _ in range(5):
            delta = RNG.uniform(0, 2 * math.pi, V)
            rotated = GM.rotate_frames(atlas, delta)
            out2 = GM.harmonic_conv(rotated, f * np.exp(-1j * m_in * delta),
                                    radial, beta, m, m_in)
            residual = np.max(np.abs(out2 - out * np.exp(-1j * (m + m_in) * delta)))
            assert residual < 1e-10


class TestGemConv:
    def setup_method(self, method):
        self.mesh = GM.icosahedron()
        self.atlas = GM.build_atlas(self.mesh)
        self.orders_in = [0, 1, -1]
        self.orders_out = [0, 1, 2]
        coeffs = RNG.standard_normal((3, 3)) + 1j * RNG.standard_normal((3, 3))
        self.knb = GM.circular_harmonic_matrix_kernel(coeffs, self.orders_out, self.orders_in)
        self.kself = np.zeros((3, 3), dtype=complex)
        self.kself[0, 0] = 0.5 + 0.1j
        self.kself[1, 1] = -0.3j
        self.f = RNG.standard_normal((12, 3)) + 1j * RNG.standard_normal((12, 3))

    def test_zero_neighbour_kernel_is_self_interaction(self):
        zero = GM.circular_harmonic_matrix_kernel(
            np.zeros((3, 3)), self.orders_out, self.orders_in
        )
        out = GM.gem_conv(self.atlas, self.f, self.orders_in, self.orders_out,
                          self.kself, zero)
        assert np.max(np.abs(out - self.f @ self.kself.T)) < 1e-14

    def test_isotropic_reduces_to_graph_conv(self):
        iso = GM.circular_harmonic_matrix_kernel(np.array([[1.3]]), [0], [0])
        f0 = RNG.standard_normal((12, 1))
        out = GM.gem_conv(self.atlas, f0, [0], [0], np.array([[0.7]]), iso)
        w = self.atlas.weights
        manual = np.array(
            [
                0.7 * f0[i, 0]
                + 1.3 * sum(w[int(j)] * f0[int(j), 0] for j in self.atlas.rings[i])
                for i in range(12)
            ]
        )
        assert np.max(np.abs(out[:, 0] - manual)) < 1e-13

    def test_gauge_equivariance(self):
        out = GM.gem_conv(self.atlas, self.f, self.orders_in, self.orders_out,
                          self.kself, self.knb)
        for _ in range(20):
            delta = RNG.uniform(0, 2 * math.pi, 12)
            rotated = GM.rotate_frames(self.atlas, delta)
            f2 = self.f * np.exp(-1j * np.outer(delta, self.orders_in))
            out2 = GM.gem_conv(rotated, f2, self.orders_in, self.orders_out,
                               self.kself, self.knb, check_kernel=False)
            expect = out * np.exp(-1j * np.outer(delta, self.orders_out))
            assert np.max(np.abs(out2 - expect)) < 1e-10

    def test_unconstrained_kernel_rejected(self):
        bad = lambda theta: np.ones((3, 3), dtype=complex)
        with pytest.raises(KernelConstraintViolated):
            GM.gem_conv(self.atlas, self.f, self.orders_in, self.orders_out,
                        np.zeros((3, 3)), bad)

    def test_order_mixing_self_kernel_rejected(self):
        with pytest.raises(KernelConstraintViolated):
            GM.gem_conv(self.atlas, self.f, self.orders_in, self.orders_out,
                        np.ones((3, 3)), self.knb, check_kernel=False)
