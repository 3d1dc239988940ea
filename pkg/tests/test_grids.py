"""Quadrature grids and S2/SO(3) transforms."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from equivar import grids as G
from equivar import harmonics as H
from equivar.errors import ShapeMismatch

RNG = np.random.default_rng(77)


class TestS2Grid:
    def test_weights_sum_to_sphere_area(self):
        for L in (2, 5, 16):
            assert abs(np.sum(G.s2_grid(L).weights()) - 4 * math.pi) < 1e-10

    def test_weights_positive(self):
        for L in (2, 8, 16):
            assert np.all(G.s2_grid(L).theta_weights > 0)

    def test_quadrature_exactness(self):
        L = 8
        grid = G.s2_grid(L)
        th, ph = grid.nodes()
        w = grid.weights()
        for (l1, m1, l2, m2) in [
            (0, 0, 0, 0), (3, 2, 3, 2), (7, 7, 7, 7), (2, 1, 6, 1),
            (7, -3, 6, -3), (5, 0, 4, 0), (3, 3, 5, 2), (6, -6, 6, -6),
        ]:
            val = np.sum(w * np.conj(H.sph_harm(l1, m1, th, ph)) * H.sph_harm(l2, m2, th, ph))
            expect = 1.0 if (l1, m1) == (l2, m2) else 0.0
            assert abs(val - expect) < 1e-10


class TestS2Transforms:
    def test_constant_signal(self):
        L = 6
        grid = G.s2_grid(L)
        spec = G.s2_analysis(grid, np.full((2 * L, 2 * L, 1), 2.5))
        assert_allclose(spec.coeffs[0][0, 0], 2.5 * math.sqrt(4 * math.pi), atol=1e-10)
        assert max(np.max(np.abs(spec.coeffs[l])) for l in range(1, L)) < 1e-10

    def test_harmonic_indicator(self):
        L = 6
        grid = G.s2_grid(L)
        smp = H.sph_harm(2, 1, *grid.nodes())[:, :, None]
        spec = G.s2_analysis(grid, smp)
        assert abs(spec.coeffs[2][0, 3] - 1.0) < 1e-10
        others = [np.max(np.abs(spec.coeffs[l])) for l in range(L) if l != 2]
        others.append(np.max(np.abs(spec.coeffs[2][0, [0, 1, 2, 4]])))
        assert max(others) < 1e-10

    def test_zero_coeffs_zero_samples(self):
        L = 4
        smp = G.s2_synthesis(G.SpectralS2Signal.zeros(L, 2), G.s2_grid(L))
        assert np.max(np.abs(smp)) == 0.0

    def test_y10_closed_form(self):
        # f-hat^1_0 = 1 synthesizes sqrt(3/4pi) cos(theta)
        L = 4
        grid = G.s2_grid(L)
        spec = G.SpectralS2Signal.zeros(L, 1)
        spec.coeffs[1][0, 1] = 1.0
        smp = G.s2_synthesis(spec, grid)[..., 0]
        th, _ = grid.nodes()
        assert_allclose(smp, math.sqrt(3 / (4 * math.pi)) * np.cos(th), atol=1e-12)

    def test_round_trip(self):
        L = 16
        grid = G.s2_grid(L)
        spec = G.SpectralS2Signal.random(L, 3, RNG, real=True)
        back = G.s2_analysis(grid, G.s2_synthesis(spec, grid))
        assert (back - spec).max_abs() < 1e-10
        # idempotence of synthesis-analysis on bandlimited samples
        smp = G.s2_synthesis(spec, grid)
        again = G.s2_synthesis(G.s2_analysis(grid, smp), grid)
        assert np.max(np.abs(again - smp)) < 1e-10

    def test_real_signal_symmetry(self):
        spec = G.SpectralS2Signal.random(6, 2, RNG, real=True)
        assert spec.real_symmetry_error() < 1e-14
        smp = G.s2_synthesis(spec, G.s2_grid(6))
        assert np.max(np.abs(smp.imag)) < 1e-12

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            G.s2_analysis(G.s2_grid(4), np.zeros((5, 8, 1)))
        with pytest.raises(ShapeMismatch):
            G.s2_synthesis(G.SpectralS2Signal.zeros(6, 1), G.s2_grid(4))

    def test_parseval(self):
        L = 8
        grid = G.s2_grid(L)
        spec = G.SpectralS2Signal.random(L, 2, RNG, real=True)
        smp = G.s2_synthesis(spec, grid)
        spatial = np.sum(grid.weights()[:, :, None] * np.abs(smp) ** 2)
        assert abs(G.parseval_s2(spec) - spatial) < 1e-9


class TestSO3Transforms:
    def test_weights_total(self):
        assert abs(np.sum(G.so3_grid(8).weights()) - 8 * math.pi**2) < 1e-9

    def test_constant(self):
        L = 4
        grid = G.so3_grid(L)
        spec = G.so3_analysis(grid, np.full((2 * L,) * 3 + (1,), 1.7))
        assert abs(spec.coeffs[0][0, 0, 0] - 1.7) < 1e-9
        assert max(np.max(np.abs(spec.coeffs[l])) for l in range(1, L)) < 1e-9

    def test_wigner_indicator(self):
        # samples of D^1_{01} analyze to the single coefficient 1
        L = 4
        grid = G.so3_grid(L)
        spec1 = G.SpectralSO3Signal.zeros(L, 1)
        spec1.coeffs[1][0, 1, 2] = 1.0
        smp = G.so3_synthesis(spec1, grid)
        back = G.so3_analysis(grid, smp)
        assert abs(back.coeffs[1][0, 1, 2] - 1.0) < 1e-9
        total = sum(np.sum(np.abs(back.coeffs[l])) for l in range(L))
        assert abs(total - 1.0) < 1e-9

    def test_round_trip(self):
        L = 8
        grid = G.so3_grid(L)
        spec = G.SpectralSO3Signal.random(L, 2, RNG, real=True)
        back = G.so3_analysis(grid, G.so3_synthesis(spec, grid))
        assert (back - spec).max_abs() < 1e-9

    def test_parseval(self):
        L = 6
        grid = G.so3_grid(L)
        spec = G.SpectralSO3Signal.random(L, 1, RNG, real=True)
        smp = G.so3_synthesis(spec, grid)
        spatial = np.sum(grid.weights()[..., None] * np.abs(smp) ** 2)
        assert abs(G.parseval_so3(spec) - spatial) < 1e-9

    def test_orthogonality_factor(self):
        # grid integrates conj(D^l) D^l to 8 pi^2/(2l+1)
        L = 5
        grid = G.so3_grid(L)
        rots = grid.rotations()
        vals = G.so3_evaluate(
            _one_coeff_signal(L, 2, 1, -1), rots
        ).reshape(2 * L, 2 * L, 2 * L)
        integral = grid.integrate(np.abs(vals) ** 2)
        assert abs(integral - 8 * math.pi**2 / 5) < 1e-9

    def test_larger_bandlimits(self):
        # transforms stay exact well past the acceptance sizes
        g32 = G.s2_grid(32)
        s2 = G.SpectralS2Signal.random(32, 1, RNG, real=True)
        assert (G.s2_analysis(g32, G.s2_synthesis(s2, g32)) - s2).max_abs() < 1e-9
        g12 = G.so3_grid(12)
        s3 = G.SpectralSO3Signal.random(12, 1, RNG, real=True)
        assert (G.so3_analysis(g12, G.so3_synthesis(s3, g12)) - s3).max_abs() < 1e-9

    def test_dstack_disk_cache(self, tmp_path, monkeypatch):
        monkeypatch.setenv("EQUIVAR_CACHE_DIR", str(tmp_path))
        G.so3_grid.cache_clear()
        a = G.so3_grid(3)
        assert (tmp_path / "so3grid3_d2.npy").exists()
        G.so3_grid.cache_clear()
        b = G.so3_grid(3)  # reloaded from disk
        for l in range(3):
            assert np.array_equal(a.dstack[l], b.dstack[l])
        G.so3_grid.cache_clear()

    def test_evaluate_matches_synthesis(self):
        L = 3
        grid = G.so3_grid(L)
        spec = G.SpectralSO3Signal.random(L, 2, RNG, real=True)
        smp = G.so3_synthesis(spec, grid)
        vals = G.so3_evaluate(spec, grid.rotations()).reshape(2 * L, 2 * L, 2 * L, 2)
        assert np.max(np.abs(vals - smp)) < 1e-11


def _one_coeff_signal(L, ell, m, n):
    spec = G.SpectralSO3Signal.zeros(L, 1)
    spec.coeffs[ell][0, m + ell, n + ell] = 1.0
    return spec


class TestSpectralRotations:
    def test_identity(self):
        spec = G.SpectralS2Signal.random(5, 1, RNG, real=True)
        assert (G.rotate_spectral_s2(spec, H.IDENTITY) - spec).max_abs() == 0.0

    def test_commuting_square_s2(self):
        L = 8
        grid = G.s2_grid(L)
        spec = G.SpectralS2Signal.random(L, 2, RNG, real=True)
        g = H.random_rotation(RNG)
        R = H.rotation_matrix(g)
        th, ph = grid.nodes()
        xyz = H.angles_to_sph(th.ravel(), ph.ravel())
        tr, pr = H.sph_to_angles(xyz @ R)  # rows are R^-1 x
        rotated_samples = G.s2_evaluate(spec, tr, pr).reshape(2 * L, 2 * L, 2)
        a = G.s2_analysis(grid, rotated_samples)
        b = G.rotate_spectral_s2(spec, g)
        assert (a - b).max_abs() < 1e-10

    def test_rotation_homomorphism(self):
        spec = G.SpectralS2Signal.random(6, 1, RNG, real=True)
        g, h = H.random_rotation(RNG), H.random_rotation(RNG)
        a = G.rotate_spectral_s2(G.rotate_spectral_s2(spec, h), g)
        b = G.rotate_spectral_s2(spec, H.compose(g, h))
        assert (a - b).max_abs() < 1e-12

    def test_so3_identity(self):
        spec = G.SpectralSO3Signal.random(4, 1, RNG, real=True)
        assert (G.rotate_spectral_so3(spec, H.IDENTITY) - spec).max_abs() == 0.0

    def test_so3_left_translation(self):
        L = 4
        grid = G.so3_grid(L)
        spec = G.SpectralSO3Signal.random(L, 1, RNG, real=True)
        g = H.random_rotation(RNG)
        Rg = H.rotation_matrix(g)
        mats = grid.rotation_matrices().reshape(-1, 3, 3)
        al, be, ga = H.euler_from_matrices(np.einsum("ij,njk->nik", Rg.T, mats))
        vals = G.so3_evaluate_angles(spec, al, be, ga).reshape(2 * L, 2 * L, 2 * L, 1)
        a = G.so3_analysis(grid, vals)
        b = G.rotate_spectral_so3(spec, g)
        assert (a - b).max_abs() < 1e-10
        # homomorphism
        h = H.random_rotation(RNG)
        c = G.rotate_spectral_so3(G.rotate_spectral_so3(spec, h), g)
        d = G.rotate_spectral_so3(spec, H.compose(g, h))
        assert (c - d).max_abs() < 1e-12

    def test_isotropic_sphere_to_sphere_conv(self):
        # scalar kernels on S2 -> S2 must be zonal to be equivariant: a
        # zonal quadrature convolution commutes with rotations, an
        # anisotropic two-point kernel does not
        L = 6
        grid = G.s2_grid(L)
        th, ph = grid.nodes()
        xyz = H.angles_to_sph(th, ph).reshape(-1, 3)
        w = grid.weights().ravel()
        spec = G.SpectralS2Signal.random(L, 1, RNG, real=True)
        f = G.s2_synthesis(spec, grid).real[..., 0].ravel()
        # bandlimited zonal profile (degree < L keeps the quadrature exact)
        coeffs = RNG.standard_normal(L)
        zonal = lambda dots: np.polynomial.legendre.legval(dots, coeffs)

        def conv(samples, kernel_of_xy):
            return kernel_of_xy @ (w * samples)

        K_zonal = zonal(xyz @ xyz.T)
        g = H.random_rotation(RNG)
        R = H.rotation_matrix(g)
        tr, pr = H.sph_to_angles(xyz @ R)
        f_rot = G.s2_evaluate(spec, tr, pr).real[..., 0]
        out = conv(f, K_zonal)
        out_spec = G.s2_analysis(grid, out.reshape(2 * L, 2 * L, 1))
        out_rot_direct = conv(f_rot, K_zonal)
        out_rot_spec = G.s2_analysis(grid, out_rot_direct.reshape(2 * L, 2 * L, 1))
        assert (G.rotate_spectral_s2(out_spec, g) - out_rot_spec).max_abs() < 1e-9
        # anisotropic (non-zonal, still bandlimited) kernel: equivariance fails
        K_aniso = K_zonal * (1.0 + (xyz @ np.diag([1.0, 0.2, -0.7]) @ xyz.T))
        out_a = conv(f, K_aniso)
        out_a_spec = G.s2_analysis(grid, out_a.reshape(2 * L, 2 * L, 1))
        out_ar = conv(f_rot, K_aniso)
        out_ar_spec = G.s2_analysis(grid, out_ar.reshape(2 * L, 2 * L, 1))
        assert (G.rotate_spectral_s2(out_a_spec, g) - out_ar_spec).max_abs() > 1e-2
