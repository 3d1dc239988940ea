"""Special-function kernel: Wigner matrices, harmonics, Clebsch-Gordan."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from equivar import harmonics as H
from equivar.errors import NotARotation

RNG = np.random.default_rng(20240601)


class TestWignerSmallD:
    def test_trivial_irrep(self):
        for beta in (0.0, 0.4, math.pi):
            assert_allclose(H.wigner_d_small(0, beta), [[1.0]])

    def test_identity_at_zero(self):
        for ell in (1, 3, 7):
            assert_allclose(H.wigner_d_small(ell, 0.0), np.eye(2 * ell + 1), atol=1e-15)

    def test_l1_closed_form(self):
        # full d^1 matrix in closed form, m/n = -1, 0, 1
        beta = 0.7321
        c, s = math.cos(beta), math.sin(beta)
        ch2, sh2 = (1 + c) / 2.0, (1 - c) / 2.0
        expected = np.array(
            [
                [ch2, s / math.sqrt(2), sh2],
                [-s / math.sqrt(2), c, s / math.sqrt(2)],
                [sh2, -s / math.sqrt(2), ch2],
            ]
        )
        assert_allclose(H.wigner_d_small(1, beta), expected, atol=1e-14)

    def test_middle_entry_is_cos(self):
        for beta in RNG.uniform(0, math.pi, 5):
            assert_allclose(H.wigner_d_small(1, beta)[1, 1], math.cos(beta), atol=1e-14)

    def test_orthogonality(self):
        for ell in (1, 2, 5, 10, 16):
            d = H.wigner_d_small(ell, 1.234)
            assert_allclose(d @ d.T, np.eye(2 * ell + 1), atol=1e-12)

    def test_recurrence_matches_factorial_sum(self):
        # independent oracle: direct Wigner sum formula
        for beta in (0.21, 1.3, 2.9):
            for ell in range(11):
                d = H.wigner_d_small(ell, beta)
                ref = np.array(
                    [
                        [H._wigner_d_sum(ell, m, n, beta) for n in range(-ell, ell + 1)]
                        for m in range(-ell, ell + 1)
                    ]
                )
                assert_allclose(d, ref, atol=2e-13)

    def test_beta_array_vectorization(self):
        betas = RNG.uniform(0, math.pi, 7)
        stack = H.wigner_d_stack(4, betas)
        for i, b in enumerate(betas):
            single = H.wigner_d_stack(4, b)
            for ell in range(5):
                assert_allclose(stack[ell][i], single[ell], atol=1e-15)

    def test_stable_to_target_degree(self):
        # the recurrence stays orthogonal through the l = 64 target range
        beta = 1.0471
        d = H.wigner_d_stack(64, beta)
        for ell in (32, 64):
            err = np.max(np.abs(d[ell] @ d[ell].T - np.eye(2 * ell + 1)))
            assert err < 1e-11
        # composition at high degree through the full D blocks
        g = H.EulerZYZ(0.4, beta, 2.2)
        h = H.EulerZYZ(5.1, 0.8, 0.3)
        D1 = H.wigner_D(48, g) @ H.wigner_D(48, h)
        D2 = H.wigner_D(48, H.compose(g, h))
        assert np.max(np.abs(D1 - D2)) < 1e-10


class TestWignerD:
    def test_identity_rotation(self):
        for ell in (0, 1, 4):
            assert_allclose(H.wigner_D(ell, H.IDENTITY), np.eye(2 * ell + 1), atol=1e-15)

    def test_unitarity(self):
        for _ in range(20):
            g = H.random_rotation(RNG)
            for ell in (1, 8, 16):
                D = H.wigner_D(ell, g)
                assert np.max(np.abs(D @ D.conj().T - np.eye(2 * ell + 1))) < 1e-12

    def test_homomorphism(self):
        # composition of two random rotations equals the product of blocks
        for _ in range(10):
            g, h = H.random_rotation(RNG), H.random_rotation(RNG)
            gh = H.compose(g, h)
            for ell in (1, 5, 16):
                err = np.max(
                    np.abs(H.wigner_D(ell, gh) - H.wigner_D(ell, g) @ H.wigner_D(ell, h))
                )
                assert err < 1e-12

    def test_conjugation_symmetry(self):
        # conj(D_mn) = (-1)^(n-m) D_{-m,-n}
        for ell in (1, 3, 8):
            g = H.random_rotation(RNG)
            D = H.wigner_D(ell, g)
            m = np.arange(-ell, ell + 1)
            flipped = (-1.0) ** (m[None, :] - m[:, None]) * D[::-1, ::-1]
            assert_allclose(np.conj(D), flipped, atol=1e-13)

    def test_zonal_column_is_harmonic(self):
        # D^l_{m0}(alpha, beta, 0) = sqrt(4 pi / (2l+1)) conj(Y^l_m(beta, alpha))
        g = H.EulerZYZ(0.81, 1.17, 0.0)
        for ell in (1, 2, 5):
            D = H.wigner_D(ell, g)
            for m in range(-ell, ell + 1):
                y = H.sph_harm(ell, m, g.beta, g.alpha)
                ref = math.sqrt(4 * math.pi / (2 * ell + 1)) * np.conj(y)
                assert_allclose(D[m + ell, ell], ref, atol=1e-13)


class TestSphericalHarmonics:
    def test_y00_value(self):
        # 1/sqrt(4 pi); the normalization integral is checked in grids tests
        assert_allclose(H.sph_harm(0, 0, 0.3, 1.2), 0.28209479177387814, atol=1e-15)

    def test_against_scipy(self):
        from scipy.special import sph_harm_y

        th = RNG.uniform(0, math.pi, 20)
        ph = RNG.uniform(0, 2 * math.pi, 20)
        for ell in range(7):
            for m in range(-ell, ell + 1):
                assert_allclose(
                    H.sph_harm(ell, m, th, ph), sph_harm_y(ell, m, th, ph), atol=1e-13
                )

    def test_conjugation_identity(self):
        # standard Condon-Shortley identity conj(Y_m) = (-1)^m Y_{-m}; the
        # (-1)^l variant does not hold (see docs/conventions.md)
        th = RNG.uniform(0, math.pi, 10)
        ph = RNG.uniform(0, 2 * math.pi, 10)
        for ell in (1, 2, 5):
            for m in range(-ell, ell + 1):
                lhs = np.conj(H.sph_harm(ell, m, th, ph))
                assert_allclose(lhs, (-1.0) ** m * H.sph_harm(ell, -m, th, ph), atol=1e-14)
        bad = np.max(
            np.abs(
                np.conj(H.sph_harm(2, 1, th, ph)) - (-1.0) ** 2 * H.sph_harm(2, -1, th, ph)
            )
        )
        assert bad > 0.1

    def test_rotation_rule(self):
        # Y_m(R x) = sum_n conj(D_mn(R)) Y_n(x)
        th = RNG.uniform(0.05, math.pi - 0.05, 15)
        ph = RNG.uniform(0, 2 * math.pi, 15)
        xyz = H.angles_to_sph(th, ph)
        for _ in range(5):
            g = H.random_rotation(RNG)
            R = H.rotation_matrix(g)
            tr, pr = H.sph_to_angles(xyz @ R.T)
            for ell in (1, 4, 8):
                D = H.wigner_D(ell, g)
                Y = np.stack([H.sph_harm(ell, n, th, ph) for n in range(-ell, ell + 1)])
                Yr = np.stack([H.sph_harm(ell, m, tr, pr) for m in range(-ell, ell + 1)])
                assert np.max(np.abs(Yr - np.conj(D) @ Y)) < 1e-12

    def test_order_bound(self):
        with pytest.raises(ValueError):
            H.sph_harm(2, 3, 0.1, 0.1)


class TestClebschGordan:
    def test_selection_rule(self):
        assert H.clebsch_gordan(1, 1, 1, 1, 2, 1) == 0.0
        assert H.clebsch_gordan(1, 0, 2, 0, 4, 0) == 0.0

    def test_coupling_with_trivial(self):
        for ell in range(4):
            for m in range(-ell, ell + 1):
                for J in range(4):
                    for M in range(-J, J + 1):
                        val = H.clebsch_gordan(ell, m, 0, 0, J, M)
                        expect = 1.0 if (J == ell and M == m) else 0.0
                        assert_allclose(val, expect, atol=1e-15)

    def test_known_values(self):
        # 1/2 x 1/2-style integer analogue: C^{00}_{1m;1-m} = (-1)^(1-m)/sqrt(3)
        for m in (-1, 0, 1):
            assert_allclose(
                H.clebsch_gordan(1, m, 1, -m, 0, 0), (-1.0) ** (1 - m) / math.sqrt(3),
                atol=1e-14,
            )
        assert_allclose(H.clebsch_gordan(1, 1, 1, 1, 2, 2), 1.0, atol=1e-15)
        assert_allclose(H.clebsch_gordan(1, 1, 1, 0, 2, 1), 1 / math.sqrt(2), atol=1e-14)
        assert_allclose(H.clebsch_gordan(1, 1, 1, 0, 1, 1), 1 / math.sqrt(2), atol=1e-14)

    def test_orthogonality(self):
        for l1 in range(0, 9, 4):
            for l2 in (0, 3, 8):
                dim = (2 * l1 + 1) * (2 * l2 + 1)
                Q = np.concatenate(
                    [
                        H.cg_block(l1, l2, J).reshape(2 * J + 1, dim)
                        for J in range(abs(l1 - l2), l1 + l2 + 1)
                    ],
                    axis=0,
                )
                assert np.max(np.abs(Q @ Q.T - np.eye(dim))) < 1e-12
                assert np.max(np.abs(Q.T @ Q - np.eye(dim))) < 1e-12

    def test_product_identity_l1(self):
        # D^1 D^1 expansion at random rotations, all index pairs
        for _ in range(3):
            g = H.random_rotation(RNG)
            D1 = H.wigner_D(1, g)
            DJ = {J: H.wigner_D(J, g) for J in (0, 1, 2)}
            for m1 in range(-1, 2):
                for n1 in range(-1, 2):
                    for m2 in range(-1, 2):
                        for n2 in range(-1, 2):
                            lhs = D1[m1 + 1, n1 + 1] * D1[m2 + 1, n2 + 1]
                            rhs = 0.0
                            M, N = m1 + m2, n1 + n2
                            for J in (0, 1, 2):
                                if abs(M) <= J and abs(N) <= J:
                                    rhs += (
                                        H.clebsch_gordan(1, m1, 1, m2, J, M)
                                        * H.clebsch_gordan(1, n1, 1, n2, J, N)
                                        * DJ[J][M + J, N + J]
                                    )
                            assert abs(lhs - rhs) < 1e-12


class TestCGTable:
    def test_lookup_matches_function(self):
        table = H.CGTable(3)
        assert table(1, 1, 1, 0, 2, 1) == H.clebsch_gordan(1, 1, 1, 0, 2, 1)
        assert table(1, 1, 1, 1, 2, 1) == 0.0  # selection rule
        assert table(2, 0, 2, 0, 5, 0) == 0.0  # J out of range

    def test_degree_bound(self):
        table = H.CGTable(2)
        with pytest.raises(ValueError):
            table(3, 0, 1, 0, 3, 0)

    def test_blocks_read_only(self):
        blk = H.cg_block(1, 1, 2)
        with pytest.raises(ValueError):
            blk[0, 0, 0] = 1.0

    def test_precision_beyond_table_range(self):
        # double precision degrades slowly past l = 16; spot-check against
        # a 50-digit evaluation of the same closed form
        mp = pytest.importorskip("mpmath")
        mp.mp.dps = 50

        def exact(l1, m1, l2, m2, J, M):
            if M != m1 + m2 or not (abs(l1 - l2) <= J <= l1 + l2):
                return mp.mpf(0)
            f = mp.factorial
            pref = mp.sqrt(
                (2 * J + 1)
                * f(l1 + l2 - J) * f(l1 - l2 + J) * f(-l1 + l2 + J) / f(l1 + l2 + J + 1)
                * f(J + M) * f(J - M) * f(l1 - m1) * f(l1 + m1) * f(l2 - m2) * f(l2 + m2)
            )
            kmin = max(0, l2 - J - m1, l1 - J + m2)
            kmax = min(l1 + l2 - J, l1 - m1, l2 + m2)
            return pref * mp.fsum(
                (-1) ** k
                / (f(k) * f(l1 + l2 - J - k) * f(l1 - m1 - k) * f(l2 + m2 - k)
                   * f(J - l2 + m1 + k) * f(J - l1 - m2 + k))
                for k in range(kmin, kmax + 1)
            )

        rng = np.random.default_rng(3)
        for _ in range(20):
            l1, l2 = int(rng.integers(8, 33)), int(rng.integers(8, 33))
            J = int(rng.integers(abs(l1 - l2), l1 + l2 + 1))
            m1 = int(rng.integers(-l1, l1 + 1))
            m2 = int(rng.integers(max(-l2, -J - m1), min(l2, J - m1) + 1))
            got = H.clebsch_gordan(l1, m1, l2, m2, J, m1 + m2)
            ref = float(exact(l1, m1, l2, m2, J, m1 + m2))
            assert abs(got - ref) < 1e-10

    def test_disk_cache(self, tmp_path, monkeypatch):
        monkeypatch.setenv("EQUIVAR_CACHE_DIR", str(tmp_path))
        H.cg_block.cache_clear()
        a = H.cg_block(2, 1, 3)
        assert (tmp_path / "cg_2_1_3.npy").exists()
        H.cg_block.cache_clear()
        b = H.cg_block(2, 1, 3)  # now loaded from disk
        assert np.array_equal(a, b)
        H.cg_block.cache_clear()


class TestRotations:
    def test_identity(self):
        g = H.rotation_from_matrix(np.eye(3))
        assert (g.alpha, g.beta, g.gamma) == (0.0, 0.0, 0.0)

    def test_quarter_turn_about_z(self):
        R = H.rotation_matrix(H.EulerZYZ(math.pi / 2, 0, 0))
        # apply to basis vectors: x -> y, y -> -x
        assert_allclose(R @ [1, 0, 0], [0, 1, 0], atol=1e-15)
        g = H.rotation_from_matrix(R)
        assert_allclose([g.alpha, g.beta, g.gamma], [math.pi / 2, 0, 0], atol=1e-12)

    def test_round_trip(self):
        for _ in range(50):
            R = H.rotation_matrix(H.random_rotation(RNG))
            back = H.rotation_matrix(H.rotation_from_matrix(R))
            assert np.max(np.abs(back - R)) < 1e-9

    def test_gimbal_lock(self):
        for beta in (0.0, math.pi):
            R = H.rotation_matrix(H.EulerZYZ(0.7, beta, 1.9))
            g = H.rotation_from_matrix(R)
            assert g.gamma == 0.0
            assert np.max(np.abs(H.rotation_matrix(g) - R)) < 1e-12

    def test_not_a_rotation(self):
        with pytest.raises(NotARotation):
            H.rotation_from_matrix(np.diag([1.0, 1.0, -1.0]))  # det -1
        with pytest.raises(NotARotation):
            H.rotation_from_matrix(np.full((3, 3), 0.5))

    def test_wigner1_reproduces_matrix(self):
        # conjugating D^1 back to the Cartesian basis gives the rotation
        A = H.VEC_TO_SPH
        for _ in range(10):
            g = H.random_rotation(RNG)
            R = H.rotation_matrix(g)
            back = A.conj().T @ H.wigner_D(1, g) @ A
            assert np.max(np.abs(back - R)) < 1e-12
            assert np.max(np.abs(back.imag)) < 1e-12

    def test_euler_from_matrices_batch(self):
        mats = np.stack([H.rotation_matrix(H.random_rotation(RNG)) for _ in range(30)])
        al, be, ga = H.euler_from_matrices(mats)
        for i in range(30):
            back = H.rotation_matrix(H.EulerZYZ(al[i], be[i], ga[i]))
            assert np.max(np.abs(back - mats[i])) < 1e-10
