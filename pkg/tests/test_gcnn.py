"""Discrete GCNNs on Z^2 and C_4 x| Z^2: exact equivariance throughout."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from equivar import gcnn as GC
from equivar.errors import ShapeMismatch

RNG = np.random.default_rng(808)


class TestZ2Conv:
    def test_identity_kernel(self):
        img = RNG.standard_normal((5, 6, 3))
        k = np.zeros((3, 3, 1, 1))
        for c in range(3):
            k[c, c, 0, 0] = 1.0
        assert np.array_equal(GC.z2_conv(k, img), img)

    def test_box_from_delta(self):
        img = np.zeros((7, 7, 1))
        img[3, 3, 0] = 1.0
        out = GC.z2_conv(np.ones((1, 1, 3, 3)), img)[..., 0]
        assert out.sum() == 9.0
        assert set(map(tuple, np.argwhere(out > 0))) == {
            (x, y) for x in (2, 3, 4) for y in (2, 3, 4)
        }

    def test_translation_equivariance_bitwise(self):
        img = RNG.standard_normal((6, 7, 3))
        k = RNG.standard_normal((2, 3, 3, 3))
        out = GC.z2_conv(k, img)
        for t in ((1, 0), (0, 1), (3, 5), (5, 6)):
            assert np.array_equal(GC.z2_conv(k, GC.translate(img, t)), GC.translate(out, t))

    def test_zero_padding_interior(self):
        # interior pixels (kernel support inside) agree with periodic conv
        # of the zero-extended image
        img = RNG.standard_normal((6, 6, 1))
        k = RNG.standard_normal((1, 1, 3, 3))
        z = GC.z2_conv(k, img, padding="zero")
        big = np.zeros((10, 10, 1))
        big[2:8, 2:8] = img
        p = GC.z2_conv(k, big, padding="periodic")
        assert_allclose(z[1:5, 1:5], p[3:7, 3:7], atol=1e-14)

    def test_shape_checks(self):
        with pytest.raises(ShapeMismatch):
            GC.z2_conv(np.zeros((1, 2, 3, 3)), np.zeros((4, 4, 3)))
        with pytest.raises(ValueError):
            GC.z2_conv(np.zeros((1, 1, 3, 3)), np.zeros((4, 4, 1)), padding="reflect")


class TestGroupActions:
    def test_action_composition(self):
        N, size = 4, 5
        img = RNG.standard_normal((size, size, 2))
        g1 = (1, (2, 3))
        g2 = (3, (1, 4))
        # pi(g1) pi(g2) = pi(g1 g2) with g1 g2 = (k1+k2, t1 + R_k1 t2)
        lhs = GC.act_on_image(GC.act_on_image(img, g2[0], g2[1], N), g1[0], g1[1], N)
        tx, ty = GC.rotate_indices(np.array(g2[1][0]), np.array(g2[1][1]), g1[0], N, size)
        comp = ((g1[0] + g2[0]) % N, ((g1[1][0] + int(tx)) % size, (g1[1][1] + int(ty)) % size))
        rhs = GC.act_on_image(img, comp[0], comp[1], N)
        assert np.array_equal(lhs, rhs)

    def test_rotation_needs_square(self):
        with pytest.raises(ShapeMismatch):
            GC.act_on_image(np.zeros((4, 5, 1)), 1, (0, 0), 4)


class TestRotoTranslationConvs:
    def test_lifting_exact_equivariance(self):
        N, size = 4, 5
        img = RNG.integers(-9, 9, size=(size, size, 2)).astype(float)
        k = RNG.integers(-9, 9, size=(3, 2, 3, 3)).astype(float)
        F = GC.lifting_conv(k, img, N)
        for kk in range(N):
            for tx in range(size):
                for ty in range(size):
                    lhs = GC.lifting_conv(k, GC.act_on_image(img, kk, (tx, ty), N), N)
                    rhs = GC.act_on_group_feature(F, kk, (tx, ty), N)
                    assert np.array_equal(lhs, rhs)

    def test_group_conv_exact_equivariance(self):
        N, size = 4, 5
        F = RNG.integers(-9, 9, size=(N, size, size, 2)).astype(float)
        k = RNG.integers(-9, 9, size=(1, 2, N, 3, 3)).astype(float)
        out = GC.group_conv(k, F, N)
        for kk in range(N):
            for tx in range(size):
                for ty in range(size):
                    lhs = GC.group_conv(k, GC.act_on_group_feature(F, kk, (tx, ty), N), N)
                    rhs = GC.act_on_group_feature(out, kk, (tx, ty), N)
                    assert np.array_equal(lhs, rhs)

    def test_delta_kernel_identity(self):
        F = RNG.standard_normal((4, 5, 5, 3))
        dk = GC.delta_group_kernel(4, 3, channels=3)
        assert np.array_equal(GC.group_conv(dk, F, 4), F)

    def test_composition_stays_equivariant(self):
        N, size = 4, 4
        F = RNG.integers(-5, 5, size=(N, size, size, 2)).astype(float)
        k1 = RNG.integers(-5, 5, size=(3, 2, N, 3, 3)).astype(float)
        k2 = RNG.integers(-5, 5, size=(1, 3, N, 3, 3)).astype(float)
        two = lambda x: GC.group_conv(k2, GC.group_conv(k1, x, N), N)
        out = two(F)
        lhs = two(GC.act_on_group_feature(F, 1, (2, 1), N))
        rhs = GC.act_on_group_feature(out, 1, (2, 1), N)
        assert np.array_equal(lhs, rhs)


class TestEquivariantMapRecovery:
    def test_theorem_recovery(self):
        # a group-averaged random linear map is a group convolution whose
        # kernel can be read off from the delta response
        N, size = 4, 4
        dim = N * size * size
        L = RNG.standard_normal((dim, dim))
        Lavg = GC.group_average_linear_map(L, N, size)
        P = GC.permutation_of_group_action(1, (2, 3), N, size)
        assert np.max(np.abs(Lavg @ P - P @ Lavg)) < 1e-13

        def apply_map(Fin):
            return (Lavg @ np.asarray(Fin)[..., 0].ravel()).reshape(N, size, size)[..., None]

        kern = GC.recover_group_kernel(apply_map, N, size)
        for _ in range(10):
            f = RNG.standard_normal((N, size, size, 1))
            assert np.max(np.abs(apply_map(f) - GC.group_conv(kern, f, N))) < 1e-12


class TestSegmentationPipeline:
    def test_probability_rows(self):
        pipe = GC.SegmentationPipeline.random(3, 5, 4, RNG)
        seg = pipe(RNG.standard_normal((6, 6, 3)))
        assert np.max(np.abs(seg.sum(axis=-1) - 1.0)) < 1e-12

    def test_constant_image(self):
        pipe = GC.SegmentationPipeline.random(3, 5, 4, RNG)
        seg = pipe(np.ones((5, 5, 3)))
        assert np.max(np.abs(seg - seg[0, 0])) == 0.0

    def test_shift_commutation_exact(self):
        pipe = GC.SegmentationPipeline.random(3, 4, 2, RNG)
        img = RNG.standard_normal((6, 6, 3))
        for t in ((1, 0), (2, 5)):
            assert np.array_equal(pipe(GC.translate(img, t)), GC.translate(pipe(img), t))


class TestDetections:
    def test_translate_boxes(self):
        x = RNG.standard_normal((4, 4, 2))
        det = GC.BoxDetections(
            x.copy(), np.abs(RNG.standard_normal((4, 4, 2))), RNG.uniform(0, 1, (4, 4))
        )
        out = det.translate((3, -2))
        assert_allclose(out.anchors, np.roll(x, (3, -2), axis=(0, 1)) + [3.0, -2.0])
        assert np.array_equal(out.boxes, np.roll(det.boxes, (3, -2), axis=(0, 1)))
        assert np.array_equal(out.conf, np.roll(det.conf, (3, -2), axis=(0, 1)))

    def test_rotate_oriented(self):
        probs = np.full((4, 4, 2), 0.5)
        od = GC.OrientedDetections(
            np.zeros((4, 4, 2)), np.zeros((4, 4, 2)), np.zeros((4, 4, 2)), probs
        )
        od.v1[..., 0] = 1.0
        rot = od.rotate(1)
        # row convention: 90 degrees maps (1, 0) to (0, -1)
        assert_allclose(rot.v1[0, 0], [0.0, -1.0], atol=1e-15)
        assert np.max(np.abs(rot.probs.sum(axis=-1) - 1.0)) < 1e-15

    def test_identity_transforms(self):
        x = RNG.standard_normal((4, 4, 2))
        od = GC.OrientedDetections(
            x.copy(), x.copy(), x.copy(), np.full((4, 4, 1), 1.0)
        )
        r0 = od.rotate(0)
        assert np.array_equal(r0.v1, od.v1) and np.array_equal(r0.corner, od.corner)

    def test_rotation_is_group_action(self):
        x = RNG.standard_normal((4, 4, 2))
        od = GC.OrientedDetections(x, x.copy(), -x, np.full((4, 4, 1), 1.0))
        a = od.rotate(1).rotate(1)
        b = od.rotate(2)
        assert np.allclose(a.v1, b.v1) and np.allclose(a.corner, b.corner)
