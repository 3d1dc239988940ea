"""Exact discrete group-equivariant CNNs on Z^2 and C_N x| Z^2.

All group actions here are index permutations on periodic windows, so
equivariance checks are exact: integer arithmetic on indices, floating
point only in values.  The planar convolution is

    [kappa * f](x) = sum_u kappa(u - x) f(u) = sum_v kappa(v) f(x + v),

the counting-measure case of the group convolution
[kappa * f](g) = sum_h kappa(g^-1 h) f(h); with periodic padding it
commutes exactly with lattice translations.  Lifting and group
convolutions extend this to the roto-translation group C_N x| Z^2 for
the lattice-preserving orders N in {1, 2, 4}.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatch
from .nonlin import relu, softmax

LATTICE_ORDERS = (1, 2, 4)


# ---------------------------------------------------------------------------
# plane convolution

def _kernel_offsets(kernel: np.ndarray):
    kh, kw = kernel.shape[-2:]
    return np.arange(kh) - (kh - 1) // 2, np.arange(kw) - (kw - 1) // 2


def z2_conv(kernel: np.ndarray, image: np.ndarray, padding: str = "periodic") -> np.ndarray:
    """Planar convolution of an (X, Y, C_in) image with a kernel
    (C_out, C_in, kh, kw) whose spatial entry (a, b) sits at the integer
    offset (a - kh//2, b - kw//2).

    With periodic padding the output is exactly translation
    equivariant; with zero padding only on the interior left untouched
    by the support crossing the boundary.
    """
    image = np.asarray(image)
    kernel = np.asarray(kernel)
    if image.ndim != 3 or kernel.ndim != 4 or kernel.shape[1] != image.shape[2]:
        raise ShapeMismatch(
            f"image (X, Y, C_in) and kernel (C_out, C_in, kh, kw) expected, "
            f"got {image.shape} and {kernel.shape}"
        )
    if padding not in ("periodic", "zero"):
        raise ValueError(f"unknown padding {padding!r}")
    X, Y, _ = image.shape
    dxs, dys = _kernel_offsets(kernel)
    out = np.zeros((X, Y, kernel.shape[0]), dtype=np.result_type(image, kernel))
    xs = np.arange(X)
    ys = np.arange(Y)
    for a, dx in enumerate(dxs):
        for b, dy in enumerate(dys):
            if padding == "periodic":
                block = image[np.ix_((xs + dx) % X, (ys + dy) % Y)]
            else:
                block = np.zeros_like(image)
                x_src = xs + dx
                y_src = ys + dy
                okx = (x_src >= 0) & (x_src < X)
                oky = (y_src >= 0) & (y_src < Y)
                block[np.ix_(xs[okx], ys[oky])] = image[np.ix_(x_src[okx], y_src[oky])]
            out += np.einsum("uv,xyv->xyu", kernel[:, :, a, b], block)
    return out


def translate(image: np.ndarray, t) -> np.ndarray:
    """[L_t f](x) = f(x - t) on a periodic window."""
    return np.roll(image, shift=(t[0], t[1]), axis=(0, 1))


# ---------------------------------------------------------------------------
# roto-translation group C_N x| Z^2

def rotate_indices(x: np.ndarray, y: np.ndarray, k: int, N: int, size: int):
    """Apply the order-N lattice rotation k times about the origin of a
    periodic size x size window (N must preserve the lattice)."""
    if N not in LATTICE_ORDERS:
        raise ValueError(f"C_{N} does not preserve the square lattice")
    for _ in range(k % N):
        if N == 4:
            x, y = (-y) % size, x % size
        elif N == 2:
            x, y = (-x) % size, (-y) % size
    return x % size, y % size


def group_element_inverse(k: int, t, N: int, size: int):
    """(k, t)^-1 on the periodic window."""
    ki = (-k) % N
    tx, ty = rotate_indices(np.array(-t[0]), np.array(-t[1]), ki, N, size)
    return ki, (int(tx), int(ty))


def act_on_image(image: np.ndarray, k: int, t, N: int) -> np.ndarray:
    """[pi(g) f](x) = f(g^-1 x) for g = (rotation k, translation t)."""
    image = np.asarray(image)
    size = image.shape[0]
    if image.shape[1] != size:
        raise ShapeMismatch("rotations need a square window")
    xs, ys = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    # g^-1 x = R^-1 (x - t)
    xr, yr = rotate_indices((xs - t[0]) % size, (ys - t[1]) % size, (-k) % N, N, size)
    return image[xr, yr]


def act_on_group_feature(F: np.ndarray, k: int, t, N: int) -> np.ndarray:
    """[pi(g) F](q, s) = F(g^-1 (q, s)) for F indexed (rotation, x, y, c)."""
    F = np.asarray(F)
    size = F.shape[1]
    out = np.empty_like(F)
    xs, ys = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    ki = (-k) % N
    xr, yr = rotate_indices((xs - t[0]) % size, (ys - t[1]) % size, ki, N, size)
    # g^-1 (q, s) = (k^-1 q, R_k^-1 (s - t))
    for q in range(N):
        out[q] = F[(q - k) % N][xr, yr]
    return out


def lifting_conv(kernel: np.ndarray, image: np.ndarray, N: int = 4) -> np.ndarray:
    """[kappa * f](r, t) = sum_u kappa(R_r^-1 (u - t)) f(u) on a periodic
    square window; output indexed (rotation, x, y, c_out)."""
    image = np.asarray(image)
    size = image.shape[0]
    if image.shape[1] != size:
        raise ShapeMismatch("lifting convolution needs a square window")
    out = np.empty((N,) + image.shape[:2] + (kernel.shape[0],),
                   dtype=np.result_type(image, kernel))
    for r in range(N):
        out[r] = z2_conv(rotate_kernel(kernel, r, N), image, padding="periodic")
    return out


def rotate_kernel(kernel: np.ndarray, k: int, N: int) -> np.ndarray:
    """kappa_r(u) = kappa(R_r^-1 u) on centered offsets.

    For odd kernels the offsets stay inside the support; even (full
    periodic window) kernels wrap mod the window, which matches the
    periodic convolution they are used with.
    """
    kernel = np.asarray(kernel)
    kh, kw = kernel.shape[-2:]
    if kh != kw:
        raise ShapeMismatch("rotations need square kernels")
    if N not in LATTICE_ORDERS:
        raise ValueError(f"C_{N} does not preserve the square lattice")
    c = (kh - 1) // 2
    ax = np.arange(kh)
    dx, dy = np.meshgrid(ax - c, ax - c, indexing="ij")
    rx, ry = rotate_indices(dx, dy, (-k) % N, N, kh)  # R^-1 offsets mod window
    return kernel[..., (rx + c) % kh, (ry + c) % kh]


def group_conv(kernel: np.ndarray, F: np.ndarray, N: int = 4) -> np.ndarray:
    """Group convolution on C_N x| Z^2.

    kernel is indexed (C_out, C_in, rotation q, a, b) over centered
    offsets, F is (rotation, x, y, C_in); returns (rotation, x, y,
    C_out) with [kappa * F](g) = sum_h kappa(g^-1 h) F(h).
    """
    F = np.asarray(F)
    kernel = np.asarray(kernel)
    if F.shape[0] != N or kernel.shape[2] != N:
        raise ShapeMismatch("group axis mismatch")
    size = F.shape[1]
    out = np.zeros((N, size, size, kernel.shape[0]), dtype=np.result_type(F, kernel))
    for r in range(N):
        for q in range(N):
            # g^-1 h for g=(r,t), h=(q,s): rotation r^-1 q, offset R_r^-1(s-t)
            out[r] += z2_conv(
                rotate_kernel(kernel[:, :, (q - r) % N], r, N), F[q], padding="periodic"
            )
    return out


def delta_group_kernel(N: int, size: int, channels: int = 1) -> np.ndarray:
    """kappa(g) = delta_{g,e} id: the identity of group_conv."""
    k = np.zeros((channels, channels, N, size, size))
    c = (size - 1) // 2
    for ch in range(channels):
        k[ch, ch, 0, c, c] = 1.0
    return k


def group_average_linear_map(L: np.ndarray, N: int, size: int) -> np.ndarray:
    """Project a linear map on the window feature space onto the
    equivariant subspace: L_avg = (1/|G|) sum_g pi(g)^-1 L pi(g)."""
    dim = N * size * size
    if L.shape != (dim, dim):
        raise ShapeMismatch(f"expected ({dim}, {dim}) map")
    acc = np.zeros_like(L, dtype=float)
    for k in range(N):
        for tx in range(size):
            for ty in range(size):
                P = permutation_of_group_action(k, (tx, ty), N, size)
                acc += P.T @ L @ P
    return acc / (N * size * size)


def permutation_of_group_action(k: int, t, N: int, size: int) -> np.ndarray:
    """Matrix of pi(g) acting on flattened (rotation, x, y) features."""
    dim = N * size * size
    basis = np.eye(dim).reshape(dim, N, size, size)
    cols = np.stack(
        [act_on_group_feature(b[..., None], k, t, N)[..., 0].ravel() for b in basis],
        axis=1,
    )
    return cols


def recover_group_kernel(apply_map, N: int, size: int) -> np.ndarray:
    """Read off the convolution kernel of an equivariant map from its
    action on the delta at the identity: kappa(u) = (L delta_e)(u^-1)."""
    delta = np.zeros((N, size, size, 1))
    delta[0, 0, 0, 0] = 1.0
    resp = np.asarray(apply_map(delta))[..., 0]
    kern = np.zeros((1, 1, N, size, size))
    c = (size - 1) // 2
    # kernel entry at centered index (a, b) holds kappa at the offset
    # u = (a - c, b - c) mod the window
    for q in range(N):
        for a in range(size):
            for b in range(size):
                u = ((a - c) % size, (b - c) % size)
                ki, ti = group_element_inverse(q, u, N, size)
                kern[0, 0, q, a, b] = resp[ki, ti[0], ti[1]]
    return kern


# ---------------------------------------------------------------------------
# segmentation pipeline

@dataclass
class SegmentationPipeline:
    """Two periodic convolutions with relu between and a softmax head;
    translation equivariant end to end (exactly, by index relabeling)."""

    kernel1: np.ndarray
    kernel2: np.ndarray

    @classmethod
    def random(cls, in_channels: int, hidden: int, classes: int, rng,
               ksize: int = 3) -> "SegmentationPipeline":
        k1 = rng.standard_normal((hidden, in_channels, ksize, ksize))
        k2 = rng.standard_normal((classes, hidden, ksize, ksize))
        return cls(k1, k2)

    def __call__(self, image: np.ndarray) -> np.ndarray:
        h = relu(z2_conv(self.kernel1, image, padding="periodic"))
        logits = z2_conv(self.kernel2, h, padding="periodic")
        return softmax(logits, axis=-1)


# ---------------------------------------------------------------------------
# detection feature typing

SO2_FUND = np.array([[0.0, 1.0], [-1.0, 0.0]])  # 90-degree action on (row) vectors


def so2_fund_matrix(k: int) -> np.ndarray:
    """Fundamental C_4 representation [[cos, sin], [-sin, cos]] at 90 k
    degrees, exact integer entries."""
    out = np.eye(2)
    for _ in range(k % 4):
        out = SO2_FUND @ out
    return out


@dataclass
class BoxDetections:
    """Axis-aligned detections per pixel: anchor (x, y), box (w, h),
    confidence c in [0, 1]."""

    anchors: np.ndarray  # (X, Y, 2)
    boxes: np.ndarray    # (X, Y, 2)
    conf: np.ndarray     # (X, Y)

    def translate(self, t) -> "BoxDetections":
        """Anchors move with the translation; sizes and confidence are
        scalars."""
        sh = (t[0], t[1])
        return BoxDetections(
            np.roll(self.anchors, sh, axis=(0, 1)) + np.asarray(t, dtype=float),
            np.roll(self.boxes, sh, axis=(0, 1)),
            np.roll(self.conf, sh, axis=(0, 1)),
        )


@dataclass
class OrientedDetections:
    """Oriented detections per pixel: corner a, spanning vectors v1, v2
    (all in the fundamental representation) and class probabilities p."""

    corner: np.ndarray  # (X, Y, 2)
    v1: np.ndarray      # (X, Y, 2)
    v2: np.ndarray      # (X, Y, 2)
    probs: np.ndarray   # (X, Y, P), rows sum to 1

    def translate(self, t) -> "OrientedDetections":
        sh = (t[0], t[1])
        return OrientedDetections(
            np.roll(self.corner, sh, axis=(0, 1)) + np.asarray(t, dtype=float),
            np.roll(self.v1, sh, axis=(0, 1)),
            np.roll(self.v2, sh, axis=(0, 1)),
            np.roll(self.probs, sh, axis=(0, 1)),
        )

    def rotate(self, k: int) -> "OrientedDetections":
        """C_4 rotation: pixels rotate on the window, the three vector
        fields rotate in the fundamental representation, probabilities
        are scalars."""
        size = self.corner.shape[0]
        xs, ys = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
        xr, yr = rotate_indices(xs, ys, (-k) % 4, 4, size)
        R = so2_fund_matrix(k)
        return OrientedDetections(
            self.corner[xr, yr] @ R.T,
            self.v1[xr, yr] @ R.T,
            self.v2[xr, yr] @ R.T,
            self.probs[xr, yr],
        )
