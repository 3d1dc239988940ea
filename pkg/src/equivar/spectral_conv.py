"""Spherical convolutions in spatial (quadrature) and Fourier form.

Feature maps live on S2 or SO(3) and take values in vector spaces V1
(input) and V2 (output) on which the rotation group acts by
representations rho1, rho2.  The convolution producing a feature map on
SO(3) from one on S2 is

    (kappa * f)(R) = integral_{S2} rho2(R) kappa(R^-1 x) rho1(R)^-1 f(x) dx

and for SO(3) inputs

    (kappa * f)(S) = integral_{SO(3)} rho2(R) kappa(R^-1 S) rho1(R)^-1 f(R) dR.

The quadrature evaluations of these integrals are the oracles; the
Fourier-domain routines are the production path.  In the Fourier domain
every operation reduces to Clebsch-Gordan contractions:

* scalar S2 case: out^l_{mn} = sum_nu kappa-hat^l_n conj(f-hat^l_m),
* scalar SO(3) case: out^l = 8 pi^2/(2l+1) f-hat^l kappa-hat^l
  (matrix product per degree),
* general representations: the integrand factors rho2(R), the kernel-
  signal pairing, and rho1(R^-1) are each functions on SO(3) with known
  Wigner coefficients, and their pointwise products are evaluated with
  paired Clebsch-Gordan tensors (cached per degree triple).

The scalar and general S2 formulas use conj(f-hat) and therefore assume
real-valued feature maps (the standing assumption for the Fourier
expressions); real signals satisfy conj(f-hat^l_m) =
(-1)^m f-hat^l_{-m}, which is what the derivation produces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import harmonics as H
from .errors import BandlimitOverflow, ShapeMismatch
from .features import FeatureType
from .grids import (
    S2Grid,
    SO3Grid,
    SpectralS2Signal,
    SpectralSO3Signal,
    rotate_spectral_s2,
    rotate_spectral_so3,
    s2_synthesis,
    so3_synthesis,
)

EIGHT_PI2 = 8.0 * math.pi**2


# ---------------------------------------------------------------------------
# kernels and representation spectra

@dataclass
class KernelS2:
    """Hom(V1, V2)-valued spectral kernel on S2.

    blocks[l] has shape (out_channels, in_channels, 2l+1).
    """

    bandlimit: int
    blocks: list[np.ndarray]

    @property
    def out_channels(self) -> int:
        return self.blocks[0].shape[0]

    @property
    def in_channels(self) -> int:
        return self.blocks[0].shape[1]

    @classmethod
    def zeros(cls, L, out_channels, in_channels):
        return cls(
            L,
            [np.zeros((out_channels, in_channels, 2 * l + 1), dtype=complex) for l in range(L)],
        )

    @classmethod
    def random(cls, L, out_channels, in_channels, rng, real=True):
        out = cls.zeros(L, out_channels, in_channels)
        for l in range(L):
            s = SpectralS2Signal.random(L, out_channels * in_channels, rng, real=real)
            out.blocks[l] = s.coeffs[l].reshape(out_channels, in_channels, 2 * l + 1)
        return out

    def flat(self) -> np.ndarray:
        """(out*in, L^2) lexicographic (l, m) layout for point evaluation."""
        return np.concatenate(
            [b.reshape(-1, 2 * l + 1) for l, b in enumerate(self.blocks)], axis=1
        )


@dataclass
class KernelSO3:
    """Hom(V1, V2)-valued spectral kernel on SO(3).

    blocks[l] has shape (out_channels, in_channels, 2l+1, 2l+1).
    """

    bandlimit: int
    blocks: list[np.ndarray]

    @property
    def out_channels(self) -> int:
        return self.blocks[0].shape[0]

    @property
    def in_channels(self) -> int:
        return self.blocks[0].shape[1]

    @classmethod
    def zeros(cls, L, out_channels, in_channels):
        return cls(
            L,
            [
                np.zeros((out_channels, in_channels, 2 * l + 1, 2 * l + 1), dtype=complex)
                for l in range(L)
            ],
        )

    @classmethod
    def random(cls, L, out_channels, in_channels, rng, real=True):
        out = cls.zeros(L, out_channels, in_channels)
        s = SpectralSO3Signal.random(L, out_channels * in_channels, rng, real=real)
        for l in range(L):
            out.blocks[l] = s.coeffs[l].reshape(
                out_channels, in_channels, 2 * l + 1, 2 * l + 1
            )
        return out

    @classmethod
    def bandlimited_delta(cls, L, channels=1):
        """kappa-hat^l_{pn} = (2l+1)/(8 pi^2) delta_{pn}: identity of the
        scalar SO(3) convolution on signals bandlimited below L."""
        out = cls.zeros(L, channels, channels)
        for l in range(L):
            for c in range(channels):
                out.blocks[l][c, c] = (2 * l + 1) / EIGHT_PI2 * np.eye(2 * l + 1)
        return out


@dataclass
class RepSpectral:
    """Wigner coefficients of the matrix elements of a representation.

    blocks[l] has shape (dim, dim, 2l+1, 2l+1): entry (i, j) holds the
    coefficients of the scalar function R -> rho(R)_{ij}.
    """

    dim: int
    blocks: list[np.ndarray]

    @property
    def bandlimit(self) -> int:
        return len(self.blocks)

    @classmethod
    def trivial(cls, dim: int = 1) -> "RepSpectral":
        b = np.zeros((dim, dim, 1, 1), dtype=complex)
        for i in range(dim):
            b[i, i, 0, 0] = 1.0
        return cls(dim, [b])

    @classmethod
    def from_feature_type(cls, ftype: FeatureType) -> "RepSpectral":
        """Exact coefficients for a direct sum of irreps: the matrix
        element (a, b) of the degree-lambda block is D^lambda_{ab}."""
        L = ftype.max_degree + 1
        dim = ftype.dimension
        blocks = [
            np.zeros((dim, dim, 2 * l + 1, 2 * l + 1), dtype=complex) for l in range(L)
        ]
        for lam, _, sl in ftype.blocks():
            for a in range(2 * lam + 1):
                for b in range(2 * lam + 1):
                    blocks[lam][sl.start + a, sl.start + b, a, b] = 1.0
        return cls(dim, blocks)

    @classmethod
    def from_matrix_function(cls, fn, dim: int, grid: SO3Grid) -> "RepSpectral":
        """Analyze rho(R)_{ij} on an SO(3) grid (bandlimit must cover the
        representation content)."""
        from .grids import so3_analysis

        n = grid.n
        samples = np.zeros((n, n, n, dim * dim), dtype=complex)
        for ia, a in enumerate(grid.alphas):
            for ib, b in enumerate(grid.betas):
                for ig, c in enumerate(grid.gammas):
                    samples[ia, ib, ig] = np.asarray(
                        fn(H.EulerZYZ(a, b, c)), dtype=complex
                    ).ravel()
        spec = so3_analysis(grid, samples)
        return cls(
            dim,
            [
                spec.coeffs[l].reshape(dim, dim, 2 * l + 1, 2 * l + 1)
                for l in range(grid.bandlimit)
            ],
        )

    def matrix(self, g: H.EulerZYZ) -> np.ndarray:
        D = H.wigner_D_stack(self.bandlimit - 1, g)
        out = np.zeros((self.dim, self.dim), dtype=complex)
        for l in range(self.bandlimit):
            out += np.einsum("ijmn,mn->ij", self.blocks[l], D[l])
        return out


# ---------------------------------------------------------------------------
# pointwise products of functions on SO(3)

def so3_block_product(a: list[np.ndarray], b: list[np.ndarray], L_out: int | None = None,
                      cg_max_degree: int | None = None) -> list[np.ndarray]:
    """Wigner coefficients of the pointwise product of two functions.

    a[l1] has shape (..., 2l1+1, 2l1+1) and b[l2] (..., 2l2+1, 2l2+1)
    with broadcastable leading axes.  Implements the degree coupling
    (fg)^J_{MN} = sum C^{JM}_{l1 m1; l2 m2} C^{JN}_{l1 n1; l2 n2}
    f^l1_{m1 n1} g^l2_{m2 n2}.
    """
    La, Lb = len(a), len(b)
    natural = La + Lb - 1
    if L_out is None:
        L_out = natural
    if cg_max_degree is not None and min(natural, L_out) - 1 > cg_max_degree:
        raise BandlimitOverflow(
            f"product needs degrees up to {min(natural, L_out) - 1}, "
            f"table covers {cg_max_degree}"
        )
    batch = np.broadcast_shapes(a[0].shape[:-2], b[0].shape[:-2])
    out = [np.zeros(batch + (2 * J + 1, 2 * J + 1), dtype=complex) for J in range(L_out)]
    for l1 in range(La):
        if not np.any(a[l1]):
            continue
        for l2 in range(Lb):
            if not np.any(b[l2]):
                continue
            for J in range(abs(l1 - l2), min(l1 + l2, L_out - 1) + 1):
                C = H.cg_block(l1, l2, J)
                tmp = np.einsum("Mac,...ab->...Mcb", C, a[l1])
                out[J] += np.einsum("...Mcb,Nbd,...cd->...MN", tmp, C, b[l2])
    return out


def _parity_flip(coeffs: np.ndarray, l: int) -> np.ndarray:
    """(-1)^n c_{-n} along the last axis (= conj for real signals)."""
    sign = (-1.0) ** np.abs(np.arange(-l, l + 1))
    return sign * coeffs[..., ::-1]


def so3_block_inverse_arg(blocks: list[np.ndarray]) -> list[np.ndarray]:
    """Coefficients of R -> g(R^-1) from those of g.

    Uses conj(D^l_{nm}) = (-1)^(m-n) D^l_{-n,-m}:
    ghat_inv^l_{ab} = (-1)^(a-b) ghat^l_{-b,-a}.
    """
    out = []
    for l, A in enumerate(blocks):
        m = np.arange(-l, l + 1)
        sign = (-1.0) ** np.abs(m[:, None] - m[None, :])
        B = np.swapaxes(A[..., ::-1, ::-1], -1, -2)
        out.append(sign * B)
    return out


# ---------------------------------------------------------------------------
# scalar convolutions (Fourier domain)

def s2_conv_scalar(kappa: KernelS2, f: SpectralS2Signal) -> SpectralSO3Signal:
    """Scalar-representation spherical convolution in the Fourier domain:
    out^l_{mu, mn} = sum_nu (kappa-hat_{mu nu})^l_n conj((f-hat_nu)^l_m).
    """
    if kappa.bandlimit != f.bandlimit:
        raise ShapeMismatch(
            f"kernel bandlimit {kappa.bandlimit} != signal bandlimit {f.bandlimit}"
        )
    if kappa.in_channels != f.channels:
        raise ShapeMismatch(
            f"kernel expects {kappa.in_channels} channels, signal has {f.channels}"
        )
    L = f.bandlimit
    out = SpectralSO3Signal.zeros(L, kappa.out_channels)
    for l in range(L):
        out.coeffs[l] = np.einsum(
            "vm,uvn->umn", np.conj(f.coeffs[l]), kappa.blocks[l]
        )
    return out


def so3_conv_scalar(kappa: KernelSO3, f: SpectralSO3Signal) -> SpectralSO3Signal:
    """Scalar-representation SO(3) convolution:
    out^l = 8 pi^2/(2l+1) sum_nu f-hat_nu^l . kappa-hat_{mu nu}^l."""
    if kappa.bandlimit != f.bandlimit:
        raise ShapeMismatch(
            f"kernel bandlimit {kappa.bandlimit} != signal bandlimit {f.bandlimit}"
        )
    if kappa.in_channels != f.channels:
        raise ShapeMismatch(
            f"kernel expects {kappa.in_channels} channels, signal has {f.channels}"
        )
    L = f.bandlimit
    out = SpectralSO3Signal.zeros(L, kappa.out_channels)
    for l in range(L):
        out.coeffs[l] = (
            EIGHT_PI2 / (2 * l + 1)
            * np.einsum("vmp,uvpn->umn", f.coeffs[l], kappa.blocks[l])
        )
    return out


# ---------------------------------------------------------------------------
# general-representation convolutions (Fourier domain)

def s2_conv_general(rho1: RepSpectral, rho2: RepSpectral, kappa: KernelS2,
                    f: SpectralS2Signal, L_out: int | None = None,
                    cg_max_degree: int | None = None) -> SpectralSO3Signal:
    """Spherical convolution for arbitrary representations rho1, rho2.

    The integrand splits into three functions on SO(3) - rho2(R), the
    kernel/signal pairing T(R) = integral kappa(R^-1 x) f(x) dx with
    T-hat^l[n, m] = (-1)^n f-hat^l_{-n} kappa-hat^l_m, and rho1(R^-1) -
    whose pointwise products are formed degree by degree with paired
    Clebsch-Gordan tensors.  The row factor equals conj(f-hat^l_n) on
    real signals but stays exact for complex channel functions (as
    produced by induced actions), so equivariance holds without a
    reality assumption.
    """
    if kappa.in_channels != rho1.dim or kappa.out_channels != rho2.dim:
        raise ShapeMismatch(
            f"kernel maps {kappa.in_channels} -> {kappa.out_channels} channels, "
            f"representations have dims {rho1.dim} -> {rho2.dim}"
        )
    if f.channels != rho1.dim:
        raise ShapeMismatch(f"signal channels {f.channels} != rho1 dim {rho1.dim}")
    Lt = min(kappa.bandlimit, f.bandlimit)
    natural = Lt + (rho1.bandlimit - 1) + (rho2.bandlimit - 1)
    if L_out is None:
        L_out = natural
    if cg_max_degree is not None and natural - 1 > cg_max_degree:
        raise BandlimitOverflow(
            f"needs Clebsch-Gordan degrees up to {natural - 1}, table covers {cg_max_degree}"
        )
    d1, d2 = rho1.dim, rho2.dim

    # T[l]: (d2, d1, d1, 2l+1, 2l+1), rows from f, columns from kappa.
    # The row factor is (-1)^n f-hat^l_{-n}, which equals conj(f-hat^l_n)
    # on real channel functions but stays exact when the induced action
    # has mixed channels with complex blocks.
    T = [
        np.einsum("ta,vsb->vstab", _parity_flip(f.coeffs[l], l), kappa.blocks[l])
        for l in range(Lt)
    ]
    rho1inv = so3_block_inverse_arg(rho1.blocks)
    rho1inv_flat = [b.reshape(d1 * d1, 2 * l + 1, 2 * l + 1) for l, b in enumerate(rho1inv)]
    T_flat = [b.reshape(d2, d1 * d1, 2 * l + 1, 2 * l + 1) for l, b in enumerate(T)]

    mid_L = min(Lt + rho1.bandlimit - 1, L_out + rho2.bandlimit - 1)
    W = so3_block_product(T_flat, rho1inv_flat, L_out=mid_L)
    W = [b.sum(axis=1) for b in W]  # contract (sigma, tau): (d2=nu, ...)

    out_blocks = so3_block_product(rho2.blocks, W, L_out=L_out)
    out_blocks = [b.sum(axis=1) for b in out_blocks]  # contract nu: (d2=mu, ...)
    return SpectralSO3Signal(L_out, out_blocks)


def so3_conv_general(rho1: RepSpectral, rho2: RepSpectral, kappa: KernelSO3,
                     f: SpectralSO3Signal, L_out: int | None = None,
                     cg_max_degree: int | None = None) -> SpectralSO3Signal:
    """SO(3)-domain convolution for arbitrary representations.

    Forms W = rho1(R^-1) f(R) and U = rho2(R) (x) W(R) pointwise, then
    applies the matrix-product convolution theorem degree by degree:
    out^l = 8 pi^2/(2l+1) U-hat^l . kappa-hat^l.
    """
    if kappa.in_channels != rho1.dim or kappa.out_channels != rho2.dim:
        raise ShapeMismatch(
            f"kernel maps {kappa.in_channels} -> {kappa.out_channels} channels, "
            f"representations have dims {rho1.dim} -> {rho2.dim}"
        )
    if f.channels != rho1.dim:
        raise ShapeMismatch(f"signal channels {f.channels} != rho1 dim {rho1.dim}")
    d1, d2 = rho1.dim, rho2.dim
    LU = f.bandlimit + (rho1.bandlimit - 1) + (rho2.bandlimit - 1)
    natural = min(LU, kappa.bandlimit)
    if L_out is None:
        L_out = natural
    if cg_max_degree is not None and LU - 1 > cg_max_degree:
        raise BandlimitOverflow(
            f"needs Clebsch-Gordan degrees up to {LU - 1}, table covers {cg_max_degree}"
        )

    rho1inv = so3_block_inverse_arg(rho1.blocks)
    # rho1inv blocks are (d1, d1, ...) and f blocks (d1, ...): broadcasting
    # aligns the tau axis; contract it after the product.
    A = so3_block_product(rho1inv, f.coeffs)
    A = [b.sum(axis=1) for b in A]  # (d1=sigma, ...)

    r2 = [b[:, :, None] for b in rho2.blocks]  # (d2, d2, 1, ...)
    Ab = [b[None, None] for b in A]            # (1, 1, d1, ...)
    U = so3_block_product(r2, Ab, L_out=min(len(A) + rho2.bandlimit - 1, L_out))
    # U[l]: (d2=mu, d2=nu, d1=sigma, ., .)

    out = SpectralSO3Signal.zeros(L_out, d2)
    for l in range(min(L_out, kappa.bandlimit, len(U))):
        out.coeffs[l] = (
            EIGHT_PI2 / (2 * l + 1)
            * np.einsum("uvsmp,vspn->umn", U[l], kappa.blocks[l])
        )
    return out


# ---------------------------------------------------------------------------
# irrep-decomposed convolutions

def irrep_s2_conv(ftype_out: FeatureType, ftype_in: FeatureType,
                  kappa_blocks: dict, f_blocks: dict,
                  L_out: int | None = None,
                  cg_max_degree: int | None = None) -> dict:
    """Spherical convolution decomposed into irrep blocks.

    kappa_blocks maps (lam, mu, theta, sigma) to a KernelS2 with
    out_channels = 2 lam + 1 and in_channels = 2 theta + 1; f_blocks
    maps (theta, sigma) to a SpectralS2Signal with 2 theta + 1 channels.
    Returns {(lam, mu): SpectralSO3Signal with 2 lam + 1 channels}.  No
    Fourier coefficients of the representations appear: the couplings
    are pure Clebsch-Gordan contractions.
    """
    Lt = min(
        [k.bandlimit for k in kappa_blocks.values()]
        + [s.bandlimit for s in f_blocks.values()]
    )
    lam_max = ftype_out.max_degree
    th_max = ftype_in.max_degree
    natural = Lt + lam_max + th_max
    if L_out is None:
        L_out = natural
    if cg_max_degree is not None and natural - 1 > cg_max_degree:
        raise BandlimitOverflow(
            f"needs Clebsch-Gordan degrees up to {natural - 1}, table covers {cg_max_degree}"
        )

    out = {}
    for lam, mu, _ in ftype_out.blocks():
        if (lam, mu) in out:
            continue
        acc = SpectralSO3Signal.zeros(L_out, 2 * lam + 1)
        for th, sg, _ in ftype_in.blocks():
            kap = kappa_blocks[(lam, mu, th, sg)]
            fb = f_blocks[(th, sg)]
            Lj = min(kap.bandlimit, fb.bandlimit)
            sign = (-1.0) ** np.abs(
                np.arange(-th, th + 1)[:, None] - np.arange(-th, th + 1)[None, :]
            )
            for j in range(Lj):
                if not (np.any(kap.blocks[j]) and np.any(fb.coeffs[j])):
                    continue
                # G[rho, tau, pi, r, q] = (-1)^r f[pi, -r] kappa[rho, tau, q]
                Gj = np.einsum(
                    "pr,atq->atprq", _parity_flip(fb.coeffs[j], j), kap.blocks[j]
                )
                for J in range(abs(j - th), j + th + 1):
                    Cf = H.cg_block(j, th, J)[:, :, ::-1]  # [X, r_or_q, flipped]
                    # H[rho, M, N] over the (tau, pi) contraction
                    HJ = np.einsum("Mrp,Nqt,tp,atprq->aMN", Cf, Cf, sign, Gj)
                    for ell in range(abs(lam - J), min(lam + J, L_out - 1) + 1):
                        Cb = H.cg_block(lam, J, ell)
                        acc.coeffs[ell] += np.einsum("mvM,nrN,rMN->vmn", Cb, Cb, HJ)
        out[(lam, mu)] = acc
    return out


def irrep_so3_conv(ftype_out: FeatureType, ftype_in: FeatureType,
                   kappa_blocks: dict, f_blocks: dict,
                   L_out: int | None = None,
                   cg_max_degree: int | None = None) -> dict:
    """SO(3)-domain convolution decomposed into irrep blocks.

    kappa_blocks maps (lam, mu, theta, sigma) to a KernelSO3 with
    channel pair (2 lam + 1, 2 theta + 1); f_blocks maps (theta, sigma)
    to a SpectralSO3Signal with 2 theta + 1 channels.
    """
    lam_max = ftype_out.max_degree
    th_max = ftype_in.max_degree
    Lf = max(s.bandlimit for s in f_blocks.values())
    Lk = max(k.bandlimit for k in kappa_blocks.values())
    natural = min(Lf + lam_max + th_max, Lk)
    if L_out is None:
        L_out = natural
    if cg_max_degree is not None and Lf + lam_max + th_max - 1 > cg_max_degree:
        raise BandlimitOverflow(
            f"needs Clebsch-Gordan degrees up to {Lf + lam_max + th_max - 1}, "
            f"table covers {cg_max_degree}"
        )

    out = {}
    for lam, mu, _ in ftype_out.blocks():
        if (lam, mu) in out:
            continue
        acc = SpectralSO3Signal.zeros(L_out, 2 * lam + 1)
        for th, sg, _ in ftype_in.blocks():
            kap = kappa_blocks[(lam, mu, th, sg)]
            fb = f_blocks[(th, sg)]
            sign = (-1.0) ** np.abs(
                np.arange(-th, th + 1)[:, None] - np.arange(-th, th + 1)[None, :]
            )
            # A_tau(R) = sum_pi D^th_{tau pi}(R^-1) f_pi(R), per degree J
            LA = fb.bandlimit + th
            A = [None] * LA
            for J in range(LA):
                A[J] = np.zeros((2 * th + 1, 2 * J + 1, 2 * J + 1), dtype=complex)
            for j in range(fb.bandlimit):
                if not np.any(fb.coeffs[j]):
                    continue
                for J in range(abs(th - j), th + j + 1):
                    Ca = H.cg_block(th, j, J)[:, ::-1, :]  # [X, flipped pi/tau, q_or_r]
                    A[J] += np.einsum("Mpq,Ntr,tp,pqr->tMN", Ca, Ca, sign, fb.coeffs[j])
            # Q_{nu rho tau}(R) = D^lam_{nu rho}(R) A_tau(R), then convolve
            for ell in range(min(L_out, kap.bandlimit)):
                if not np.any(kap.blocks[ell]):
                    continue
                Q = np.zeros(
                    (2 * lam + 1, 2 * lam + 1, 2 * th + 1, 2 * ell + 1, 2 * ell + 1),
                    dtype=complex,
                )
                for J in range(max(0, abs(ell - lam)), min(len(A) - 1, ell + lam) + 1):
                    if not np.any(A[J]):
                        continue
                    Cb = H.cg_block(lam, J, ell)
                    Q += np.einsum("mvM,prN,tMN->vrtmp", Cb, Cb, A[J])
                acc.coeffs[ell] += (
                    EIGHT_PI2 / (2 * ell + 1)
                    * np.einsum("vrtmp,rtpn->vmn", Q, kap.blocks[ell])
                )
        out[(lam, mu)] = acc
    return out


# ---------------------------------------------------------------------------
# assembling irrep blocks into plain signals/kernels

def assemble_feature_s2(ftype: FeatureType, f_blocks: dict, L: int) -> SpectralS2Signal:
    out = SpectralS2Signal.zeros(L, ftype.dimension)
    for lam, mu, sl in ftype.blocks():
        fb = f_blocks[(lam, mu)]
        for l in range(min(L, fb.bandlimit)):
            out.coeffs[l][sl] = fb.coeffs[l]
    return out


def assemble_feature_so3(ftype: FeatureType, f_blocks: dict, L: int) -> SpectralSO3Signal:
    out = SpectralSO3Signal.zeros(L, ftype.dimension)
    for lam, mu, sl in ftype.blocks():
        fb = f_blocks[(lam, mu)]
        for l in range(min(L, fb.bandlimit)):
            out.coeffs[l][sl] = fb.coeffs[l]
    return out


def assemble_kernel_s2(ftype_out: FeatureType, ftype_in: FeatureType,
                       kappa_blocks: dict, L: int) -> KernelS2:
    out = KernelS2.zeros(L, ftype_out.dimension, ftype_in.dimension)
    for lam, mu, slo in ftype_out.blocks():
        for th, sg, sli in ftype_in.blocks():
            kb = kappa_blocks[(lam, mu, th, sg)]
            for l in range(min(L, kb.bandlimit)):
                out.blocks[l][slo, sli] = kb.blocks[l]
    return out


def assemble_kernel_so3(ftype_out: FeatureType, ftype_in: FeatureType,
                        kappa_blocks: dict, L: int) -> KernelSO3:
    out = KernelSO3.zeros(L, ftype_out.dimension, ftype_in.dimension)
    for lam, mu, slo in ftype_out.blocks():
        for th, sg, sli in ftype_in.blocks():
            kb = kappa_blocks[(lam, mu, th, sg)]
            for l in range(min(L, kb.bandlimit)):
                out.blocks[l][slo, sli] = kb.blocks[l]
    return out


def split_feature_so3(ftype: FeatureType, spec: SpectralSO3Signal) -> dict:
    out = {}
    for lam, mu, sl in ftype.blocks():
        out[(lam, mu)] = SpectralSO3Signal(
            spec.bandlimit, [c[sl].copy() for c in spec.coeffs]
        )
    return out


# ---------------------------------------------------------------------------
# spatial quadrature oracles

def s2_conv_spatial(kappa: KernelS2, f: SpectralS2Signal, grid: S2Grid,
                    rotations, rho1_fn=None, rho2_fn=None, chunk: int = 128) -> np.ndarray:
    """Quadrature evaluation of the S2 convolution at given rotations.

    The kernel is synthesized pointwise at the rotated nodes R^-1 x
    (spherical-harmonic evaluation at explicitly rotated coordinates),
    the integral is the grid quadrature sum.  Returns
    (len(rotations), out_channels) complex values.  This is the oracle
    the Fourier routines are tested against.
    """
    rotations = list(rotations)
    f_smp = s2_synthesis(f, grid).reshape(-1, f.channels)
    th, ph = grid.nodes()
    xyz = H.angles_to_sph(th.ravel(), ph.ravel())
    w = grid.weights().ravel()
    kflat = kappa.flat()  # (d2*d1, Lk^2)
    d2, d1 = kappa.out_channels, kappa.in_channels
    out = np.zeros((len(rotations), d2), dtype=complex)
    for start in range(0, len(rotations), chunk):
        rots = rotations[start : start + chunk]
        Rm = np.stack([H.rotation_matrix(g) for g in rots])  # (B,3,3)
        # rows of xyz @ R are R^-1 x
        ypts = np.einsum("ni,bij->bnj", xyz, Rm)
        tr, pr = H.sph_to_angles(ypts.reshape(-1, 3))
        Y = H.sph_harm_matrix(kappa.bandlimit - 1, tr, pr)
        kv = (Y @ kflat.T).reshape(len(rots), xyz.shape[0], d2, d1)
        if rho1_fn is None:
            g_vals = np.broadcast_to(f_smp, (len(rots),) + f_smp.shape)
        else:
            inv1 = np.stack([np.linalg.inv(rho1_fn(g)) for g in rots])
            g_vals = np.einsum("bst,nt->bns", inv1, f_smp)
        vals = np.einsum("n,bnus,bns->bu", w, kv, g_vals)
        if rho2_fn is not None:
            m2 = np.stack([np.asarray(rho2_fn(g), dtype=complex) for g in rots])
            vals = np.einsum("buv,bv->bu", m2, vals)
        out[start : start + len(rots)] = vals
    return out


def so3_conv_spatial(kappa: KernelSO3, f: SpectralSO3Signal, grid: SO3Grid,
                     outputs, rho1_fn=None, rho2_fn=None) -> np.ndarray:
    """Quadrature evaluation of the SO(3) convolution at given output
    rotations; the kernel is synthesized at the products R^-1 S via
    their Euler angles.  Returns (len(outputs), out_channels)."""
    outputs = list(outputs)
    d2, d1 = kappa.out_channels, kappa.in_channels
    f_vals = so3_synthesis(f, grid).reshape(-1, d1)
    node_mats = grid.rotation_matrices().reshape(-1, 3, 3)
    w = grid.weights().ravel()
    n_nodes = node_mats.shape[0]

    if rho1_fn is None:
        pre = f_vals
    else:
        pre = np.empty_like(f_vals)
        for i in range(n_nodes):
            g = H.rotation_from_matrix(node_mats[i])
            pre[i] = np.linalg.inv(rho1_fn(g)) @ f_vals[i]
    if rho2_fn is not None:
        left = np.empty((n_nodes, d2, d2), dtype=complex)
        for i in range(n_nodes):
            g = H.rotation_from_matrix(node_mats[i])
            left[i] = np.asarray(rho2_fn(g), dtype=complex)

    kspec = SpectralSO3Signal(
        kappa.bandlimit,
        [b.reshape(d2 * d1, 2 * l + 1, 2 * l + 1) for l, b in enumerate(kappa.blocks)],
    )
    from .grids import so3_evaluate_angles

    out = np.zeros((len(outputs), d2), dtype=complex)
    for i, S in enumerate(outputs):
        Sm = H.rotation_matrix(S)
        prods = np.einsum("nji,jk->nik", node_mats, Sm)  # R^-1 S = R^T S
        al, be, ga = H.euler_from_matrices(prods)
        kv = so3_evaluate_angles(kspec, al, be, ga).reshape(n_nodes, d2, d1)
        contrib = np.einsum("nus,ns->nu", kv, pre)
        if rho2_fn is not None:
            contrib = np.einsum("nuv,nv->nu", left, contrib)
        out[i] = np.einsum("n,nu->u", w, contrib)
    return out


# ---------------------------------------------------------------------------
# induced actions (for equivariance checks)

def induced_s2(f: SpectralS2Signal, g: H.EulerZYZ, rho: np.ndarray | None = None) -> SpectralS2Signal:
    """[pi(g) f](x) = rho(g) f(g^-1 x) in spectral form."""
    out = rotate_spectral_s2(f, g)
    if rho is not None:
        for l in range(out.bandlimit):
            out.coeffs[l] = np.einsum("uv,vm->um", np.asarray(rho, dtype=complex), out.coeffs[l])
    return out


def induced_so3(f: SpectralSO3Signal, g: H.EulerZYZ, rho: np.ndarray | None = None) -> SpectralSO3Signal:
    """[pi(g) f](S) = rho(g) f(g^-1 S) in spectral form."""
    out = rotate_spectral_so3(f, g)
    if rho is not None:
        for l in range(out.bandlimit):
            out.coeffs[l] = np.einsum(
                "uv,vmn->umn", np.asarray(rho, dtype=complex), out.coeffs[l]
            )
    return out
