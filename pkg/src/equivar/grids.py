"""Quadrature grids on S2 and SO(3) and the transforms between spatial
samples and banded spectral coefficients.

The grids are equiangular, Driscoll-Healy style: 2L x 2L on the sphere
and 2L x 2L x 2L on SO(3), with colatitude nodes shifted off the poles,
``theta_j = pi (2j+1) / (4L)``.  The colatitude weights are obtained by
solving the exactness system ``sum_j w_j P_k(cos theta_j) =
integral_{-1}^{1} P_k`` for all Legendre degrees k < 2L; this makes the
quadrature exact on every product conj(Y^l1_m1) Y^l2_m2 with l1, l2 < L
(and the corresponding Wigner products on SO(3)).

Transforms separate variables: FFT summation over the azimuthal angles
and a dense contraction over colatitude per degree, O(L^3) for S2 and
O(L^4) for SO(3).  Round trips are exact (to roundoff) on bandlimited
signals.  Sampling of rotated signals at non-node points always goes
through spectral synthesis, never interpolation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import harmonics as H
from .errors import ShapeMismatch

TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# grids

def _colatitude_nodes_weights(L: int) -> tuple[np.ndarray, np.ndarray]:
    """Shifted equiangular colatitudes and exact weights for sin(t) dt.

    Solves sum_j w_j P_k(cos t_j) = 2 delta_{k0} for k < 2L (Legendre
    basis keeps the system well conditioned at these Chebyshev-type
    nodes).
    """
    j = np.arange(2 * L)
    thetas = math.pi * (2 * j + 1) / (4 * L)
    x = np.cos(thetas)
    V = np.polynomial.legendre.legvander(x, 2 * L - 1)  # (nodes, degree)
    rhs = np.zeros(2 * L)
    rhs[0] = 2.0
    w = np.linalg.solve(V.T, rhs)
    return thetas, w


@dataclass(frozen=True, eq=False)
class S2Grid:
    """Equiangular 2L x 2L sphere grid with quadrature weights.

    Nodes are (theta_j, phi_k) with theta along axis 0 and phi along
    axis 1 of sample arrays.  Node weights are
    ``theta_weights[j] * 2 pi / (2L)`` and sum to 4 pi.  Immutable.
    """

    bandlimit: int
    thetas: np.ndarray
    phis: np.ndarray
    theta_weights: np.ndarray
    alp: np.ndarray = field(repr=False)   # (2L, L, L): N_lm P_l^m at nodes

    @property
    def n_theta(self) -> int:
        return 2 * self.bandlimit

    @property
    def n_phi(self) -> int:
        return 2 * self.bandlimit

    def nodes(self) -> tuple[np.ndarray, np.ndarray]:
        """Meshgrid (theta, phi) arrays of shape (2L, 2L)."""
        return np.meshgrid(self.thetas, self.phis, indexing="ij")

    def weights(self) -> np.ndarray:
        """Per-node weights, shape (2L, 2L); sums to 4 pi."""
        return np.broadcast_to(
            self.theta_weights[:, None] * (TWO_PI / self.n_phi),
            (self.n_theta, self.n_phi),
        ).copy()

    def integrate(self, samples: np.ndarray) -> np.ndarray:
        """Quadrature of per-node values; leading axes (2L, 2L)."""
        w = self.theta_weights[:, None] * (TWO_PI / self.n_phi)
        return np.tensordot(w, np.asarray(samples), axes=([0, 1], [0, 1]))


@dataclass(frozen=True, eq=False)
class SO3Grid:
    """Equiangular 2L x 2L x 2L rotation grid (alpha, beta, gamma ZYZ).

    Axes of sample arrays are (alpha, beta, gamma).  Node weights
    include the sin(beta) factor through beta_weights and sum to 8 pi^2.
    """

    bandlimit: int
    alphas: np.ndarray
    betas: np.ndarray
    gammas: np.ndarray
    beta_weights: np.ndarray
    dstack: list = field(repr=False)      # wigner-d at beta nodes per l

    @property
    def n(self) -> int:
        return 2 * self.bandlimit

    def weights(self) -> np.ndarray:
        w_ag = (TWO_PI / self.n) ** 2
        return np.broadcast_to(
            self.beta_weights[None, :, None] * w_ag, (self.n, self.n, self.n)
        ).copy()

    def integrate(self, samples: np.ndarray) -> np.ndarray:
        w = self.weights()
        return np.tensordot(w, np.asarray(samples), axes=([0, 1, 2], [0, 1, 2]))

    def rotations(self) -> list[H.EulerZYZ]:
        """All grid rotations in (alpha, beta, gamma) C-order."""
        out = []
        for a in self.alphas:
            for b in self.betas:
                for c in self.gammas:
                    out.append(H.EulerZYZ(a, b, c))
        return out

    def rotation_matrices(self) -> np.ndarray:
        """(n, n, n, 3, 3) array of node rotation matrices."""
        ca, sa = np.cos(self.alphas), np.sin(self.alphas)
        cb, sb = np.cos(self.betas), np.sin(self.betas)
        cg, sg = np.cos(self.gammas), np.sin(self.gammas)
        Rz_a = np.zeros((self.n, 3, 3))
        Rz_a[:, 0, 0], Rz_a[:, 0, 1] = ca, -sa
        Rz_a[:, 1, 0], Rz_a[:, 1, 1] = sa, ca
        Rz_a[:, 2, 2] = 1.0
        Ry_b = np.zeros((self.n, 3, 3))
        Ry_b[:, 0, 0], Ry_b[:, 0, 2] = cb, sb
        Ry_b[:, 1, 1] = 1.0
        Ry_b[:, 2, 0], Ry_b[:, 2, 2] = -sb, cb
        Rz_g = np.zeros((self.n, 3, 3))
        Rz_g[:, 0, 0], Rz_g[:, 0, 1] = cg, -sg
        Rz_g[:, 1, 0], Rz_g[:, 1, 1] = sg, cg
        Rz_g[:, 2, 2] = 1.0
        return np.einsum("aij,bjk,ckl->abcil", Rz_a, Ry_b, Rz_g)


@lru_cache(maxsize=32)
def s2_grid(L: int) -> S2Grid:
    if L < 1:
        raise ValueError("bandlimit must be >= 1")
    thetas, w = _colatitude_nodes_weights(L)
    phis = TWO_PI * np.arange(2 * L) / (2 * L)
    alp = H._alp_norm_table(L - 1, np.cos(thetas))
    alp.setflags(write=False)
    for a in (thetas, phis, w):
        a.setflags(write=False)
    return S2Grid(L, thetas, phis, w, alp)


@lru_cache(maxsize=32)
def so3_grid(L: int) -> SO3Grid:
    if L < 1:
        raise ValueError("bandlimit must be >= 1")
    betas, w = _colatitude_nodes_weights(L)
    alphas = TWO_PI * np.arange(2 * L) / (2 * L)
    gammas = alphas.copy()
    dstack = _node_d_stack(L, betas)
    for a in (alphas, betas, gammas, w):
        a.setflags(write=False)
    return SO3Grid(L, alphas, betas, gammas, w, dstack)


def _node_d_stack(L: int, betas: np.ndarray) -> list:
    """Wigner-d values at the beta nodes, with an optional disk layer
    (EQUIVAR_CACHE_DIR) shared across processes."""
    cached = [H._disk_cache_load(f"so3grid{L}_d{l}") for l in range(L)]
    if all(c is not None for c in cached):
        return cached
    dstack = H.wigner_d_stack(L - 1, betas)
    for l, d in enumerate(dstack):
        d.setflags(write=False)
        H._disk_cache_save(f"so3grid{L}_d{l}", d)
    return dstack


# ---------------------------------------------------------------------------
# spectral signals

@dataclass
class SpectralS2Signal:
    """Banded Fourier coefficients f-hat^l_m per channel.

    coeffs[l] has shape (channels, 2l+1) with m = -l..l along the last
    axis, l < bandlimit.
    """

    bandlimit: int
    coeffs: list[np.ndarray]

    @property
    def channels(self) -> int:
        return self.coeffs[0].shape[0]

    @classmethod
    def zeros(cls, L: int, channels: int = 1) -> "SpectralS2Signal":
        return cls(L, [np.zeros((channels, 2 * l + 1), dtype=complex) for l in range(L)])

    @classmethod
    def random(cls, L, channels, rng, real=True) -> "SpectralS2Signal":
        """Random bandlimited signal; with real=True the coefficients
        satisfy f-hat^l_{-m} = (-1)^m conj(f-hat^l_m) so the synthesized
        samples are real."""
        out = cls.zeros(L, channels)
        for l in range(L):
            z = rng.standard_normal((channels, 2 * l + 1)) + 1j * rng.standard_normal(
                (channels, 2 * l + 1)
            )
            if real:
                z[:, l] = z[:, l].real
                for m in range(1, l + 1):
                    z[:, l - m] = (-1.0) ** m * np.conj(z[:, l + m])
            out.coeffs[l] = z
        return out

    def block(self, ell: int) -> np.ndarray:
        return self.coeffs[ell]

    def copy(self) -> "SpectralS2Signal":
        return SpectralS2Signal(self.bandlimit, [c.copy() for c in self.coeffs])

    def __add__(self, other):
        _check_same(self, other)
        return SpectralS2Signal(
            self.bandlimit, [a + b for a, b in zip(self.coeffs, other.coeffs)]
        )

    def __sub__(self, other):
        _check_same(self, other)
        return SpectralS2Signal(
            self.bandlimit, [a - b for a, b in zip(self.coeffs, other.coeffs)]
        )

    def __mul__(self, scalar):
        return SpectralS2Signal(self.bandlimit, [scalar * c for c in self.coeffs])

    __rmul__ = __mul__

    def max_abs(self) -> float:
        return max(float(np.max(np.abs(c))) if c.size else 0.0 for c in self.coeffs)

    def pack(self) -> np.ndarray:
        """Flat complex vector, lexicographic (channel, l, m)."""
        return np.concatenate(
            [np.concatenate([c[ch] for c in self.coeffs]) for ch in range(self.channels)]
        )

    @classmethod
    def unpack(cls, L: int, channels: int, flat: np.ndarray) -> "SpectralS2Signal":
        out = cls.zeros(L, channels)
        per = L * L
        for ch in range(channels):
            pos = ch * per
            for l in range(L):
                out.coeffs[l][ch] = flat[pos : pos + 2 * l + 1]
                pos += 2 * l + 1
        return out

    def real_symmetry_error(self) -> float:
        """Deviation from the real-signal coefficient symmetry."""
        err = 0.0
        for l in range(self.bandlimit):
            c = self.coeffs[l]
            m = np.arange(-l, l + 1)
            sym = (-1.0) ** m * np.conj(c[:, ::-1])
            err = max(err, float(np.max(np.abs(c - sym))))
        return err


@dataclass
class SpectralSO3Signal:
    """Banded Wigner coefficients f-hat^l_{mn} per channel.

    coeffs[l] has shape (channels, 2l+1, 2l+1), row m, column n.
    """

    bandlimit: int
    coeffs: list[np.ndarray]

    @property
    def channels(self) -> int:
        return self.coeffs[0].shape[0]

    @classmethod
    def zeros(cls, L: int, channels: int = 1) -> "SpectralSO3Signal":
        return cls(
            L, [np.zeros((channels, 2 * l + 1, 2 * l + 1), dtype=complex) for l in range(L)]
        )

    @classmethod
    def random(cls, L, channels, rng, real=True) -> "SpectralSO3Signal":
        """Random bandlimited signal; real=True imposes
        conj(f-hat^l_{mn}) = (-1)^(n-m) f-hat^l_{-m,-n}."""
        out = cls.zeros(L, channels)
        for l in range(L):
            z = rng.standard_normal((channels, 2 * l + 1, 2 * l + 1)) + 1j * rng.standard_normal(
                (channels, 2 * l + 1, 2 * l + 1)
            )
            if real:
                m = np.arange(-l, l + 1)
                sign = (-1.0) ** (m[None, :] - m[:, None])
                z = 0.5 * (z + sign * np.conj(z[:, ::-1, ::-1]))
            out.coeffs[l] = z
        return out

    def block(self, ell: int) -> np.ndarray:
        return self.coeffs[ell]

    def copy(self) -> "SpectralSO3Signal":
        return SpectralSO3Signal(self.bandlimit, [c.copy() for c in self.coeffs])

    def __add__(self, other):
        _check_same(self, other)
        return SpectralSO3Signal(
            self.bandlimit, [a + b for a, b in zip(self.coeffs, other.coeffs)]
        )

    def __sub__(self, other):
        _check_same(self, other)
        return SpectralSO3Signal(
            self.bandlimit, [a - b for a, b in zip(self.coeffs, other.coeffs)]
        )

    def __mul__(self, scalar):
        return SpectralSO3Signal(self.bandlimit, [scalar * c for c in self.coeffs])

    __rmul__ = __mul__

    def max_abs(self) -> float:
        return max(float(np.max(np.abs(c))) if c.size else 0.0 for c in self.coeffs)

    def pack(self) -> np.ndarray:
        """Flat complex vector, lexicographic (channel, l, m, n)."""
        chunks = []
        for ch in range(self.channels):
            for l in range(self.bandlimit):
                chunks.append(self.coeffs[l][ch].ravel())
        return np.concatenate(chunks)

    @classmethod
    def unpack(cls, L: int, channels: int, flat: np.ndarray) -> "SpectralSO3Signal":
        out = cls.zeros(L, channels)
        pos = 0
        for ch in range(channels):
            for l in range(L):
                n = (2 * l + 1) ** 2
                out.coeffs[l][ch] = flat[pos : pos + n].reshape(2 * l + 1, 2 * l + 1)
                pos += n
        return out


def _check_same(a, b):
    if a.bandlimit != b.bandlimit or a.channels != b.channels:
        raise ShapeMismatch(
            f"bandlimit/channels mismatch: ({a.bandlimit},{a.channels}) vs "
            f"({b.bandlimit},{b.channels})"
        )


# ---------------------------------------------------------------------------
# transforms

def s2_analysis(grid: S2Grid, samples: np.ndarray) -> SpectralS2Signal:
    """Forward transform: f-hat^l_m = integral f conj(Y^l_m).

    samples has shape (2L, 2L) or (2L, 2L, channels), theta along axis
    0, phi along axis 1.  Exact on signals bandlimited below L.
    """
    L = grid.bandlimit
    samples = np.asarray(samples)
    if samples.ndim == 2:
        samples = samples[:, :, None]
    if samples.shape[:2] != (2 * L, 2 * L):
        raise ShapeMismatch(
            f"expected samples shaped (2L, 2L, C) = ({2*L}, {2*L}, C), got {samples.shape}"
        )
    # azimuthal sums: G[j, n, c] = sum_k f e^{-i n phi_k}, n = m mod 2L
    G = np.fft.fft(samples, axis=1) * (TWO_PI / grid.n_phi)
    out = SpectralS2Signal.zeros(L, samples.shape[2])
    wj = grid.theta_weights
    for l in range(L):
        for m in range(-l, l + 1):
            col = grid.alp[:, l, abs(m)]
            sgn = 1.0 if m >= 0 else (-1.0) ** m
            out.coeffs[l][:, m + l] = sgn * np.einsum(
                "j,j,jc->c", wj, col, G[:, m % (2 * L), :]
            )
    return out


def s2_synthesis(spec: SpectralS2Signal, grid: S2Grid) -> np.ndarray:
    """Inverse transform to per-node samples, shape (2L, 2L, channels).

    Signals with bandlimit below the grid's are implicitly zero-padded
    (a finer grid oversamples a coarser signal exactly).
    """
    L = grid.bandlimit
    if spec.bandlimit > L:
        raise ShapeMismatch(f"signal bandlimit {spec.bandlimit} exceeds grid {L}")
    C = spec.channels
    F = np.zeros((2 * L, 2 * L, C), dtype=complex)  # (theta j, m bin, channel)
    for l in range(spec.bandlimit):
        for m in range(-l, l + 1):
            col = grid.alp[:, l, abs(m)]
            sgn = 1.0 if m >= 0 else (-1.0) ** m
            F[:, m % (2 * L), :] += sgn * np.outer(col, spec.coeffs[l][:, m + l])
    return np.fft.ifft(F, axis=1) * (2 * L)


def s2_evaluate(spec: SpectralS2Signal, theta, phi) -> np.ndarray:
    """Synthesize at arbitrary points; returns (..., channels)."""
    theta = np.asarray(theta, dtype=float)
    shape = theta.shape
    Y = H.sph_harm_matrix(spec.bandlimit - 1, theta.ravel(), np.asarray(phi, dtype=float).ravel())
    flat = np.concatenate([spec.coeffs[l] for l in range(spec.bandlimit)], axis=1)  # (C, L^2)
    return (Y @ flat.T).reshape(shape + (spec.channels,))


def so3_analysis(grid: SO3Grid, samples: np.ndarray) -> SpectralSO3Signal:
    """Forward SO(3) transform with the (2l+1)/(8 pi^2) normalization.

    samples has shape (2L, 2L, 2L) or (2L, 2L, 2L, channels) over
    (alpha, beta, gamma).
    """
    L = grid.bandlimit
    samples = np.asarray(samples)
    if samples.ndim == 3:
        samples = samples[..., None]
    if samples.shape[:3] != (2 * L, 2 * L, 2 * L):
        raise ShapeMismatch(
            f"expected samples shaped (2L, 2L, 2L, C) with L={L}, got {samples.shape}"
        )
    n = 2 * L
    # A[m, j, n, c] = sum_{a,g} f e^{+i m alpha_a} e^{+i n gamma_g} * (2pi/n)^2
    A = np.fft.ifft(samples, axis=0) * n
    A = np.fft.ifft(A, axis=2) * n
    A *= (TWO_PI / n) ** 2
    out = SpectralSO3Signal.zeros(L, samples.shape[3])
    for l in range(L):
        idx = (np.arange(-l, l + 1)) % n
        Al = A[np.ix_(idx, np.arange(n), idx)]          # (2l+1, j, 2l+1, c)
        dl = grid.dstack[l]                              # (j, 2l+1, 2l+1)
        out.coeffs[l] = (
            (2 * l + 1) / (8.0 * math.pi**2)
            * np.einsum("j,jmn,mjnc->cmn", grid.beta_weights, dl, Al)
        )
    return out


def so3_synthesis(spec: SpectralSO3Signal, grid: SO3Grid) -> np.ndarray:
    """Inverse SO(3) transform to samples (2L, 2L, 2L, channels).

    Signals with bandlimit below the grid's are implicitly zero-padded.
    """
    L = grid.bandlimit
    if spec.bandlimit > L:
        raise ShapeMismatch(f"signal bandlimit {spec.bandlimit} exceeds grid {L}")
    n = 2 * L
    C = spec.channels
    B = np.zeros((n, n, n, C), dtype=complex)  # (m bin, j, n bin, c)
    for l in range(spec.bandlimit):
        dl = grid.dstack[l]
        contrib = np.einsum("cmn,jmn->mjnc", spec.coeffs[l], dl)
        idx = (np.arange(-l, l + 1)) % n
        B[np.ix_(idx, np.arange(n), idx)] += contrib
    # f[a, j, g] = sum_{m,n} B e^{-i m alpha_a} e^{-i n gamma_g}
    out = np.fft.fft(B, axis=0)
    out = np.fft.fft(out, axis=2)
    return out


def so3_evaluate(spec: SpectralSO3Signal, rotations) -> np.ndarray:
    """Synthesize at arbitrary rotations; returns (len(rotations), channels)."""
    rotations = list(rotations)
    alphas = np.array([g.alpha for g in rotations])
    betas = np.array([g.beta for g in rotations])
    gammas = np.array([g.gamma for g in rotations])
    return so3_evaluate_angles(spec, alphas, betas, gammas)


def so3_evaluate_angles(spec: SpectralSO3Signal, alphas, betas, gammas) -> np.ndarray:
    """Vectorized synthesis at rotations given by angle arrays (N,)."""
    alphas = np.asarray(alphas, dtype=float).ravel()
    betas = np.asarray(betas, dtype=float).ravel()
    gammas = np.asarray(gammas, dtype=float).ravel()
    dst = H.wigner_d_stack(spec.bandlimit - 1, betas)
    out = np.zeros((alphas.size, spec.channels), dtype=complex)
    for l in range(spec.bandlimit):
        m = np.arange(-l, l + 1)
        em = np.exp(-1j * np.outer(alphas, m))
        en = np.exp(-1j * np.outer(gammas, m))
        D = em[:, :, None] * dst[l] * en[:, None, :]
        out += np.einsum("rmn,cmn->rc", D, spec.coeffs[l])
    return out


# ---------------------------------------------------------------------------
# spectral rotations

def rotate_spectral_s2(spec: SpectralS2Signal, g: H.EulerZYZ) -> SpectralS2Signal:
    """Coefficients of x -> f(g^-1 x): per-degree block product D^l(g)."""
    out = spec.copy()
    if g.is_identity:
        return out
    for l in range(spec.bandlimit):
        D = H.wigner_D(l, g)
        out.coeffs[l] = np.einsum("nm,cm->cn", D, spec.coeffs[l])
    return out


def rotate_spectral_so3(spec: SpectralSO3Signal, g: H.EulerZYZ) -> SpectralSO3Signal:
    """Coefficients of the left translation S -> f(g^-1 S)."""
    out = spec.copy()
    if g.is_identity:
        return out
    for l in range(spec.bandlimit):
        D = H.wigner_D(l, g)
        out.coeffs[l] = np.einsum("pm,cmn->cpn", np.conj(D), spec.coeffs[l])
    return out


def parseval_s2(spec: SpectralS2Signal) -> float:
    """Spectral energy sum; equals the weighted spatial energy."""
    return float(sum(np.sum(np.abs(c) ** 2) for c in spec.coeffs))


def parseval_so3(spec: SpectralSO3Signal) -> float:
    total = 0.0
    for l in range(spec.bandlimit):
        total += 8.0 * math.pi**2 / (2 * l + 1) * float(np.sum(np.abs(spec.coeffs[l]) ** 2))
    return total
