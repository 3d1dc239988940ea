"""Steerable kernel bases for SE(n) convolutions.

A kernel kappa: R^3 -> Hom(V_theta, V_lambda) between irrep features is
rotation-steerable when

    kappa(R y) = D^lambda(R) kappa(y) D^theta(R)^-1.

Vectorizing (rows concatenated) turns the right side into
(D^lambda (x) conj(D^theta)) vrize(kappa); conjugating away the
conj(D^theta) factor and changing basis with Clebsch-Gordan blocks
splits the constraint into independent degrees J = |lambda-theta| ..
lambda+theta, on which it reads vrize(kappa^J(R y)) = D^J(R)
vrize(kappa^J(y)).  The angular solution per degree is the conjugated
spherical-harmonic vector conj(Y^J) (the conjugation is what makes the
rotation rule come out with D^J rather than conj(D^J)); radial profiles
are free.  Radial basis: Gaussian shells phi_k(r) = exp(-(r - k
delta)^2 / (2 sigma^2)) with sigma = 0.6 delta.

The SE(2) analogue uses circular harmonics R(r) exp(i(m theta + beta)),
which pick up the phase exp(i m phi) under theta -> theta + phi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import harmonics as H
from .errors import ShapeMismatch
from .features import cg_change_of_basis, tensor_product_degrees

RADIAL_SIGMA_FACTOR = 0.6


# ---------------------------------------------------------------------------
# angular solutions

@dataclass
class SteerableKernelBasis:
    """Angular constraint solutions between irreps theta_in -> lambda_out.

    For each degree J the solution is the matrix-valued map
    kappa_J(y) = sum_M conj(Y^J_M(y)) coupling[J][M], with coupling[J]
    of shape (2J+1, 2 lambda + 1, 2 theta + 1).  Radial shells phi_k and
    coefficients w (indexed J, k) turn the angular family into
    volumetric kernels.
    """

    lambda_out: int
    theta_in: int
    J_list: list[int]
    coupling: dict  # J -> (2J+1, 2lam+1, 2th+1) complex
    radial_delta: float = 1.0
    n_radial: int = 1
    weights: np.ndarray | None = None  # (len(J_list), n_radial)

    @property
    def radial_sigma(self) -> float:
        return RADIAL_SIGMA_FACTOR * self.radial_delta

    def n_angular_components(self) -> int:
        """Count of (J, m) angular component functions."""
        return sum(2 * J + 1 for J in self.J_list)

    def radial_profile(self, k: int, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return np.exp(-((r - k * self.radial_delta) ** 2) / (2.0 * self.radial_sigma**2))

    def angular_kernel(self, J: int, points: np.ndarray) -> np.ndarray:
        """kappa_J at unit directions; (npts, 2lam+1, 2th+1)."""
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        th, ph = H.sph_to_angles(pts)
        Y = np.stack(
            [H.sph_harm(J, M, th, ph) for M in range(-J, J + 1)], axis=-1
        )  # (npts, 2J+1)
        return np.einsum("pM,Mab->pab", np.conj(Y), self.coupling[J])

    def kernel_value(self, points: np.ndarray) -> np.ndarray:
        """Full kernel sum_{J,k} w_{Jk} phi_k(|y|) kappa_J(y/|y|)."""
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        r = np.linalg.norm(pts, axis=1)
        safe = np.where(r > 1e-12, r, 1.0)
        dirs = pts / safe[:, None]
        w = self.weights
        if w is None:
            w = np.ones((len(self.J_list), self.n_radial))
        out = np.zeros((pts.shape[0], 2 * self.lambda_out + 1, 2 * self.theta_in + 1),
                       dtype=complex)
        for iJ, J in enumerate(self.J_list):
            ang = self.angular_kernel(J, dirs)
            if J > 0:
                ang[r <= 1e-12] = 0.0
            radial = sum(w[iJ, k] * self.radial_profile(k, r) for k in range(self.n_radial))
            out += radial[:, None, None] * ang
        return out


def solve_angular_basis(lambda_out: int, theta_in: int) -> SteerableKernelBasis:
    """Closed-form angular solutions of the irrep kernel constraint.

    The coupling tensors arise from the unitary W = Q (I (x) C^T) that
    block-diagonalizes D^lambda (x) conj(D^theta): column (J, M) of W^H,
    un-vectorized, is the matrix multiplying conj(Y^J_M).
    """
    lam, th = lambda_out, theta_in
    Q = cg_change_of_basis(lam, th)
    C = H.conj_intertwiner(th)
    W = Q @ np.kron(np.eye(2 * lam + 1), C.T)
    Wd = W.T  # real orthogonal
    coupling = {}
    row = 0
    J_list = tensor_product_degrees(lam, th)
    for J in J_list:
        block = np.empty((2 * J + 1, 2 * lam + 1, 2 * th + 1), dtype=complex)
        for M in range(2 * J + 1):
            block[M] = Wd[:, row + M].reshape(2 * lam + 1, 2 * th + 1)
        coupling[J] = block
        row += 2 * J + 1
    return SteerableKernelBasis(lam, th, J_list, coupling)


def angular_constraint_residual(basis: SteerableKernelBasis, rng,
                                n_rotations: int = 50, n_points: int = 20) -> float:
    """Max residual of the irrep constraint over random rotations and
    directions, evaluated on the continuous angular solutions."""
    lam, th = basis.lambda_out, basis.theta_in
    pts = rng.standard_normal((n_points, 3))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    worst = 0.0
    for _ in range(n_rotations):
        g = H.random_rotation(rng)
        R = H.rotation_matrix(g)
        Dl = H.wigner_D(lam, g)
        Dt_inv = H.wigner_D(th, g).conj().T
        rot_pts = pts @ R.T
        for J in basis.J_list:
            lhs = basis.angular_kernel(J, rot_pts)
            mid = basis.angular_kernel(J, pts)
            rhs = np.einsum("ab,pbc,cd->pad", Dl, mid, Dt_inv)
            worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return worst


def angular_nullspace_dimension(lambda_out: int, theta_in: int, rng,
                                max_degree: int | None = None,
                                restrict_degree: int | None = None,
                                n_constraints: int = 40,
                                tol: float = 1e-8) -> int:
    """Numerical dimension of the angular solution space of the kernel
    constraint, by null-space analysis of its discretization.

    Unknowns are the coefficients of kappa in the basis {Y^l_m E_ij}
    with l <= max_degree (or l = restrict_degree only); constraint rows
    evaluate kappa(R y) - D^lambda(R) kappa(y) D^theta(R)^-1 at random
    (R, y) pairs.
    """
    lam, th = lambda_out, theta_in
    if max_degree is None:
        max_degree = lam + th
    degrees = [restrict_degree] if restrict_degree is not None else list(range(max_degree + 1))
    n_ang = sum(2 * l + 1 for l in degrees)
    dh = (2 * lam + 1) * (2 * th + 1)

    def ybasis(points):
        th_a, ph_a = H.sph_to_angles(points)
        cols = []
        for l in degrees:
            for m in range(-l, l + 1):
                cols.append(H.sph_harm(l, m, th_a, ph_a))
        return np.stack(cols, axis=-1)  # (npts, n_ang)

    rows = []
    for _ in range(n_constraints):
        g = H.random_rotation(rng)
        R = H.rotation_matrix(g)
        Dl = H.wigner_D(lam, g)
        Dt_inv = H.wigner_D(th, g).conj().T
        y = rng.standard_normal(3)
        y /= np.linalg.norm(y)
        Yy = ybasis(y[None])[0]
        Yry = ybasis((R @ y)[None])[0]
        # row block: for unknown x[a, i, j]: Yry[a] E_ij - Yy[a] Dl E_ij Dt_inv
        blk = np.zeros((dh, n_ang * dh), dtype=complex)
        act = np.einsum("ab,cd->acbd", Dl, Dt_inv.T).reshape(dh, dh)
        for a in range(n_ang):
            blk[:, a * dh : (a + 1) * dh] = Yry[a] * np.eye(dh) - Yy[a] * act
        rows.append(blk)
    A = np.concatenate(rows, axis=0)
    s = np.linalg.svd(A, compute_uv=False)
    return int(np.sum(s < tol * max(s[0], 1.0)))


# ---------------------------------------------------------------------------
# volumetric kernels on a lattice

@dataclass
class VolumetricKernel:
    """Hom-valued kernel sampled on an odd cubic lattice.

    values has shape (s, s, s, d_out, d_in); the voxel (i, j, k) sits at
    coordinates ((i, j, k) - (s-1)/2) * spacing.
    """

    values: np.ndarray
    spacing: float = 1.0

    @property
    def side(self) -> int:
        return self.values.shape[0]

    @property
    def d_out(self) -> int:
        return self.values.shape[3]

    @property
    def d_in(self) -> int:
        return self.values.shape[4]

    def coords(self) -> np.ndarray:
        s = self.side
        c = (s - 1) / 2.0
        ax = (np.arange(s) - c) * self.spacing
        X, Y, Z = np.meshgrid(ax, ax, ax, indexing="ij")
        return np.stack([X, Y, Z], axis=-1)


def assemble_volumetric(basis: SteerableKernelBasis, side: int, spacing: float,
                        weights: np.ndarray | None = None,
                        n_radial: int | None = None,
                        radial_delta: float | None = None) -> VolumetricKernel:
    """Sample the continuous steerable kernel at lattice cell centers.

    radial_delta defaults to the spacing; pass it explicitly to keep the
    continuous kernel fixed across lattice refinements.
    """
    if side % 2 == 0:
        raise ValueError("lattice side must be odd")
    delta = spacing if radial_delta is None else radial_delta
    b = SteerableKernelBasis(
        basis.lambda_out, basis.theta_in, basis.J_list, basis.coupling,
        radial_delta=delta,
        n_radial=n_radial if n_radial is not None else _default_shells(side, delta),
        weights=weights,
    )
    c = (side - 1) / 2.0
    ax = (np.arange(side) - c) * spacing
    X, Y, Z = np.meshgrid(ax, ax, ax, indexing="ij")
    pts = np.stack([X, Y, Z], axis=-1).reshape(-1, 3)
    vals = b.kernel_value(pts).reshape(
        side, side, side, 2 * b.lambda_out + 1, 2 * b.theta_in + 1
    )
    return VolumetricKernel(vals, spacing)


def _default_shells(side: int, spacing: float) -> int:
    rmax = math.sqrt(3.0) * (side - 1) / 2.0 * spacing
    return int(math.ceil(rmax / spacing)) + 1


def fit_volumetric_model(kernel: VolumetricKernel, max_degree: int,
                         n_radial: int | None = None):
    """Least-squares fit of lattice samples to the separable model
    sum_{k,l,m} c_{klm} phi_k(r) Y^l_m(direction).

    Returns (coefficients (n_basis, d_out, d_in), evaluator(points)).
    The origin voxel is excluded (direction undefined there).
    """
    s = kernel.side
    h = kernel.spacing
    K = n_radial if n_radial is not None else _default_shells(s, h)
    sigma = RADIAL_SIGMA_FACTOR * h

    pts = kernel.coords().reshape(-1, 3)
    vals = kernel.values.reshape(-1, kernel.d_out, kernel.d_in)
    r = np.linalg.norm(pts, axis=1)
    keep = r > 1e-12
    pts, vals, r = pts[keep], vals[keep], r[keep]

    def design(points):
        rr = np.linalg.norm(points, axis=1)
        safe = np.where(rr > 1e-12, rr, 1.0)
        Y = H.sph_harm_matrix(max_degree, *H.sph_to_angles(points / safe[:, None]))
        radial = np.stack(
            [np.exp(-((rr - k * h) ** 2) / (2 * sigma**2)) for k in range(K)], axis=1
        )
        return np.einsum("pk,pa->pka", radial, Y).reshape(points.shape[0], -1)

    A = design(pts)
    coef, *_ = np.linalg.lstsq(A, vals.reshape(pts.shape[0], -1), rcond=None)
    coef = coef.reshape(-1, kernel.d_out, kernel.d_in)

    def evaluate(points):
        points = np.asarray(points, dtype=float).reshape(-1, 3)
        return np.einsum("pb,bij->pij", design(points), coef)

    return coef, evaluate


def constraint_residual(kernel: VolumetricKernel, rho_in_fn, rho_out_fn, rotations,
                        max_degree: int | None = None) -> float:
    """Max norm of kappa(R y) - rho_out(R) kappa(y) rho_in(R)^-1 over the
    given rotations and the lattice directions.

    Both sides are evaluated through the separable radial x angular
    model fitted to the lattice samples (spectral-exact resampling of
    the angular part); rho_in_fn/rho_out_fn map rotations to matrices.
    """
    if max_degree is None:
        max_degree = (kernel.side - 1) // 2
    _, model = fit_volumetric_model(kernel, max_degree)
    pts = kernel.coords().reshape(-1, 3)
    r = np.linalg.norm(pts, axis=1)
    pts = pts[(r > 1e-12) & (r <= (kernel.side - 1) / 2.0 * kernel.spacing)]
    base = model(pts)
    worst = 0.0
    for g in rotations:
        R = H.rotation_matrix(g)
        lhs = model(pts @ R.T)
        rin = np.linalg.inv(np.asarray(rho_in_fn(g), dtype=complex))
        rout = np.asarray(rho_out_fn(g), dtype=complex)
        rhs = np.einsum("ab,pbc,cd->pad", rout, base, rin)
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return worst


# ---------------------------------------------------------------------------
# semidirect-product convolution on the translation lattice

def semidirect_conv(kernel: VolumetricKernel, field: np.ndarray) -> np.ndarray:
    """Discrete [kappa * f](y) = h^3 sum_t kappa(y - t) f(t) with zero
    padding; field has shape (nx, ny, nz, d_in), output (..., d_out)."""
    field = np.asarray(field)
    if field.ndim != 4 or field.shape[3] != kernel.d_in:
        raise ShapeMismatch(
            f"field must be (nx, ny, nz, {kernel.d_in}), got {field.shape}"
        )
    s = kernel.side
    c = (s - 1) // 2
    nx, ny, nz, _ = field.shape
    pad = np.zeros((nx + 2 * c, ny + 2 * c, nz + 2 * c, kernel.d_in), dtype=complex)
    pad[c : c + nx, c : c + ny, c : c + nz] = field
    out = np.zeros((nx, ny, nz, kernel.d_out), dtype=complex)
    for i in range(s):
        for j in range(s):
            for k in range(s):
                kv = kernel.values[i, j, k]  # kappa at offset u = (i,j,k)-c
                if not np.any(kv):
                    continue
                # f(y - u): shift by +u in padded coordinates
                di, dj, dk = c - (i - c), c - (j - c), c - (k - c)
                block = pad[di : di + nx, dj : dj + ny, dk : dk + nz]
                out += np.einsum("ab,xyzb->xyza", kv, block)
    return out * kernel.spacing**3


# ---------------------------------------------------------------------------
# SE(2) circular harmonics

@dataclass
class CircularHarmonic:
    """Planar kernel R(r) exp(i (m theta + beta))."""

    m: int
    radial: object  # callable r -> amplitude
    beta: float = 0.0

    def __call__(self, r, theta):
        r = np.asarray(r, dtype=float)
        theta = np.asarray(theta, dtype=float)
        return self.radial(r) * np.exp(1j * (self.m * theta + self.beta))

    def rotate(self, phi: float):
        """Samples of kappa(r, theta + phi) equal exp(i m phi) kappa."""
        return CircularHarmonic(self.m, self.radial, self.beta + self.m * phi)


def circular_harmonic_basis(m: int, radial, beta: float = 0.0) -> CircularHarmonic:
    """Circular harmonic kernel of rotation order m.

    Satisfies kappa(r, theta + phi) = exp(i m phi) kappa(r, theta)
    exactly (equivalently kappa(r, theta - phi) =
    exp(-i m phi) kappa(r, theta)); the order is the SE(2) analogue of
    the degree-J solutions above.
    """
    if not callable(radial):
        amp = float(radial)
        radial = lambda r: amp * np.ones_like(np.asarray(r, dtype=float))
    return CircularHarmonic(m, radial, beta)
