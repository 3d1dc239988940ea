"""Wigner matrices, spherical harmonics, Clebsch-Gordan coefficients and
ZYZ rotation handling.

Conventions (normative, see docs/conventions.md):

* Euler angles are active ZYZ: ``R(alpha, beta, gamma) = Rz(alpha) Ry(beta)
  Rz(gamma)`` with ``alpha, gamma in [0, 2pi)`` and ``beta in [0, pi]``.
* ``D^l_{mn}(alpha, beta, gamma) = exp(-i m alpha) d^l_{mn}(beta)
  exp(-i n gamma)`` with row index m and column index n, both running
  -l..l.  The blocks are unitary and satisfy ``D^l(QR) = D^l(Q) D^l(R)``
  and ``conj(D^l_{mn}) = (-1)^(n-m) D^l_{-m,-n}``.
* Spherical harmonics are orthonormal complex with the Condon-Shortley
  phase: ``Y^l_m(theta, phi) = N_lm P_l^m(cos theta) exp(i m phi)``,
  ``integral conj(Y^l1_m1) Y^l2_m2 = delta delta``, and the rotation rule
  ``Y^l_m(Rx) = sum_n conj(D^l_{mn}(R)) Y^l_n(x)``.
* ``conj(Y^l_m) = (-1)^m Y^l_{-m}`` (standard Condon-Shortley identity).

Wigner-d matrices are evaluated by a three-term recurrence in the degree
at fixed beta, seeded on the |m| = l or |n| = l boundary where the
defining sum collapses to a single term.  The recurrence is stable
upwards for the target range l <= 64.  Clebsch-Gordan coefficients use
the Racah closed form with log-factorials; double precision keeps them
good to ~1e-13 for l <= 16 and they degrade slowly beyond (~1e-10 at
l = 32).
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import NotARotation

TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# rotations

@dataclass(frozen=True)
class EulerZYZ:
    """Active ZYZ Euler angles; alpha, gamma in [0, 2pi), beta in [0, pi]."""

    alpha: float
    beta: float
    gamma: float

    def __post_init__(self):
        object.__setattr__(self, "alpha", float(self.alpha) % TWO_PI)
        object.__setattr__(self, "gamma", float(self.gamma) % TWO_PI)
        beta = float(self.beta)
        if not (-1e-12 <= beta <= math.pi + 1e-12):
            raise ValueError(f"beta out of range [0, pi]: {beta}")
        object.__setattr__(self, "beta", min(max(beta, 0.0), math.pi))

    @property
    def is_identity(self) -> bool:
        return self.alpha == 0.0 and self.beta == 0.0 and self.gamma == 0.0


IDENTITY = EulerZYZ(0.0, 0.0, 0.0)


def _rz(t: float) -> np.ndarray:
    c, s = math.cos(t), math.sin(t)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _ry(t: float) -> np.ndarray:
    c, s = math.cos(t), math.sin(t)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rotation_matrix(g: EulerZYZ) -> np.ndarray:
    """3x3 matrix of the active rotation Rz(alpha) Ry(beta) Rz(gamma)."""
    return _rz(g.alpha) @ _ry(g.beta) @ _rz(g.gamma)


def rotation_from_matrix(R: np.ndarray, tol: float = 1e-9) -> EulerZYZ:
    """Extract ZYZ angles from a proper rotation matrix.

    At gimbal lock (|R[2,2]| ~ 1) the decomposition is degenerate and
    gamma := 0 by convention.  Raises NotARotation if R is not orthogonal
    with determinant +1 within ``tol``.
    """
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3):
        raise NotARotation(f"expected 3x3 matrix, got shape {R.shape}")
    if np.max(np.abs(R.T @ R - np.eye(3))) > tol:
        raise NotARotation("matrix is not orthogonal")
    if abs(np.linalg.det(R) - 1.0) > tol:
        raise NotARotation("matrix has determinant != +1")

    # sin(beta) >= 0 always, so beta = atan2(+sqrt(R02^2+R12^2), R22)
    sb = math.hypot(R[0, 2], R[1, 2])
    beta = math.atan2(sb, R[2, 2])
    if sb < 1e-9:
        # gimbal lock: R = Rz(alpha) or Rz(alpha) Ry(pi); set gamma = 0
        if R[2, 2] > 0.0:
            alpha = math.atan2(R[1, 0], R[0, 0])
        else:
            alpha = math.atan2(-R[0, 1], R[1, 1])
        return EulerZYZ(alpha, beta, 0.0)
    alpha = math.atan2(R[1, 2], R[0, 2])
    gamma = math.atan2(R[2, 1], -R[2, 0])
    return EulerZYZ(alpha, beta, gamma)


def euler_from_matrices(R: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized ZYZ extraction from an (..., 3, 3) stack of rotations.

    No orthogonality validation (callers pass products of known
    rotations); gimbal-locked entries get gamma = 0.
    """
    R = np.asarray(R, dtype=float)
    sb = np.hypot(R[..., 0, 2], R[..., 1, 2])
    beta = np.arctan2(sb, R[..., 2, 2])
    lock = sb < 1e-9
    alpha = np.where(
        lock,
        np.where(
            R[..., 2, 2] > 0.0,
            np.arctan2(R[..., 1, 0], R[..., 0, 0]),
            np.arctan2(-R[..., 0, 1], R[..., 1, 1]),
        ),
        np.arctan2(R[..., 1, 2], R[..., 0, 2]),
    )
    gamma = np.where(lock, 0.0, np.arctan2(R[..., 2, 1], -R[..., 2, 0]))
    return alpha % TWO_PI, beta, gamma % TWO_PI


def compose(g: EulerZYZ, h: EulerZYZ) -> EulerZYZ:
    """Angles of the product rotation g * h."""
    return rotation_from_matrix(rotation_matrix(g) @ rotation_matrix(h))


def inverse(g: EulerZYZ) -> EulerZYZ:
    return rotation_from_matrix(rotation_matrix(g).T)


def random_rotation(rng: np.random.Generator) -> EulerZYZ:
    """Haar-distributed rotation (uniform alpha, gamma; uniform cos beta)."""
    return EulerZYZ(
        rng.uniform(0.0, TWO_PI),
        math.acos(rng.uniform(-1.0, 1.0)),
        rng.uniform(0.0, TWO_PI),
    )


# Unitary change of basis A with A R A^H = D^1(R): maps Cartesian (x, y, z)
# components to spherical components ordered m = -1, 0, +1.
_S2 = 1.0 / math.sqrt(2.0)
VEC_TO_SPH = np.array(
    [
        [_S2, 1j * _S2, 0.0],
        [0.0, 0.0, 1.0],
        [-_S2, 1j * _S2, 0.0],
    ],
    dtype=complex,
)


def conj_intertwiner(ell: int) -> np.ndarray:
    """Real orthogonal C with conj(D^l(R)) = C D^l(R) C.T for all R.

    C[a, m] = (-1)^a delta_{a,-m}, indices running -l..l.
    """
    n = 2 * ell + 1
    C = np.zeros((n, n))
    for a in range(-ell, ell + 1):
        C[a + ell, -a + ell] = (-1.0) ** a
    return C


# ---------------------------------------------------------------------------
# Wigner d and D

def _log_factorial(n: int) -> float:
    return math.lgamma(n + 1)


def _sqrt_binom(n: int, k: int) -> float:
    return math.exp(0.5 * (_log_factorial(n) - _log_factorial(k) - _log_factorial(n - k)))


def _d_seed_row(ell: int, which: str, cos_half, sin_half):
    """Boundary values of d^l where the defining sum has a single term.

    which selects the boundary: 'm+' (m=l), 'm-' (m=-l), 'n+' (n=l),
    'n-' (n=-l).  Returns array (..., 2l+1) over the free index.
    """
    k = np.arange(-ell, ell + 1)
    binom = np.array([_sqrt_binom(2 * ell, ell + kk) for kk in k])
    c = np.asarray(cos_half)[..., None]
    s = np.asarray(sin_half)[..., None]
    if which == "m+":    # d^l_{l,n}, free n
        return ((-1.0) ** (ell - k)) * binom * c ** (ell + k) * s ** (ell - k)
    if which == "m-":    # d^l_{-l,n}
        return binom * c ** (ell - k) * s ** (ell + k)
    if which == "n+":    # d^l_{m,l}, free m
        return binom * c ** (ell + k) * s ** (ell - k)
    if which == "n-":    # d^l_{m,-l}
        return ((-1.0) ** (ell + k)) * binom * c ** (ell - k) * s ** (ell + k)
    raise ValueError(which)


def wigner_d_stack(lmax: int, beta) -> list[np.ndarray]:
    """d^l(beta) for all l = 0..lmax, vectorized over beta.

    Returns a list indexed by l of real arrays with shape
    ``beta.shape + (2l+1, 2l+1)``; row m, column n, both -l..l.
    """
    beta = np.asarray(beta, dtype=float)
    scalar = beta.ndim == 0
    beta = np.atleast_1d(beta)
    x = np.cos(beta)
    ch = np.cos(beta / 2.0)
    sh = np.sin(beta / 2.0)

    out = [np.ones(beta.shape + (1, 1))]
    if lmax == 0:
        return [a[0] for a in out] if scalar else out
    d1 = np.zeros(beta.shape + (3, 3))
    d1[..., 0, :] = _d_seed_row(1, "m-", ch, sh)
    d1[..., 2, :] = _d_seed_row(1, "m+", ch, sh)
    d1[..., :, 0] = _d_seed_row(1, "n-", ch, sh)
    d1[..., :, 2] = _d_seed_row(1, "n+", ch, sh)
    d1[..., 1, 1] = x
    out.append(d1)

    for ell in range(2, lmax + 1):
        l = ell - 1
        m = np.arange(-l, l + 1)
        mm, nn = np.meshgrid(m, m, indexing="ij")
        denom = l * np.sqrt((ell * ell - mm * mm) * (ell * ell - nn * nn))
        a = (2 * l + 1) * (l * (l + 1) * x[..., None, None] - mm * nn) / denom
        b = (l + 1) * np.sqrt(
            np.maximum((l * l - mm * mm) * (l * l - nn * nn), 0)
        ) / denom

        prev = out[ell - 1]
        prev2 = np.zeros_like(prev)
        prev2[..., 1:-1, 1:-1] = out[ell - 2]

        d = np.zeros(beta.shape + (2 * ell + 1, 2 * ell + 1))
        d[..., 1:-1, 1:-1] = a * prev - b * prev2
        d[..., 0, :] = _d_seed_row(ell, "m-", ch, sh)
        d[..., -1, :] = _d_seed_row(ell, "m+", ch, sh)
        d[..., :, 0] = _d_seed_row(ell, "n-", ch, sh)
        d[..., :, -1] = _d_seed_row(ell, "n+", ch, sh)
        out.append(d)
    return [a[0] for a in out] if scalar else out


def wigner_d_small(ell: int, beta: float) -> np.ndarray:
    """Real orthogonal d^l(beta) for 0 <= beta <= pi."""
    return wigner_d_stack(ell, float(beta))[ell]


def _wigner_d_sum(ell: int, m: int, n: int, beta: float) -> float:
    """Direct factorial-sum evaluation; cross-check oracle for small l."""
    c = math.cos(beta / 2.0)
    s = math.sin(beta / 2.0)
    pref = 0.5 * (
        _log_factorial(ell + m) + _log_factorial(ell - m)
        + _log_factorial(ell + n) + _log_factorial(ell - n)
    )
    total = 0.0
    for k in range(max(0, n - m), min(ell + n, ell - m) + 1):
        lden = (
            _log_factorial(ell + n - k) + _log_factorial(k)
            + _log_factorial(m - n + k) + _log_factorial(ell - m - k)
        )
        pc = 2 * ell + n - m - 2 * k
        ps = m - n + 2 * k
        if (c == 0.0 and pc > 0) or (s == 0.0 and ps > 0):
            continue
        total += (-1.0) ** (m - n + k) * math.exp(pref - lden) * c ** pc * s ** ps
    return total


def wigner_D(ell: int, g: EulerZYZ) -> np.ndarray:
    """Unitary block D^l(g), rows m and columns n from -l to l."""
    return wigner_D_stack(ell, g)[ell]


def wigner_D_stack(lmax: int, g: EulerZYZ) -> list[np.ndarray]:
    """D^l(g) for all l = 0..lmax."""
    d = wigner_d_stack(lmax, g.beta)
    out = []
    for ell in range(lmax + 1):
        m = np.arange(-ell, ell + 1)
        em = np.exp(-1j * m * g.alpha)
        en = np.exp(-1j * m * g.gamma)
        out.append(em[:, None] * d[ell] * en[None, :])
    return out


# ---------------------------------------------------------------------------
# spherical harmonics

def _alp_norm_table(lmax: int, x: np.ndarray) -> np.ndarray:
    """Normalized associated Legendre values N_lm P_l^m(x) for m >= 0.

    Returns array (len(x), lmax+1, lmax+1) with axis 1 = l, axis 2 = m
    (entries with m > l are zero).  Includes the Condon-Shortley phase,
    so Y^l_m = table[:, l, m] * exp(i m phi) for m >= 0.
    """
    x = np.asarray(x, dtype=float)
    sx = np.sqrt(np.maximum(1.0 - x * x, 0.0))
    t = np.zeros((x.size,) + (lmax + 1, lmax + 1))
    t[:, 0, 0] = math.sqrt(1.0 / (4.0 * math.pi))
    for m in range(1, lmax + 1):
        t[:, m, m] = -math.sqrt((2 * m + 1) / (2.0 * m)) * sx * t[:, m - 1, m - 1]
    for m in range(0, lmax):
        t[:, m + 1, m] = math.sqrt(2 * m + 3.0) * x * t[:, m, m]
    for m in range(0, lmax + 1):
        for ell in range(m + 2, lmax + 1):
            a = math.sqrt((4.0 * ell * ell - 1.0) / (ell * ell - m * m))
            b = math.sqrt(
                ((2.0 * ell + 1.0) * (ell - 1.0 + m) * (ell - 1.0 - m))
                / ((2.0 * ell - 3.0) * (ell * ell - m * m))
            )
            t[:, ell, m] = a * x * t[:, ell - 1, m] - b * t[:, ell - 2, m]
    return t


def sph_harm(ell: int, m: int, theta, phi) -> np.ndarray:
    """Orthonormal complex Y^l_m(theta, phi), Condon-Shortley phase.

    theta is the colatitude in [0, pi], phi the longitude.  Vectorized
    over broadcastable theta/phi arrays.
    """
    if abs(m) > ell:
        raise ValueError(f"|m| = {abs(m)} exceeds l = {ell}")
    scalar = np.ndim(theta) == 0 and np.ndim(phi) == 0
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    theta, phi = np.broadcast_arrays(theta, phi)
    shape = theta.shape
    t = _alp_norm_table(ell, np.cos(theta).ravel())
    val = t[:, ell, abs(m)] * np.exp(1j * abs(m) * phi.ravel())
    if m < 0:
        val = (-1.0) ** m * np.conj(val)
    val = val.reshape(shape)
    return val[0] if scalar else val


def sph_harm_matrix(lmax: int, theta, phi) -> np.ndarray:
    """All Y^l_m for l <= lmax at the given points.

    Returns complex array (npoints, (lmax+1)^2) in lexicographic (l, m)
    order with m = -l..l; used for synthesis/evaluation at scattered
    points.
    """
    theta = np.asarray(theta, dtype=float).ravel()
    phi = np.asarray(phi, dtype=float).ravel()
    t = _alp_norm_table(lmax, np.cos(theta))
    em = np.exp(1j * np.outer(phi, np.arange(lmax + 1)))
    out = np.empty((theta.size, (lmax + 1) ** 2), dtype=complex)
    for ell in range(lmax + 1):
        base = ell * ell + ell
        for m in range(0, ell + 1):
            pos = t[:, ell, m] * em[:, m]
            out[:, base + m] = pos
            if m > 0:
                out[:, base - m] = (-1.0) ** m * np.conj(pos)
    return out


def sph_to_angles(xyz: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(theta, phi) of vectors, rows of xyz (zero vectors map to the pole)."""
    xyz = np.asarray(xyz, dtype=float)
    norm = np.linalg.norm(xyz, axis=-1)
    norm = np.where(norm > 0.0, norm, 1.0)
    theta = np.arccos(np.clip(xyz[..., 2] / norm, -1.0, 1.0))
    phi = np.arctan2(xyz[..., 1], xyz[..., 0]) % TWO_PI
    return theta, phi


def angles_to_sph(theta, phi) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    st = np.sin(theta)
    return np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)], axis=-1)


# ---------------------------------------------------------------------------
# Clebsch-Gordan

def clebsch_gordan(l1: int, m1: int, l2: int, m2: int, J: int, M: int) -> float:
    """Real coefficient C^{JM}_{l1 m1; l2 m2} (Racah closed form).

    Zero when M != m1 + m2 or J outside [|l1-l2|, l1+l2]; total on the
    domain |m1| <= l1, |m2| <= l2, |M| <= J.
    """
    if abs(m1) > l1 or abs(m2) > l2 or abs(M) > J:
        raise ValueError("order index exceeds degree")
    if M != m1 + m2 or J < abs(l1 - l2) or J > l1 + l2:
        return 0.0
    lf = _log_factorial
    pref = 0.5 * (
        math.log(2.0 * J + 1.0)
        + lf(l1 + l2 - J) + lf(l1 - l2 + J) + lf(-l1 + l2 + J) - lf(l1 + l2 + J + 1)
        + lf(J + M) + lf(J - M)
        + lf(l1 - m1) + lf(l1 + m1) + lf(l2 - m2) + lf(l2 + m2)
    )
    kmin = max(0, l2 - J - m1, l1 - J + m2)
    kmax = min(l1 + l2 - J, l1 - m1, l2 + m2)
    total = 0.0
    for k in range(kmin, kmax + 1):
        lden = (
            lf(k) + lf(l1 + l2 - J - k) + lf(l1 - m1 - k)
            + lf(l2 + m2 - k) + lf(J - l2 + m1 + k) + lf(J - l1 - m2 + k)
        )
        total += (-1.0) ** k * math.exp(pref - lden)
    return total


@lru_cache(maxsize=None)
def cg_block(l1: int, l2: int, J: int) -> np.ndarray:
    """Dense block C^{JM}_{l1 m1; l2 m2}, shape (2J+1, 2l1+1, 2l2+1).

    Cached in memory and, when EQUIVAR_CACHE_DIR is set, on disk.
    """
    cached = _disk_cache_load(f"cg_{l1}_{l2}_{J}")
    if cached is not None:
        return cached
    out = np.zeros((2 * J + 1, 2 * l1 + 1, 2 * l2 + 1))
    if not (abs(l1 - l2) <= J <= l1 + l2):
        return out
    for m1 in range(-l1, l1 + 1):
        for m2 in range(-l2, l2 + 1):
            M = m1 + m2
            if abs(M) <= J:
                out[M + J, m1 + l1, m2 + l2] = clebsch_gordan(l1, m1, l2, m2, J, M)
    out.setflags(write=False)
    _disk_cache_save(f"cg_{l1}_{l2}_{J}", out)
    return out


class CGTable:
    """Clebsch-Gordan lookups for all l1, l2 <= max_degree.

    Coefficients are real and stored only for M = m1 + m2 and
    |l1 - l2| <= J <= l1 + l2 (dense per-(l1, l2, J) blocks).  Immutable
    after construction; safe for concurrent reads.
    """

    def __init__(self, max_degree: int):
        self.max_degree = int(max_degree)
        for l1 in range(self.max_degree + 1):
            for l2 in range(self.max_degree + 1):
                for J in range(abs(l1 - l2), l1 + l2 + 1):
                    cg_block(l1, l2, J)

    def __call__(self, l1, m1, l2, m2, J, M) -> float:
        if l1 > self.max_degree or l2 > self.max_degree:
            raise ValueError("degree exceeds table")
        if M != m1 + m2 or not (abs(l1 - l2) <= J <= l1 + l2):
            return 0.0
        return float(cg_block(l1, l2, J)[M + J, m1 + l1, m2 + l2])

    def block(self, l1: int, l2: int, J: int) -> np.ndarray:
        return cg_block(l1, l2, J)


# ---------------------------------------------------------------------------
# optional disk cache

def _cache_dir() -> str | None:
    return os.environ.get("EQUIVAR_CACHE_DIR")


def _disk_cache_load(key: str) -> np.ndarray | None:
    d = _cache_dir()
    if not d:
        return None
    path = os.path.join(d, key + ".npy")
    if os.path.exists(path):
        arr = np.load(path)
        arr.setflags(write=False)
        return arr
    return None


def _disk_cache_save(key: str, arr: np.ndarray) -> None:
    d = _cache_dir()
    if not d:
        return
    os.makedirs(d, exist_ok=True)
    path = os.path.join(d, key + ".npy")
    if not os.path.exists(path):
        tmp = os.path.join(d, key + ".tmp.npy")
        np.save(tmp, arr)
        os.replace(tmp, path)
