"""Feature typing by irrep multiplicities, tensor-product decomposition,
SE(3) output-feature construction, and intensity scaling.

A feature space is typed by a finitely supported multiset of rotation
irrep degrees: V = direct sum over degrees lambda (with multiplicity
mu) of the (2 lambda + 1)-dimensional space carrying D^lambda.  The
basis order is normative for all file formats: ascending lambda, then
multiplicity index mu, then component nu = -lambda..lambda.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import harmonics as H


@dataclass(frozen=True)
class FeatureType:
    """Multiset of irrep degrees with multiplicities."""

    mult: tuple  # sorted tuple of (degree, count), counts > 0

    def __init__(self, multiplicities):
        items = tuple(
            sorted((int(k), int(v)) for k, v in dict(multiplicities).items() if v)
        )
        if any(k < 0 or v < 0 for k, v in items):
            raise ValueError("degrees and counts must be non-negative")
        object.__setattr__(self, "mult", items)

    @property
    def dimension(self) -> int:
        return sum((2 * lam + 1) * c for lam, c in self.mult)

    def count(self, lam: int) -> int:
        return dict(self.mult).get(lam, 0)

    def degrees(self) -> list[int]:
        return [lam for lam, _ in self.mult]

    @property
    def max_degree(self) -> int:
        return max((lam for lam, _ in self.mult), default=0)

    def blocks(self):
        """Yield (lambda, mu, slice) in the normative basis order."""
        pos = 0
        for lam, c in self.mult:
            for mu in range(c):
                yield lam, mu, slice(pos, pos + 2 * lam + 1)
                pos += 2 * lam + 1

    def representation_matrix(self, g: H.EulerZYZ) -> np.ndarray:
        """Block-diagonal unitary: direct sum of D^lambda(g) blocks."""
        out = np.zeros((self.dimension, self.dimension), dtype=complex)
        cache = {}
        for lam, _, sl in self.blocks():
            if lam not in cache:
                cache[lam] = H.wigner_D(lam, g)
            out[sl, sl] = cache[lam]
        return out

    def to_json(self) -> str:
        return json.dumps({"mult": {str(k): v for k, v in self.mult}})

    @classmethod
    def from_json(cls, text: str) -> "FeatureType":
        data = json.loads(text)
        return cls({int(k): int(v) for k, v in data["mult"].items()})

    def __repr__(self):
        return f"FeatureType({{{', '.join(f'{k}: {v}' for k, v in self.mult)}}})"


def tensor_product_degrees(l1: int, l2: int) -> list[int]:
    """Degrees J appearing in D^l1 (x) D^l2: |l1-l2| .. l1+l2."""
    return list(range(abs(l1 - l2), l1 + l2 + 1))


def vrize(M: np.ndarray) -> np.ndarray:
    """Concatenation of the rows of a matrix."""
    return np.asarray(M).reshape(-1)


def unvrize(v: np.ndarray, rows: int, cols: int) -> np.ndarray:
    return np.asarray(v).reshape(rows, cols)


def vectorize_similarity(R: np.ndarray) -> np.ndarray:
    """9x9 matrix S with S vrize(Q) = vrize(R Q R^T).

    Realizes vrize(A B C) = (A (x) C^T) vrize(B) for the similarity
    action; orthogonal whenever R is.
    """
    R = np.asarray(R)
    return np.kron(R, R)


def cg_change_of_basis(l1: int, l2: int) -> np.ndarray:
    """Real orthogonal Q with Q (D^l1 (x) D^l2) Q^T = direct sum D^J.

    Rows are indexed (J, M) with J ascending from |l1-l2| to l1+l2,
    columns (m1, m2) in row-major kron order;
    Q[(J,M),(m1,m2)] = C^{JM}_{l1 m1; l2 m2}.
    """
    dim = (2 * l1 + 1) * (2 * l2 + 1)
    Q = np.zeros((dim, dim))
    row = 0
    for J in tensor_product_degrees(l1, l2):
        B = H.cg_block(l1, l2, J)  # (2J+1, 2l1+1, 2l2+1)
        Q[row : row + 2 * J + 1, :] = B.reshape(2 * J + 1, dim)
        row += 2 * J + 1
    return Q


def se3_output_feature_type(num_classes: int) -> FeatureType:
    """Output typing for rotation-equivariant 3D object detection.

    Per pixel: class probabilities (num_classes scalars), object size
    (3 scalars), position (one vector), orientation matrix (scalar +
    vector + degree-2 tensor from the similarity action).
    """
    if num_classes < 0:
        raise ValueError("num_classes must be >= 0")
    return FeatureType({0: num_classes + 4, 1: 2, 2: 1})


def multiplicities_from_representation(rep_matrix_fn, dim: int, max_degree: int) -> FeatureType:
    """Recover irrep multiplicities from a representation via characters.

    Characters are class functions, so chi_rho(beta) sin(beta/2) =
    sum_lambda mult_lambda sin((2 lambda + 1) beta / 2) is a finite odd
    sine series; the multiplicities drop out of the exact discrete
    orthogonality sum_k sin((2a+1) t_k) sin((2b+1) t_k) = K/2 delta_ab
    at t_k = (2k+1) pi / (4K).
    """
    K = max_degree + 2
    t = (2 * np.arange(K) + 1) * np.pi / (4 * K)
    betas = 2.0 * t
    chi_rho = np.array(
        [np.trace(rep_matrix_fn(H.EulerZYZ(0.0, b, 0.0))).real for b in betas]
    )
    series = chi_rho * np.sin(t)
    mult = {}
    for lam in range(max_degree + 1):
        val = 2.0 / K * np.sum(np.sin((2 * lam + 1) * t) * series)
        m = int(round(val))
        if m:
            mult[lam] = m
    ft = FeatureType(mult)
    if ft.dimension != dim:
        raise ValueError(
            f"recovered type {ft} has dimension {ft.dimension}, expected {dim}"
        )
    return ft


# ---------------------------------------------------------------------------
# intensity

def intensity_scale(psi: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Point-wise intensity change (S(psi) f)(x) = psi(x) f(x).

    psi has the spatial shape of f without the trailing channel axis.
    """
    psi = np.asarray(psi)
    f = np.asarray(f)
    if psi.shape != f.shape[:-1]:
        raise ValueError(f"psi shape {psi.shape} does not match field {f.shape[:-1]}")
    return psi[..., None] * f


def pointwise_map(T: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Apply a fixed linear map to the feature vector at every point."""
    T = np.asarray(T)
    f = np.asarray(f)
    if f.shape[-1] != T.shape[1]:
        raise ValueError(f"map expects {T.shape[1]} channels, field has {f.shape[-1]}")
    return np.einsum("ij,...j->...i", T, f)


def discrete_bump(n: int, center: int, radius: float) -> np.ndarray:
    """Compactly supported bump on a length-n periodic grid.

    psi(x) = exp(1 - 1/(1 - (d/radius)^2)) inside |d| < radius, else 0,
    with d the wrapped distance to the center; psi(center) = 1.
    """
    x = np.arange(n)
    d = np.minimum(np.abs(x - center), n - np.abs(x - center)).astype(float)
    out = np.zeros(n)
    inside = d < radius
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - (d[inside] / radius) ** 2))
    return out
