"""Equivariant nonlinearities.

Point-wise maps commute with domain translations for scalar features;
norm nonlinearities scale each irrep block by a function of its norm
and commute with the block-wise unitary action; gated nonlinearities
multiply by a sigmoid of a scalar gate.  The vector-field nonlinearity
turns a scalar feature on C_N x lattice into a lattice field of
2-vectors via max/argmax over the rotation orbit; its equivariance is
exact on tie-free inputs when the N rotation matrices are cached
exactly (they are, for N in {1, 2, 4}).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatch, TieDetected
from .features import FeatureType


def relu(x):
    return np.maximum(x, 0.0)


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.asarray(x, dtype=float)))


def softmax(x, axis=-1):
    x = np.asarray(x, dtype=float)
    e = np.exp(x - np.max(x, axis=axis, keepdims=True))
    return e / np.sum(e, axis=axis, keepdims=True)


def pointwise(eta_bar, f: np.ndarray) -> np.ndarray:
    """(eta(f))(x) = eta_bar(f(x)); commutes with any domain action that
    only permutes points."""
    return eta_bar(np.asarray(f))


def norm_nonlinearity(alpha, ftype: FeatureType, f: np.ndarray) -> np.ndarray:
    """Per-block v -> alpha(||v||) v on features typed by ftype.

    f has shape (..., ftype.dimension); the norm of each irrep block is
    invariant under the block-wise unitary action, so the output
    transforms exactly like the input.
    """
    f = np.asarray(f)
    if f.shape[-1] != ftype.dimension:
        raise ShapeMismatch(f"feature dim {f.shape[-1]} != type dim {ftype.dimension}")
    out = np.array(f, dtype=complex)
    for _, _, sl in ftype.blocks():
        block = f[..., sl]
        norms = np.linalg.norm(block, axis=-1)
        out[..., sl] = np.asarray(alpha(norms))[..., None] * block
    return out


def gated(s: np.ndarray, f: np.ndarray) -> np.ndarray:
    """sigmoid(s(x)) f(x) with a scalar gate field s."""
    s = np.asarray(s, dtype=float)
    f = np.asarray(f)
    if s.shape != f.shape[: s.ndim]:
        raise ShapeMismatch(f"gate shape {s.shape} does not lead field shape {f.shape}")
    return sigmoid(s).reshape(s.shape + (1,) * (f.ndim - s.ndim)) * f


# ---------------------------------------------------------------------------
# vector-field nonlinearity on C_N x lattice

def cn_rotation_matrices(N: int) -> np.ndarray:
    """Rotation matrices of C_N acting on R^2, cached exactly.

    For N in {1, 2, 4} the entries are exact integers, which makes the
    vector-field equivariance bitwise; other N are correct to roundoff.
    """
    out = np.empty((N, 2, 2))
    for k in range(N):
        deg = (360 * k) // N if (360 * k) % N == 0 else None
        if deg is not None and deg % 90 == 0:
            c = [1.0, 0.0, -1.0, 0.0][(deg // 90) % 4]
            s = [0.0, 1.0, 0.0, -1.0][(deg // 90) % 4]
        else:
            ang = 2.0 * math.pi * k / N
            c, s = math.cos(ang), math.sin(ang)
        out[k] = [[c, -s], [s, c]]
    return out


@dataclass
class GroupLatticeFeature:
    """Scalar feature on C_N x (H x W) window: values[k, i, j]."""

    values: np.ndarray

    @property
    def group_order(self) -> int:
        return self.values.shape[0]

    def shift_group(self, k: int) -> "GroupLatticeFeature":
        """Regular action of C_N on the orbit axis: f'(k') = f(k' - k)."""
        return GroupLatticeFeature(np.roll(self.values, k, axis=0))


def vector_field_nonlinearity(f: GroupLatticeFeature, v0=(1.0, 0.0),
                              warn_ties: bool = True) -> np.ndarray:
    """max over the rotation orbit times the argmax rotation applied to
    the reference vector v0; output shape (H, W, 2).

    Ties in the argmax break equivariance; they are resolved toward the
    smallest orbit index and reported with a TieDetected warning.
    """
    vals = np.asarray(f.values, dtype=float)
    if vals.ndim != 3:
        raise ShapeMismatch(f"expected (N, H, W) values, got {vals.shape}")
    N = vals.shape[0]
    peak = vals.max(axis=0)
    kstar = vals.argmax(axis=0)
    if warn_ties:
        n_hits = (vals == peak[None]).sum(axis=0)
        if np.any(n_hits > 1):
            warnings.warn(
                f"argmax tie at {int((n_hits > 1).sum())} lattice points; "
                "equivariance not guaranteed there",
                TieDetected,
                stacklevel=2,
            )
    rot = cn_rotation_matrices(N)
    vecs = rot[kstar] @ np.asarray(v0, dtype=float)
    return peak[..., None] * vecs


def has_orbit_ties(values: np.ndarray) -> bool:
    vals = np.asarray(values)
    peak = vals.max(axis=0)
    return bool(np.any((vals == peak[None]).sum(axis=0) > 1))


def subgroup_pool(f: GroupLatticeFeature, op: str = "max") -> np.ndarray:
    """Pool the orbit axis away: eta(f)(n) = eta_bar({f(k n) : k}).

    Breaks the symmetry group down to the residual lattice action.
    """
    if op == "max":
        return f.values.max(axis=0)
    if op == "mean":
        return f.values.mean(axis=0)
    raise ValueError(f"unknown pooling op {op!r}")
