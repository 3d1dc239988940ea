"""Equivariance-audit harness: every module's invariants as named
checks with residuals and tolerances, runnable from the CLI.

Each check returns a residual; it passes iff residual <= tolerance.
Negative controls (constructions that must *fail* a property) report
the shortfall max(0, required - observed) so that the pass rule stays
uniform.  Checks draw randomness from a child generator seeded by
(seed, check index), so reports are deterministic given the config.

The mutation hook deliberately breaks a convention (currently the
Condon-Shortley phase) to demonstrate that the audit catches it; it is
a self-test of the harness, not a user feature.
"""

from __future__ import annotations

import contextlib
import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from . import features as FT
from . import gauge_mesh as GM
from . import gcnn as GC
from . import grids as G
from . import harmonics as H
from . import nonlin as NL
from . import spectral_conv as SC
from . import steerable as ST


@dataclass
class CheckResult:
    name: str
    module: str
    law: str
    residual: float
    tolerance: float
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return self.residual <= self.tolerance

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "module": self.module,
            "law": self.law,
            "residual": self.residual,
            "tolerance": self.tolerance,
            "pass": bool(self.passed),
            "seconds": round(self.seconds, 3),
        }


@dataclass
class Context:
    bandlimit: int
    seed: int
    rng: np.random.Generator = field(default=None)


_REGISTRY: list = []


def check(name, module, law, tolerance):
    def wrap(fn):
        _REGISTRY.append((name, module, law, float(tolerance), fn))
        return fn

    return wrap


def registered_checks():
    return sorted((c[0], c[1]) for c in _REGISTRY)


def run_checks(bandlimit: int = 8, seed: int = 0, module_filter: str | None = None,
               mutations: tuple = ()) -> list[CheckResult]:
    results = []
    registry = sorted(_REGISTRY, key=lambda c: c[0])
    with apply_mutations(mutations):
        for i, (name, module, law, tol, fn) in enumerate(registry):
            if module_filter and module != module_filter:
                continue
            ctx = Context(bandlimit, seed, np.random.default_rng([seed, i]))
            t0 = time.perf_counter()
            residual = float(fn(ctx))
            results.append(
                CheckResult(name, module, law, residual, tol, time.perf_counter() - t0)
            )
    return results


def report_dict(results: list, bandlimit: int, seed: int,
                module_filter: str | None = None, mutations: tuple = ()) -> dict:
    failed = [r.name for r in results if not r.passed]
    return {
        "version": __version__,
        "config": {
            "bandlimit": bandlimit,
            "seed": seed,
            "filter": module_filter,
            "mutations": list(mutations),
        },
        "checks": [r.to_dict() for r in results],
        "summary": {
            "total": len(results),
            "passed": len(results) - len(failed),
            "failed": len(failed),
            "failed_names": failed,
        },
    }


# ---------------------------------------------------------------------------
# mutations (self-test of the harness)

def _cs_free_alp_table(lmax, x):
    t = _ORIG_ALP(lmax, x)
    signs = (-1.0) ** np.arange(lmax + 1)
    return t * signs[None, None, :]


_ORIG_ALP = H._alp_norm_table
MUTATIONS = {"cs-phase-off": _cs_free_alp_table}


@contextlib.contextmanager
def apply_mutations(names):
    names = tuple(names)
    unknown = [n for n in names if n not in MUTATIONS]
    if unknown:
        raise ValueError(f"unknown mutations: {unknown}")
    if not names:
        yield
        return
    try:
        for n in names:
            H._alp_norm_table = MUTATIONS[n]
        G.s2_grid.cache_clear()
        yield
    finally:
        H._alp_norm_table = _ORIG_ALP
        G.s2_grid.cache_clear()


# ---------------------------------------------------------------------------
# harmonics

@check("harmonics.unitarity", "harmonics", "D(g) D(g)^H = I", 1e-12)
def _(ctx):
    L = min(ctx.bandlimit * 2, 16)
    worst = 0.0
    for _ in range(20):
        g = H.random_rotation(ctx.rng)
        for l in (1, L // 2, L):
            D = H.wigner_D(l, g)
            worst = max(worst, np.max(np.abs(D @ D.conj().T - np.eye(2 * l + 1))))
    return worst


@check("harmonics.homomorphism", "harmonics", "D(g h) = D(g) D(h)", 1e-11)
def _(ctx):
    L = min(ctx.bandlimit * 2, 16)
    worst = 0.0
    for _ in range(10):
        g, h = H.random_rotation(ctx.rng), H.random_rotation(ctx.rng)
        gh = H.compose(g, h)
        for l in (1, L):
            worst = max(
                worst, np.max(np.abs(H.wigner_D(l, gh) - H.wigner_D(l, g) @ H.wigner_D(l, h)))
            )
    return worst


@check("harmonics.conjugation-symmetry", "harmonics",
       "conj(D_mn) = (-1)^(n-m) D_{-m,-n}", 1e-12)
def _(ctx):
    worst = 0.0
    for l in (1, 3, 8):
        g = H.random_rotation(ctx.rng)
        D = H.wigner_D(l, g)
        m = np.arange(-l, l + 1)
        flip = (-1.0) ** (m[None, :] - m[:, None]) * D[::-1, ::-1]
        worst = max(worst, np.max(np.abs(np.conj(D) - flip)))
    return worst


@check("harmonics.d-recurrence-vs-sum", "harmonics",
       "recurrence d^l equals the factorial sum", 1e-11)
def _(ctx):
    beta = ctx.rng.uniform(0.1, math.pi - 0.1)
    worst = 0.0
    for l in range(0, 9):
        d = H.wigner_d_small(l, beta)
        for m in range(-l, l + 1):
            for n in range(-l, l + 1):
                worst = max(worst, abs(d[m + l, n + l] - H._wigner_d_sum(l, m, n, beta)))
    return worst


@check("harmonics.cg-orthogonality", "harmonics",
       "sum_{m1 m2} C^{JM} C^{J'M'} = delta delta", 1e-12)
def _(ctx):
    worst = 0.0
    for l1 in range(0, 9, 2):
        for l2 in range(0, 9, 3):
            dim = (2 * l1 + 1) * (2 * l2 + 1)
            Q = np.concatenate(
                [H.cg_block(l1, l2, J).reshape(2 * J + 1, dim)
                 for J in range(abs(l1 - l2), l1 + l2 + 1)],
                axis=0,
            )
            worst = max(worst, np.max(np.abs(Q @ Q.T - np.eye(dim))))
            worst = max(worst, np.max(np.abs(Q.T @ Q - np.eye(dim))))
    return worst


@check("harmonics.wigner-product-decomposition", "harmonics",
       "D^l1 D^l2 = sum_J C C D^J entrywise", 1e-11)
def _(ctx):
    worst = 0.0
    for _ in range(5):
        g = H.random_rotation(ctx.rng)
        for (l1, l2) in ((1, 1), (2, 1), (3, 4), (4, 4)):
            D1, D2 = H.wigner_D(l1, g), H.wigner_D(l2, g)
            DJ = {J: H.wigner_D(J, g) for J in range(abs(l1 - l2), l1 + l2 + 1)}
            lhs = np.einsum("ab,cd->acbd", D1, D2)
            rhs = np.zeros_like(lhs)
            for J, D in DJ.items():
                C = H.cg_block(l1, l2, J)
                rhs += np.einsum("Mac,Nbd,MN->abcd", C, C, D).transpose(0, 2, 1, 3)
            worst = max(worst, np.max(np.abs(lhs - rhs)))
    return worst


@check("harmonics.spherical-rotation-rule", "harmonics",
       "Y_m(R x) = sum_n conj(D_mn(R)) Y_n(x)", 1e-11)
def _(ctx):
    th = ctx.rng.uniform(0.1, math.pi - 0.1, 10)
    ph = ctx.rng.uniform(0, 2 * math.pi, 10)
    xyz = H.angles_to_sph(th, ph)
    worst = 0.0
    for _ in range(4):
        g = H.random_rotation(ctx.rng)
        R = H.rotation_matrix(g)
        tr, pr = H.sph_to_angles(xyz @ R.T)
        for l in (1, 4, 8):
            D = H.wigner_D(l, g)
            Y = np.stack([H.sph_harm(l, n, th, ph) for n in range(-l, l + 1)])
            Yr = np.stack([H.sph_harm(l, m, tr, pr) for m in range(-l, l + 1)])
            worst = max(worst, np.max(np.abs(Yr - np.conj(D) @ Y)))
    return worst


@check("harmonics.conjugate-harmonic", "harmonics",
       "conj(Y_m) = (-1)^m Y_{-m}", 1e-12)
def _(ctx):
    th = ctx.rng.uniform(0.1, math.pi - 0.1, 10)
    ph = ctx.rng.uniform(0, 2 * math.pi, 10)
    worst = 0.0
    for l in (1, 3, 6):
        for m in range(-l, l + 1):
            lhs = np.conj(H.sph_harm(l, m, th, ph))
            rhs = (-1.0) ** m * H.sph_harm(l, -m, th, ph)
            worst = max(worst, np.max(np.abs(lhs - rhs)))
    return worst


@check("harmonics.rotation-round-trip", "harmonics",
       "angles -> matrix -> angles reproduces the rotation", 1e-9)
def _(ctx):
    worst = 0.0
    for _ in range(50):
        R = H.rotation_matrix(H.random_rotation(ctx.rng))
        worst = max(worst, np.max(np.abs(H.rotation_matrix(H.rotation_from_matrix(R)) - R)))
    # gimbal-locked cases
    for beta in (0.0, math.pi):
        g = H.EulerZYZ(1.1, beta, 0.0)
        R = H.rotation_matrix(g)
        worst = max(worst, np.max(np.abs(H.rotation_matrix(H.rotation_from_matrix(R)) - R)))
    return worst


@check("harmonics.vector-intertwiner", "harmonics",
       "A R A^H = D^1(R) for the Cartesian-to-spherical basis", 1e-12)
def _(ctx):
    worst = 0.0
    for _ in range(10):
        g = H.random_rotation(ctx.rng)
        worst = max(
            worst,
            np.max(
                np.abs(
                    H.VEC_TO_SPH @ H.rotation_matrix(g) @ H.VEC_TO_SPH.conj().T
                    - H.wigner_D(1, g)
                )
            ),
        )
    return worst


# ---------------------------------------------------------------------------
# grids

@check("grids.quadrature-exactness", "grids",
       "grid integrates conj(Y) Y pairs exactly below the bandlimit", 1e-10)
def _(ctx):
    L = ctx.bandlimit
    grid = G.s2_grid(L)
    th, ph = grid.nodes()
    w = grid.weights()
    worst = abs(np.sum(w) - 4 * math.pi)
    for _ in range(12):
        l1 = int(ctx.rng.integers(0, L))
        l2 = int(ctx.rng.integers(0, L))
        m = int(ctx.rng.integers(-min(l1, l2), min(l1, l2) + 1))
        val = np.sum(w * np.conj(H.sph_harm(l1, m, th, ph)) * H.sph_harm(l2, m, th, ph))
        worst = max(worst, abs(val - (1.0 if l1 == l2 else 0.0)))
    return worst


@check("grids.s2-round-trip", "grids",
       "analysis then synthesis is the identity below the bandlimit", 1e-10)
def _(ctx):
    L = max(ctx.bandlimit, 16)
    grid = G.s2_grid(L)
    spec = G.SpectralS2Signal.random(L, 2, ctx.rng, real=True)
    back = G.s2_analysis(grid, G.s2_synthesis(spec, grid))
    return (back - spec).max_abs()


@check("grids.so3-round-trip", "grids",
       "SO(3) analysis/synthesis round trip with (2l+1)/(8 pi^2) factor", 1e-9)
def _(ctx):
    L = ctx.bandlimit
    grid = G.so3_grid(L)
    spec = G.SpectralSO3Signal.random(L, 2, ctx.rng, real=True)
    back = G.so3_analysis(grid, G.so3_synthesis(spec, grid))
    return (back - spec).max_abs()


@check("grids.parseval", "grids",
       "spectral energy equals weighted spatial energy", 1e-9)
def _(ctx):
    L = ctx.bandlimit
    g2 = G.s2_grid(L)
    s2 = G.SpectralS2Signal.random(L, 1, ctx.rng, real=True)
    smp = G.s2_synthesis(s2, g2)
    e1 = abs(G.parseval_s2(s2) - np.sum(g2.weights()[:, :, None] * np.abs(smp) ** 2))
    g3 = G.so3_grid(max(L // 2, 2))
    s3 = G.SpectralSO3Signal.random(max(L // 2, 2), 1, ctx.rng, real=True)
    smp3 = G.so3_synthesis(s3, g3)
    e2 = abs(G.parseval_so3(s3) - np.sum(g3.weights()[..., None] * np.abs(smp3) ** 2))
    return max(e1, e2)


@check("grids.rotation-commuting-square", "grids",
       "analysis(rotated samples) = block rotation of coefficients", 1e-10)
def _(ctx):
    L = ctx.bandlimit
    grid = G.s2_grid(L)
    spec = G.SpectralS2Signal.random(L, 2, ctx.rng, real=True)
    g = H.random_rotation(ctx.rng)
    R = H.rotation_matrix(g)
    th, ph = grid.nodes()
    xyz = H.angles_to_sph(th.ravel(), ph.ravel())
    tr, pr = H.sph_to_angles(xyz @ R)
    rot_smp = G.s2_evaluate(spec, tr, pr).reshape(2 * L, 2 * L, 2)
    a = G.s2_analysis(grid, rot_smp)
    b = G.rotate_spectral_s2(spec, g)
    err = (a - b).max_abs()
    # homomorphism of the spectral rotation
    g2 = H.random_rotation(ctx.rng)
    c = G.rotate_spectral_s2(G.rotate_spectral_s2(spec, g2), g)
    d = G.rotate_spectral_s2(spec, H.compose(g, g2))
    return max(err, (c - d).max_abs())


@check("grids.so3-left-translation", "grids",
       "left-translated samples analyze to conj(D) block action", 1e-9)
def _(ctx):
    L = min(ctx.bandlimit, 4)
    grid = G.so3_grid(L)
    spec = G.SpectralSO3Signal.random(L, 1, ctx.rng, real=True)
    g = H.random_rotation(ctx.rng)
    Rg = H.rotation_matrix(g)
    mats = grid.rotation_matrices().reshape(-1, 3, 3)
    al, be, ga = H.euler_from_matrices(np.einsum("ij,njk->nik", Rg.T, mats))
    vals = G.so3_evaluate_angles(spec, al, be, ga).reshape(2 * L, 2 * L, 2 * L, 1)
    a = G.so3_analysis(grid, vals)
    b = G.rotate_spectral_so3(spec, g)
    return (a - b).max_abs()


# ---------------------------------------------------------------------------
# spectral convolutions

@check("spectral-conv.s2-scalar-vs-oracle", "spectral_conv",
       "Fourier-domain scalar sphere convolution matches quadrature", 1e-8)
def _(ctx):
    L = ctx.bandlimit
    grid = G.s2_grid(L)
    f = G.SpectralS2Signal.random(L, 3, ctx.rng, real=True)
    kap = SC.KernelS2.random(L, 4, 3, ctx.rng, real=True)
    out = SC.s2_conv_scalar(kap, f)
    og = G.so3_grid(L)
    vals = SC.s2_conv_spatial(kap, f, grid, og.rotations())
    oracle = G.so3_analysis(og, vals.reshape(2 * L, 2 * L, 2 * L, 4))
    return (oracle - out).max_abs()


@check("spectral-conv.so3-scalar-vs-oracle", "spectral_conv",
       "Fourier-domain SO(3) convolution matches quadrature", 1e-8)
def _(ctx):
    L = ctx.bandlimit
    grid = G.so3_grid(L)
    f = G.SpectralSO3Signal.random(L, 2, ctx.rng, real=True)
    kap = SC.KernelSO3.random(L, 2, 2, ctx.rng, real=True)
    out = SC.so3_conv_scalar(kap, f)
    S_list = [H.random_rotation(ctx.rng) for _ in range(10)]
    oracle = SC.so3_conv_spatial(kap, f, grid, S_list)
    return float(np.max(np.abs(oracle - G.so3_evaluate(out, S_list))))


@check("spectral-conv.s2-general-vs-oracle", "spectral_conv",
       "general-representation sphere convolution matches quadrature", 1e-7)
def _(ctx):
    L = min(ctx.bandlimit, 4)
    grid = G.s2_grid(L)
    ft1 = FT.FeatureType({0: 1})
    ft2 = FT.FeatureType({0: 1, 1: 1})
    rho1 = SC.RepSpectral.from_feature_type(ft1)
    rho2 = SC.RepSpectral.from_feature_type(ft2)
    f = G.SpectralS2Signal.random(L, 1, ctx.rng, real=True)
    kap = SC.KernelS2.random(L, ft2.dimension, 1, ctx.rng, real=True)
    out = SC.s2_conv_general(rho1, rho2, kap, f)
    og = G.so3_grid(out.bandlimit)
    vals = SC.s2_conv_spatial(kap, f, grid, og.rotations(),
                              rho2_fn=ft2.representation_matrix)
    oracle = G.so3_analysis(
        og, vals.reshape((2 * out.bandlimit,) * 3 + (ft2.dimension,))
    )
    return (oracle - out).max_abs()


@check("spectral-conv.so3-general-vs-oracle", "spectral_conv",
       "general-representation SO(3) convolution matches quadrature", 1e-7)
def _(ctx):
    L = min(ctx.bandlimit, 3)
    ft1 = FT.FeatureType({0: 1, 1: 1})
    ft2 = FT.FeatureType({1: 1})
    rho1 = SC.RepSpectral.from_feature_type(ft1)
    rho2 = SC.RepSpectral.from_feature_type(ft2)
    f = G.SpectralSO3Signal.random(L, ft1.dimension, ctx.rng, real=True)
    Lk = L + 2
    kap = SC.KernelSO3.random(Lk, ft2.dimension, ft1.dimension, ctx.rng, real=True)
    out = SC.so3_conv_general(rho1, rho2, kap, f)
    Lq = (L - 1 + Lk - 1 + 2 + 2) // 2 + 1
    grid = G.so3_grid(Lq)
    S_list = [H.random_rotation(ctx.rng) for _ in range(6)]
    oracle = SC.so3_conv_spatial(kap, f, grid, S_list,
                                 rho1_fn=ft1.representation_matrix,
                                 rho2_fn=ft2.representation_matrix)
    return float(np.max(np.abs(oracle - G.so3_evaluate(out, S_list))))


@check("spectral-conv.irrep-vs-assembled", "spectral_conv",
       "irrep-decomposed convolution equals the assembled general one", 1e-7)
def _(ctx):
    L = min(ctx.bandlimit, 4)
    ft_in = FT.FeatureType({0: 2, 1: 1})
    ft_out = FT.FeatureType({0: 1, 1: 1, 2: 1})
    f_blocks = {
        (t, s): G.SpectralS2Signal.random(L, 2 * t + 1, ctx.rng, real=True)
        for t, s, _ in ft_in.blocks()
    }
    k_blocks = {
        (lam, mu, t, s): SC.KernelS2.random(L, 2 * lam + 1, 2 * t + 1, ctx.rng, real=True)
        for lam, mu, _ in ft_out.blocks()
        for t, s, _ in ft_in.blocks()
    }
    dec = SC.irrep_s2_conv(ft_out, ft_in, k_blocks, f_blocks)
    gen = SC.s2_conv_general(
        SC.RepSpectral.from_feature_type(ft_in),
        SC.RepSpectral.from_feature_type(ft_out),
        SC.assemble_kernel_s2(ft_out, ft_in, k_blocks, L),
        SC.assemble_feature_s2(ft_in, f_blocks, L),
    )
    gen_blocks = SC.split_feature_so3(ft_out, gen)
    worst = 0.0
    for key, a in dec.items():
        b = gen_blocks[key]
        for l in range(min(a.bandlimit, b.bandlimit)):
            worst = max(worst, float(np.max(np.abs(a.coeffs[l] - b.coeffs[l]))))
    return worst


@check("spectral-conv.equivariance", "spectral_conv",
       "conv(pi1(g) f) = pi2(g) conv(f) for every variant", 1e-7)
def _(ctx):
    L = min(ctx.bandlimit, 4)
    worst = 0.0
    # scalar S2
    f = G.SpectralS2Signal.random(L, 2, ctx.rng, real=True)
    kap = SC.KernelS2.random(L, 2, 2, ctx.rng, real=True)
    out = SC.s2_conv_scalar(kap, f)
    for _ in range(5):
        g = H.random_rotation(ctx.rng)
        lhs = SC.s2_conv_scalar(kap, SC.induced_s2(f, g))
        worst = max(worst, (lhs - SC.induced_so3(out, g)).max_abs())
    # scalar SO3
    fo = G.SpectralSO3Signal.random(L, 2, ctx.rng, real=True)
    ko = SC.KernelSO3.random(L, 2, 2, ctx.rng, real=True)
    outo = SC.so3_conv_scalar(ko, fo)
    for _ in range(5):
        g = H.random_rotation(ctx.rng)
        lhs = SC.so3_conv_scalar(ko, SC.induced_so3(fo, g))
        worst = max(worst, (lhs - SC.induced_so3(outo, g)).max_abs())
    # general S2
    ft1 = FT.FeatureType({0: 1, 1: 1})
    ft2 = FT.FeatureType({1: 1})
    rho1 = SC.RepSpectral.from_feature_type(ft1)
    rho2 = SC.RepSpectral.from_feature_type(ft2)
    fg = G.SpectralS2Signal.random(L, ft1.dimension, ctx.rng, real=True)
    kg = SC.KernelS2.random(L, ft2.dimension, ft1.dimension, ctx.rng, real=True)
    outg = SC.s2_conv_general(rho1, rho2, kg, fg)
    for _ in range(5):
        g = H.random_rotation(ctx.rng)
        lhs = SC.s2_conv_general(rho1, rho2, kg, SC.induced_s2(fg, g, ft1.representation_matrix(g)))
        worst = max(worst, (lhs - SC.induced_so3(outg, g, ft2.representation_matrix(g))).max_abs())
    # general SO3
    fgo = G.SpectralSO3Signal.random(L, ft1.dimension, ctx.rng, real=True)
    kgo = SC.KernelSO3.random(L + 2, ft2.dimension, ft1.dimension, ctx.rng, real=True)
    outgo = SC.so3_conv_general(rho1, rho2, kgo, fgo)
    for _ in range(5):
        g = H.random_rotation(ctx.rng)
        lhs = SC.so3_conv_general(rho1, rho2, kgo, SC.induced_so3(fgo, g, ft1.representation_matrix(g)))
        worst = max(worst, (lhs - SC.induced_so3(outgo, g, ft2.representation_matrix(g))).max_abs())
    return worst


@check("spectral-conv.linearity", "spectral_conv",
       "conv(a kappa + b kappa', f) = a conv + b conv", 1e-12)
def _(ctx):
    L = min(ctx.bandlimit, 6)
    f = G.SpectralS2Signal.random(L, 2, ctx.rng, real=True)
    k1 = SC.KernelS2.random(L, 2, 2, ctx.rng, real=True)
    k2 = SC.KernelS2.random(L, 2, 2, ctx.rng, real=True)
    a, b = 1.7, -0.3 + 0.6j
    mix = SC.KernelS2(L, [a * x + b * y for x, y in zip(k1.blocks, k2.blocks)])
    lhs = SC.s2_conv_scalar(mix, f)
    rhs = a * SC.s2_conv_scalar(k1, f) + b * SC.s2_conv_scalar(k2, f)
    return (lhs - rhs).max_abs()


@check("spectral-conv.delta-kernel-identity", "spectral_conv",
       "bandlimited delta kernel is the identity of SO(3) convolution", 1e-10)
def _(ctx):
    L = ctx.bandlimit
    f = G.SpectralSO3Signal.random(L, 2, ctx.rng, real=True)
    out = SC.so3_conv_scalar(SC.KernelSO3.bandlimited_delta(L, 2), f)
    return (out - f).max_abs()


# ---------------------------------------------------------------------------
# representation/features module

@check("repr.cg-change-of-basis", "repr",
       "Q (D^l1 (x) D^l2) Q^T is block diagonal in degrees", 1e-11)
def _(ctx):
    worst = 0.0
    for (l1, l2) in ((1, 1), (2, 1), (2, 2)):
        Q = FT.cg_change_of_basis(l1, l2)
        worst = max(worst, np.max(np.abs(Q @ Q.T - np.eye(Q.shape[0]))))
        for _ in range(3):
            g = H.random_rotation(ctx.rng)
            lhs = Q @ np.kron(H.wigner_D(l1, g), H.wigner_D(l2, g)) @ Q.T
            rhs = np.zeros_like(lhs)
            row = 0
            for J in FT.tensor_product_degrees(l1, l2):
                rhs[row : row + 2 * J + 1, row : row + 2 * J + 1] = H.wigner_D(J, g)
                row += 2 * J + 1
            worst = max(worst, np.max(np.abs(lhs - rhs)))
    return worst


@check("repr.vectorize-similarity", "repr",
       "(R (x) R) vrize(Q) = vrize(R Q R^T)", 1e-12)
def _(ctx):
    worst = 0.0
    for _ in range(5):
        R = H.rotation_matrix(H.random_rotation(ctx.rng))
        Q = ctx.rng.standard_normal((3, 3))
        S = FT.vectorize_similarity(R)
        worst = max(worst, np.max(np.abs(S @ FT.vrize(Q) - FT.vrize(R @ Q @ R.T))))
        worst = max(worst, np.max(np.abs(S @ S.T - np.eye(9))))
    return worst


@check("repr.type-round-trip", "repr",
       "type -> block matrices -> multiplicity extraction is identity", 0.0)
def _(ctx):
    ft = FT.FeatureType({0: 3, 1: 2, 2: 1, 4: 1})
    rec = FT.multiplicities_from_representation(
        ft.representation_matrix, ft.dimension, ft.max_degree
    )
    return 0.0 if rec == ft else 1.0


@check("repr.se3-output-type", "repr",
       "detection head types as (Nc+4) scalars + 2 vectors + 1 tensor", 0.0)
def _(ctx):
    t3 = FT.se3_output_feature_type(3)
    t1 = FT.se3_output_feature_type(1)
    ok = (
        t3 == FT.FeatureType({0: 7, 1: 2, 2: 1})
        and t1 == FT.FeatureType({0: 5, 1: 2, 2: 1})
        and t3.dimension == 18
    )
    return 0.0 if ok else 1.0


@check("repr.intensity-pointwise-commutes", "repr",
       "point-wise linear maps commute with intensity scaling", 1e-12)
def _(ctx):
    f = ctx.rng.standard_normal((16, 3))
    T = ctx.rng.standard_normal((2, 3))
    psi = FT.discrete_bump(16, 5, 2.5)
    lhs = FT.pointwise_map(T, FT.intensity_scale(psi, f))
    rhs = FT.intensity_scale(psi, FT.pointwise_map(T, f))
    return float(np.max(np.abs(lhs - rhs)))


@check("repr.intensity-conv-negative-control", "repr",
       "a width-3 convolution fails intensity commutation (shortfall)", 0.0)
def _(ctx):
    n = 16
    f = ctx.rng.uniform(0.5, 1.5, (n, 1))
    psi = FT.discrete_bump(n, 7, 1.4)  # single-site bump
    kern = np.array([1.0, 1.0, 1.0])

    def conv(x):
        return (
            np.roll(x, 1, axis=0) + x + np.roll(x, -1, axis=0)
        )

    lhs = conv(FT.intensity_scale(psi, f))
    rhs = FT.intensity_scale(psi, conv(f))
    observed = float(np.max(np.abs(lhs - rhs)))
    return max(0.0, 0.1 - observed)


# ---------------------------------------------------------------------------
# steerable kernels

@check("steerable.angular-constraint", "steerable_kernels",
       "basis solutions satisfy the irrep kernel constraint", 1e-9)
def _(ctx):
    worst = 0.0
    for lam in range(0, 3):
        for th in range(0, 3):
            basis = ST.solve_angular_basis(lam, th)
            worst = max(
                worst,
                ST.angular_constraint_residual(basis, ctx.rng, n_rotations=10, n_points=6),
            )
    return worst


@check("steerable.nullspace-dimension", "steerable_kernels",
       "discretized constraint nullspace has one solution per degree J", 0.0)
def _(ctx):
    bad = 0
    for (lam, th) in ((0, 0), (1, 0), (1, 1), (2, 1)):
        dim = ST.angular_nullspace_dimension(lam, th, ctx.rng)
        if dim != 2 * min(lam, th) + 1:
            bad += 1
    if ST.angular_nullspace_dimension(1, 1, ctx.rng, restrict_degree=2) != 1:
        bad += 1
    return float(bad)


@check("steerable.lattice-residual", "steerable_kernels",
       "assembled steerable kernel passes the lattice residual oracle", 1e-6)
def _(ctx):
    basis = ST.solve_angular_basis(1, 1)
    vol = ST.assemble_volumetric(basis, 9, 1.0)
    rots = [H.random_rotation(ctx.rng) for _ in range(6)]
    rfn = lambda g: H.wigner_D(1, g)
    return ST.constraint_residual(vol, rfn, rfn, rots)


@check("steerable.negative-control", "steerable_kernels",
       "a random dense kernel fails the residual oracle (shortfall)", 0.0)
def _(ctx):
    rnd = ST.VolumetricKernel(ctx.rng.standard_normal((9, 9, 9, 3, 3)), 1.0)
    rots = [H.random_rotation(ctx.rng) for _ in range(4)]
    rfn = lambda g: H.wigner_D(1, g)
    observed = ST.constraint_residual(rnd, rfn, rfn, rots)
    return max(0.0, 0.1 - observed)


@check("steerable.circular-harmonic-phase", "steerable_kernels",
       "kappa_m(r, theta - phi) = exp(-i m phi) kappa_m(r, theta)", 1e-12)
def _(ctx):
    ch = ST.circular_harmonic_basis(3, lambda r: np.exp(-r), 0.4)
    r = ctx.rng.uniform(0.1, 2.0, 30)
    th = ctx.rng.uniform(0, 2 * math.pi, 30)
    worst = 0.0
    for _ in range(5):
        phi = ctx.rng.uniform(0, 2 * math.pi)
        worst = max(
            worst,
            float(np.max(np.abs(ch(r, th - phi) - np.exp(-3j * phi) * ch(r, th)))),
        )
    return worst


@check("steerable.lattice-rotation-exact", "steerable_kernels",
       "90-degree lattice rotations commute exactly with the conv", 1e-10)
def _(ctx):
    basis = ST.solve_angular_basis(1, 0)
    vol = ST.assemble_volumetric(basis, 5, 1.0)
    n = 9
    fld = np.zeros((n, n, n, 1))
    fld[2:7, 2:7, 2:7, 0] = ctx.rng.standard_normal((5, 5, 5))
    out = ST.semidirect_conv(vol, fld)
    g = H.EulerZYZ(math.pi / 2, 0.0, 0.0)
    rot = lambda a: np.rot90(a, k=1, axes=(0, 1)).copy()
    out_r = ST.semidirect_conv(vol, rot(fld))
    rhs = np.einsum("ab,xyzb->xyza", H.wigner_D(1, g), rot(out))
    return float(np.max(np.abs(out_r - rhs)))


@check("steerable.refinement-monotone", "steerable_kernels",
       "generic-rotation residual decreases under lattice refinement", 0.0)
def _(ctx):
    basis = ST.solve_angular_basis(1, 0)
    g = H.random_rotation(ctx.rng)
    R = H.rotation_matrix(g)
    D1 = H.wigner_D(1, g)
    a = np.array([0.3, -0.5, 0.7])
    residuals = []
    for (side, h) in ((9, 1.0), (17, 0.5), (33, 0.25)):
        vol = ST.assemble_volumetric(basis, side, h, radial_delta=1.0, n_radial=4)
        pts = vol.coords().reshape(-1, 3)
        f0 = np.exp(-np.sum((pts - a) ** 2, axis=-1))[:, None]
        fr = np.exp(-np.sum((pts @ R - a) ** 2, axis=-1))[:, None]
        k = vol.values.reshape(-1, 3, 1)
        out0 = (k * f0[:, None, :]).sum(axis=(0, 2)) * h**3
        outr = (k * fr[:, None, :]).sum(axis=(0, 2)) * h**3
        residuals.append(float(np.max(np.abs(outr - D1 @ out0))))
    return max(0.0, residuals[1] - residuals[0], residuals[2] - residuals[1])


# ---------------------------------------------------------------------------
# nonlinearities

@check("nonlin.vector-field-exact", "nonlin",
       "vector-field nonlinearity is exactly equivariant on tie-free input", 0.0)
def _(ctx):
    rot = NL.cn_rotation_matrices(4)
    worst = 0.0
    for _ in range(100):
        vals = ctx.rng.integers(0, 10_000, size=(4, 5, 5)).astype(float)
        while NL.has_orbit_ties(vals):
            vals = ctx.rng.integers(0, 10_000, size=(4, 5, 5)).astype(float)
        f = NL.GroupLatticeFeature(vals)
        k = int(ctx.rng.integers(0, 4))
        lhs = NL.vector_field_nonlinearity(f.shift_group(k), warn_ties=False)
        rhs = np.einsum("ab,ijb->ija", rot[k], NL.vector_field_nonlinearity(f, warn_ties=False))
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return worst


@check("nonlin.tie-detection", "nonlin",
       "constant orbits trigger the tie warning", 0.0)
def _(ctx):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        NL.vector_field_nonlinearity(NL.GroupLatticeFeature(np.ones((4, 3, 3))))
    fired = any(issubclass(w.category, NL.TieDetected) for w in caught)
    return 0.0 if fired else 1.0


@check("nonlin.norm-commutation", "nonlin",
       "alpha(||f||) f commutes with the block-wise unitary action", 1e-10)
def _(ctx):
    ft = FT.FeatureType({0: 1, 1: 2, 2: 1})
    x = ctx.rng.standard_normal((9, ft.dimension)) + 1j * ctx.rng.standard_normal(
        (9, ft.dimension)
    )
    alpha = lambda n: np.tanh(n)
    worst = 0.0
    for _ in range(5):
        g = H.random_rotation(ctx.rng)
        U = ft.representation_matrix(g)
        lhs = NL.norm_nonlinearity(alpha, ft, x @ U.T)
        rhs = NL.norm_nonlinearity(alpha, ft, x) @ U.T
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return worst


@check("nonlin.pointwise-translation", "nonlin",
       "relu and softmax commute with lattice translations", 0.0)
def _(ctx):
    img = ctx.rng.standard_normal((6, 6, 3))
    t = (2, 5)
    a = NL.relu(GC.translate(img, t))
    b = GC.translate(NL.relu(img), t)
    c = NL.softmax(GC.translate(img, t))
    d = GC.translate(NL.softmax(img), t)
    return 0.0 if (np.array_equal(a, b) and np.array_equal(c, d)) else 1.0


@check("nonlin.gated-limits", "nonlin",
       "sigmoid gate: half at 0, identity in the saturated limit", 1e-12)
def _(ctx):
    x = ctx.rng.standard_normal((5, 3))
    e1 = np.max(np.abs(NL.gated(np.zeros(5), x) - 0.5 * x))
    e2 = np.max(np.abs(NL.gated(np.full(5, 50.0), x) - x))
    return float(max(e1, e2))


@check("nonlin.bandlimit-breaking-relu", "nonlin",
       "grid relu on bandlimited signals is only approximately equivariant", 1e-2)
def _(ctx):
    # documented approximation: position-space nonlinearities violate the
    # bandlimit, so the residual is small but not machine precision
    L = 16
    grid = G.s2_grid(L)
    spec = G.SpectralS2Signal.random(L // 2, 1, ctx.rng, real=True) * (1.0 / L)
    g = H.random_rotation(ctx.rng)
    smp = G.s2_synthesis(spec, grid).real
    th, ph = grid.nodes()
    xyz = H.angles_to_sph(th.ravel(), ph.ravel())
    R = H.rotation_matrix(g)
    tr, pr = H.sph_to_angles(xyz @ R)
    rot_smp = G.s2_evaluate(spec, tr, pr).real.reshape(2 * L, 2 * L, 1)
    lhs = G.s2_analysis(grid, NL.relu(rot_smp))
    rhs = G.rotate_spectral_s2(G.s2_analysis(grid, NL.relu(smp)), g)
    return (lhs - rhs).max_abs()


# ---------------------------------------------------------------------------
# gauge mesh

@check("gauge-mesh.atlas-determinism", "gauge_mesh",
       "atlas construction is bit-identical across runs", 0.0)
def _(ctx):
    mesh = GM.icosahedron()
    a1, a2 = GM.build_atlas(mesh), GM.build_atlas(mesh)
    same = np.array_equal(a1.frames, a2.frames) and all(
        np.array_equal(x, y) for x, y in zip(a1.angle, a2.angle)
    )
    return 0.0 if same else 1.0


@check("gauge-mesh.transport-antisymmetry", "gauge_mesh",
       "exp(i phi_ij) = conj(exp(i phi_ji))", 1e-12)
def _(ctx):
    mesh = GM.random_sphere_mesh(200, ctx.rng)
    atlas = GM.build_atlas(mesh)
    worst = 0.0
    for (j, i), phi in atlas.transport.items():
        if (i, j) in atlas.transport:
            worst = max(
                worst,
                abs(np.exp(1j * atlas.transport[(i, j)]) - np.conj(np.exp(1j * phi))),
            )
    return worst


@check("gauge-mesh.flat-transport", "gauge_mesh",
       "flat mesh with aligned frames has zero transport angles", 1e-12)
def _(ctx):
    atlas = GM.build_atlas(GM.flat_grid_mesh(5, 5))
    worst = 0.0
    for phi in atlas.transport.values():
        worst = max(worst, abs(np.exp(1j * phi) - 1.0))
    return worst


@check("gauge-mesh.harmonic-conv-gauge", "gauge_mesh",
       "per-vertex frame rotations change the output by e^{i(m+m') phi}", 1e-10)
def _(ctx):
    worst = 0.0
    radial = lambda r: np.exp(-r)
    for mesh in (GM.icosahedron(), GM.random_sphere_mesh(200, ctx.rng)):
        atlas = GM.build_atlas(mesh)
        V = mesh.n_vertices
        f = ctx.rng.standard_normal(V) + 1j * ctx.rng.standard_normal(V)
        m, m_in, beta = 1, 1, 0.37
        out = GM.harmonic_conv(atlas, f, radial, beta, m, m_in)
        delta = ctx.rng.uniform(0, 2 * math.pi, V)
        at2 = GM.rotate_frames(atlas, delta)
        out2 = GM.harmonic_conv(at2, f * np.exp(-1j * m_in * delta), radial, beta, m, m_in)
        worst = max(
            worst,
            float(np.max(np.abs(out2 - out * np.exp(-1j * (m + m_in) * delta)))),
        )
    return worst


@check("gauge-mesh.gem-conv-gauge", "gauge_mesh",
       "mesh convolution with constrained kernels is gauge equivariant", 1e-10)
def _(ctx):
    mesh = GM.icosahedron()
    atlas = GM.build_atlas(mesh)
    orders_in = [0, 1, -1]
    orders_out = [0, 1, 2]
    coeffs = ctx.rng.standard_normal((3, 3)) + 1j * ctx.rng.standard_normal((3, 3))
    knb = GM.circular_harmonic_matrix_kernel(coeffs, orders_out, orders_in)
    kself = np.zeros((3, 3), dtype=complex)
    kself[0, 0] = 0.5 + 0.1j
    kself[1, 1] = -0.3j
    f = ctx.rng.standard_normal((12, 3)) + 1j * ctx.rng.standard_normal((12, 3))
    out = GM.gem_conv(atlas, f, orders_in, orders_out, kself, knb)
    worst = 0.0
    for _ in range(20):
        delta = ctx.rng.uniform(0, 2 * math.pi, 12)
        at2 = GM.rotate_frames(atlas, delta)
        f2 = f * np.exp(-1j * np.outer(delta, orders_in))
        out2 = GM.gem_conv(at2, f2, orders_in, orders_out, kself, knb, check_kernel=False)
        expect = out * np.exp(-1j * np.outer(delta, orders_out))
        worst = max(worst, float(np.max(np.abs(out2 - expect))))
    return worst


# ---------------------------------------------------------------------------
# discrete GCNNs

@check("gcnn.z2-translation", "gcnn_discrete",
       "periodic planar convolution commutes bitwise with translations", 0.0)
def _(ctx):
    img = ctx.rng.standard_normal((6, 7, 3))
    k = ctx.rng.standard_normal((2, 3, 3, 3))
    out = GC.z2_conv(k, img)
    for t in ((1, 0), (0, 1), (3, 5)):
        if not np.array_equal(GC.z2_conv(k, GC.translate(img, t)), GC.translate(out, t)):
            return 1.0
    return 0.0


@check("gcnn.roto-translation-exact", "gcnn_discrete",
       "lifting and group convolutions are exactly equivariant on C4", 0.0)
def _(ctx):
    N, size = 4, 5
    img = ctx.rng.integers(-9, 9, size=(size, size, 2)).astype(float)
    kl = ctx.rng.integers(-9, 9, size=(2, 2, 3, 3)).astype(float)
    F = GC.lifting_conv(kl, img, N)
    kg = ctx.rng.integers(-9, 9, size=(2, 2, N, 3, 3)).astype(float)
    FF = GC.group_conv(kg, F, N)
    for k in range(N):
        for t in ((0, 0), (2, 1), (4, 4)):
            if not np.array_equal(
                GC.lifting_conv(kl, GC.act_on_image(img, k, t, N), N),
                GC.act_on_group_feature(F, k, t, N),
            ):
                return 1.0
            if not np.array_equal(
                GC.group_conv(kg, GC.act_on_group_feature(F, k, t, N), N),
                GC.act_on_group_feature(FF, k, t, N),
            ):
                return 1.0
    return 0.0


@check("gcnn.equivariant-map-recovery", "gcnn_discrete",
       "group-averaged linear maps are group convolutions", 1e-12)
def _(ctx):
    N, size = 4, 4
    dim = N * size * size
    L = ctx.rng.standard_normal((dim, dim))
    Lavg = GC.group_average_linear_map(L, N, size)

    def apply_map(Fin):
        return (Lavg @ np.asarray(Fin)[..., 0].ravel()).reshape(N, size, size)[..., None]

    kern = GC.recover_group_kernel(apply_map, N, size)
    worst = 0.0
    for _ in range(5):
        f = ctx.rng.standard_normal((N, size, size, 1))
        worst = max(worst, float(np.max(np.abs(apply_map(f) - GC.group_conv(kern, f, N)))))
    return worst


@check("gcnn.segmentation-pipeline", "gcnn_discrete",
       "two-layer pipeline is translation equivariant with unit rows", 0.0)
def _(ctx):
    pipe = GC.SegmentationPipeline.random(3, 4, 5, ctx.rng)
    img = ctx.rng.standard_normal((6, 6, 3))
    seg = pipe(img)
    ok = np.max(np.abs(seg.sum(axis=-1) - 1.0)) < 1e-12
    ok = ok and np.array_equal(pipe(GC.translate(img, (2, 3))), GC.translate(seg, (2, 3)))
    const = pipe(np.ones((6, 6, 3)))
    ok = ok and np.max(np.abs(const - const[0, 0])) == 0.0
    return 0.0 if ok else 1.0


@check("gcnn.detection-transforms", "gcnn_discrete",
       "anchors translate, oriented vectors rotate, scalars stay", 1e-12)
def _(ctx):
    x = ctx.rng.standard_normal((4, 4, 2))
    det = GC.BoxDetections(
        x.copy(), np.abs(ctx.rng.standard_normal((4, 4, 2))), ctx.rng.uniform(0, 1, (4, 4))
    )
    dt = det.translate((3, -2))
    e1 = np.max(np.abs(dt.anchors - (np.roll(x, (3, -2), axis=(0, 1)) + np.array([3.0, -2.0]))))
    probs = NL.softmax(ctx.rng.standard_normal((4, 4, 3)))
    od = GC.OrientedDetections(x.copy(), np.zeros((4, 4, 2)), np.ones((4, 4, 2)), probs)
    od.v1[..., 0] = 1.0
    rd = od.rotate(1)
    e2 = np.max(np.abs(rd.v1[0, 0] - np.array([0.0, -1.0])))
    e3 = np.max(np.abs(rd.probs.sum(axis=-1) - 1.0))
    return float(max(e1, e2, e3))
