"""Command-line surface: transforms, convolution runs, kernel-basis
export, mesh demos and the equivariance-audit report.

Exit codes: 0 all good, 1 check failures, 2 usage or I/O errors.
"""

from __future__ import annotations

import csv as csv_module
import io as io_module
import json
import math
import sys

import click
import numpy as np

from . import __version__
from . import audit
from . import gauge_mesh as GM
from . import grids as G
from . import harmonics as H
from . import io as EIO
from . import spectral_conv as SC
from . import steerable as ST
from .features import FeatureType

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib


@click.group()
@click.version_option(__version__)
def main():
    """Equivariant convolution toolkit on S2, SO(3), lattices and meshes."""


# ---------------------------------------------------------------------------
# transform

@main.command("transform")
@click.option("--mode", type=click.Choice(["analyze", "synthesize"]), required=True)
@click.option("--bandlimit", type=int, default=None,
              help="Grid bandlimit L (required for analyze).")
@click.option("--in", "inp", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
def cmd_transform(mode, bandlimit, inp, out):
    """Forward/inverse transforms between CSV samples and JSON spectra.

    Sample CSVs hold one row per grid node in C-order over the grid
    axes; analyze infers the domain (sphere or rotation group) from the
    header columns.
    """
    if mode == "analyze":
        if bandlimit is None or bandlimit < 1:
            raise click.UsageError("analyze requires --bandlimit >= 1")
        kind, angles, values = EIO.samples_from_csv(inp)
        L = bandlimit
        if kind == "s2":
            grid = G.s2_grid(L)
            expect = (2 * L) ** 2
            if values.shape[0] != expect:
                raise click.UsageError(
                    f"need {expect} rows for bandlimit {L}, file has {values.shape[0]}"
                )
            ref = EIO.grid_angles(grid, "s2")
            if np.max(np.abs(ref - angles)) > 1e-9:
                raise click.UsageError("sample angles do not match the canonical grid")
            spec = G.s2_analysis(grid, values.reshape(2 * L, 2 * L, -1))
        else:
            grid = G.so3_grid(L)
            expect = (2 * L) ** 3
            if values.shape[0] != expect:
                raise click.UsageError(
                    f"need {expect} rows for bandlimit {L}, file has {values.shape[0]}"
                )
            ref = EIO.grid_angles(grid, "so3")
            if np.max(np.abs(ref - angles)) > 1e-9:
                raise click.UsageError("sample angles do not match the canonical grid")
            spec = G.so3_analysis(grid, values.reshape(2 * L, 2 * L, 2 * L, -1))
        with open(out, "w") as fh:
            fh.write(EIO.signal_to_json(spec))
    else:
        try:
            spec = EIO.signal_from_json(open(inp).read())
        except (ValueError, KeyError) as exc:
            raise click.UsageError(f"bad signal file: {exc}")
        if isinstance(spec, G.SpectralS2Signal):
            grid = G.s2_grid(spec.bandlimit)
            samples = G.s2_synthesis(spec, grid).reshape(-1, spec.channels)
            EIO.samples_to_csv(out, "s2", EIO.grid_angles(grid, "s2"), samples)
        else:
            grid = G.so3_grid(spec.bandlimit)
            samples = G.so3_synthesis(spec, grid).reshape(-1, spec.channels)
            EIO.samples_to_csv(out, "so3", EIO.grid_angles(grid, "so3"), samples)
    click.echo(f"wrote {out}")


# ---------------------------------------------------------------------------
# conv

def _load_rep(table) -> SC.RepSpectral:
    if table is None:
        return SC.RepSpectral.trivial(1)
    ft = FeatureType({int(k): int(v) for k, v in table.items()})
    return SC.RepSpectral.from_feature_type(ft)


@main.command("conv")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True),
              help="TOML run configuration.")
@click.option("--oracle", is_flag=True, default=False,
              help="Also evaluate the quadrature oracle and report the residual.")
@click.option("--seed", type=int, default=0, show_default=True)
def cmd_conv(config_path, oracle, seed):
    """Run a spectral convolution described by a TOML config.

    Keys: variant (s2-scalar | so3-scalar | s2-general | so3-general),
    kernel, signal, output (file paths); [rho1]/[rho2] multiplicity
    tables for the general variants.
    """
    with open(config_path, "rb") as fh:
        cfg = tomllib.load(fh)
    for key in ("variant", "kernel", "signal", "output"):
        if key not in cfg:
            raise click.UsageError(f"config is missing {key!r}")
    variant = cfg["variant"]
    try:
        kernel = EIO.kernel_from_json(open(cfg["kernel"]).read())
        signal = EIO.signal_from_json(open(cfg["signal"]).read())
    except FileNotFoundError as exc:
        raise click.UsageError(f"missing input file: {exc.filename}")
    except (ValueError, KeyError) as exc:
        raise click.UsageError(f"bad input file: {exc}")

    rng = np.random.default_rng(seed)
    residual = None
    if variant == "s2-scalar":
        out = SC.s2_conv_scalar(kernel, signal)
        if oracle:
            L = out.bandlimit
            og = G.so3_grid(L)
            vals = SC.s2_conv_spatial(kernel, signal, G.s2_grid(signal.bandlimit),
                                      og.rotations())
            ora = G.so3_analysis(og, vals.reshape(2 * L, 2 * L, 2 * L, -1))
            residual = (ora - out).max_abs()
    elif variant == "so3-scalar":
        out = SC.so3_conv_scalar(kernel, signal)
        if oracle:
            S_list = [H.random_rotation(rng) for _ in range(8)]
            ora = SC.so3_conv_spatial(kernel, signal, G.so3_grid(signal.bandlimit), S_list)
            residual = float(np.max(np.abs(ora - G.so3_evaluate(out, S_list))))
    elif variant in ("s2-general", "so3-general"):
        rho1 = _load_rep(cfg.get("rho1", {}).get("mult"))
        rho2 = _load_rep(cfg.get("rho2", {}).get("mult"))
        fn = SC.s2_conv_general if variant == "s2-general" else SC.so3_conv_general
        out = fn(rho1, rho2, kernel, signal)
        if oracle:
            raise click.UsageError("--oracle is implemented for the scalar variants")
    else:
        raise click.UsageError(f"unknown variant {variant!r}")

    with open(cfg["output"], "w") as fh:
        fh.write(EIO.signal_to_json(out))
    click.echo(f"wrote {cfg['output']}")
    if residual is not None:
        click.echo(f"oracle residual: {residual:.6e}")


# ---------------------------------------------------------------------------
# check

@main.command("check")
@click.option("--bandlimit", type=int, default=8, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--filter", "module_filter", default=None,
              help="Run only checks of one module (e.g. harmonics).")
@click.option("--out", type=click.Path(), default=None,
              help="Write the report here instead of stdout.")
@click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="json",
              show_default=True)
@click.option("--mutate", multiple=True,
              help="Deliberately break a convention (self-test); "
                   f"known: {', '.join(sorted(audit.MUTATIONS))}.")
def cmd_check(bandlimit, seed, module_filter, out, fmt, mutate):
    """Run the equivariance-audit suite and report residuals."""
    if bandlimit < 2:
        raise click.UsageError("--bandlimit must be >= 2")
    known_modules = {m for _, m in audit.registered_checks()}
    if module_filter and module_filter not in known_modules:
        raise click.UsageError(
            f"unknown module {module_filter!r}; choose from {sorted(known_modules)}"
        )
    try:
        results = audit.run_checks(bandlimit, seed, module_filter, tuple(mutate))
    except ValueError as exc:
        raise click.UsageError(str(exc))
    report = audit.report_dict(results, bandlimit, seed, module_filter, tuple(mutate))
    if fmt == "json":
        text = json.dumps(report, indent=2)
    else:
        buf = io_module.StringIO()
        w = csv_module.writer(buf)
        w.writerow(["name", "module", "law", "residual", "tolerance", "pass"])
        for c in report["checks"]:
            w.writerow([c["name"], c["module"], c["law"], repr(c["residual"]),
                        repr(c["tolerance"]), c["pass"]])
        text = buf.getvalue()
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        click.echo(text)
    failed = report["summary"]["failed"]
    if failed:
        click.echo(f"{failed} check(s) failed: {report['summary']['failed_names']}",
                   err=True)
        sys.exit(1)
    click.echo(f"all {report['summary']['total']} checks passed", err=True)


# ---------------------------------------------------------------------------
# kernels

@main.command("kernels")
@click.option("--lambda-out", "lam", type=int, required=True)
@click.option("--theta-in", "theta", type=int, required=True)
@click.option("--side", type=int, default=9, show_default=True)
@click.option("--spacing", type=float, default=1.0, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", required=True, type=click.Path())
def cmd_kernels(lam, theta, side, spacing, seed, out):
    """Solve the steerable-kernel constraint and export the basis with a
    residual certificate."""
    if lam < 0 or theta < 0:
        raise click.UsageError("irrep degrees must be >= 0")
    if side % 2 == 0 or side < 3:
        raise click.UsageError("--side must be odd and >= 3")
    rng = np.random.default_rng(seed)
    basis = ST.solve_angular_basis(lam, theta)
    continuous = ST.angular_constraint_residual(basis, rng, n_rotations=20, n_points=10)
    vol = ST.assemble_volumetric(basis, side, spacing)
    rots = [H.random_rotation(rng) for _ in range(6)]
    rfn_in = lambda g: H.wigner_D(theta, g)
    rfn_out = lambda g: H.wigner_D(lam, g)
    lattice = ST.constraint_residual(vol, rfn_in, rfn_out, rots)

    elements = []
    for J in basis.J_list:
        for idx, m in enumerate(range(-J, J + 1)):
            B = basis.coupling[J][idx]
            elements.append(
                {
                    "J": J,
                    "m": m,
                    "coupling": [[float(z.real), float(z.imag)] for z in B.ravel()],
                }
            )
    doc = {
        "lambda_out": lam,
        "theta_in": theta,
        "degrees": basis.J_list,
        "angular_elements": elements,
        "radial": {
            "family": "gaussian-shells",
            "delta": spacing,
            "sigma": ST.RADIAL_SIGMA_FACTOR * spacing,
            "count": ST._default_shells(side, spacing),
        },
        "lattice": {"side": side, "spacing": spacing},
        "certificate": {
            "seed": seed,
            "rotations": 20,
            "continuous_residual": continuous,
            "lattice_residual": lattice,
        },
    }
    with open(out, "w") as fh:
        json.dump(doc, fh, indent=2)
    click.echo(
        f"wrote {out}: {len(elements)} angular elements, continuous residual "
        f"{continuous:.3e}, lattice residual {lattice:.3e}"
    )


# ---------------------------------------------------------------------------
# mesh

@main.command("mesh")
@click.option("--mesh", "mesh_path", type=click.Path(exists=True), default=None,
              help="OFF or OBJ file (triangles only).")
@click.option("--icosahedron", "use_ico", is_flag=True, default=False)
@click.option("--sphere", type=int, default=None,
              help="Random sphere mesh with this many vertices.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), default=None)
@click.option("--features-out", type=click.Path(), default=None,
              help="Also write the demo convolution output features "
                   "(JSON keyed by vertex and rotation order).")
def cmd_mesh(mesh_path, use_ico, sphere, seed, out, features_out):
    """Run the mesh convolution demo and its gauge audit."""
    rng = np.random.default_rng(seed)
    if sum(x is not None and x is not False for x in (mesh_path, use_ico or None, sphere)) != 1:
        raise click.UsageError("choose exactly one of --mesh, --icosahedron, --sphere")
    if mesh_path:
        try:
            if mesh_path.lower().endswith(".obj"):
                mesh = EIO.load_obj(mesh_path)
            else:
                mesh = EIO.load_off(mesh_path)
        except (ValueError, GM.NonManifold) as exc:
            raise click.UsageError(f"cannot read mesh: {exc}")
    elif use_ico:
        mesh = GM.icosahedron()
    else:
        if sphere < 42:
            raise click.UsageError("--sphere needs at least 42 vertices")
        mesh = GM.random_sphere_mesh(sphere, rng)

    atlas = GM.build_atlas(mesh)
    V = mesh.n_vertices
    f = rng.standard_normal(V) + 1j * rng.standard_normal(V)
    radial = lambda r: np.exp(-r)
    m, m_in, beta = 1, 1, 0.25
    base = GM.harmonic_conv(atlas, f, radial, beta, m, m_in)
    worst = 0.0
    for _ in range(5):
        delta = rng.uniform(0, 2 * math.pi, V)
        at2 = GM.rotate_frames(atlas, delta)
        out2 = GM.harmonic_conv(at2, f * np.exp(-1j * m_in * delta), radial, beta, m, m_in)
        worst = max(worst, float(np.max(np.abs(out2 - base * np.exp(-1j * (m + m_in) * delta)))))

    orders = [0, 1]
    coeffs = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    knb = GM.circular_harmonic_matrix_kernel(coeffs, orders, orders)
    kself = np.diag(rng.standard_normal(2) + 1j * rng.standard_normal(2))
    fg = rng.standard_normal((V, 2)) + 1j * rng.standard_normal((V, 2))
    outg = GM.gem_conv(atlas, fg, orders, orders, kself, knb)
    worst_gem = 0.0
    for _ in range(5):
        delta = rng.uniform(0, 2 * math.pi, V)
        at2 = GM.rotate_frames(atlas, delta)
        o2 = GM.gem_conv(at2, fg * np.exp(-1j * np.outer(delta, orders)),
                         orders, orders, kself, knb, check_kernel=False)
        worst_gem = max(
            worst_gem,
            float(np.max(np.abs(o2 - outg * np.exp(-1j * np.outer(delta, orders))))),
        )

    anti = 0.0
    for (j, i), phi in atlas.transport.items():
        if (i, j) in atlas.transport:
            anti = max(anti, abs(np.exp(1j * atlas.transport[(i, j)]) - np.conj(np.exp(1j * phi))))

    if features_out:
        with open(features_out, "w") as fh:
            fh.write(EIO.mesh_feature_to_json({m_in: f, m + m_in: base}))

    report = {
        "vertices": V,
        "faces": int(len(mesh.faces)),
        "seed": seed,
        "harmonic_conv_gauge_residual": worst,
        "gem_conv_gauge_residual": worst_gem,
        "transport_antisymmetry": anti,
        "tolerance": 1e-10,
        "pass": bool(worst <= 1e-10 and worst_gem <= 1e-10),
    }
    text = json.dumps(report, indent=2)
    if out:
        with open(out, "w") as fh:
            fh.write(text)
        click.echo(f"wrote {out}")
    else:
        click.echo(text)
    if not report["pass"]:
        sys.exit(1)


if __name__ == "__main__":
    main()
