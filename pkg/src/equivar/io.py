"""File formats: spectral signals and kernels (JSON), spatial samples
(CSV), meshes (OFF/OBJ), mesh features (JSON), images (ASCII PGM/PPM,
CSV) and detections (JSON lines).

Signal JSON is bit-exact: {"kind": "s2"|"so3", "bandlimit": L,
"channels": C, "coeffs": [[re, im], ...]} with coefficients in
lexicographic (channel, l, m[, n]) order, m and n running -l..l.
Kernel files add "out_channels" and order the leading indices
(out_channel, in_channel, l, m[, n]).
"""

from __future__ import annotations

import csv
import json

import numpy as np

from .errors import ShapeMismatch
from .gauge_mesh import TriMesh
from .grids import SpectralS2Signal, SpectralSO3Signal
from .spectral_conv import KernelS2, KernelSO3


# ---------------------------------------------------------------------------
# spectral signals

def _pairs(flat: np.ndarray) -> list:
    return [[float(z.real), float(z.imag)] for z in flat]


def _unpairs(pairs) -> np.ndarray:
    arr = np.asarray(pairs, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("coeffs must be a list of [re, im] pairs")
    return arr[:, 0] + 1j * arr[:, 1]


def signal_to_json(sig) -> str:
    if isinstance(sig, SpectralS2Signal):
        kind = "s2"
    elif isinstance(sig, SpectralSO3Signal):
        kind = "so3"
    else:
        raise TypeError(f"not a spectral signal: {type(sig)!r}")
    return json.dumps(
        {
            "kind": kind,
            "bandlimit": sig.bandlimit,
            "channels": sig.channels,
            "coeffs": _pairs(sig.pack()),
        }
    )


def signal_from_json(text: str):
    data = json.loads(text)
    kind = data["kind"]
    L = int(data["bandlimit"])
    C = int(data["channels"])
    flat = _unpairs(data["coeffs"])
    if kind == "s2":
        if flat.size != C * L * L:
            raise ShapeMismatch(f"expected {C * L * L} coefficients, got {flat.size}")
        return SpectralS2Signal.unpack(L, C, flat)
    if kind == "so3":
        n = C * sum((2 * l + 1) ** 2 for l in range(L))
        if flat.size != n:
            raise ShapeMismatch(f"expected {n} coefficients, got {flat.size}")
        return SpectralSO3Signal.unpack(L, C, flat)
    raise ValueError(f"unknown signal kind {kind!r}")


def kernel_to_json(kernel) -> str:
    if isinstance(kernel, KernelS2):
        kind, per = "s2", lambda l: 2 * l + 1
    elif isinstance(kernel, KernelSO3):
        kind, per = "so3", lambda l: (2 * l + 1) ** 2
    else:
        raise TypeError(f"not a spectral kernel: {type(kernel)!r}")
    flat = []
    for u in range(kernel.out_channels):
        for v in range(kernel.in_channels):
            for l in range(kernel.bandlimit):
                flat.extend(kernel.blocks[l][u, v].ravel())
    return json.dumps(
        {
            "kind": kind,
            "bandlimit": kernel.bandlimit,
            "out_channels": kernel.out_channels,
            "channels": kernel.in_channels,
            "coeffs": _pairs(np.asarray(flat)),
        }
    )


def kernel_from_json(text: str):
    data = json.loads(text)
    kind = data["kind"]
    L = int(data["bandlimit"])
    cout = int(data["out_channels"])
    cin = int(data["channels"])
    flat = _unpairs(data["coeffs"])
    cls = KernelS2 if kind == "s2" else KernelSO3
    out = cls.zeros(L, cout, cin)
    pos = 0
    for u in range(cout):
        for v in range(cin):
            for l in range(L):
                n = 2 * l + 1 if kind == "s2" else (2 * l + 1) ** 2
                blk = flat[pos : pos + n]
                out.blocks[l][u, v] = blk if kind == "s2" else blk.reshape(2 * l + 1, 2 * l + 1)
                pos += n
    if pos != flat.size:
        raise ShapeMismatch(f"expected {pos} coefficients, got {flat.size}")
    return out


# ---------------------------------------------------------------------------
# spatial samples (CSV)

def samples_to_csv(path, grid_kind: str, angles: np.ndarray, values: np.ndarray):
    """Write per-node samples: columns theta,phi (S2) or
    alpha,beta,gamma (SO(3)) followed by c0..cN real values."""
    values = np.asarray(values)
    if np.iscomplexobj(values):
        if np.max(np.abs(values.imag)) > 1e-9:
            raise ValueError("sample CSV stores real values; signal is complex")
        values = values.real
    head = ["theta", "phi"] if grid_kind == "s2" else ["alpha", "beta", "gamma"]
    head += [f"c{i}" for i in range(values.shape[-1])]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(head)
        for ang, val in zip(angles.reshape(-1, len(head) - values.shape[-1]),
                            values.reshape(-1, values.shape[-1])):
            w.writerow([repr(float(a)) for a in ang] + [repr(float(v)) for v in val])


def samples_from_csv(path):
    """Read a sample CSV; returns (kind, angles (N, 2|3), values (N, C))."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    head = rows[0]
    if head[:2] == ["theta", "phi"]:
        kind, na = "s2", 2
    elif head[:3] == ["alpha", "beta", "gamma"]:
        kind, na = "so3", 3
    else:
        raise ValueError(f"unrecognized sample header {head[:3]}")
    data = np.array([[float(x) for x in r] for r in rows[1:]])
    return kind, data[:, :na], data[:, na:]


def grid_angles(grid, kind: str) -> np.ndarray:
    """Node angles in the CSV row order (C-order over grid axes)."""
    if kind == "s2":
        th, ph = np.meshgrid(grid.thetas, grid.phis, indexing="ij")
        return np.stack([th.ravel(), ph.ravel()], axis=1)
    a, b, g = np.meshgrid(grid.alphas, grid.betas, grid.gammas, indexing="ij")
    return np.stack([a.ravel(), b.ravel(), g.ravel()], axis=1)


# ---------------------------------------------------------------------------
# meshes

def load_off(path) -> TriMesh:
    with open(path) as fh:
        tokens = []
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                tokens.extend(line.split())
    if not tokens or tokens[0] != "OFF":
        raise ValueError("not an OFF file (missing header)")
    try:
        nv, nf = int(tokens[1]), int(tokens[2])
        pos = 4  # skip edge count
        verts = np.array(
            [float(t) for t in tokens[pos : pos + 3 * nv]], dtype=float
        ).reshape(nv, 3)
        pos += 3 * nv
        faces = []
        for _ in range(nf):
            k = int(tokens[pos])
            if k != 3:
                raise ValueError("only triangle faces are supported")
            faces.append([int(t) for t in tokens[pos + 1 : pos + 4]])
            pos += 1 + k
    except (IndexError, ValueError) as exc:
        raise ValueError(f"malformed OFF file: {exc}") from exc
    return TriMesh(verts, np.array(faces, dtype=int))


def save_off(path, mesh: TriMesh):
    with open(path, "w") as fh:
        fh.write("OFF\n")
        fh.write(f"{mesh.n_vertices} {len(mesh.faces)} 0\n")
        for v in mesh.vertices:
            fh.write(f"{float(v[0])!r} {float(v[1])!r} {float(v[2])!r}\n")
        for f in mesh.faces:
            fh.write(f"3 {f[0]} {f[1]} {f[2]}\n")


def load_obj(path) -> TriMesh:
    verts, faces = [], []
    with open(path) as fh:
        for line in fh:
            parts = line.split("#", 1)[0].split()
            if not parts:
                continue
            if parts[0] == "v":
                verts.append([float(x) for x in parts[1:4]])
            elif parts[0] == "f":
                idx = [int(p.split("/")[0]) - 1 for p in parts[1:]]
                if len(idx) != 3:
                    raise ValueError("only triangle faces are supported")
                faces.append(idx)
    if not verts or not faces:
        raise ValueError("malformed OBJ file: no vertices or faces")
    return TriMesh(np.array(verts), np.array(faces, dtype=int))


def mesh_feature_to_json(features: dict) -> str:
    """features maps rotation order m -> complex (V,) array."""
    out = {}
    for m, arr in features.items():
        arr = np.asarray(arr, dtype=complex)
        out[str(int(m))] = {
            str(i): [float(z.real), float(z.imag)] for i, z in enumerate(arr)
        }
    return json.dumps({"orders": out})


def mesh_feature_from_json(text: str) -> dict:
    data = json.loads(text)["orders"]
    out = {}
    for m, entries in data.items():
        n = max(int(i) for i in entries) + 1
        arr = np.zeros(n, dtype=complex)
        for i, (re, im) in entries.items():
            arr[int(i)] = re + 1j * im
        out[int(m)] = arr
    return out


# ---------------------------------------------------------------------------
# images

def load_image(path) -> np.ndarray:
    """ASCII PGM (P2) or PPM (P3) image as (X, Y, C) floats; or CSV with
    one row per pixel row (single channel)."""
    text = open(path).read()
    if text.lstrip().startswith(("P2", "P3")):
        tokens = [
            t
            for line in text.splitlines()
            for t in line.split("#", 1)[0].split()
        ]
        magic, w, h, maxval = tokens[0], int(tokens[1]), int(tokens[2]), int(tokens[3])
        chan = 1 if magic == "P2" else 3
        vals = np.array([float(t) for t in tokens[4:]])
        if vals.size != w * h * chan:
            raise ValueError("pixel count does not match header")
        return vals.reshape(h, w, chan).transpose(1, 0, 2)  # (x, y, c)
    rows = [
        [float(x) for x in line.split(",")]
        for line in text.strip().splitlines()
        if line.strip()
    ]
    return np.asarray(rows).T[..., None]


def save_image(path, image: np.ndarray, maxval: int = 255):
    image = np.asarray(image)
    if image.ndim == 2:
        image = image[..., None]
    chan = image.shape[2]
    if chan not in (1, 3):
        raise ValueError("PGM/PPM images need 1 or 3 channels")
    magic = "P2" if chan == 1 else "P3"
    data = image.transpose(1, 0, 2)  # (y, x, c) scanline order
    with open(path, "w") as fh:
        fh.write(f"{magic}\n{image.shape[0]} {image.shape[1]}\n{maxval}\n")
        for row in data:
            fh.write(" ".join(str(int(round(v))) for v in row.ravel()) + "\n")


# ---------------------------------------------------------------------------
# detections (JSON lines)

def detections_to_jsonl(path, det):
    from .gcnn import BoxDetections, OrientedDetections

    with open(path, "w") as fh:
        if isinstance(det, BoxDetections):
            X, Y = det.conf.shape
            for x in range(X):
                for y in range(Y):
                    fh.write(
                        json.dumps(
                            {
                                "pixel": [x, y],
                                "anchor": list(map(float, det.anchors[x, y])),
                                "box": list(map(float, det.boxes[x, y])),
                                "confidence": float(det.conf[x, y]),
                            }
                        )
                        + "\n"
                    )
        elif isinstance(det, OrientedDetections):
            X, Y = det.corner.shape[:2]
            for x in range(X):
                for y in range(Y):
                    fh.write(
                        json.dumps(
                            {
                                "pixel": [x, y],
                                "corner": list(map(float, det.corner[x, y])),
                                "v1": list(map(float, det.v1[x, y])),
                                "v2": list(map(float, det.v2[x, y])),
                                "probs": list(map(float, det.probs[x, y])),
                            }
                        )
                        + "\n"
                    )
        else:
            raise TypeError(f"not a detection field: {type(det)!r}")
