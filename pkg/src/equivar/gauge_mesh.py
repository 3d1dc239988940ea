"""Gauge-equivariant convolutions on triangle meshes.

Each vertex carries an orthonormal tangent frame (an arbitrary but
fixed choice of gauge).  Edges to one-ring neighbours get polar
coordinates: the radius is the edge length, the angle comes from
unfolding the one-ring into the plane (interior angles rescaled so the
total is 2 pi) and anchoring at the frame axis.  Moving a feature of
rotation order m across an edge multiplies it by the transport phase
exp(i m phi); the transport angle is fixed by the two unfolded edge
angles, phi_{j->i} = theta_ij - theta_ji + pi.

Rotating the frame at a vertex by -phi shifts every angle measured
there by +phi and multiplies order-m features by exp(i m phi).  The
harmonic convolution with circular-harmonic kernels then changes only
by the phase exp(i (m+m') phi) at that vertex, which is the gauge
equivariance the audit checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import KernelConstraintViolated, NonManifold, ShapeMismatch

TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# meshes

@dataclass(frozen=True, eq=False)
class TriMesh:
    """Oriented manifold triangle mesh."""

    vertices: np.ndarray  # (V, 3)
    faces: np.ndarray     # (F, 3) int

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        f = np.asarray(self.faces, dtype=int)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)
        if v.ndim != 2 or v.shape[1] != 3 or f.ndim != 2 or f.shape[1] != 3:
            raise NonManifold("vertices must be (V, 3) and faces (F, 3)")
        if f.min() < 0 or f.max() >= len(v):
            raise NonManifold("face index out of range")
        if np.any(self.face_areas() <= 1e-12):
            raise NonManifold("degenerate face (area <= 1e-12)")

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    def face_areas(self) -> np.ndarray:
        p = self.vertices[self.faces]
        return 0.5 * np.linalg.norm(
            np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]), axis=1
        )

    def face_normals(self) -> np.ndarray:
        p = self.vertices[self.faces]
        n = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
        return n / np.linalg.norm(n, axis=1, keepdims=True)

    def vertex_rings(self, with_flags: bool = False):
        """Ordered one-ring neighbours per vertex (cycles on interior
        vertices, paths along the boundary); raises NonManifold if the
        incident faces do not chain into one fan.  With with_flags=True
        also returns the per-vertex closed-fan booleans."""
        succ = [dict() for _ in range(self.n_vertices)]
        for (a, b, c) in self.faces:
            for i, u, w in ((a, b, c), (b, c, a), (c, a, b)):
                if u in succ[i]:
                    raise NonManifold(f"edge ({i},{u}) shared by >1 face per side")
                succ[i][u] = w
        rings, closed = [], []
        for i in range(self.n_vertices):
            nxt = succ[i]
            if not nxt:
                raise NonManifold(f"isolated vertex {i}")
            starts = set(nxt) - set(nxt.values())
            if len(starts) > 1:
                raise NonManifold(f"vertex {i} has a split fan")
            start = min(starts) if starts else min(nxt)
            ring = [start]
            is_cycle = False
            while ring[-1] in nxt:
                ring.append(nxt[ring[-1]])
                if ring[-1] == ring[0]:
                    ring.pop()
                    is_cycle = True
                    break
                if len(ring) > len(nxt) + 1:
                    raise NonManifold(f"vertex {i} fan does not close")
            if len(ring) != len(nxt) and len(ring) != len(nxt) + 1:
                raise NonManifold(f"vertex {i} fan does not cover all neighbours")
            rings.append(np.array(ring, dtype=int))
            closed.append(is_cycle)
        return (rings, closed) if with_flags else rings

    def vertex_weights(self) -> np.ndarray:
        """w_j = one third of the incident face area."""
        areas = self.face_areas()
        w = np.zeros(self.n_vertices)
        for t, (a, b, c) in enumerate(self.faces):
            w[[a, b, c]] += areas[t] / 3.0
        return w


def icosahedron() -> TriMesh:
    """Unit icosahedron with outward-oriented faces."""
    phi = (1.0 + math.sqrt(5.0)) / 2.0
    verts = []
    for a in (-1.0, 1.0):
        for b in (-phi, phi):
            verts += [(0, a, b), (a, b, 0), (b, 0, a)]
    v = np.array(verts)
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    # faces: triangles whose vertices are mutually nearest neighbours
    d = np.linalg.norm(v[:, None] - v[None], axis=-1)
    edge = (d > 0.1) & (d < 1.2)
    faces = []
    for i in range(12):
        for j in range(i + 1, 12):
            if not edge[i, j]:
                continue
            for k in range(j + 1, 12):
                if edge[i, k] and edge[j, k]:
                    faces.append((i, j, k))
    return TriMesh(v, _orient_outward(v, np.array(faces)))


def _orient_outward(v: np.ndarray, faces: np.ndarray) -> np.ndarray:
    out = faces.copy()
    p = v[out]
    n = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
    centroid = p.mean(axis=1)
    flip = np.einsum("fi,fi->f", n, centroid) < 0
    out[flip] = out[flip][:, [0, 2, 1]]
    return out


def icosphere(level: int = 1) -> TriMesh:
    """Icosahedron subdivided ``level`` times, vertices on the unit sphere."""
    mesh = icosahedron()
    verts = [tuple(p) for p in mesh.vertices]
    faces = [tuple(f) for f in mesh.faces]
    for _ in range(level):
        cache = {}

        def midpoint(a, b):
            key = (min(a, b), max(a, b))
            if key not in cache:
                p = np.array(verts[a]) + np.array(verts[b])
                p /= np.linalg.norm(p)
                cache[key] = len(verts)
                verts.append(tuple(p))
            return cache[key]

        new_faces = []
        for (a, b, c) in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces
    return TriMesh(np.array(verts), np.array(faces))


def random_sphere_mesh(n_vertices: int, rng, jitter: float = 0.01) -> TriMesh:
    """Irregular sphere mesh with exactly n_vertices, built by randomly
    splitting icosphere faces at their (projected) centroids and adding
    a small tangential jitter."""
    base = icosphere(2)  # 162 vertices
    if n_vertices < base.n_vertices:
        base = icosphere(1)  # 42
    if n_vertices < base.n_vertices:
        raise ValueError(f"need at least {base.n_vertices} vertices")
    verts = [tuple(p) for p in base.vertices]
    faces = [tuple(f) for f in base.faces]
    while len(verts) < n_vertices:
        t = int(rng.integers(0, len(faces)))
        a, b, c = faces.pop(t)
        p = (np.array(verts[a]) + np.array(verts[b]) + np.array(verts[c])) / 3.0
        p /= np.linalg.norm(p)
        new = len(verts)
        verts.append(tuple(p))
        faces += [(a, b, new), (b, c, new), (c, a, new)]
    v = np.array(verts)
    if jitter:
        v = v + jitter * rng.standard_normal(v.shape)
        v /= np.linalg.norm(v, axis=1, keepdims=True)
    return TriMesh(v, np.array(faces))


def flat_grid_mesh(nx: int, ny: int, spacing: float = 1.0) -> TriMesh:
    """Triangulated planar grid in the z = 0 plane."""
    xs, ys = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    verts = np.stack(
        [xs.ravel() * spacing, ys.ravel() * spacing, np.zeros(nx * ny)], axis=1
    )
    faces = []
    for i in range(nx - 1):
        for j in range(ny - 1):
            a = i * ny + j
            b = (i + 1) * ny + j
            faces += [(a, b, b + 1), (a, b + 1, a + 1)]
    return TriMesh(verts, np.array(faces))


def hex_one_ring() -> TriMesh:
    """Flat vertex with six symmetric neighbours (regular hexagon fan)."""
    pts = [(0.0, 0.0, 0.0)]
    for k in range(6):
        pts.append((math.cos(math.pi * k / 3.0), math.sin(math.pi * k / 3.0), 0.0))
    faces = [(0, 1 + k, 1 + (k + 1) % 6) for k in range(6)]
    return TriMesh(np.array(pts), np.array(faces))


# ---------------------------------------------------------------------------
# tangent atlas

@dataclass(frozen=True, eq=False)
class TangentAtlas:
    """Per-vertex frames plus one-ring polar coordinates and transport.

    frames[v] rows are (e1, e2, normal).  For neighbour j of i,
    radius[i][t], angle[i][t] give (r_ij, theta_ij) for t-th ring entry
    j = rings[i][t]; transport[(j, i)] is phi_{j->i} with
    exp(i phi_ij) = conj(exp(i phi_ji)).
    """

    mesh: TriMesh
    frames: np.ndarray
    rings: list
    radius: list
    angle: list
    transport: dict
    weights: np.ndarray

    def neighbours(self, i: int):
        """(j, r_ij, theta_ij) triples of the log map at vertex i."""
        return list(zip(self.rings[i].tolist(), self.radius[i], self.angle[i]))


REFERENCE_AXES = (np.array([1.0, 0.0, 0.0]), np.array([0.0, 0.0, 1.0]),
                  np.array([0.0, 1.0, 0.0]))


def _vertex_normals(mesh: TriMesh) -> np.ndarray:
    fn = mesh.face_normals()
    fa = mesh.face_areas()
    n = np.zeros((mesh.n_vertices, 3))
    for t, (a, b, c) in enumerate(mesh.faces):
        n[[a, b, c]] += fa[t] * fn[t]
    return n / np.linalg.norm(n, axis=1, keepdims=True)


def _default_frames(mesh: TriMesh) -> np.ndarray:
    normals = _vertex_normals(mesh)
    frames = np.empty((mesh.n_vertices, 3, 3))
    for v in range(mesh.n_vertices):
        n = normals[v]
        for ref in REFERENCE_AXES:
            e1 = ref - np.dot(ref, n) * n
            norm = np.linalg.norm(e1)
            if norm > 1e-6:
                e1 /= norm
                break
        frames[v] = [e1, np.cross(n, e1), n]
    return frames


def build_atlas(mesh: TriMesh, frames: np.ndarray | None = None) -> TangentAtlas:
    """Construct the gauge data. Deterministic; frames are arbitrary but
    fixed (pass ``frames`` to re-gauge explicitly)."""
    if frames is None:
        frames = _default_frames(mesh)
    rings, closed_flags = mesh.vertex_rings(with_flags=True)
    radius, angle = [], []
    for i in range(mesh.n_vertices):
        ring = rings[i]
        edges = mesh.vertices[ring] - mesh.vertices[i]
        r = np.linalg.norm(edges, axis=1)
        # interior angles between consecutive ring edges, normalized to 2 pi
        closed = closed_flags[i]
        pairs = len(ring) if closed else len(ring) - 1
        deltas = np.empty(max(pairs, 0))
        for t in range(pairs):
            u = edges[t] / r[t]
            w = edges[(t + 1) % len(ring)] / r[(t + 1) % len(ring)]
            deltas[t] = math.atan2(np.linalg.norm(np.cross(u, w)), np.dot(u, w))
        # rescale the cone angle to 2 pi on closed fans only; an open
        # (boundary) wedge is already flat after unfolding
        scale = TWO_PI / deltas.sum() if (closed and pairs) else 1.0
        cum = np.concatenate([[0.0], np.cumsum(deltas * scale)])[: len(ring)]
        e1, e2 = frames[i][0], frames[i][1]
        p0 = edges[0] - np.dot(edges[0], frames[i][2]) * frames[i][2]
        offset = math.atan2(np.dot(p0, e2), np.dot(p0, e1))
        radius.append(r)
        angle.append((offset + cum) % TWO_PI)
    transport = {}
    theta_of = [dict(zip(rings[i].tolist(), angle[i])) for i in range(mesh.n_vertices)]
    for i in range(mesh.n_vertices):
        for j in rings[i]:
            j = int(j)
            if i in theta_of[j]:
                transport[(j, i)] = (theta_of[i][j] - theta_of[j][i] + math.pi) % TWO_PI
    return TangentAtlas(mesh, frames, rings, radius, angle, transport, mesh.vertex_weights())


def rotate_frames(atlas: TangentAtlas, angles: np.ndarray) -> TangentAtlas:
    """Re-gauge: rotate the tangent axes at vertex v by angles[v] within
    the tangent plane and rebuild all derived angles."""
    angles = np.asarray(angles, dtype=float)
    frames = atlas.frames.copy()
    for v in range(atlas.mesh.n_vertices):
        c, s = math.cos(angles[v]), math.sin(angles[v])
        e1, e2, n = atlas.frames[v]
        frames[v] = [c * e1 + s * e2, -s * e1 + c * e2, n]
    return build_atlas(atlas.mesh, frames)


# ---------------------------------------------------------------------------
# harmonic convolution (single rotation order)

def harmonic_conv(atlas: TangentAtlas, f: np.ndarray, radial, beta: float,
                  m: int, m_in: int = 0) -> np.ndarray:
    """One circular-harmonic convolution layer on the mesh.

    f holds per-vertex complex features of rotation order m_in; the
    kernel is kappa_m(r, theta) = radial(r) exp(i (m theta + beta)).
    The output has order m + m_in:

        out_i = sum_{j in ring(i)} w_j kappa_m(r_ij, theta_ij)
                exp(i m_in phi_{j->i}) f_j.
    """
    f = np.asarray(f, dtype=complex)
    if f.shape[0] != atlas.mesh.n_vertices:
        raise ShapeMismatch(f"feature has {f.shape[0]} entries, mesh has "
                            f"{atlas.mesh.n_vertices} vertices")
    if not callable(radial):
        amp = complex(radial)
        radial = lambda r: amp * np.ones_like(np.asarray(r, dtype=float))
    out = np.zeros_like(f)
    w = atlas.weights
    for i in range(atlas.mesh.n_vertices):
        ring = atlas.rings[i]
        r = atlas.radius[i]
        th = atlas.angle[i]
        kappa = radial(r) * np.exp(1j * (m * th + beta))
        phases = np.array(
            [np.exp(1j * m_in * atlas.transport[(int(j), i)]) for j in ring]
        )
        out[i] = np.sum(w[ring] * kappa * phases * f[ring], axis=0)
    return out


# ---------------------------------------------------------------------------
# gauge-equivariant mesh convolution on SO(2)-typed features

def check_so2_kernel(kernel_fn, orders_out, orders_in, tol: float = 1e-8,
                     n_samples: int = 16) -> float:
    """Residual of kappa(theta - phi) = rho_out(k_{-phi}) kappa(theta)
    rho_in(k_phi) on sampled angles; raises KernelConstraintViolated
    beyond tol."""
    rng = np.random.default_rng(0)
    worst = 0.0
    mo = np.asarray(orders_out)
    mi = np.asarray(orders_in)
    for _ in range(n_samples):
        th = rng.uniform(0.0, TWO_PI)
        ph = rng.uniform(0.0, TWO_PI)
        lhs = np.asarray(kernel_fn(th - ph), dtype=complex)
        # rho_m(k_phi) = exp(i m phi): the sign that makes the re-gauging
        # audit commute (the audit is the arbiter of this convention)
        rout = np.exp(-1j * mo * ph)  # rho_out(k_{-phi}) on order-m rows
        rin = np.exp(1j * mi * ph)    # rho_in(k_phi) on order-m columns
        rhs = rout[:, None] * np.asarray(kernel_fn(th), dtype=complex) * rin[None, :]
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    if worst > tol:
        raise KernelConstraintViolated(
            f"neighbour kernel violates the gauge condition: residual {worst:.3e}"
        )
    return worst


def circular_harmonic_matrix_kernel(coeffs: np.ndarray, orders_out, orders_in):
    """Neighbour kernel with entries coeffs[a, b] exp(i (m_a - m_b) theta);
    solves the gauge condition exactly."""
    mo = np.asarray(orders_out)
    mi = np.asarray(orders_in)
    coeffs = np.asarray(coeffs, dtype=complex)

    def kernel(theta):
        return coeffs * np.exp(1j * (mo[:, None] - mi[None, :]) * theta)

    return kernel


def gem_conv(atlas: TangentAtlas, f: np.ndarray, orders_in, orders_out,
             kappa_self: np.ndarray, kappa_nb, check_kernel: bool = True) -> np.ndarray:
    """Gauge-equivariant mesh convolution.

    f has shape (V, len(orders_in)) with column b of rotation order
    orders_in[b]; kappa_self is a constant matrix mixing only equal
    orders; kappa_nb(theta) maps input orders to output orders and must
    satisfy the gauge condition (verified unless check_kernel=False).
    """
    f = np.asarray(f, dtype=complex)
    orders_in = list(orders_in)
    orders_out = list(orders_out)
    if f.shape != (atlas.mesh.n_vertices, len(orders_in)):
        raise ShapeMismatch(
            f"feature shape {f.shape} != (V, {len(orders_in)})"
        )
    kappa_self = np.asarray(kappa_self, dtype=complex)
    for a, ma in enumerate(orders_out):
        for b, mb in enumerate(orders_in):
            if ma != mb and abs(kappa_self[a, b]) > 0.0:
                raise KernelConstraintViolated(
                    "self-interaction mixes different rotation orders"
                )
    if check_kernel:
        check_so2_kernel(kappa_nb, orders_out, orders_in)
    mi = np.asarray(orders_in)
    out = np.zeros((atlas.mesh.n_vertices, len(orders_out)), dtype=complex)
    for i in range(atlas.mesh.n_vertices):
        acc = kappa_self @ f[i]
        for t, j in enumerate(atlas.rings[i]):
            j = int(j)
            phase = np.exp(1j * mi * atlas.transport[(j, i)])
            acc = acc + atlas.weights[j] * (
                np.asarray(kappa_nb(atlas.angle[i][t]), dtype=complex) @ (phase * f[j])
            )
        out[i] = acc
    return out
