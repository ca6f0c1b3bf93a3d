"""Structured triangulations of the unit square and P1 stiffness assembly.

The stiffness matrix is assembled edge by edge from cotangent weights,

    omega_{e,T} = a_T |kappa_{e,T}| cot(alpha_{e,T}) / (d (d - 1)),

where ``alpha_{e,T}`` is the angle of ``T`` opposite ``e``. In two dimensions
the opposite simplex is a point and ``|kappa_{e,T}| = 1``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .linalg import SparseMatrix

DIM = 2
DEFAULT_SEED = 0x5EED
JITTER_PERIOD = 4


class MeshError(ValueError):
    pass


@dataclass
class TriMesh:
    vertices: np.ndarray
    triangles: np.ndarray
    coeff: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 2)
        self.triangles = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        self.coeff = np.asarray(self.coeff, dtype=np.float64).reshape(-1)

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_triangles(self):
        return len(self.triangles)

    def signed_areas(self):
        p = self.vertices[self.triangles]
        e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def edges(self):
        """Sorted array of undirected edges (i < j)."""
        t = self.triangles
        e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        e.sort(axis=1)
        return np.unique(e, axis=0)

    def boundary_vertices(self):
        t = self.triangles
        e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        e.sort(axis=1)
        uniq, counts = np.unique(e, axis=0, return_counts=True)
        return np.unique(uniq[counts == 1])

    def validate(self):
        if len(self.coeff) != self.n_triangles:
            raise MeshError("coeff must have one entry per triangle")
        if np.any(self.coeff <= 0):
            raise MeshError("coefficients must be positive")
        if self.triangles.min() < 0 or self.triangles.max() >= self.n_vertices:
            raise MeshError("triangle references a missing vertex")
        area = self.signed_areas()
        bad = np.flatnonzero(area < 1e-14)
        if bad.size:
            raise MeshError(f"triangle {bad[0]} is degenerate or clockwise (area {area[bad[0]]:.3e})")
        if not self._edge_connected():
            raise MeshError("mesh is not edge-connected")
        return self

    def _edge_connected(self):
        m = self.n_triangles
        if m == 0:
            return False
        t = self.triangles
        loc = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        loc.sort(axis=1)
        owner = np.tile(np.arange(m), 3)
        _, inv = np.unique(loc, axis=0, return_inverse=True)
        inv = inv.reshape(-1)
        order = np.argsort(inv, kind="stable")
        same = inv[order][1:] == inv[order][:-1]
        a, b = owner[order][:-1][same], owner[order][1:][same]
        G = sp.coo_matrix((np.ones(len(a)), (a, b)), shape=(m, m))
        ncomp, _ = sp.csgraph.connected_components(G, directed=False)
        return ncomp == 1

    def to_json(self):
        return {
            "vertices": [[float(x), float(y)] for x, y in self.vertices],
            "triangles": [[int(i) for i in t] for t in self.triangles],
            "coeff": [float(c) for c in self.coeff],
        }


def write_mesh(mesh: TriMesh, path):
    # repr of a Python float round-trips exactly (at most 17 significant digits)
    with open(path, "w") as fh:
        json.dump(mesh.to_json(), fh)


def read_mesh(path) -> TriMesh:
    with open(path) as fh:
        data = json.load(fh)
    try:
        mesh = TriMesh(data["vertices"], data["triangles"], data["coeff"])
    except KeyError as exc:
        raise MeshError(f"mesh JSON missing key {exc}") from None
    return mesh.validate()


def _on_grid(value, n):
    return abs(value * n - round(value * n)) <= 1e-12 * max(n, 1)


def generate_structured_mesh(n, interface=None, eps=1.0, perturb=False, seed=DEFAULT_SEED):
    """Uniform right-triangle mesh of [0,1]^2 with n subdivisions per side.

    Each square is split along its lower-left to upper-right diagonal.
    ``interface = (x0, y0, x1, y1)`` is an axis-aligned rectangle on grid
    lines; triangles whose barycenter lies inside get coefficient ``eps``.
    With ``perturb=True`` every vertex is moved by ``h`` times a seeded
    random offset of length at most 1/4, taken from a tile of
    ``JITTER_PERIOD x JITTER_PERIOD`` offsets repeated over the grid so the
    worst element shape does not depend on n. Vertices on the outer boundary
    or on the interface rectangle only slide along their line, and corners
    stay fixed.
    """
    n = int(n)
    if n < 2:
        raise MeshError(f"need n >= 2 subdivisions, got {n}")
    if not 0 < eps <= 1:
        raise MeshError(f"eps must lie in (0, 1], got {eps}")
    if interface is not None:
        interface = tuple(float(v) for v in interface)
        if len(interface) != 4:
            raise MeshError("interface must be (x0, y0, x1, y1)")
        x0, y0, x1, y1 = interface
        if not (0 <= x0 < x1 <= 1 and 0 <= y0 < y1 <= 1):
            raise MeshError(f"interface {interface} is not a rectangle inside [0,1]^2")
        if not all(_on_grid(v, n) for v in interface):
            raise MeshError(f"interface {interface} is not aligned with the {n}x{n} grid")

    h = 1.0 / n
    ix, iy = np.meshgrid(np.arange(n + 1), np.arange(n + 1))
    ix, iy = ix.ravel(), iy.ravel()
    verts = np.column_stack([ix * h, iy * h])

    tris = []
    for j in range(n):
        for i in range(n):
            v00 = j * (n + 1) + i
            v10, v01, v11 = v00 + 1, v00 + n + 1, v00 + n + 2
            tris.append((v00, v10, v11))
            tris.append((v00, v11, v01))
    tris = np.array(tris, dtype=np.int64)

    coeff = np.ones(len(tris))
    if interface is not None:
        c = verts[tris].mean(axis=1)
        inside = (c[:, 0] > x0) & (c[:, 0] < x1) & (c[:, 1] > y0) & (c[:, 1] < y1)
        coeff[inside] = eps

    if perturb:
        verts = verts + h * _jitter(ix, iy, n, interface, seed)

    meta = {"n": n, "h": h, "eps": float(eps), "interface": interface,
            "perturb": bool(perturb), "seed": int(seed) if perturb else None}
    return TriMesh(verts, tris, coeff, meta).validate()


def _jitter(ix, iy, n, interface, seed):
    """Seeded offsets (in units of h) repeating every JITTER_PERIOD cells.

    Offsets lie in the disc of radius 1/4. Vertices on the outer boundary or
    on the interface rectangle keep only the component along their line, so
    the domain and the coefficient jump stay where they are; corners do not
    move. The periodic tile makes every mesh size see the same element
    shapes, which keeps the shape-regularity constant fixed across h.
    """
    rng = np.random.default_rng(seed)
    p = JITTER_PERIOD
    r = 0.25 * np.sqrt(rng.random((p, p)))
    phi = 2 * np.pi * rng.random((p, p))
    tile = np.stack([r * np.cos(phi), r * np.sin(phi)], axis=-1)
    shift = tile[ix % p, iy % p]
    move_x = np.ones(len(ix))
    move_y = np.ones(len(ix))

    def pin(xs, ys, x_lo, x_hi, y_lo, y_hi):
        vertical = np.isin(ix, xs) & (iy >= y_lo) & (iy <= y_hi)
        horizontal = np.isin(iy, ys) & (ix >= x_lo) & (ix <= x_hi)
        move_x[vertical] = 0.0
        move_y[horizontal] = 0.0

    pin([0, n], [0, n], 0, n, 0, n)
    if interface is not None:
        gx0, gy0, gx1, gy1 = (round(v * n) for v in interface)
        pin([gx0, gx1], [gy0, gy1], gx0, gx1, gy0, gy1)
    return shift * np.column_stack([move_x, move_y])


def local_stiffness(points, a=1.0):
    """Element stiffness matrix from barycentric gradients, a |T| G G^T."""
    p = np.asarray(points, dtype=np.float64)
    B = np.array([p[1] - p[0], p[2] - p[0]]).T
    area = 0.5 * abs(np.linalg.det(B))
    ginv = np.linalg.inv(B).T
    G = np.vstack([-ginv.sum(axis=1), ginv[:, 0], ginv[:, 1]])
    return a * area * G @ G.T


@dataclass
class EdgeWeightTable:
    """Per-edge weights omega_e = -a_ij and their per-element contributions.

    ``contrib_*`` arrays are aligned: contribution k belongs to edge
    ``contrib_edge[k]`` from triangle ``contrib_tri[k]``, with opposite angle
    ``contrib_angle[k]``.
    """

    n: int
    edges: np.ndarray
    omega: np.ndarray
    contrib_edge: np.ndarray
    contrib_tri: np.ndarray
    contrib_omega: np.ndarray
    contrib_angle: np.ndarray

    def laplacian(self) -> SparseMatrix:
        """Rebuild sum_e omega_e (delta_e u)(delta_e v) as a sparse matrix."""
        i, j, w = self.edges[:, 0], self.edges[:, 1], self.omega
        rows = np.concatenate([i, j, i, j])
        cols = np.concatenate([j, i, i, j])
        vals = np.concatenate([-w, -w, w, w])
        M = sp.coo_matrix((vals, (rows, cols)), shape=(self.n, self.n)).tocsr()
        return SparseMatrix.from_scipy(M)

    def negative_edges(self):
        """Edges with omega_e < 0, i.e. positive off-diagonal entries."""
        return self.edges[self.omega < 0]


def cotangent_weights(mesh: TriMesh, d=DIM):
    """Per-element edge weights and opposite angles, shape (n_triangles, 3).

    Column k refers to the edge opposite local vertex k.
    """
    p = mesh.vertices[mesh.triangles]
    kappa = 1.0  # volume of the (d-2)-simplex opposite an edge; a point in 2D
    factor = kappa / (d * (d - 1))
    omega = np.empty((mesh.n_triangles, 3))
    angle = np.empty((mesh.n_triangles, 3))
    for k in range(3):
        u = p[:, (k + 1) % 3] - p[:, k]
        v = p[:, (k + 2) % 3] - p[:, k]
        dot = u[:, 0] * v[:, 0] + u[:, 1] * v[:, 1]
        cross = u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0]
        omega[:, k] = factor * mesh.coeff * dot / cross
        angle[:, k] = np.arctan2(cross, dot)
    return omega, angle


def assemble_stiffness(mesh: TriMesh):
    """Neumann P1 stiffness matrix and its edge-weight table.

    Off-diagonals are ``-omega_e``, accumulated over elements in element
    order; each diagonal is the sum of its row's edge weights, so row sums
    vanish up to rounding. Structurally zero weights are not stored.
    """
    mesh.validate()
    n = mesh.n_vertices
    w_loc, ang_loc = cotangent_weights(mesh)
    edge_id = {}
    c_edge, c_tri, c_w, c_ang = [], [], [], []
    for t, tri in enumerate(mesh.triangles):
        for k in range(3):
            a, b = tri[(k + 1) % 3], tri[(k + 2) % 3]
            key = (a, b) if a < b else (b, a)
            e = edge_id.setdefault(key, len(edge_id))
            c_edge.append(e)
            c_tri.append(t)
            c_w.append(w_loc[t, k])
            c_ang.append(ang_loc[t, k])
    edges = np.array(list(edge_id), dtype=np.int64)
    omega = np.zeros(len(edges))
    for e, w in zip(c_edge, c_w):
        omega[e] += w
    order = np.lexsort((edges[:, 1], edges[:, 0]))
    remap = np.empty_like(order)
    remap[order] = np.arange(len(order))
    table = EdgeWeightTable(
        n, edges[order], omega[order], remap[np.array(c_edge)], np.array(c_tri),
        np.array(c_w), np.array(c_ang),
    )
    return _laplacian_from_edges(n, table.edges, table.omega), table


def _laplacian_from_edges(n, edges, omega):
    keep = omega != 0.0
    i, j, w = edges[keep, 0], edges[keep, 1], omega[keep]
    diag = np.zeros(n)
    for a, b, x in zip(i, j, w):
        diag[a] += x
        diag[b] += x
    rows = np.concatenate([i, j, np.arange(n)])
    cols = np.concatenate([j, i, np.arange(n)])
    vals = np.concatenate([-w, -w, diag])
    M = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    return SparseMatrix.from_scipy(M, symmetric=True)


def apply_dirichlet(A: SparseMatrix, boundary):
    """Principal submatrix on the interior indices.

    Returns ``(A_interior, interior)`` where ``interior[k]`` is the full index
    of interior unknown ``k``.
    """
    boundary = np.unique(np.asarray(boundary, dtype=np.int64))
    n = A.n_rows
    if boundary.size and (boundary.min() < 0 or boundary.max() >= n):
        raise ValueError("boundary index out of range")
    mask = np.ones(n, dtype=bool)
    mask[boundary] = False
    interior = np.flatnonzero(mask)
    if interior.size == 0:
        raise ValueError("empty interior: every index is on the boundary")
    sub = A.to_scipy()[interior][:, interior]
    return SparseMatrix.from_scipy(sub, symmetric=A.symmetric), interior


@dataclass
class ShapeRegularityReport:
    diameter: np.ndarray
    size: np.ndarray
    inner: np.ndarray
    ratio: np.ndarray
    sigma: float


def shape_regularity(mesh: TriMesh, d=DIM) -> ShapeRegularityReport:
    """Diameter, |T|^(1/d), twice the inradius and their ratio for each element."""
    p = mesh.vertices[mesh.triangles]
    lengths = np.stack([
        np.linalg.norm(p[:, 1] - p[:, 0], axis=1),
        np.linalg.norm(p[:, 2] - p[:, 1], axis=1),
        np.linalg.norm(p[:, 0] - p[:, 2], axis=1),
    ], axis=1)
    area = np.abs(mesh.signed_areas())
    diam = lengths.max(axis=1)
    size = area ** (1.0 / d)
    inner = 2.0 * (2.0 * area / lengths.sum(axis=1))
    ratio = diam / inner
    return ShapeRegularityReport(diam, size, inner, ratio, float(ratio.max()))
