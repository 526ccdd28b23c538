"""Triangulations of the unit square and the L-shaped domain.

Meshes are immutable after construction. Edges are stored with the lower
vertex index first; the global edge normal is the unit tangent (lower to
higher endpoint) rotated by +90 degrees.
"""
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True, eq=False)
class Mesh:
    vertices: np.ndarray  # (V, 2)
    triangles: np.ndarray  # (T, 3), counterclockwise
    edges: np.ndarray = field(init=False)  # (E, 2), lower index first
    edge_triangles: np.ndarray = field(init=False)  # (E, 2), -1 if absent
    triangle_edges: np.ndarray = field(init=False)  # (T, 3), edge opposite vertex i
    boundary_edge_flags: np.ndarray = field(init=False)
    boundary_vertex_flags: np.ndarray = field(init=False)

    def __post_init__(self):
        p = np.ascontiguousarray(self.vertices, dtype=float)
        t = np.ascontiguousarray(self.triangles, dtype=np.int64)
        if p.ndim != 2 or p.shape[1] != 2 or t.ndim != 2 or t.shape[1] != 3:
            raise ValueError("vertices must be (V, 2) and triangles (T, 3)")
        object.__setattr__(self, "vertices", p)
        object.__setattr__(self, "triangles", t)

        area = _signed_area(p[t])
        if np.any(area <= 0):
            bad = int(np.flatnonzero(area <= 0)[0])
            raise ValueError(f"triangle {bad} is degenerate or clockwise")

        # local edge i is opposite local vertex i
        local = t[:, [[1, 2], [2, 0], [0, 1]]].reshape(-1, 2)
        key = np.sort(local, axis=1)
        edges, inverse = np.unique(key, axis=0, return_inverse=True)
        inverse = inverse.ravel()
        tri_edges = inverse.reshape(-1, 3)

        owner = np.repeat(np.arange(len(t)), 3)
        edge_tri = -np.ones((len(edges), 2), dtype=np.int64)
        order = np.argsort(inverse, kind="stable")
        counts = np.bincount(inverse, minlength=len(edges))
        if counts.max() > 2:
            raise ValueError("non-manifold edge shared by more than two triangles")
        starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
        edge_tri[:, 0] = owner[order[starts]]
        two = counts == 2
        edge_tri[two, 1] = owner[order[starts[two] + 1]]

        bnd_e = counts == 1
        bnd_v = np.zeros(len(p), dtype=bool)
        bnd_v[edges[bnd_e].ravel()] = True

        for name, arr in [
            ("edges", edges),
            ("edge_triangles", edge_tri),
            ("triangle_edges", tri_edges),
            ("boundary_edge_flags", bnd_e),
            ("boundary_vertex_flags", bnd_v),
        ]:
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        p.setflags(write=False)
        t.setflags(write=False)

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_edges(self):
        return len(self.edges)

    @property
    def n_triangles(self):
        return len(self.triangles)

    @property
    def corners(self):
        """Vertex coordinates per triangle, shape (T, 3, 2)."""
        return self.vertices[self.triangles]

    @property
    def areas(self):
        return _signed_area(self.corners)

    @property
    def diameters(self):
        c = self.corners
        lengths = np.linalg.norm(c[:, [1, 2, 0]] - c[:, [2, 0, 1]], axis=2)
        return lengths.max(axis=1)

    @property
    def h(self):
        return float(self.diameters.max())

    @property
    def edge_midpoints(self):
        return self.vertices[self.edges].mean(axis=1)

    @property
    def edge_lengths(self):
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return np.hypot(d[:, 0], d[:, 1])

    @property
    def edge_normals(self):
        """Global unit normals: tangent (low -> high vertex) rotated by +90 degrees."""
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        d = d / np.hypot(d[:, 0], d[:, 1])[:, None]
        return np.column_stack([-d[:, 1], d[:, 0]])

    def dump(self):
        """Plain-text dump: ``V E T`` header, vertices, triangles, edges."""
        lines = [f"{self.n_vertices} {self.n_edges} {self.n_triangles}"]
        lines += [f"{x:.17g} {y:.17g}" for x, y in self.vertices]
        lines += [f"{i} {j} {k}" for i, j, k in self.triangles]
        lines += [
            f"{i} {j} {int(b)}" for (i, j), b in zip(self.edges, self.boundary_edge_flags)
        ]
        return "\n".join(lines) + "\n"

    @classmethod
    def load(cls, text):
        """Inverse of :meth:`dump`."""
        rows = text.split("\n")
        nv, ne, nt = (int(s) for s in rows[0].split())
        p = np.array([[float(s) for s in r.split()] for r in rows[1 : 1 + nv]]).reshape(-1, 2)
        t = np.array(
            [[int(s) for s in r.split()] for r in rows[1 + nv : 1 + nv + nt]], dtype=np.int64
        ).reshape(-1, 3)
        mesh = cls(p, t)
        if mesh.n_edges != ne:
            raise ValueError(f"edge count mismatch: header says {ne}, rebuilt {mesh.n_edges}")
        return mesh


def _signed_area(c):
    return 0.5 * (
        (c[:, 1, 0] - c[:, 0, 0]) * (c[:, 2, 1] - c[:, 0, 1])
        - (c[:, 2, 0] - c[:, 0, 0]) * (c[:, 1, 1] - c[:, 0, 1])
    )


def _crisscross(cells, n):
    """Criss-cross triangulation of a union of unit cells.

    ``cells`` are the lower-left corners of unit squares. Grid vertices are
    numbered lexicographically by (y, x); cell centres follow in the same
    order.
    """
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    sub = []
    for cx, cy in cells:
        for j in range(n):
            for i in range(n):
                sub.append((cx * n + i, cy * n + j))
    sub.sort(key=lambda c: (c[1], c[0]))

    grid = sorted(
        {(i + di, j + dj) for i, j in sub for di in (0, 1) for dj in (0, 1)},
        key=lambda c: (c[1], c[0]),
    )
    index = {g: k for k, g in enumerate(grid)}
    pts = [(i / n, j / n) for i, j in grid]
    tris = []
    for i, j in sub:
        c = len(pts)
        pts.append(((i + 0.5) / n, (j + 0.5) / n))
        a, b = index[(i, j)], index[(i + 1, j)]
        d, e = index[(i, j + 1)], index[(i + 1, j + 1)]
        tris += [(a, b, c), (b, e, c), (e, d, c), (d, a, c)]
    return np.array(pts), np.array(tris)


def unit_square_crisscross(n):
    """Unit square split into n x n cells, each cut by both diagonals."""
    p, t = _crisscross([(0, 0)], n)
    return Mesh(p, t)


def l_shape_crisscross(n):
    """Criss-cross mesh of (-1, 1)^2 minus [0, 1) x (-1, 0]."""
    p, t = _crisscross([(0, 0), (0, 1), (1, 1)], n)
    return Mesh(p - 1.0, t)


def red_refine(mesh):
    """Split every triangle into four similar children through edge midpoints."""
    t = mesh.triangles
    mid = mesh.n_vertices + mesh.triangle_edges  # midpoint of edge opposite vertex i
    p = np.vstack([mesh.vertices, mesh.edge_midpoints])
    a, b, c = t.T
    ma, mb, mc = mid.T  # ma opposite a, i.e. on edge bc
    children = np.stack(
        [
            np.column_stack([a, mc, mb]),
            np.column_stack([mc, b, ma]),
            np.column_stack([mb, ma, c]),
            np.column_stack([ma, mb, mc]),
        ],
        axis=1,
    ).reshape(-1, 3)
    return Mesh(p, children)


def mesh_stats(mesh):
    return {
        "V": mesh.n_vertices,
        "E": mesh.n_edges,
        "T": mesh.n_triangles,
        "h": mesh.h,
        "boundary_vertices": int(mesh.boundary_vertex_flags.sum()),
        "boundary_edges": int(mesh.boundary_edge_flags.sum()),
    }


def refined(mesh, times):
    for _ in range(times):
        mesh = red_refine(mesh)
    return mesh


def level_mesh(domain, level, family="red"):
    """Mesh of refinement level ``level >= 1`` with its parameter ``n``.

    ``family="red"`` red-refines the single-cell criss-cross mesh (square:
    ``level`` times; L-shape: ``level - 1`` times). ``family="crisscross"``
    generates the criss-cross mesh with the same vertex set directly.
    """
    if level < 1:
        raise ValueError("level must be >= 1")
    if domain == "unit-square":
        n = 2**level
        base, times = unit_square_crisscross, level
    elif domain == "l-shape":
        n = 2 ** (level - 1)
        base, times = l_shape_crisscross, level - 1
    else:
        raise ValueError(f"unknown domain {domain!r}")
    if family == "red":
        return refined(base(1), times), n
    if family == "crisscross":
        return base(n), n
    raise ValueError(f"unknown mesh family {family!r}")
