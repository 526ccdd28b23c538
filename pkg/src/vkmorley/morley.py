"""Morley element: degrees of freedom, local bases, interpolation, evaluation.

Local DOF order on a triangle ``(a0, a1, a2)``: the three vertex values,
then the normal derivatives at the midpoints of the edges opposite
``a0, a1, a2``. Normal-derivative DOFs are taken along the *global* edge
normal, so a function's edge DOF is single valued across the mesh; the
per-triangle ``orientation_sign`` relates it to the outward normal.

Local shape functions are quadratics in the scaled monomials
``{1, s, t, s^2, s t, t^2}`` with ``(s, t) = (x - c) / h_T``, ``c`` the
centroid.
"""
from dataclasses import dataclass

import numpy as np

from .quadrature import gauss_line, triangle_rule

FIXED = -1


@dataclass(frozen=True, eq=False)
class DofMap:
    vertex_dof: np.ndarray  # (V,), FIXED on the boundary
    edge_dof: np.ndarray  # (E,), FIXED on the boundary
    n_free: int
    orientation_sign: np.ndarray  # (T, 3)
    element_dofs: np.ndarray  # (T, 6) global DOF or FIXED


def build_dof_map(mesh):
    """Number interior vertices first, then interior edges, in index order."""
    free_v = ~mesh.boundary_vertex_flags
    free_e = ~mesh.boundary_edge_flags
    nv = int(free_v.sum())
    vertex_dof = np.full(mesh.n_vertices, FIXED, dtype=np.int64)
    vertex_dof[free_v] = np.arange(nv)
    edge_dof = np.full(mesh.n_edges, FIXED, dtype=np.int64)
    edge_dof[free_e] = nv + np.arange(int(free_e.sum()))

    c = mesh.corners
    tangent = c[:, [2, 0, 1]] - c[:, [1, 2, 0]]  # local edge i runs a_{i+1} -> a_{i+2}
    outward = np.stack([tangent[..., 1], -tangent[..., 0]], axis=-1)
    glob = mesh.edge_normals[mesh.triangle_edges]
    sign = np.sign(np.einsum("tkd,tkd->tk", outward, glob)).astype(np.int64)

    el = np.hstack([vertex_dof[mesh.triangles], edge_dof[mesh.triangle_edges]])
    for a in (vertex_dof, edge_dof, sign, el):
        a.setflags(write=False)
    return DofMap(vertex_dof, edge_dof, nv + int(free_e.sum()), sign, el)


def _monomials(s, t):
    one = np.ones_like(s)
    return np.stack([one, s, t, s * s, s * t, t * t], axis=-1)


def _monomial_gradients(s, t):
    """d/ds and d/dt of the six monomials, shape (..., 6, 2)."""
    z, one = np.zeros_like(s), np.ones_like(s)
    ds = np.stack([z, one, z, 2 * s, t, z], axis=-1)
    dt = np.stack([z, z, one, z, s, 2 * t], axis=-1)
    return np.stack([ds, dt], axis=-1)


_MONO_HESS = np.zeros((6, 2, 2))
_MONO_HESS[3, 0, 0] = 2.0
_MONO_HESS[4, 0, 1] = _MONO_HESS[4, 1, 0] = 1.0
_MONO_HESS[5, 1, 1] = 2.0


class SingularElementError(ValueError):
    pass


class BasisTable:
    """Morley shape functions of every triangle of a mesh.

    ``coefficients[t][:, j]`` holds the scaled-monomial coefficients of
    shape function ``j`` on triangle ``t``.
    """

    def __init__(self, corners, normals, cond_limit=1e12, first_index=0):
        c = np.asarray(corners, dtype=float)
        self.centers = c.mean(axis=1)
        sides = c[:, [1, 2, 0]] - c[:, [2, 0, 1]]
        self.scales = np.linalg.norm(sides, axis=2).max(axis=1)
        mids = 0.5 * (c[:, [1, 2, 0]] + c[:, [2, 0, 1]])

        sv, tv = self._local(c)
        rows_v = _monomials(sv, tv)
        sm, tm = self._local(mids)
        g = _monomial_gradients(sm, tm) / self.scales[:, None, None, None]
        rows_e = np.einsum("tkmd,tkd->tkm", g, normals)
        dof_matrix = np.concatenate([rows_v, rows_e], axis=1)  # (T, 6 dofs, 6 monos)

        cond = np.linalg.cond(dof_matrix)
        bad = np.flatnonzero(~np.isfinite(cond) | (cond > cond_limit))
        if bad.size:
            raise SingularElementError(
                f"Morley DOF system singular on triangle {int(bad[0]) + first_index} "
                f"(cond={cond[bad[0]]:.3g})"
            )
        self.dof_matrix = dof_matrix
        self.coefficients = np.linalg.inv(dof_matrix)

    @classmethod
    def from_mesh(cls, mesh):
        return cls(mesh.corners, mesh.edge_normals[mesh.triangle_edges])

    def _local(self, x):
        ctr = self.centers[:, None, :]
        sc = self.scales[:, None]
        return (x[..., 0] - ctr[..., 0]) / sc, (x[..., 1] - ctr[..., 1]) / sc

    def __len__(self):
        return len(self.scales)

    def __getitem__(self, t):
        return ElementBasis(self.coefficients[t], self.centers[t], float(self.scales[t]))

    def values(self, pts):
        """Shape function values at per-triangle points ``(T, nq, 2)`` -> ``(T, nq, 6)``."""
        s, t = self._local(pts)
        return np.einsum("tqm,tmj->tqj", _monomials(s, t), self.coefficients)

    def gradients(self, pts):
        """Shape function gradients ``(T, nq, 6, 2)``."""
        s, t = self._local(pts)
        g = _monomial_gradients(s, t) / self.scales[:, None, None, None]
        return np.einsum("tqmd,tmj->tqjd", g, self.coefficients)

    def hessians(self):
        """Constant shape function Hessians ``(T, 6, 2, 2)``."""
        h = np.einsum("mab,tmj->tjab", _MONO_HESS, self.coefficients)
        return h / self.scales[:, None, None, None] ** 2


@dataclass(frozen=True, eq=False)
class ElementBasis:
    coefficients: np.ndarray  # (6, 6), column j = shape function j
    center: np.ndarray
    scale: float

    def _st(self, points):
        p = np.asarray(points, dtype=float)
        return (p[..., 0] - self.center[0]) / self.scale, (p[..., 1] - self.center[1]) / self.scale

    def values(self, points):
        return _monomials(*self._st(points)) @ self.coefficients

    def gradients(self, points):
        g = _monomial_gradients(*self._st(points)) / self.scale
        return np.einsum("...md,mj->...jd", g, self.coefficients)

    def hessians(self):
        return np.einsum("mab,mj->jab", _MONO_HESS, self.coefficients) / self.scale**2


def element_basis(mesh, dofmap, t):
    """Shape functions of triangle ``t``.

    ``dofmap`` is accepted for interface symmetry; the edge DOFs use the
    global normals, so the orientation signs are already folded in.
    """
    if not 0 <= t < mesh.n_triangles:
        raise IndexError(f"triangle index {t} out of range")
    sl = slice(t, t + 1)
    table = BasisTable(
        mesh.corners[sl], mesh.edge_normals[mesh.triangle_edges[sl]], first_index=t
    )
    return table[0]


def local_coefficients(dofmap, coefs):
    """Gather global coefficients into ``(T, 6)``; fixed DOFs read as zero."""
    coefs = np.asarray(coefs, dtype=float)
    if coefs.shape != (dofmap.n_free,):
        raise ValueError(f"expected {dofmap.n_free} coefficients, got shape {coefs.shape}")
    padded = np.append(coefs, 0.0)
    return padded[dofmap.element_dofs]  # FIXED == -1 picks the trailing zero


def interpolate(mesh, dofmap, exact, n_edge_points=3):
    """Morley interpolant: vertex values and edge-averaged normal derivatives.

    ``exact`` must provide ``value(x, y)`` and ``gradient(x, y)``.
    """
    out = np.zeros(dofmap.n_free)
    fv = dofmap.vertex_dof != FIXED
    p = mesh.vertices[fv]
    out[dofmap.vertex_dof[fv]] = exact.value(p[:, 0], p[:, 1])

    fe = dofmap.edge_dof != FIXED
    ends = mesh.vertices[mesh.edges[fe]]  # (Ef, 2, 2)
    s, w = gauss_line(n_edge_points)
    x = ends[:, None, 0, :] * (1 - s)[None, :, None] + ends[:, None, 1, :] * s[None, :, None]
    g = exact.gradient(x[..., 0], x[..., 1])  # (Ef, nq, 2)
    dn = np.einsum("eqd,ed->eq", g, mesh.edge_normals[fe])
    out[dofmap.edge_dof[fe]] = dn @ w
    return out


def evaluate(mesh, dofmap, coefs, t, point, order=0, tol=1e-12, basis=None):
    """Value, gradient or Hessian of a Morley function inside triangle ``t``."""
    if order not in (0, 1, 2):
        raise ValueError(f"order must be 0, 1 or 2, got {order!r}")
    point = np.asarray(point, dtype=float)
    c = mesh.corners[t]
    lam = np.linalg.solve(np.vstack([c.T, np.ones(3)]), np.append(point, 1.0))
    if lam.min() < -tol:
        raise ValueError(f"point {point.tolist()} lies outside triangle {t}")
    eb = basis[t] if basis is not None else element_basis(mesh, dofmap, t)
    loc = local_coefficients(dofmap, coefs)[t]
    if order == 0:
        return float(eb.values(point) @ loc)
    if order == 1:
        return np.einsum("jd,j->d", eb.gradients(point), loc)
    return np.einsum("jab,j->ab", eb.hessians(), loc)


class MorleySpace:
    """Mesh, DOF map and shape functions bundled, with per-degree quadrature caches."""

    def __init__(self, mesh, dofmap=None):
        self.mesh = mesh
        self.dofmap = dofmap if dofmap is not None else build_dof_map(mesh)
        self.basis = BasisTable.from_mesh(mesh)
        self.areas = mesh.areas
        self.hessians = self.basis.hessians()
        self._quad = {}

    @property
    def n_free(self):
        return self.dofmap.n_free

    def local(self, coefs):
        return local_coefficients(self.dofmap, coefs)

    def quadrature(self, degree):
        """Points ``(T, nq, 2)``, area-scaled weights ``(T, nq)``, values, gradients."""
        if degree not in self._quad:
            rule = triangle_rule(degree)
            pts = rule.physical_points(self.mesh.corners)
            wts = self.areas[:, None] * rule.weights[None, :]
            self._quad[degree] = (
                pts,
                wts,
                self.basis.values(pts),
                self.basis.gradients(pts),
            )
        return self._quad[degree]

    def interpolate(self, exact):
        return interpolate(self.mesh, self.dofmap, exact)

    def evaluate(self, coefs, t, point, order=0):
        return evaluate(self.mesh, self.dofmap, coefs, t, point, order, basis=self.basis)
