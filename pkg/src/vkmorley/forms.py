"""Assembly of the discrete forms on the Morley space.

Matrix rows index test functions, columns trial functions. Element
matrices are accumulated as COO triplets and summed on conversion to CSR;
element order is fixed, so results are reproducible bit for bit.

Notation for the trilinear form ``b(eta, chi, phi) = 1/2 sum_T int
cof(D^2 eta) grad chi . grad phi``:

* ``N1(w)[phi, chi] = b(w, chi, phi)``  (symmetric)
* ``N2(w)[phi, eta] = b(eta, w, phi)``
"""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

DEFAULT_ASSEMBLY_DEGREE = 4
DEFAULT_LOAD_DEGREE = 6


@dataclass
class StateVector:
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        if self.u.shape != self.v.shape or self.u.ndim != 1:
            raise ValueError("u and v must be 1-D arrays of equal length")

    @classmethod
    def zeros(cls, n):
        return cls(np.zeros(n), np.zeros(n))

    @classmethod
    def from_array(cls, x):
        x = np.asarray(x, dtype=float)
        n = len(x) // 2
        if 2 * n != len(x):
            raise ValueError("stacked state must have even length")
        return cls(x[:n].copy(), x[n:].copy())

    def to_array(self):
        return np.concatenate([self.u, self.v])


@dataclass
class AssembledSystem:
    jacobian: sp.csr_matrix
    rhs: np.ndarray


def _scatter(space, elem):
    """Sum element matrices ``(T, 6, 6)`` into a free-DOF CSR matrix."""
    dofs = space.dofmap.element_dofs
    rows = np.broadcast_to(dofs[:, :, None], elem.shape)
    cols = np.broadcast_to(dofs[:, None, :], elem.shape)
    keep = (rows >= 0) & (cols >= 0)
    n = space.n_free
    mat = sp.coo_matrix((elem[keep], (rows[keep], cols[keep])), shape=(n, n))
    return mat.tocsr()


def _scatter_vector(space, elem):
    dofs = space.dofmap.element_dofs
    keep = dofs >= 0
    return np.bincount(dofs[keep], weights=elem[keep], minlength=space.n_free)


def _cofactor(h):
    """Cofactor of symmetric 2x2 matrices ``(..., 2, 2)``."""
    c = np.empty_like(h)
    c[..., 0, 0] = h[..., 1, 1]
    c[..., 1, 1] = h[..., 0, 0]
    c[..., 0, 1] = -h[..., 0, 1]
    c[..., 1, 0] = -h[..., 1, 0]
    return c


def gradient_products(space, degree=DEFAULT_ASSEMBLY_DEGREE):
    """``G[t, i, j, a, b] = int_T d_a phi_i d_b phi_j`` (cached per degree)."""
    key = ("gradprod", degree)
    cache = space._quad
    if key not in cache:
        _, wts, _, grads = space.quadrature(degree)
        cache[key] = np.einsum("tq,tqia,tqjb->tijab", wts, grads, grads)
    return cache[key]


def assemble_biharmonic(space):
    """``a_h``: element matrix ``|T| D^2 phi_i : D^2 phi_j``."""
    h = space.hessians
    elem = space.areas[:, None, None] * np.einsum("tiab,tjab->tij", h, h)
    return _scatter(space, elem)


def assemble_trilinear(space, w, slot, degree=DEFAULT_ASSEMBLY_DEGREE):
    """``N1(w)`` for ``slot=1`` or ``N2(w)`` for ``slot=2``."""
    w = np.asarray(w, dtype=float)
    if w.shape != (space.n_free,):
        raise ValueError(f"coefficient vector has shape {w.shape}, expected ({space.n_free},)")
    G = gradient_products(space, degree)
    wl = space.local(w)
    if slot == 1:
        cof = _cofactor(np.einsum("tk,tkab->tab", wl, space.hessians))
        elem = 0.5 * np.einsum("tab,tijab->tij", cof, G)
    elif slot == 2:
        cof = _cofactor(space.hessians)  # (T, 6, 2, 2) per trial function
        gw = np.einsum("tikab,tk->tiab", G, wl)  # int d_a phi_i d_b w
        elem = 0.5 * np.einsum("tjab,tiab->tij", cof, gw)
    else:
        raise ValueError(f"slot must be 1 or 2, got {slot!r}")
    return _scatter(space, elem)


def assemble_gradient(space, p_over_D, degree=DEFAULT_ASSEMBLY_DEGREE):
    """The form ``-(p/D) sum_T int grad phi_j . grad phi_i``."""
    if not np.isfinite(p_over_D):
        raise ValueError("p_over_D must be finite")
    G = gradient_products(space, degree)
    elem = -float(p_over_D) * np.einsum("tijaa->tij", G)
    return _scatter(space, elem)


def assemble_load(space, f1, f2=None, degree=DEFAULT_LOAD_DEGREE):
    """Stacked load ``[(f1, phi_i); (f2, phi_i)]`` of length ``2 n_free``."""
    pts, wts, vals, _ = space.quadrature(degree)
    out = []
    for f in (f1, f2):
        if f is None:
            out.append(np.zeros(space.n_free))
            continue
        fq = np.broadcast_to(np.asarray(f(pts[..., 0], pts[..., 1]), dtype=float), wts.shape)
        if not np.all(np.isfinite(fq)):
            t = int(np.flatnonzero(~np.isfinite(fq).all(axis=1))[0])
            raise FloatingPointError(f"load function is not finite at a quadrature point of triangle {t}")
        out.append(_scatter_vector(space, np.einsum("tq,tq,tqi->ti", wts, fq, vals)))
    return np.concatenate(out)


class VonKarmanOperator:
    """Discrete operator ``A_h + B_h + C_h - L_h`` on the Morley space.

    Parameters
    ----------
    space : MorleySpace
    load : array of length ``2 n_free``
        Assembled right-hand side, see :func:`assemble_load`.
    p_over_D : float
        Coefficient of the gradient form (zero gives the plain system).
    """

    def __init__(self, space, load, p_over_D=0.0, degree=DEFAULT_ASSEMBLY_DEGREE):
        self.space = space
        self.degree = degree
        self.load = np.asarray(load, dtype=float)
        n = space.n_free
        if self.load.shape != (2 * n,):
            raise ValueError(f"load has shape {self.load.shape}, expected ({2 * n},)")
        self.p_over_D = float(p_over_D)
        self.K = assemble_biharmonic(space)
        self.C = assemble_gradient(space, p_over_D, degree) if p_over_D else sp.csr_matrix((n, n))

    @property
    def n_free(self):
        return self.space.n_free

    def _check(self, state):
        if state.u.shape != (self.n_free,):
            raise ValueError(f"state has {state.u.shape[0]} DOFs per field, expected {self.n_free}")

    def _trilinear(self, w):
        return (
            assemble_trilinear(self.space, w, 1, self.degree),
            assemble_trilinear(self.space, w, 2, self.degree),
        )

    def nonlinear_term(self, state):
        """``B_h(Psi, Psi, .)`` as a stacked vector."""
        self._check(state)
        N1u = assemble_trilinear(self.space, state.u, 1, self.degree)
        N1v = assemble_trilinear(self.space, state.v, 1, self.degree)
        return np.concatenate([N1u @ state.v + N1v @ state.u, -(N1u @ state.u)])

    def residual(self, state):
        """``A_h Psi + B_h(Psi, Psi, .) + C_h Psi - L_h``."""
        self._check(state)
        lin = np.concatenate([self.K @ state.u + self.C @ state.u, self.K @ state.v])
        return lin + self.nonlinear_term(state) - self.load

    def newton_system(self, prev):
        """Jacobian at ``prev`` and the right-hand side of the Newton step."""
        self._check(prev)
        N1u, N2u = self._trilinear(prev.u)
        N1v, N2v = self._trilinear(prev.v)
        coupling = N1u + N2u
        jac = sp.bmat(
            [[self.K + self.C + N1v + N2v, coupling], [-coupling, self.K]], format="csr"
        )
        rhs = np.concatenate([N1u @ prev.v + N1v @ prev.u, -(N1u @ prev.u)]) + self.load
        return AssembledSystem(jac, rhs)


def newton_system(space, prev, problem, *, assembly_degree=DEFAULT_ASSEMBLY_DEGREE,
                  load_degree=DEFAULT_LOAD_DEGREE):
    """One-shot Newton system for a manufactured problem at state ``prev``."""
    op = problem_operator(space, problem, assembly_degree, load_degree)
    return op.newton_system(prev)


def problem_operator(space, problem, assembly_degree=DEFAULT_ASSEMBLY_DEGREE,
                     load_degree=DEFAULT_LOAD_DEGREE):
    load = assemble_load(space, problem.rhs_f1, problem.rhs_f2, load_degree)
    return VonKarmanOperator(space, load, problem.p_over_D, assembly_degree)
