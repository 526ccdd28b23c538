"""Sparse direct solves and the Newton iteration."""
from dataclasses import dataclass, field
import logging

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .forms import StateVector

log = logging.getLogger(__name__)


class SingularSystemError(np.linalg.LinAlgError):
    pass


def solve_linear(matrix, rhs, rtol=1e-10, refinement_steps=2):
    """LU solve of a square sparse system, with a relative residual check.

    Up to ``refinement_steps`` rounds of iterative refinement reuse the
    factorisation when the first residual misses ``rtol``.
    """
    A = sp.csc_matrix(matrix)
    b = np.asarray(rhs, dtype=float)
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"matrix must be square, got {A.shape}")
    if A.shape[0] != b.shape[0]:
        raise ValueError(f"rhs length {b.shape[0]} does not match matrix size {A.shape[0]}")
    if A.shape[0] == 0:
        return np.zeros(0)

    row_nnz = np.diff(sp.csr_matrix(A).indptr)
    empty = np.flatnonzero(row_nnz == 0)
    if empty.size:
        raise SingularSystemError(f"structurally singular: {empty.size} empty rows, first {empty[0]}")
    empty = np.flatnonzero(np.diff(A.indptr) == 0)
    if empty.size:
        raise SingularSystemError(f"structurally singular: {empty.size} empty columns, first {empty[0]}")
    try:
        lu = splu(A)
    except RuntimeError as exc:
        raise SingularSystemError(f"LU factorisation failed: {exc}") from exc
    diag = np.abs(lu.U.diagonal())
    x = lu.solve(b)
    bnorm = np.linalg.norm(b)
    scale = bnorm if bnorm > 0 else 1.0
    r = b - A @ x
    res = np.linalg.norm(r) / scale
    for _ in range(refinement_steps):
        if res <= rtol or not np.isfinite(res):
            break
        x = x + lu.solve(r)
        r = b - A @ x
        res = np.linalg.norm(r) / scale
    if not np.isfinite(res) or res > rtol:
        raise SingularSystemError(
            f"numerically singular: relative residual {res:.3e}, "
            f"pivot range [{diag.min():.3e}, {diag.max():.3e}]"
        )
    return x


@dataclass
class NewtonOptions:
    tolerance: float = 1e-10
    max_iterations: int = 20
    initial_guess: str = "zero"  # "zero" or "interpolant"

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if self.initial_guess not in ("zero", "interpolant"):
            raise ValueError(f"unknown initial guess policy {self.initial_guess!r}")


@dataclass
class NewtonLog:
    increments: list = field(default_factory=list)
    residuals: list = field(default_factory=list)
    linear_status: list = field(default_factory=list)
    status: str = "max-iter"
    initial_residual: float = float("nan")

    def contraction_exponents(self, floor):
        """``log(r_{k+1}/r_0) / log(r_k/r_0)`` for iterates ``k >= 1`` with ``r_k > floor``."""
        r = np.array(self.residuals) / self.initial_residual
        out = []
        for k in range(len(r) - 1):
            if self.residuals[k] <= floor:
                break
            out.append(float(np.log(r[k + 1]) / np.log(r[k])))
        return out

    @property
    def iterations(self):
        return len(self.increments)

    @property
    def converged(self):
        return self.status == "converged"


def newton_solve(operator, opts=None, initial=None):
    """Newton iteration for ``operator.residual(Psi) = 0``.

    Starts from ``initial`` (default zero, so the first step is the
    decoupled linear plate solve). Stops once, in the Euclidean norm,
    ``|dx| <= tol (1 + |x|)`` and ``|r| <= tol (1 + |L|)``; the unscaled
    1e-10 sits below the rounding floor on the finest meshes.
    """
    opts = opts or NewtonOptions()
    n = operator.n_free
    state = initial if initial is not None else StateVector.zeros(n)
    nlog = NewtonLog()
    nlog.initial_residual = float(np.linalg.norm(operator.residual(state)))
    res_tol = opts.tolerance * (1 + float(np.linalg.norm(operator.load)))
    growth = 0
    for it in range(opts.max_iterations):
        system = operator.newton_system(state)
        x = solve_linear(system.jacobian, system.rhs)
        nlog.linear_status.append("ok")
        new = StateVector.from_array(x)
        inc = float(np.linalg.norm(x - state.to_array()))
        res = float(np.linalg.norm(operator.residual(new)))
        nlog.increments.append(inc)
        nlog.residuals.append(res)
        log.debug("newton %d: |dx|=%.3e |r|=%.3e", it + 1, inc, res)
        state = new
        if inc <= opts.tolerance * (1 + np.linalg.norm(x)) and res <= res_tol:
            nlog.status = "converged"
            break
        if len(nlog.residuals) > 1 and res > nlog.residuals[-2]:
            growth += 1
            if growth >= 3:
                nlog.status = "diverged"
                break
        else:
            growth = 0
    return state, nlog
