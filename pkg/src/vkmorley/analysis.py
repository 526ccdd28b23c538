"""Broken-norm errors and experimental orders of convergence."""
from dataclasses import dataclass, field

import numpy as np

from .quadrature import triangle_rule

DEFAULT_ERROR_DEGREE = 6


def _squared_difference(exact, order, x, y, vals, grads, hess, loc):
    if order == 0:
        diff = exact.value(x, y) - np.einsum("tqj,tj->tq", vals, loc)
        return diff**2
    if order == 1:
        diff = exact.gradient(x, y) - np.einsum("tqjd,tj->tqd", grads, loc)
        return np.sum(diff**2, axis=-1)
    diff = exact.hessian(x, y) - np.einsum("tjab,tj->tab", hess, loc)[:, None]
    return np.sum(diff**2, axis=(-2, -1))


def graded_subtriangles(corners, vertex, depth):
    """Split a triangle ``depth`` times towards its local ``vertex``.

    Returns ``(3 * depth + 1, 3, 2)`` sub-triangles covering the parent.
    """
    out = []
    c = np.asarray(corners, dtype=float)
    for _ in range(depth):
        a, b, d = c[vertex], c[(vertex + 1) % 3], c[(vertex + 2) % 3]
        mab, mad, mbd = (a + b) / 2, (a + d) / 2, (b + d) / 2
        out += [(mab, b, mbd), (mad, mbd, d), (mab, mbd, mad)]
        c = np.array([a, mab, mad])
        vertex = 0
    out.append(tuple(c))
    return np.array(out)


def broken_error(space, coefs, exact, order, degree=DEFAULT_ERROR_DEGREE, corner_depth=10):
    """``sqrt(sum_T int_T |D^m (exact - discrete)|^2)`` for ``m = order``.

    ``order=2`` uses the Frobenius norm of the Hessian difference, ``1`` the
    gradient, ``0`` the value (full L2 norm). Triangles with a vertex on one
    of ``exact.singular_points`` are integrated on ``corner_depth`` levels of
    subdivision graded towards that vertex.
    """
    if order not in (0, 1, 2):
        raise ValueError(f"order must be 0, 1 or 2, got {order!r}")
    pts, wts, vals, grads = space.quadrature(degree)
    loc = space.local(coefs)
    sq = _squared_difference(
        exact, order, pts[..., 0], pts[..., 1], vals, grads, space.hessians, loc
    )
    contrib = np.sum(wts * sq, axis=1)

    mesh = space.mesh
    for sing in getattr(exact, "singular_points", ()):
        hit = np.all(np.isclose(mesh.corners, sing, rtol=0, atol=1e-14), axis=-1)
        for t, k in zip(*np.nonzero(hit)):
            contrib[t] = _graded_contribution(space, exact, order, loc, t, k, degree, corner_depth)
    return float(np.sqrt(contrib.sum()))


def _graded_contribution(space, exact, order, loc, t, vertex, degree, depth):
    rule = triangle_rule(degree)
    subs = graded_subtriangles(space.mesh.corners[t], vertex, depth)
    p = rule.physical_points(subs).reshape(1, -1, 2)
    area = 0.5 * np.abs(
        (subs[:, 1, 0] - subs[:, 0, 0]) * (subs[:, 2, 1] - subs[:, 0, 1])
        - (subs[:, 2, 0] - subs[:, 0, 0]) * (subs[:, 1, 1] - subs[:, 0, 1])
    )
    w = (area[:, None] * rule.weights[None, :]).reshape(1, -1)
    eb = space.basis[t]
    sq = _squared_difference(
        exact, order, p[..., 0], p[..., 1],
        eb.values(p), eb.gradients(p), space.hessians[t : t + 1], loc[t : t + 1],
    )
    return float(np.sum(w * sq))


def rates(errors):
    """``log2(e[k-1] / e[k])``; ``None`` for the first level and for non-positive errors."""
    out = [None]
    for prev, cur in zip(errors[:-1], errors[1:]):
        if prev is None or cur is None or not (prev > 0 and cur > 0):
            out.append(None)
        else:
            out.append(float(np.log(prev / cur) / np.log(2.0)))
    return out


NORM_KEYS = ("e2", "e1", "e0")


@dataclass
class LevelResult:
    level: int
    n: int
    unknowns: int
    h: float
    errors: dict  # e.g. {"e2_u": ..., "e0_v": ...}
    newton_iterations: int = 0
    newton_status: str = "converged"


@dataclass
class ConvergenceReport:
    example: int
    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def column(self, key):
        return [r.errors[key] for r in self.rows]

    def rate_column(self, key):
        return rates(self.column(key))

    def fitted_order(self, key, last=3):
        """Least-squares slope of ``-log2 e`` against level over the last levels."""
        errs = np.array(self.column(key)[-last:])
        lv = np.arange(len(errs))
        return float(-np.polyfit(lv, np.log2(errs), 1)[0])
