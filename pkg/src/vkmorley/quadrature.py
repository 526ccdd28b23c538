"""Quadrature rules on triangles.

Rules are stored in barycentric coordinates with weights normalised to
sum to one, so that ``|T| * sum(w * f(x_q))`` approximates ``int_T f``.
Every rule has strictly positive weights and strictly interior points.
"""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

MAX_DEGREE = 10


@dataclass(frozen=True)
class TriangleRule:
    """Barycentric points ``(nq, 3)``, weights ``(nq,)`` and exactness degree."""

    points: np.ndarray
    weights: np.ndarray
    degree: int

    def __len__(self):
        return len(self.weights)

    def physical_points(self, corners):
        """Map the rule onto triangles.

        Parameters
        ----------
        corners : array of shape (nt, 3, 2)
            Vertex coordinates of each triangle.

        Returns
        -------
        array of shape (nt, nq, 2)
        """
        return np.einsum("qi,tid->tqd", self.points, corners)


def _orbits(orbits):
    """Expand symmetric orbits into barycentric points and weights.

    ``orbits`` entries are ``(weight,)`` for the centroid, ``(a, weight)`` for
    the 3-point orbit ``(a, a, 1-2a)`` and ``(a, b, weight)`` for the
    6-point orbit of ``(a, b, 1-a-b)``.
    """
    pts, wts = [], []
    for item in orbits:
        if len(item) == 1:
            pts.append((1 / 3, 1 / 3, 1 / 3))
            wts.append(item[0])
        elif len(item) == 2:
            a, w = item
            c = 1 - 2 * a
            pts += [(a, a, c), (a, c, a), (c, a, a)]
            wts += [w] * 3
        else:
            a, b, w = item
            c = 1 - a - b
            pts += [(a, b, c), (b, c, a), (c, a, b), (b, a, c), (a, c, b), (c, b, a)]
            wts += [w] * 6
    return np.array(pts), np.array(wts)


_S15 = np.sqrt(15.0)

# Symmetric rules with positive weights and interior points (Strang-Fix,
# Radon, Dunavant tables).
_SYMMETRIC = {
    1: [(1.0,)],
    2: [(1 / 6, 1 / 3)],
    4: [
        (0.445948490915965, 0.223381589678011),
        (0.091576213509771, 0.109951743655322),
    ],
    5: [
        (0.225,),
        ((6 - _S15) / 21, (155 - _S15) / 1200),
        ((6 + _S15) / 21, (155 + _S15) / 1200),
    ],
    6: [
        (0.249286745170910, 0.116786275726379),
        (0.063089014491502, 0.050844906370207),
        (0.053145049844817, 0.310352451033784, 0.082851075618374),
    ],
    8: [
        (0.144315607677787,),
        (0.459292588292723, 0.095091634267285),
        (0.170569307751760, 0.103217370534718),
        (0.050547228317031, 0.032458497623198),
        (0.008394777409958, 0.263112829634638, 0.027230314174435),
    ],
}


def _conical_product(m):
    """Collapsed Gauss-Jacobi x Gauss-Legendre rule, exact to degree 2m-1."""
    xj, wj = roots_jacobi(m, 1.0, 0.0)
    xl, wl = roots_legendre(m)
    s = (xj + 1) / 2
    t = (xl + 1) / 2
    S, Tt = np.meshgrid(s, t, indexing="ij")
    W = np.outer(wj, wl)
    l1 = S.ravel()
    l2 = ((1 - S) * Tt).ravel()
    pts = np.column_stack([1 - l1 - l2, l1, l2])
    w = W.ravel()
    return pts, w / w.sum()


@lru_cache(maxsize=None)
def triangle_rule(degree):
    """Return a rule exact for all polynomials of total degree ``degree``.

    Parameters
    ----------
    degree : int
        Requested exactness, 1 <= degree <= 10. The returned rule may be
        exact to a higher degree than requested.

    Raises
    ------
    ValueError
        If the degree is outside the supported range.
    """
    if not isinstance(degree, (int, np.integer)) or not 1 <= degree <= MAX_DEGREE:
        raise ValueError(f"unsupported quadrature degree {degree!r}; need 1..{MAX_DEGREE}")
    available = [d for d in sorted(_SYMMETRIC) if d >= degree]
    if available:
        d = available[0]
        pts, w = _orbits(_SYMMETRIC[d])
        w = w / w.sum()
    else:
        m = (degree + 2) // 2
        pts, w = _conical_product(m)
        d = 2 * m - 1
    pts.setflags(write=False)
    w.setflags(write=False)
    return TriangleRule(pts, w, d)


def gauss_line(n):
    """Gauss-Legendre rule on [0, 1]: parameters and weights summing to one."""
    x, w = roots_legendre(n)
    return (x + 1) / 2, w / 2
