"""Exact solution pairs and their right-hand sides.

Fields expose ``derivative(a, b, x, y)`` = d^a/dx^a d^b/dy^b evaluated at
array arguments. All derivatives are closed form; finite differences are
only used by the tests.
"""
from dataclasses import dataclass
from functools import lru_cache
from math import comb

import numpy as np
from numpy.polynomial import Polynomial
from numpy.polynomial import polynomial as P
from scipy.optimize import brentq


class Field:
    """Scalar field with exact partial derivatives."""

    def derivative(self, a, b, x, y):
        raise NotImplementedError

    def value(self, x, y):
        return self.derivative(0, 0, x, y)

    def __call__(self, x, y):
        return self.value(x, y)

    def gradient(self, x, y):
        return np.stack([self.derivative(1, 0, x, y), self.derivative(0, 1, x, y)], axis=-1)

    def hessian(self, x, y):
        xx = self.derivative(2, 0, x, y)
        xy = self.derivative(1, 1, x, y)
        yy = self.derivative(0, 2, x, y)
        return np.stack([np.stack([xx, xy], -1), np.stack([xy, yy], -1)], -2)

    def laplacian(self, x, y):
        return self.derivative(2, 0, x, y) + self.derivative(0, 2, x, y)

    def bilaplacian(self, x, y):
        d = self.derivative
        return d(4, 0, x, y) + 2 * d(2, 2, x, y) + d(0, 4, x, y)


class Polynomial2D(Field):
    """``sum c[i, j] x^i y^j``."""

    def __init__(self, coefficients):
        self.c = np.atleast_2d(np.asarray(coefficients, dtype=float))

    def derivative(self, a, b, x, y):
        c = self.c
        if a:
            c = P.polyder(c, a, axis=0)
        if b:
            c = P.polyder(c, b, axis=1)
        return P.polyval2d(np.asarray(x, float), np.asarray(y, float), c)


class SeparableField(Field):
    """``X(x) * Y(y)`` with ``X(k, x)`` returning the k-th derivative."""

    def __init__(self, fx, fy):
        self.fx, self.fy = fx, fy

    def derivative(self, a, b, x, y):
        return self.fx(a, np.asarray(x, float)) * self.fy(b, np.asarray(y, float))


def polynomial_factor(poly):
    derivs = [poly]
    for _ in range(6):
        derivs.append(derivs[-1].deriv())

    def f(k, x):
        return derivs[k](x)

    return f


def sin_squared(k, x):
    """k-th derivative of sin^2(pi x)."""
    if k == 0:
        return np.sin(np.pi * x) ** 2
    return -0.5 * (2 * np.pi) ** k * np.cos(2 * np.pi * x + k * np.pi / 2)


class ProductField(Field):
    """Pointwise product, differentiated by the Leibniz rule."""

    def __init__(self, f, g):
        self.f, self.g = f, g

    def derivative(self, a, b, x, y):
        out = 0.0
        for i in range(a + 1):
            for j in range(b + 1):
                out = out + comb(a, i) * comb(b, j) * (
                    self.f.derivative(i, j, x, y) * self.g.derivative(a - i, b - j, x, y)
                )
        return out


@dataclass(frozen=True)
class PolarTermSum:
    """``sum c * r^beta * trig(k theta)`` with trig = cos (kind 0) or sin (kind 1).

    Closed under Cartesian differentiation via
    ``d/dx = cos(t) d/dr - sin(t)/r d/dt`` and ``d/dy = sin(t) d/dr + cos(t)/r d/dt``.
    """

    terms: tuple  # of (coef, beta, k, kind)

    def dx(self):
        out = []
        for c, b, k, kind in self.terms:
            out += [(c * (b + k) / 2, b - 1, k - 1, kind), (c * (b - k) / 2, b - 1, k + 1, kind)]
        return PolarTermSum(_collect(out))

    def dy(self):
        out = []
        for c, b, k, kind in self.terms:
            if kind == 0:
                out += [(c * (b - k) / 2, b - 1, k + 1, 1), (-c * (b + k) / 2, b - 1, k - 1, 1)]
            else:
                out += [(c * (b + k) / 2, b - 1, k - 1, 0), (-c * (b - k) / 2, b - 1, k + 1, 0)]
        return PolarTermSum(_collect(out))

    def __call__(self, r, theta):
        out = np.zeros(np.broadcast(r, theta).shape)
        for c, b, k, kind in self.terms:
            trig = np.cos if kind == 0 else np.sin
            out = out + c * r**b * trig(k * theta)
        return out


def _collect(terms):
    acc = {}
    for c, b, k, kind in terms:
        key = (round(b, 12), round(k, 12), kind)
        if kind == 1 and key[1] == 0:
            continue  # sin(0) vanishes
        acc[key] = acc.get(key, 0.0) + c
    return tuple((c, b, k, kind) for (b, k, kind), c in sorted(acc.items()) if c != 0.0)


def polar_coordinates(x, y):
    """Radius and angle in [0, 2 pi); angles start on the positive x-axis."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    r = np.hypot(x, y)
    if np.any(r == 0):
        raise ValueError("corner function evaluated at the origin, where it is singular")
    theta = np.arctan2(y, x)
    theta = np.where(theta < 0, theta + 2 * np.pi, theta)
    return r, theta


class PolarField(Field):
    def __init__(self, terms):
        self.base = terms if isinstance(terms, PolarTermSum) else PolarTermSum(tuple(terms))
        self._cache = lru_cache(maxsize=None)(self._symbolic)

    def _symbolic(self, a, b):
        if a:
            return self._cache(a - 1, b).dx()
        if b:
            return self._cache(a, b - 1).dy()
        return self.base

    def derivative(self, a, b, x, y):
        r, t = polar_coordinates(x, y)
        return self._cache(a, b)(r, t)


OMEGA_L = 3 * np.pi / 2
ALPHA_L_ROUNDED = 0.5444837367


def singular_exponent(omega=OMEGA_L, guess=ALPHA_L_ROUNDED, width=1e-3):
    """Root of ``sin^2(a omega) = a^2 sin^2(omega)`` near ``guess``."""
    def f(a):
        return np.sin(a * omega) ** 2 - a**2 * np.sin(omega) ** 2

    return brentq(f, guess - width, guess + width, xtol=1e-16, rtol=4 * np.finfo(float).eps)


# 10 printed digits leave a ~1e-9 normal-derivative residual on the
# reentrant edges; the refined root removes it.
ALPHA_L = singular_exponent()


def corner_function(alpha=ALPHA_L, omega=OMEGA_L):
    """``r^(1+alpha) g(theta)`` transcribed term by term."""
    am, ap = alpha - 1, alpha + 1
    a_coef = np.sin(am * omega) / am - np.sin(ap * omega) / ap
    b_coef = np.cos(am * omega) - np.cos(ap * omega)
    beta = 1 + alpha
    return PolarTermSum(
        (
            (a_coef, beta, am, 0),
            (-a_coef, beta, ap, 0),
            (-b_coef / am, beta, am, 1),
            (b_coef / ap, beta, ap, 1),
        )
    )


def angular_profile(theta, alpha=ALPHA_L, omega=OMEGA_L):
    """g(theta), i.e. the corner function at r = 1."""
    return corner_function(alpha, omega)(1.0, theta)


def bracket(f, g, x, y):
    """von Karman bracket ``f_xx g_yy + f_yy g_xx - 2 f_xy g_xy``."""
    d, e = f.derivative, g.derivative
    return (
        d(2, 0, x, y) * e(0, 2, x, y)
        + d(0, 2, x, y) * e(2, 0, x, y)
        - 2 * d(1, 1, x, y) * e(1, 1, x, y)
    )


def rhs_from_exact(u, v, p_over_D=0.0):
    """Loads making ``(u, v)`` exact.

    ``f1 = bilap u - [u, v] + (p/D) lap u`` and ``f2 = bilap v + [u, u] / 2``.
    """

    def f1(x, y):
        out = u.bilaplacian(x, y) - bracket(u, v, x, y)
        if p_over_D:
            out = out + p_over_D * u.laplacian(x, y)
        return out

    def f2(x, y):
        return v.bilaplacian(x, y) + 0.5 * bracket(u, u, x, y)

    return f1, f2


@dataclass(frozen=True, eq=False)
class ManufacturedProblem:
    name: str
    domain: str  # "unit-square" | "l-shape"
    exact_u: Field
    exact_v: Field
    p_over_D: float
    alpha_expected: float

    def __post_init__(self):
        f1, f2 = rhs_from_exact(self.exact_u, self.exact_v, self.p_over_D)
        object.__setattr__(self, "rhs_f1", f1)
        object.__setattr__(self, "rhs_f2", f2)

    def with_p_over_D(self, p_over_D):
        return ManufacturedProblem(
            self.name, self.domain, self.exact_u, self.exact_v, float(p_over_D), self.alpha_expected
        )


_X2_1MX2 = Polynomial([0, 0, 1, -2, 1])  # x^2 (1 - x)^2
_XX_M1_SQ = Polynomial([1, 0, -2, 0, 1])  # (x^2 - 1)^2


def _square_pair():
    q = polynomial_factor(_X2_1MX2)
    return SeparableField(q, q), SeparableField(sin_squared, sin_squared)


def example1():
    u, v = _square_pair()
    return ManufacturedProblem("example1", "unit-square", u, v, 0.0, 1.0)


def example2():
    b = polynomial_factor(_XX_M1_SQ)
    u = ProductField(SeparableField(b, b), PolarField(corner_function()))
    u.singular_points = ((0.0, 0.0),)
    return ManufacturedProblem("example2", "l-shape", u, u, 0.0, ALPHA_L)


def example3(p_over_D=10.0):
    u, v = _square_pair()
    return ManufacturedProblem("example3", "unit-square", u, v, float(p_over_D), 1.0)


EXAMPLES = {1: example1, 2: example2, 3: example3}


def check_clamped(problem, n=50, tol=1e-8, offset=1e-6):
    """Sample the boundary and return the largest |u|, |du/dn|, |v|, |dv/dn|.

    Raises ``ValueError`` when the clamped conditions fail beyond ``tol``.
    """
    s = (np.arange(n) + 0.5) / n
    if problem.domain == "unit-square":
        segs = [((0, 0), (1, 0)), ((1, 0), (1, 1)), ((1, 1), (0, 1)), ((0, 1), (0, 0))]
    else:
        segs = [
            ((0, 0), (1, 0)),
            ((1, 0), (1, 1)),
            ((1, 1), (-1, 1)),
            ((-1, 1), (-1, -1)),
            ((-1, -1), (0, -1)),
            ((0, -1), (0, 0)),
        ]
    worst = 0.0
    for a, b in segs:
        a, b = np.array(a, float), np.array(b, float)
        s_ = offset + (1 - 2 * offset) * s  # keep off the singular corner
        pts = a + s_[:, None] * (b - a)
        t = (b - a) / np.linalg.norm(b - a)
        nrm = np.array([t[1], -t[0]])
        for f in (problem.exact_u, problem.exact_v):
            val = f.value(pts[:, 0], pts[:, 1])
            dn = f.gradient(pts[:, 0], pts[:, 1]) @ nrm
            worst = max(worst, np.abs(val).max(), np.abs(dn).max())
    if worst > tol:
        raise ValueError(f"{problem.name}: clamped boundary violated, max residual {worst:.3e}")
    return worst
