"""Reference implementations written straight from the defining formulas.

Nothing here imports the package under test; every integral is plain
adaptive quadrature and every fit is an explicit weighted least-squares
solve.
"""

import math

import numpy as np
from scipy import integrate

SQRT_2PI = math.sqrt(2 * math.pi)


def phi(u):
    return math.exp(-0.5 * u * u) / SQRT_2PI


def h_i(u, alpha, sigma):
    return (1 + alpha) * phi(u) - alpha / sigma * phi(u / sigma)


def h_b(u, mu):
    return 5 * phi(10 * (u + mu)) + 5 * phi(10 * (u - mu))


def epanechnikov(u):
    return 0.75 * (1 - u * u) if abs(u) <= 1 else 0.0


def quartic(u):
    return 15 / 16 * (1 - u * u) ** 2 if abs(u) <= 1 else 0.0


def integral(f, a, b, points=None):
    val, _ = integrate.quad(f, a, b, epsabs=1e-13, epsrel=1e-12, limit=800, points=points)
    return val


def split_integral(f, lo, hi, cuts):
    """Sum of quad over [lo, hi] split at ``cuts``."""
    knots = sorted({lo, hi, *[c for c in cuts if lo < c < hi]})
    return sum(integral(f, a, b) for a, b in zip(knots[:-1], knots[1:]))


# cut points that keep quad from stepping over narrow features
CUTS = [-120, -60, -30, -12, -8, -4, -1, -0.5, 0, 0.5, 1, 4, 8, 12, 30, 60, 120]


def one_sided(h, radius=120.0):
    """L(u) = 2 H(u) (S2 - u S1) / (S2 - 2 S1^2) for u >= 0."""
    s1 = split_integral(lambda u: u * h(u), 0, radius, CUTS)
    s2 = split_integral(lambda u: u * u * h(u), 0, radius, CUTS)
    den = s2 - 2 * s1 * s1
    return lambda u: 2 * h(u) * (s2 - u * s1) / den if u >= 0 else 0.0


def moment(g, j, lo=-120.0, hi=120.0):
    return split_integral(lambda u: u**j * g(u), lo, hi, CUTS)


def roughness(g, lo=-120.0, hi=120.0):
    return split_integral(lambda u: g(u) ** 2, lo, hi, CUTS)


def b_functional(g, lo=-120.0, hi=120.0):
    """int_0^1 (z(1 - D(z)) + G(z))^2 + (z D(-z) + G(-z))^2 dz by nested quadrature."""

    def dg(z):
        return split_integral(g, lo, z, CUTS), split_integral(lambda u: u * g(u), lo, z, CUTS)

    def integrand(z):
        d_pos, g_pos = dg(z)
        d_neg, g_neg = dg(-z)
        return (z * (1 - d_pos) + g_pos) ** 2 + (z * d_neg + g_neg) ** 2

    val, _ = integrate.quad(integrand, 0, 1, epsabs=1e-11, epsrel=1e-10, limit=200)
    return val


def local_linear(x, y, at, h, kernel, keep=None):
    """Intercept of the kernel-weighted least-squares line centred at ``at``.

    Solves the 2x2 normal equations directly.  Returns NaN when the system
    is singular.
    """
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    if keep is not None:
        x, y = x[keep], y[keep]
    d = x - at
    k = np.array([kernel(v / h) for v in d])
    a = np.array([[k.sum(), (k * d).sum()], [(k * d).sum(), (k * d * d).sum()]])
    rhs = np.array([(k * y).sum(), (k * d * y).sum()])
    if abs(np.linalg.det(a)) < 1e-300:
        return math.nan
    return float(np.linalg.solve(a, rhs)[0])


def oscv(x, y, b, kernel, m=4):
    res = [local_linear(x, y, x[i], b, kernel, keep=slice(0, i)) - y[i] for i in range(m, len(x))]
    return float(np.mean(np.square(res)))


def cv(x, y, h, kernel):
    n = len(x)
    res = [local_linear(x, y, x[i], h, kernel, keep=np.arange(n) != i) - y[i] for i in range(n)]
    return float(np.mean(np.square(res)))
