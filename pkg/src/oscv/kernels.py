"""Second-order kernels, their one-sided transforms and kernel functionals.

Every kernel handled here is either a finite Gaussian mixture (Gaussian,
the negative-tailed family ``hi`` and the bimodal ``hb``) or a polynomial on
[-1, 1] (Epanechnikov, quartic).  Both representations admit closed-form
partial moments

    int_a^b u^j g(u) du      and      int_a^b u^j g(u)^2 du,

so R, mu_2, S_1, S_2, D(z) and G(z) are evaluated exactly.  Adaptive
quadrature is kept as an independent route (``exact=False``) and is the
only route for the B functional, whose outer integral has no closed form.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Union

import numpy as np
from numpy.polynomial import Polynomial
from scipy import integrate, optimize, special

from .errors import (
    DegenerateKernelError,
    KernelParameterError,
    NotFoundError,
    NumericError,
)

__all__ = [
    "Family",
    "Kernel",
    "OneSidedKernel",
    "KernelFunctionals",
    "QuadratureConfig",
    "ROBUST_ALPHA",
    "ROBUST_ALPHA_ALT",
    "ROBUST_SIGMA",
    "HB_MU",
    "EPANECHNIKOV_T",
    "evaluate",
    "one_sided",
    "functionals",
    "partial_moments",
    "truncated_tail_functionals",
    "tail_threshold",
    "negativity_crossing",
    "parse_kernel",
]

ROBUST_ALPHA = 8.79985198548436e-5
ROBUST_ALPHA_ALT = 3.912884532000514e-4
ROBUST_SIGMA = 10.0
HB_MU = 0.412071682

# T(g) = R_g * sqrt(mu_2g) of the Epanechnikov kernel.
EPANECHNIKOV_T = 3.0 / (5.0 * math.sqrt(5.0))

_SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class QuadratureConfig:
    """Tolerances for adaptive quadrature and the truncation of infinite ranges."""

    abs_tol: float = 1e-10
    rel_tol: float = 1e-9
    truncation_radius: float = 12.0

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("quadrature tolerances must be positive")
        if not self.truncation_radius >= 8:
            raise ValueError("truncation_radius must be at least 8")


DEFAULT_QUAD = QuadratureConfig()


# ---------------------------------------------------------------------------
# closed-form building blocks


def _phi(x):
    return np.exp(-0.5 * x * x) / _SQRT_2PI


def _xk_phi(x, k):
    """x**k * phi(x), taken as 0 at +-inf."""
    finite = np.isfinite(x)
    xf = np.where(finite, x, 0.0)
    return np.where(finite, xf**k * _phi(xf), 0.0)


def _std_incomplete_moments(lo, hi, jmax):
    """[int_lo^hi z^j phi(z) dz for j = 0..jmax] for the standard normal."""
    # tail-aware difference of normal cdfs
    upper = lo > 0
    i0 = np.where(
        upper,
        special.ndtr(-lo) - special.ndtr(-hi),
        special.ndtr(hi) - special.ndtr(lo),
    )
    out = [i0]
    if jmax >= 1:
        out.append(_xk_phi(lo, 0) - _xk_phi(hi, 0))
    for k in range(2, jmax + 1):
        out.append((k - 1) * out[k - 2] + _xk_phi(lo, k - 1) - _xk_phi(hi, k - 1))
    return out


class _Mixture:
    """sum_k w_k N(u; m_k, s_k^2), weights of either sign."""

    def __init__(self, w, m, s):
        self.w = np.asarray(w, dtype=float)
        self.m = np.asarray(m, dtype=float)
        self.s = np.asarray(s, dtype=float)

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        out = np.zeros_like(u)
        for w, m, s in zip(self.w, self.m, self.s):
            z = (u - m) / s if m else u / s
            out += (w / (s * _SQRT_2PI)) * np.exp(-0.5 * z * z)
        return out

    def moment(self, j, a, b):
        a = np.asarray(a, dtype=float)[..., None]
        b = np.asarray(b, dtype=float)[..., None]
        with np.errstate(invalid="ignore"):
            lo = (a - self.m) / self.s
            hi = (b - self.m) / self.s
        inc = _std_incomplete_moments(lo, hi, j)
        total = 0.0
        for i in range(j + 1):
            total = total + math.comb(j, i) * self.m ** (j - i) * self.s**i * inc[i]
        res = np.sum(self.w * total, axis=-1)
        return np.where(b[..., 0] > a[..., 0], res, 0.0)

    def square(self):
        wi, wj = np.meshgrid(self.w, self.w, indexing="ij")
        mi, mj = np.meshgrid(self.m, self.m, indexing="ij")
        si, sj = np.meshgrid(self.s, self.s, indexing="ij")
        v = si**2 + sj**2
        # N(u; mi, si) N(u; mj, sj) = N(mi; mj, v) N(u; m*, s*)
        scale = np.exp(-0.5 * (mi - mj) ** 2 / v) / np.sqrt(2.0 * np.pi * v)
        m_new = (mi * sj**2 + mj * si**2) / v
        s_new = si * sj / np.sqrt(v)
        return _Mixture((wi * wj * scale).ravel(), m_new.ravel(), s_new.ravel())


class _Poly:
    """A polynomial restricted to [lo, hi], zero elsewhere."""

    def __init__(self, poly, lo=-1.0, hi=1.0):
        self.poly = poly
        self.lo = lo
        self.hi = hi

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        inside = (u >= self.lo) & (u <= self.hi)
        return np.where(inside, self.poly(np.clip(u, self.lo, self.hi)), 0.0)

    def moment(self, j, a, b):
        anti = (self.poly * Polynomial([0.0] * j + [1.0])).integ()
        a = np.clip(np.asarray(a, dtype=float), self.lo, self.hi)
        b = np.clip(np.asarray(b, dtype=float), self.lo, self.hi)
        return np.where(b > a, anti(b) - anti(a), 0.0)

    def square(self):
        return _Poly(self.poly**2, self.lo, self.hi)


# ---------------------------------------------------------------------------
# kernels


class Family(str, enum.Enum):
    GAUSSIAN = "gaussian"
    HI = "hi"
    HB = "hb"
    EPANECHNIKOV = "epanechnikov"
    QUARTIC = "quartic"


@dataclass(frozen=True)
class Kernel:
    """A symmetric second-order kernel.

    ``alpha`` and ``sigma`` parametrise the ``hi`` family
    ``(1 + alpha) phi(u) - (alpha / sigma) phi(u / sigma)``; ``mu`` is the
    mode offset of the bimodal ``hb`` kernel
    ``5 phi(10 (u + mu)) + 5 phi(10 (u - mu))``.  Other families ignore them.
    """

    family: Family
    alpha: float = 0.0
    sigma: float = 1.0
    mu: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if self.family is Family.HI:
            if not (math.isfinite(self.alpha) and math.isfinite(self.sigma)):
                raise KernelParameterError("hi kernel parameters must be finite")
            if self.sigma <= 0:
                raise KernelParameterError(f"hi kernel needs sigma > 0, got {self.sigma}")
        if self.family is Family.HB and not self.mu > 0:
            raise KernelParameterError(f"hb kernel needs mu > 0, got {self.mu}")

    @classmethod
    def gaussian(cls):
        return cls(Family.GAUSSIAN)

    @classmethod
    def hi(cls, alpha, sigma):
        return cls(Family.HI, alpha=float(alpha), sigma=float(sigma))

    @classmethod
    def hi_robust(cls):
        return cls.hi(ROBUST_ALPHA, ROBUST_SIGMA)

    @classmethod
    def hb(cls, mu=HB_MU):
        return cls(Family.HB, mu=float(mu))

    @classmethod
    def epanechnikov(cls):
        return cls(Family.EPANECHNIKOV)

    @classmethod
    def quartic(cls):
        return cls(Family.QUARTIC)

    def __str__(self):
        if self.family is Family.HI:
            return f"hi:alpha={self.alpha!r},sigma={self.sigma!r}"
        if self.family is Family.HB and self.mu != HB_MU:
            return f"hb:mu={self.mu!r}"
        return self.family.value

    @property
    def scale(self):
        """Widest length scale of the kernel, in kernel-argument units."""
        if self.family is Family.HI:
            return max(1.0, self.sigma)
        return 1.0

    @property
    def support_hint(self):
        """Radius beyond which the kernel is treated as exactly zero."""
        if self.family in (Family.EPANECHNIKOV, Family.QUARTIC):
            return 1.0
        return 12.0 * self.scale

    @property
    def lower(self):
        return -1.0 if self.family in (Family.EPANECHNIKOV, Family.QUARTIC) else -math.inf

    @property
    def upper(self):
        return -self.lower

    @cached_property
    def _rep(self):
        f = self.family
        if f is Family.GAUSSIAN:
            return _Mixture([1.0], [0.0], [1.0])
        if f is Family.HI:
            return _Mixture([1.0 + self.alpha, -self.alpha], [0.0, 0.0], [1.0, self.sigma])
        if f is Family.HB:
            return _Mixture([0.5, 0.5], [-self.mu, self.mu], [0.1, 0.1])
        if f is Family.EPANECHNIKOV:
            return _Poly(Polynomial([0.75, 0.0, -0.75]))
        return _Poly(Polynomial([15 / 16, 0.0, -30 / 16, 0.0, 15 / 16]))

    @cached_property
    def _rep_sq(self):
        return self._rep.square()

    def __call__(self, u):
        out = self._rep(u)
        return float(out) if np.ndim(out) == 0 else out

    def moment(self, j, a=-math.inf, b=math.inf):
        """int_a^b u^j K(u) du, vectorised over ``a`` and ``b``."""
        return _scalar(self._rep.moment(j, a, b))

    def sq_moment(self, j, a=-math.inf, b=math.inf):
        """int_a^b u^j K(u)^2 du, vectorised over ``a`` and ``b``."""
        return _scalar(self._rep_sq.moment(j, a, b))

    def breakpoints(self):
        if self.family in (Family.EPANECHNIKOV, Family.QUARTIC):
            return [-1.0, 0.0, 1.0]
        if self.family is Family.HB:
            return [-self.mu, 0.0, self.mu]
        return [0.0]


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


@dataclass(frozen=True)
class OneSidedKernel:
    """L(u) = 2 H(u) (S2 - u S1) / (S2 - 2 S1^2) on [0, inf)."""

    source: Kernel
    s1: float
    s2: float
    denom: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "denom", self.s2 - 2.0 * self.s1 * self.s1)

    @property
    def _c(self):
        return 2.0 / self.denom

    @property
    def lower(self):
        return 0.0

    @property
    def upper(self):
        return self.source.upper

    @property
    def scale(self):
        return self.source.scale

    @property
    def support_hint(self):
        return self.source.support_hint

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        val = self._c * self.source._rep(u) * (self.s2 - u * self.s1)
        out = np.where(u >= 0, val, 0.0)
        return float(out) if out.ndim == 0 else out

    def moment(self, j, a=-math.inf, b=math.inf):
        a = np.maximum(a, 0.0)
        b = np.maximum(b, 0.0)
        h = self.source
        return _scalar(self._c * (self.s2 * h._rep.moment(j, a, b) - self.s1 * h._rep.moment(j + 1, a, b)))

    def sq_moment(self, j, a=-math.inf, b=math.inf):
        a = np.maximum(a, 0.0)
        b = np.maximum(b, 0.0)
        sq = self.source._rep_sq
        s1, s2 = self.s1, self.s2
        val = s2 * s2 * sq.moment(j, a, b) - 2.0 * s1 * s2 * sq.moment(j + 1, a, b) + s1 * s1 * sq.moment(j + 2, a, b)
        return _scalar(self._c**2 * val)

    def breakpoints(self):
        return [p for p in self.source.breakpoints() if p > 0]


AnyKernel = Union[Kernel, OneSidedKernel]


def evaluate(kernel: Kernel, u):
    """Pointwise kernel value (vectorised)."""
    return kernel(u)


def one_sided(h: Kernel, quad: QuadratureConfig = DEFAULT_QUAD) -> OneSidedKernel:
    """Left-data one-sided counterpart of ``h``."""
    s1 = h.moment(1, 0.0, math.inf)
    s2 = h.moment(2, 0.0, math.inf)
    if abs(s2 - 2.0 * s1 * s1) < quad.abs_tol:
        raise DegenerateKernelError(f"S2 - 2 S1^2 = {s2 - 2 * s1 * s1:.3e} for kernel {h}")
    return OneSidedKernel(h, s1, s2)


# ---------------------------------------------------------------------------
# functionals


@dataclass(frozen=True)
class KernelFunctionals:
    r: float
    mu2: float
    j: float
    b: float
    efficiency: float

    @classmethod
    def from_parts(cls, r, mu2, b):
        j = (r / mu2**2) ** 0.2
        eff = EPANECHNIKOV_T / (r * math.sqrt(mu2)) if mu2 > 0 else math.nan
        return cls(r=r, mu2=mu2, j=j, b=b, efficiency=eff)


def partial_moments(g: AnyKernel, z):
    """(D_g(z), G_g(z)): mass and first moment of ``g`` on (-inf, z]."""
    return g.moment(0, -math.inf, z), g.moment(1, -math.inf, z)


def _b_integrand(g, z):
    d_pos, g_pos = partial_moments(g, z)
    d_neg, g_neg = partial_moments(g, -z)
    return (z * (1.0 - d_pos) + g_pos) ** 2 + (z * d_neg + g_neg) ** 2


def _b_functional(g, quad, points=2001, max_points=2**18 + 1):
    """B_g over z in [0, 1] by composite Simpson, doubled until stable."""
    n = points
    z = np.linspace(0.0, 1.0, n)
    prev = integrate.simpson(_b_integrand(g, z), x=z)
    while n < max_points:
        n = 2 * n - 1
        z = np.linspace(0.0, 1.0, n)
        cur = integrate.simpson(_b_integrand(g, z), x=z)
        err = abs(cur - prev)
        if err <= max(quad.abs_tol, quad.rel_tol * abs(cur)):
            return float(cur)
        prev = cur
    raise NumericError(f"B functional did not converge for {g}", achieved=err)


def _limits(g, quad):
    lo = max(g.lower, -quad.truncation_radius * g.scale)
    hi = min(g.upper, quad.truncation_radius * g.scale)
    return lo, hi


def quad_integral(f, a, b, quad: QuadratureConfig = DEFAULT_QUAD, points=None):
    """Adaptive Gauss-Kronrod integral of ``f`` over [a, b] with error check."""
    pts = None
    if points:
        pts = [p for p in points if a < p < b] or None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err = integrate.quad(f, a, b, epsabs=quad.abs_tol * 1e-2, epsrel=quad.rel_tol * 1e-2, limit=500, points=pts)
    if err > max(quad.abs_tol, quad.rel_tol * abs(val)):
        raise NumericError(f"quadrature on [{a}, {b}] reached only {err:.2e}", achieved=err)
    return val


def quad_moment(g: AnyKernel, j, a=-math.inf, b=math.inf, quad: QuadratureConfig = DEFAULT_QUAD, squared=False):
    """Quadrature counterpart of ``g.moment`` / ``g.sq_moment``."""
    lo, hi = _limits(g, quad)
    lo, hi = max(lo, a), min(hi, b)
    if hi <= lo:
        return 0.0
    if squared:
        f = lambda u: u**j * g(u) ** 2
    else:
        f = lambda u: u**j * g(u)
    # split at the inner scale so the narrow component is not missed
    pts = list(g.breakpoints()) + [s * c for s in (-1, 1) for c in (1.0, 4.0, 8.0)]
    return quad_integral(f, lo, hi, quad, points=pts)


@lru_cache(maxsize=1024)
def functionals(g: AnyKernel, quad: QuadratureConfig = DEFAULT_QUAD, exact=True) -> KernelFunctionals:
    """R, mu_2, J, B and efficiency of ``g``.

    With ``exact=False`` the roughness and second moment come from adaptive
    quadrature instead of the closed forms; B always uses the composite rule.
    """
    if exact:
        r = g.sq_moment(0)
        mu2 = g.moment(2)
    else:
        r = quad_moment(g, 0, quad=quad, squared=True)
        mu2 = quad_moment(g, 2, quad=quad)
    if not (r > 0 and mu2 != 0):
        raise NumericError(f"degenerate functionals for {g}: R={r}, mu2={mu2}")
    return KernelFunctionals.from_parts(r, mu2, _b_functional(g, quad))


def truncated_tail_functionals(l: OneSidedKernel, t):
    """(M_L(t)^2, F_L(t)) for the integrals of ``l`` over [0, t].

    F is NaN where M_L(t) = 0 (in particular at t = 0).
    """
    t = np.asarray(t, dtype=float)
    m = np.asarray(l.moment(2, 0.0, t))
    m2 = m * m
    num = np.asarray(l.sq_moment(0, 0.0, t))
    with np.errstate(divide="ignore", invalid="ignore"):
        f = np.where(m2 > 0, np.abs(num / m2) ** 0.2, np.nan)
    if t.ndim == 0:
        return float(m2), float(f)
    return m2, f


def tail_threshold(l: OneSidedKernel, factor, reference_j, t_min=4.0, t_max=50.0, step=0.01):
    """Smallest t after which F_L stays at or above ``factor * reference_j``.

    The range [t_min, t_max] is scanned at ``step`` and the last upward
    crossing is refined by bisection.
    """
    if not factor > 0:
        raise ValueError("factor must be positive")
    target = factor * reference_j
    ts = np.linspace(t_min, t_max, int(round((t_max - t_min) / step)) + 1)
    _, f = truncated_tail_functionals(l, ts)
    below = ~(f >= target)
    if not below.any():
        return float(t_min)
    k = int(np.flatnonzero(below)[-1])
    if k == len(ts) - 1:
        raise NotFoundError(f"F_L stays below {target:.6g} on [{t_min}, {t_max}]")
    fn = lambda t: truncated_tail_functionals(l, t)[1] - target
    return float(optimize.bisect(fn, ts[k], ts[k + 1], xtol=1e-12, rtol=1e-14))


def negativity_crossing(h: Kernel, n_scan=4001):
    """Positive x beyond which ``h`` stays negative."""
    xs = np.linspace(0.0, h.support_hint, n_scan)
    vals = h(xs)
    pos = np.flatnonzero(vals > 0)
    if len(pos) == 0 or pos[-1] == len(xs) - 1 or not (vals[pos[-1] + 1 :] < 0).any():
        raise NotFoundError(f"{h} has no sign change on [0, {h.support_hint}]")
    k = pos[-1]
    return float(optimize.bisect(h, xs[k], xs[k + 1], xtol=1e-14, rtol=1e-15))


# ---------------------------------------------------------------------------
# parsing


def parse_kernel(text: str) -> Kernel:
    """Build a kernel from its specification string.

    Accepted forms: ``gaussian``, ``hi:alpha=<f>,sigma=<f>``, ``hi:robust``,
    ``hb``, ``hb:mu=<f>``, ``epanechnikov``, ``quartic``.
    """
    name, _, rest = text.strip().lower().partition(":")
    if name in ("gaussian", "phi", "normal") and not rest:
        return Kernel.gaussian()
    if name in ("epanechnikov", "epan") and not rest:
        return Kernel.epanechnikov()
    if name in ("quartic", "biweight") and not rest:
        return Kernel.quartic()
    if name == "hi":
        if rest == "robust":
            return Kernel.hi_robust()
        params = _parse_params(rest, text)
        if set(params) != {"alpha", "sigma"}:
            raise KernelParameterError(f"hi kernel needs alpha and sigma: {text!r}")
        return Kernel.hi(params["alpha"], params["sigma"])
    if name == "hb":
        if not rest:
            return Kernel.hb()
        params = _parse_params(rest, text)
        if set(params) != {"mu"}:
            raise KernelParameterError(f"hb kernel takes only mu: {text!r}")
        return Kernel.hb(params["mu"])
    raise KernelParameterError(f"unknown kernel specification {text!r}")


def _parse_params(rest, text):
    params = {}
    for item in filter(None, rest.split(",")):
        key, eq, value = item.partition("=")
        if not eq:
            raise KernelParameterError(f"malformed kernel parameter {item!r} in {text!r}")
        try:
            params[key.strip()] = float(value)
        except ValueError:
            raise KernelParameterError(f"non-numeric value {value!r} in {text!r}") from None
    return params
