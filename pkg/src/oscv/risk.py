"""Error measures against a known truth and asymptotic MASE expansions.

The AMASE expansions are

    smooth:     R_K s^2 / (n h) + mu_2K^2 h^4 / 4 * int (r'')^2 f
    nonsmooth:  R_K s^2 / (n h) + h^3 B_K * sum_t f(x_t) jump_t^2

and the sample-size thresholds find the smallest n at which the
AMASE-optimal bandwidth of the one-sided robust kernel drops below
``a / t_star``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import _engine
from .errors import NoMinimumError, NumericError, SpecError
from .kernels import (
    DEFAULT_QUAD,
    Kernel,
    OneSidedKernel,
    QuadratureConfig,
    functionals,
    one_sided,
    quad_integral,
)
from .regression import Dataset
from .selection import TIE_RTOL, BandwidthGrid

__all__ = [
    "Smoothness",
    "RegressionTruth",
    "AsymptoticSpec",
    "TAIL_T_STAR",
    "ase",
    "ase_curve",
    "oracle_bandwidth",
    "amase",
    "amase_optimal_bandwidth",
    "roughness_and_cusps",
    "sample_size_threshold",
    "threshold_prefactors",
]

# one-sided robust kernel is indistinguishable from the Gaussian one below this argument
TAIL_T_STAR = 16.92


class Smoothness(str, enum.Enum):
    SMOOTH = "smooth"
    NONSMOOTH = "nonsmooth"


def _unit_density(x):
    return np.ones_like(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class RegressionTruth:
    """A regression function on [0, a] with its derivative structure.

    ``cusps`` lists ``(location, r'(x+) - r'(x-))``; ``breakpoints`` are
    where the second derivative may be discontinuous.
    """

    r: Callable
    second_derivative: Callable | None = None
    cusps: tuple[tuple[float, float], ...] = ()
    smoothness: Smoothness = Smoothness.SMOOTH
    design_density: Callable = _unit_density
    a: float = 1.0
    breakpoints: tuple[float, ...] = ()
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "smoothness", Smoothness(self.smoothness))
        object.__setattr__(self, "cusps", tuple((float(x), float(j)) for x, j in self.cusps))
        if bool(self.cusps) != (self.smoothness is Smoothness.NONSMOOTH):
            raise ValueError("cusps must be non-empty exactly when the truth is nonsmooth")
        for x, _ in self.cusps:
            if not 0 < x < self.a:
                raise ValueError(f"cusp at {x} is not interior to [0, {self.a}]")

    def __call__(self, x):
        return self.r(x)


@dataclass(frozen=True)
class AsymptoticSpec:
    sigma: float
    n: int
    roughness: float | None = None
    cusp_sum: float | None = None

    def __post_init__(self):
        if self.roughness is not None and self.roughness < 0:
            raise ValueError("roughness must be nonnegative")
        if self.cusp_sum is not None and self.cusp_sum < 0:
            raise ValueError("cusp_sum must be nonnegative")

    @property
    def c_r_sigma(self):
        if self.roughness is None:
            raise SpecError("C_{r,sigma} needs the roughness")
        return (self.sigma**2 / self.roughness) ** 0.2


# ---------------------------------------------------------------------------
# finite-sample error


def ase(data_x, fitted, truth) -> float:
    """Average squared error of ``fitted`` against ``truth`` at the design points."""
    x = np.asarray(data_x, dtype=float)
    f = np.asarray(fitted, dtype=float)
    if x.shape != f.shape:
        raise ValueError("fitted values must match the design points")
    e = f - np.asarray(truth(x), dtype=float)
    return float(np.mean(e * e))


def ase_curve(data: Dataset, kernel: Kernel, truth, grid: BandwidthGrid) -> np.ndarray:
    """ASE of the full-sample fit at each grid bandwidth."""
    y0 = data.y[0]
    rc = np.asarray(truth(data.x), dtype=float) - y0
    return _engine.ase_values(data.x, data.y - y0, rc, grid.points, *_engine.encode(kernel))


def oracle_bandwidth(data: Dataset, kernel: Kernel, truth, grid: BandwidthGrid) -> float:
    """Grid minimiser of ASE; ties go to the largest bandwidth."""
    vals = ase_curve(data, kernel, truth, grid)
    if np.all(np.isnan(vals)):
        raise NoMinimumError("every full-sample fit on the grid is undefined")
    rx = np.asarray(truth(data.x), dtype=float)
    atol = TIE_RTOL * float(np.mean(rx * rx))
    best = np.nanmin(vals)
    i = int(np.flatnonzero(vals <= best + atol)[-1])
    return float(grid.points[i])


# ---------------------------------------------------------------------------
# asymptotics


def _check_mode(spec, mode):
    mode = Smoothness(mode)
    if mode is Smoothness.SMOOTH and spec.roughness is None:
        raise SpecError("smooth AMASE needs the roughness")
    if mode is Smoothness.NONSMOOTH and spec.cusp_sum is None:
        raise SpecError("nonsmooth AMASE needs the cusp sum")
    return mode


def amase(spec: AsymptoticSpec, kernel: Kernel | OneSidedKernel, h, mode, quad: QuadratureConfig = DEFAULT_QUAD):
    mode = _check_mode(spec, mode)
    fk = functionals(kernel, quad)
    h = np.asarray(h, dtype=float)
    var = fk.r * spec.sigma**2 / (spec.n * h)
    if mode is Smoothness.SMOOTH:
        bias = fk.mu2**2 * h**4 * spec.roughness / 4.0
    else:
        bias = h**3 * fk.b * spec.cusp_sum
    out = var + bias
    return float(out) if out.ndim == 0 else out


def amase_optimal_bandwidth(spec: AsymptoticSpec, kernel: Kernel | OneSidedKernel, mode, quad: QuadratureConfig = DEFAULT_QUAD) -> float:
    mode = _check_mode(spec, mode)
    fk = functionals(kernel, quad)
    if mode is Smoothness.SMOOTH:
        if spec.roughness == 0:
            raise ZeroDivisionError("zero roughness: the AMASE-optimal bandwidth is infinite")
        return (fk.r * spec.sigma**2 / (fk.mu2**2 * spec.roughness)) ** 0.2 * spec.n**-0.2
    if spec.cusp_sum == 0:
        raise ZeroDivisionError("zero cusp sum: the AMASE-optimal bandwidth is infinite")
    return (fk.r * spec.sigma**2 / (3.0 * fk.b * spec.cusp_sum)) ** 0.25 * spec.n**-0.25


def roughness_and_cusps(truth: RegressionTruth, quad: QuadratureConfig = DEFAULT_QUAD):
    """(int_0^a (r'')^2 f, sum_t f(x_t) jump_t^2).

    The roughness integral is split at every breakpoint and cusp.  It is
    ``inf`` when the integral diverges on some piece, as it does for a
    square-root singularity at the boundary.
    """
    cusp_sum = float(sum(float(truth.design_density(x)) * j * j for x, j in truth.cusps))
    if truth.second_derivative is None:
        return math.nan, cusp_sum
    knots = sorted({0.0, truth.a, *truth.breakpoints, *(x for x, _ in truth.cusps)})
    f = lambda x: float(truth.second_derivative(x)) ** 2 * float(truth.design_density(x))
    total = 0.0
    for lo, hi in zip(knots[:-1], knots[1:]):
        try:
            piece = quad_integral(f, lo, hi, quad)
            # QUADPACK extrapolation can assign finite values to divergent
            # integrals; a shrunken interval must not carry more mass
            eps = (hi - lo) * 1e-7
            inner = quad_integral(f, lo + eps, hi - eps, quad)
        except (NumericError, ZeroDivisionError, OverflowError):
            return math.inf, cusp_sum
        if not math.isfinite(piece) or inner > piece * (1 + 1e-6) + quad.abs_tol:
            return math.inf, cusp_sum
        total += piece
    return total, cusp_sum


def _robust_l(quad):
    return functionals(one_sided(Kernel.hi_robust(), quad), quad)


def threshold_prefactors(quad: QuadratureConfig = DEFAULT_QUAD, t_star: float = TAIL_T_STAR):
    """(t^5 R_L / mu_2L^2, t^4 R_L / (3 B_L)) for the one-sided robust kernel."""
    fl = _robust_l(quad)
    return t_star**5 * fl.r / fl.mu2**2, t_star**4 * fl.r / (3.0 * fl.b)


def sample_size_threshold(
    truth: RegressionTruth,
    sigma: float,
    a: float | None = None,
    quad: QuadratureConfig = DEFAULT_QUAD,
    t_star: float = TAIL_T_STAR,
) -> int:
    """Smallest n for which the robust one-sided AMASE-optimal bandwidth is below a / t_star."""
    a = truth.a if a is None else a
    fl = _robust_l(quad)
    roughness, cusp_sum = roughness_and_cusps(truth, quad)
    if truth.smoothness is Smoothness.SMOOTH:
        if not roughness > 0:
            raise ZeroDivisionError("zero roughness gives no finite threshold")
        bound = (t_star / a) ** 5 * fl.r * sigma**2 / (fl.mu2**2 * roughness)
    else:
        if not cusp_sum > 0:
            raise ZeroDivisionError("zero cusp sum gives no finite threshold")
        bound = (t_star / a) ** 4 * fl.r * sigma**2 / (3.0 * fl.b * cusp_sum)
    return int(math.floor(bound)) + 1
