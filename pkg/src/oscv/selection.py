"""CV and OSCV criterion curves, their minima, and bandwidth rescaling rules."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .constants import constant_for_hb, rescaling_constants
from .errors import NoMinimumError
from .kernels import DEFAULT_QUAD, Kernel, QuadratureConfig
from . import _engine
from .regression import M_DEFAULT, Dataset

__all__ = [
    "BandwidthGrid",
    "CriterionCurve",
    "Method",
    "MinimumChoice",
    "SelectionRule",
    "Selection",
    "default_oscv_grid",
    "default_cv_grid",
    "find_local_minima",
    "oscv_curve",
    "cv_curve",
    "select_bandwidth",
]

MIN_GRID_POINTS = 50
# values closer than this (relative to mean y^2) count as ties
TIE_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class BandwidthGrid:
    points: np.ndarray
    spacing: str
    lo: float
    hi: float

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if self.spacing not in ("log", "lin"):
            raise ValueError(f"spacing must be 'log' or 'lin', got {self.spacing!r}")
        if not 0 < self.lo < self.hi:
            raise ValueError(f"grid needs 0 < lo < hi, got lo={self.lo}, hi={self.hi}")
        if len(pts) < MIN_GRID_POINTS:
            raise ValueError(f"grid needs at least {MIN_GRID_POINTS} points, got {len(pts)}")
        if np.any(np.diff(pts) <= 0):
            raise ValueError("grid points must be ascending")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @classmethod
    def make(cls, lo, hi, count=200, spacing="log"):
        if spacing == "log":
            if not 0 < lo < hi:
                raise ValueError(f"grid needs 0 < lo < hi, got lo={lo}, hi={hi}")
            pts = np.geomspace(lo, hi, count)
        else:
            pts = np.linspace(lo, hi, count)
        return cls(pts, spacing, float(lo), float(hi))

    @classmethod
    def parse(cls, text):
        """Parse ``lo:hi:count:log|lin``."""
        parts = text.split(":")
        if len(parts) != 4:
            raise ValueError(f"grid must look like lo:hi:count:log|lin, got {text!r}")
        lo, hi, count, spacing = parts
        return cls.make(float(lo), float(hi), int(count), spacing)

    def __len__(self):
        return len(self.points)

    def scaled(self, factor):
        return BandwidthGrid(self.points * factor, self.spacing, self.lo * factor, self.hi * factor)


def default_oscv_grid(data: Dataset, count=200) -> BandwidthGrid:
    """Log grid from ``max(min spacing, a/n)`` to ``a``."""
    lo = max(data.min_spacing, data.a / data.n)
    return BandwidthGrid.make(lo, data.a, count, "log")


def default_cv_grid(data: Dataset, count=200) -> BandwidthGrid:
    """Log grid from half the OSCV lower bound to ``a``."""
    lo = max(data.min_spacing, data.a / data.n) / 2.0
    return BandwidthGrid.make(lo, data.a, count, "log")


def find_local_minima(values, atol=0.0) -> list[int]:
    """Indices strictly below both nearest defined neighbours.

    NaN entries are skipped when looking for neighbours; the first and last
    defined entries are never minima.  ``atol`` demands a margin below each
    neighbour, which suppresses round-off ripples on flat curves.
    """
    v = np.asarray(values, dtype=float)
    idx = np.flatnonzero(~np.isnan(v))
    out = []
    for k in range(1, len(idx) - 1):
        left, mid, right = v[idx[k - 1]], v[idx[k]], v[idx[k + 1]]
        if mid < left - atol and mid < right - atol:
            out.append(int(idx[k]))
    return out


@dataclass(frozen=True, eq=False)
class CriterionCurve:
    grid: BandwidthGrid
    values: np.ndarray
    kernel: Kernel
    method: str
    tie_atol: float = 0.0
    local_minima: list[tuple[float, float]] = field(init=False)
    global_min: tuple[float, float] | None = field(init=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        b = self.grid.points
        mins = [(float(b[i]), float(vals[i])) for i in find_local_minima(vals, self.tie_atol)]
        object.__setattr__(self, "local_minima", mins)
        gmin = None
        if self.n_defined:
            best = np.nanmin(vals)
            # smallest b among ties
            i = int(np.flatnonzero(vals <= best + self.tie_atol)[0])
            gmin = (float(b[i]), float(vals[i]))
        object.__setattr__(self, "global_min", gmin)

    @property
    def n_defined(self):
        return int(np.count_nonzero(~np.isnan(self.values)))

    @property
    def n_undefined(self):
        return len(self.values) - self.n_defined

    def largest_local_min(self):
        """Local minimiser with the largest bandwidth; the global one if there is none."""
        if self.global_min is None:
            raise NoMinimumError(f"{self.method} curve has no defined values")
        if not self.local_minima:
            return self.global_min
        return self.local_minima[-1]


def _tie_atol(data):
    return TIE_RTOL * float(np.mean(data.y**2))


def oscv_curve(data: Dataset, h_kernel: Kernel, grid: BandwidthGrid, m: int = M_DEFAULT) -> CriterionCurve:
    """OSCV(b) = mean over i >= m of (one-sided LOO prediction - y_i)^2.

    A grid point whose sum contains an undefined prediction is NaN.
    """
    if data.n < m + 2:
        raise ValueError(f"OSCV needs at least m + 2 = {m + 2} observations")
    yc = data.y - data.y[0]
    vals = _engine.oscv_values(data.x, yc, grid.points, m, *_engine.encode(h_kernel))
    curve = CriterionCurve(grid, vals, h_kernel, f"oscv[{h_kernel}]", _tie_atol(data))
    if curve.global_min is None:
        raise NoMinimumError("every OSCV grid value is undefined")
    return curve


def cv_curve(data: Dataset, k_kernel: Kernel, grid: BandwidthGrid) -> CriterionCurve:
    """CV(h) = mean of squared ordinary leave-one-out residuals."""
    yc = data.y - data.y[0]
    vals = _engine.cv_values(data.x, yc, grid.points, *_engine.encode(k_kernel))
    curve = CriterionCurve(grid, vals, k_kernel, f"cv[{k_kernel}]", _tie_atol(data))
    if curve.global_min is None:
        raise NoMinimumError("every CV grid value is undefined")
    return curve


class Method(str, enum.Enum):
    CV = "cv"
    OSCV_PHI = "oscv-phi"
    OSCV_HI_ROBUST = "oscv-robust"
    OSCV_PHI_NONSMOOTH = "oscv-phi-nonsmooth"
    OSCV_HB = "oscv-hb"

    @property
    def cv_kernel(self):
        """Kernel used in the cross-validation stage (None for CV)."""
        return {
            Method.CV: None,
            Method.OSCV_PHI: Kernel.gaussian(),
            Method.OSCV_PHI_NONSMOOTH: Kernel.gaussian(),
            Method.OSCV_HI_ROBUST: Kernel.hi_robust(),
            Method.OSCV_HB: Kernel.hb(),
        }[self]


class MinimumChoice(str, enum.Enum):
    GLOBAL = "global"
    LARGEST_LOCAL = "largest-local"


@dataclass(frozen=True)
class SelectionRule:
    method: Method
    minimum_choice: MinimumChoice = MinimumChoice.GLOBAL

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        object.__setattr__(self, "minimum_choice", MinimumChoice(self.minimum_choice))

    def rescale(self, k: Kernel | None = None, quad: QuadratureConfig = DEFAULT_QUAD) -> float:
        """Factor turning the criterion minimiser into the estimation bandwidth."""
        k = k or Kernel.gaussian()
        m = self.method
        if m is Method.CV:
            return 1.0
        if m is Method.OSCV_HB and k == Kernel.gaussian():
            return constant_for_hb(quad)
        rc = rescaling_constants(k, m.cv_kernel, quad)
        return rc.c_nonsmooth if m is Method.OSCV_PHI_NONSMOOTH else rc.c_smooth


@dataclass(frozen=True)
class Selection:
    b_hat: float
    h_hat: float
    rescale: float
    curve: CriterionCurve

    def __iter__(self):
        return iter((self.b_hat, self.h_hat))


def select_bandwidth(
    data: Dataset,
    rule: SelectionRule,
    grid: BandwidthGrid | None = None,
    quad: QuadratureConfig = DEFAULT_QUAD,
    k_kernel: Kernel | None = None,
) -> Selection:
    """Minimise the rule's criterion and rescale; unpacks as ``(b_hat, h_hat)``."""
    k_kernel = k_kernel or Kernel.gaussian()
    if rule.method is Method.CV:
        curve = cv_curve(data, k_kernel, grid or default_cv_grid(data))
    else:
        curve = oscv_curve(data, rule.method.cv_kernel, grid or default_oscv_grid(data))
    if rule.minimum_choice is MinimumChoice.GLOBAL:
        b_hat = curve.global_min[0]
    else:
        b_hat = curve.largest_local_min()[0]
    c = rule.rescale(k_kernel, quad)
    if not math.isfinite(c):
        raise ValueError(f"rescaling constant is not finite for {rule}")
    return Selection(b_hat=b_hat, h_hat=c * b_hat, rescale=c, curve=curve)
