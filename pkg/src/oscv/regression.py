"""Local linear estimation on fixed designs.

All fits use the weights ``w_j = K(d_j / h) (t2 - d_j t1)`` with
``d_j = x - x_j`` and ``t_k = sum K(d_j / h) d_j^k``, so the estimate is

    (t2 * sum K y - t1 * sum K d y) / (t2 * t0 - t1^2).

A fit is *undefined* when the denominator is negligible relative to the
total absolute weight; undefined fits are reported as NaN.  Indices are
0-based: the one-sided leave-one-out prediction at ``i`` uses the ``i``
points to the left of ``x[i]``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import _engine
from .kernels import Kernel

__all__ = [
    "Dataset",
    "FitMode",
    "FitRequest",
    "M_DEFAULT",
    "ZERO_GUARD",
    "kernel_weights",
    "local_linear",
    "one_sided_loo_prediction",
    "cv_loo_prediction",
    "one_sided_loo_predictions",
    "cv_loo_predictions",
    "fitted_values",
    "perturb_ties",
]

M_DEFAULT = 4
ZERO_GUARD = _engine.ZERO_GUARD


def perturb_ties(x):
    """Make a sorted array strictly ascending by nudging repeats up by whole ulps.

    Returns the new array and the number of nudged entries.
    """
    x = np.array(x, dtype=float)
    count = 0
    for i in range(1, len(x)):
        if x[i] <= x[i - 1]:
            x[i] = np.nextafter(x[i - 1], np.inf)
            count += 1
    return x, count


@dataclass(frozen=True, eq=False)
class Dataset:
    """Fixed-design sample with ``x`` strictly ascending on [0, a]."""

    x: np.ndarray
    y: np.ndarray
    a: float

    def __post_init__(self):
        x = np.array(self.x, dtype=float)
        y = np.array(self.y, dtype=float)
        if x.ndim != 1 or x.shape != y.shape:
            raise ValueError("x and y must be 1-d arrays of equal length")
        if len(x) < 3:
            raise ValueError(f"need at least 3 observations, got {len(x)}")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("x and y must be finite")
        if np.any(np.diff(x) <= 0):
            raise ValueError("x must be strictly ascending (see Dataset.from_unsorted)")
        if x[0] < 0 or x[-1] > self.a:
            raise ValueError(f"x must lie in [0, a] = [0, {self.a}]")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "a", float(self.a))

    @classmethod
    def from_unsorted(cls, x, y, a=None):
        """Sort by (x, y), perturb ties, and build a dataset.

        ``a`` defaults to ``max(x)``.
        """
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        order = np.lexsort((y, x))
        xs, _ = perturb_ties(x[order])
        return cls(xs, y[order], xs[-1] if a is None else a)

    @property
    def n(self):
        return len(self.x)

    @cached_property
    def min_spacing(self):
        return float(np.min(np.diff(self.x)))


class FitMode(enum.Enum):
    FULL = "full"
    ONE_SIDED_UP_TO = "one-sided-up-to"
    LOO_FULL = "loo-full"
    LOO_ONE_SIDED = "loo-one-sided"


@dataclass(frozen=True)
class FitRequest:
    kernel: Kernel
    h: float
    mode: FitMode = FitMode.FULL
    index: int | None = None

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError(f"bandwidth must be positive, got {self.h}")
        if self.mode is not FitMode.FULL and self.index is None:
            raise ValueError(f"mode {self.mode.value} needs an index")


def kernel_weights(kernel: Kernel, u):
    """K(u) with values beyond the kernel's support hint set to exactly 0."""
    u = np.asarray(u, dtype=float)
    k = kernel._rep(u)
    k[np.abs(u) > kernel.support_hint] = 0.0
    return k


def _predict(data, kernel, h, ats, los, his, skips):
    kind, w, m, s, coef, radius = _engine.encode(kernel)
    y0 = data.y[0]
    # centring on y[0] keeps constant responses exact
    yc = data.y - y0
    est = _engine.predict(
        np.ascontiguousarray(ats, dtype=float),
        data.x,
        yc,
        np.asarray(los, dtype=np.int64),
        np.asarray(his, dtype=np.int64),
        np.asarray(skips, dtype=np.int64),
        float(h),
        kind, w, m, s, coef, radius,
    )
    return y0 + est


def local_linear(data: Dataset, req: FitRequest, at: float) -> float:
    """Local linear estimate at ``at`` from the points selected by ``req.mode``.

    Returns NaN when the fit is undefined.
    """
    n = data.n
    lo, hi, skip = 0, n, -1
    if req.mode is not FitMode.FULL:
        if not 0 <= req.index < n:
            raise IndexError(f"index {req.index} out of range for n={n}")
        if req.mode is FitMode.ONE_SIDED_UP_TO:
            hi = req.index + 1
        elif req.mode is FitMode.LOO_ONE_SIDED:
            hi = req.index
        else:
            skip = req.index
    return float(_predict(data, req.kernel, req.h, [at], [lo], [hi], [skip])[0])


def one_sided_loo_prediction(data: Dataset, kernel: Kernel, b: float, i: int, m: int = M_DEFAULT) -> float:
    """Prediction at ``x[i]`` from ``(x[0], y[0]), ..., (x[i-1], y[i-1])``."""
    if i < m:
        raise ValueError(f"one-sided prediction needs i >= m = {m}, got {i}")
    req = FitRequest(kernel, b, FitMode.LOO_ONE_SIDED, i)
    return local_linear(data, req, data.x[i])


def cv_loo_prediction(data: Dataset, kernel: Kernel, h: float, i: int) -> float:
    """Prediction at ``x[i]`` from every observation except the ``i``-th."""
    req = FitRequest(kernel, h, FitMode.LOO_FULL, i)
    return local_linear(data, req, data.x[i])


def one_sided_loo_predictions(data: Dataset, kernel: Kernel, b: float, m: int = M_DEFAULT) -> np.ndarray:
    """One-sided leave-one-out predictions at ``x[m:]``."""
    idx = np.arange(m, data.n)
    return _predict(data, kernel, b, data.x[m:], np.zeros_like(idx), idx, np.full_like(idx, -1))


def cv_loo_predictions(data: Dataset, kernel: Kernel, h: float) -> np.ndarray:
    """Ordinary leave-one-out predictions at every design point."""
    idx = np.arange(data.n)
    return _predict(data, kernel, h, data.x, np.zeros_like(idx), np.full_like(idx, data.n), idx)


def fitted_values(data: Dataset, kernel: Kernel, h: float, at=None) -> np.ndarray:
    """Full-sample fit at ``at`` (default: the design points)."""
    ats = data.x if at is None else np.atleast_1d(np.asarray(at, dtype=float))
    k = len(ats)
    return _predict(data, kernel, h, ats, np.zeros(k, dtype=np.int64), np.full(k, data.n), np.full(k, -1))
