"""Smooth and nonsmooth rescaling constants and robust-kernel search."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import optimize

from .kernels import (
    DEFAULT_QUAD,
    HB_MU,
    Kernel,
    KernelFunctionals,
    QuadratureConfig,
    functionals,
    one_sided,
)

__all__ = [
    "RescalingConstants",
    "RobustSolution",
    "e_mase",
    "rescaling_constants",
    "solve_robust",
    "constant_for_hb",
]


def e_mase(x):
    """Percent AMASE excess from rescaling with the wrong constant."""
    return (0.75 * x + 0.25 / x**3 - 1.0) * 100.0


@dataclass(frozen=True)
class RescalingConstants:
    c_smooth: float
    c_nonsmooth: float
    e_c: float
    e_mase: float
    x: float
    k: KernelFunctionals
    l: KernelFunctionals


@lru_cache(maxsize=256)
def rescaling_constants(k: Kernel, h: Kernel, quad: QuadratureConfig = DEFAULT_QUAD) -> RescalingConstants:
    """C = J_K / J_L and C* = (R_K B_L / (B_K R_L))^(1/4) with L the one-sided H."""
    fk = functionals(k, quad)
    fl = functionals(one_sided(h, quad), quad)
    c = fk.j / fl.j
    c_star = (fk.r * fl.b / (fk.b * fl.r)) ** 0.25
    x = (fl.b / fk.b) ** 0.25 * (fk.r / fl.r) ** 0.05 * (fk.mu2**2 / fl.mu2**2) ** 0.2
    return RescalingConstants(
        c_smooth=c,
        c_nonsmooth=c_star,
        e_c=(c - c_star) / c_star * 100.0,
        e_mase=e_mase(x),
        x=x,
        k=fk,
        l=fl,
    )


@dataclass(frozen=True)
class RobustSolution:
    sigma: float
    alphas: list[float]
    c_unified: list[float]


def _mismatch(k, sigma, quad):
    fk = functionals(k, quad)

    def g(alpha):
        fl = functionals(one_sided(Kernel.hi(alpha, sigma), quad), quad)
        return fk.j / fl.j - (fk.r * fl.b / (fk.b * fl.r)) ** 0.25

    return g


def solve_robust(
    k: Kernel,
    sigma: float,
    alpha_bracket: tuple[float, float] = (1e-6, 1e-3),
    quad: QuadratureConfig = DEFAULT_QUAD,
    cells: int = 2000,
) -> RobustSolution:
    """Every alpha in the bracket at which the hi(alpha, sigma) kernel is robust for ``k``.

    The bracket is split into ``cells`` log-spaced cells; each sign change of
    C - C* is refined by bisection to relative 1e-10.  An empty list means no
    sign change was seen.
    """
    lo, hi = alpha_bracket
    if not sigma > 1:
        raise ValueError("robust search needs sigma > 1")
    if not 0 < lo < hi:
        raise ValueError("alpha bracket must satisfy 0 < lo < hi")
    g = _mismatch(k, sigma, quad)
    grid = np.geomspace(lo, hi, cells + 1)
    vals = np.array([g(a) for a in grid])
    roots = []
    for i in range(cells):
        if vals[i] == 0.0:
            roots.append(float(grid[i]))
        elif vals[i] * vals[i + 1] < 0:
            roots.append(optimize.bisect(g, grid[i], grid[i + 1], xtol=1e-300, rtol=1e-12))
    if vals[-1] == 0.0:
        roots.append(float(grid[-1]))
    roots.sort()
    unified = [rescaling_constants(k, Kernel.hi(a, sigma), quad).c_smooth for a in roots]
    return RobustSolution(sigma=sigma, alphas=roots, c_unified=unified)


def constant_for_hb(quad: QuadratureConfig = DEFAULT_QUAD, mu: float = HB_MU) -> float:
    """Shared rescaling constant of the Gaussian/bimodal pair."""
    rc = rescaling_constants(Kernel.gaussian(), Kernel.hb(mu), quad)
    return rc.c_smooth


def c_for(k: Kernel, h: Kernel, nonsmooth: bool = False, quad: QuadratureConfig = DEFAULT_QUAD) -> float:
    rc = rescaling_constants(k, h, quad)
    return rc.c_nonsmooth if nonsmooth else rc.c_smooth

