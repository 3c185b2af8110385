"""Test regression functions, seeded data generation and the Monte Carlo study."""

from __future__ import annotations

import enum
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import Polynomial

from .constants import rescaling_constants
from .errors import DomainError, OSCVError
from .kernels import DEFAULT_QUAD, Kernel, QuadratureConfig
from .regression import Dataset
from .risk import RegressionTruth, Smoothness, oracle_bandwidth
from .selection import BandwidthGrid, MinimumChoice, default_oscv_grid, oscv_curve

__all__ = [
    "Piecewise",
    "FUNCTIONS",
    "truth",
    "eval_truth",
    "Design",
    "SimScenario",
    "Replication",
    "StudyReport",
    "generate",
    "delta_b",
    "run_study",
]


class Piecewise:
    """Piecewise function on [knots[0], knots[-1]] with analytic derivatives.

    ``pieces[k]`` is ``(f, f', f'')`` on ``[knots[k], knots[k+1])``; the last
    piece also covers the right endpoint.
    """

    def __init__(self, knots, pieces):
        if len(pieces) != len(knots) - 1:
            raise ValueError("need one piece per knot interval")
        self.knots = np.asarray(knots, dtype=float)
        self.pieces = list(pieces)

    def _eval(self, x, order):
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(self.knots[1:-1], x, side="right")
        out = np.empty_like(x)
        for k, piece in enumerate(self.pieces):
            sel = idx == k
            if np.any(sel):
                with np.errstate(divide="ignore", invalid="ignore"):
                    out[sel] = piece[order](x[sel])
        return float(out) if out.ndim == 0 else out

    def __call__(self, x):
        return self._eval(x, 0)

    def derivative(self, x):
        return self._eval(x, 1)

    def second_derivative(self, x):
        return self._eval(x, 2)

    def one_sided_limits(self, k, order=0):
        """(left, right) limits of the ``order``-th derivative at interior knot ``k``."""
        x = self.knots[k]
        return float(self.pieces[k - 1][order](x)), float(self.pieces[k][order](x))

    def cusps(self):
        """(knot, f'(knot+) - f'(knot-)) for each interior knot with a slope jump."""
        out = []
        for k in range(1, len(self.knots) - 1):
            left, right = self.one_sided_limits(k, 1)
            if right != left:
                out.append((float(self.knots[k]), right - left))
        return out


def _poly_pieces(p):
    return (p, p.deriv(), p.deriv(2))


_R1 = Polynomial([0, 0, 1]) * Polynomial([1, -1]) ** 10 * 2.5 + Polynomial([0] * 10 + [1]) * Polynomial([1, -1]) ** 2 * 5

r1 = Piecewise([0.0, 1.0], [_poly_pieces(_R1)])

r2 = Piecewise(
    [0.0, 0.25, 0.5, 0.75, 1.0],
    [
        (lambda x: 0.0125 - 0.05 * (0.25 - x), lambda x: 0.05 + 0 * x, lambda x: 0 * x),
        (lambda x: 0.0125 - 0.05 * (x - 0.25), lambda x: -0.05 + 0 * x, lambda x: 0 * x),
        (lambda x: 0.05 * (0.75 - x) - 0.0125, lambda x: -0.05 + 0 * x, lambda x: 0 * x),
        (lambda x: 0.05 * (x - 0.75) - 0.0125, lambda x: 0.05 + 0 * x, lambda x: 0 * x),
    ],
)

r3 = Piecewise(
    [0.0, 0.1, 0.3, 0.35, 0.6, 0.7, 0.8, 1.0],
    [
        (
            lambda x: 0.047619 * np.sqrt(x),
            lambda x: 0.047619 / (2 * np.sqrt(x)),
            lambda x: -0.047619 / (4 * x**1.5),
        ),
        (
            lambda x: 0.035186 * np.exp(-20 * x) + 0.010297,
            lambda x: -20 * 0.035186 * np.exp(-20 * x),
            lambda x: 400 * 0.035186 * np.exp(-20 * x),
        ),
        (lambda x: 0.142857 * x - 0.032473, lambda x: 0.142857 + 0 * x, lambda x: 0 * x),
        (
            lambda x: 0.142857 * (x - 0.35) * (x - 0.45) + 0.017527,
            lambda x: 0.142857 * (2 * x - 0.8),
            lambda x: 0.285714 + 0 * x,
        ),
        (lambda x: 0.151455 - 0.214286 * x, lambda x: -0.214286 + 0 * x, lambda x: 0 * x),
        (
            lambda x: 0.001455 - 0.214286 * (x - 0.7) ** 3 * (x - 0.4),
            lambda x: -0.214286 * (3 * (x - 0.7) ** 2 * (x - 0.4) + (x - 0.7) ** 3),
            lambda x: -0.214286 * (6 * (x - 0.7) * (x - 0.4) + 6 * (x - 0.7) ** 2),
        ),
        (
            lambda x: 0.004762 * np.log(10 * x - 7.9) + 0.012334,
            lambda x: 0.04762 / (10 * x - 7.9),
            lambda x: -0.4762 / (10 * x - 7.9) ** 2,
        ),
    ],
)

FUNCTIONS = {"r1": r1, "r2": r2, "r3": r3}


def truth(which: str) -> RegressionTruth:
    try:
        fn = FUNCTIONS[which]
    except KeyError:
        raise ValueError(f"unknown regression function {which!r}; choose from {sorted(FUNCTIONS)}") from None
    cusps = fn.cusps()
    return RegressionTruth(
        r=fn,
        second_derivative=fn.second_derivative,
        cusps=tuple(cusps),
        smoothness=Smoothness.NONSMOOTH if cusps else Smoothness.SMOOTH,
        a=1.0,
        breakpoints=tuple(float(k) for k in fn.knots[1:-1]),
        name=which,
    )


def eval_truth(which: str, x):
    x_arr = np.asarray(x, dtype=float)
    if np.any((x_arr < 0) | (x_arr > 1)) or np.any(np.isnan(x_arr)):
        raise DomainError(f"{which} is defined on [0, 1]")
    return truth(which).r(x)


class Design(str, enum.Enum):
    EVEN = "even"
    UNIFORM = "uniform"


@dataclass(frozen=True)
class SimScenario:
    function: str
    n: int
    sigma: float
    replications: int = 1000
    seed: int = 0
    design: Design = Design.EVEN

    def __post_init__(self):
        object.__setattr__(self, "design", Design(self.design))
        if self.function not in FUNCTIONS:
            raise ValueError(f"unknown regression function {self.function!r}")
        if self.n < 10:
            raise ValueError("n must be at least 10")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if self.replications < 1:
            raise ValueError("need at least one replication")

    @property
    def truth(self):
        return truth(self.function)


def _rng(seed, rep):
    # counter-based stream keyed by (seed, rep)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(rep)])))


def generate(scn: SimScenario, rep: int) -> Dataset:
    """Replication ``rep`` of the scenario: y = r(x) + N(0, sigma^2) noise."""
    if not 0 <= rep < scn.replications:
        raise IndexError(f"replication {rep} outside [0, {scn.replications})")
    rng = _rng(scn.seed, rep)
    if scn.design is Design.EVEN:
        x = (np.arange(1, scn.n + 1) - 0.5) / scn.n
    else:
        x = np.sort(rng.random(scn.n))
    y = scn.truth.r(x) + scn.sigma * rng.standard_normal(scn.n)
    if scn.design is Design.UNIFORM:
        return Dataset.from_unsorted(x, y, a=1.0)
    return Dataset(x, y, a=1.0)


@dataclass(frozen=True)
class Replication:
    rep: int
    b_oscv: float
    b_i: float
    h_oscv: float
    h_i: float
    h0: float


def delta_b(h, h0) -> float:
    """Percent gap between the median selected and median oracle bandwidths."""
    m0 = float(np.median(h0))
    return (float(np.median(h)) - m0) / m0 * 100.0


def _summary(v):
    v = np.asarray(v, dtype=float)
    return {"mean": float(np.mean(v)), "sd": float(np.std(v, ddof=1)) if len(v) > 1 else math.nan, "median": float(np.median(v))}


@dataclass(frozen=True)
class StudyReport:
    scenario: SimScenario
    records: tuple[Replication, ...]
    failures: tuple[tuple[int, str], ...]
    c_phi: float
    c_i: float
    medians: dict = field(default_factory=dict)
    delta_b: dict = field(default_factory=dict)
    ratio_h: dict = field(default_factory=dict)
    ratio_b: dict = field(default_factory=dict)

    @classmethod
    def build(cls, scn, records, failures, c_phi, c_i):
        records = tuple(sorted(records, key=lambda r: r.rep))
        if records:
            col = {k: np.array([getattr(r, k) for r in records]) for k in ("b_oscv", "b_i", "h_oscv", "h_i", "h0")}
            medians = {k: float(np.median(v)) for k, v in col.items()}
            db = {"I": delta_b(col["h_i"], col["h0"]), "OSCV": delta_b(col["h_oscv"], col["h0"])}
            ratio_h = _summary(col["h_i"] / col["h_oscv"])
            ratio_b = _summary(col["b_i"] / col["b_oscv"])
        else:
            medians, db, ratio_h, ratio_b = {}, {}, {}, {}
        return cls(scn, records, tuple(sorted(failures)), c_phi, c_i, medians, db, ratio_h, ratio_b)


def _replicate(scn, rep, grid, min_rule, quad):
    data = generate(scn, rep)
    g = grid or default_oscv_grid(data)
    phi = Kernel.gaussian()
    curve_phi = oscv_curve(data, phi, g)
    curve_i = oscv_curve(data, Kernel.hi_robust(), g)
    b_oscv = curve_phi.global_min[0]
    b_i = curve_i.global_min[0] if min_rule is MinimumChoice.GLOBAL else curve_i.largest_local_min()[0]
    h0 = oracle_bandwidth(data, phi, scn.truth, g)
    c_phi = rescaling_constants(phi, phi, quad).c_smooth
    c_i = rescaling_constants(phi, Kernel.hi_robust(), quad).c_smooth
    return Replication(rep, b_oscv, b_i, c_phi * b_oscv, c_i * b_i, h0)


def _run_chunk(args):
    scn, reps, grid, min_rule, quad = args
    out = []
    for rep in reps:
        try:
            out.append(_replicate(scn, rep, grid, min_rule, quad))
        except OSCVError as exc:
            out.append((rep, f"{type(exc).__name__}: {exc}"))
    return out


def default_workers():
    try:
        return max(1, int(os.environ.get("OSCV_THREADS", "1")))
    except ValueError:
        return 1


def run_study(
    scn: SimScenario,
    grid: BandwidthGrid | None = None,
    min_rule: MinimumChoice = MinimumChoice.GLOBAL,
    quad: QuadratureConfig = DEFAULT_QUAD,
    workers: int | None = None,
) -> StudyReport:
    """Run every replication of ``scn`` and aggregate the bandwidth statistics.

    Each replication selects b_OSCV (Gaussian OSCV) and b_I (robust-kernel
    OSCV, minimum picked by ``min_rule``), rescales them, and computes the
    ASE-optimal h_0 on the same grid.  Replications whose curves have no
    defined minimum are listed in ``failures``.  Results do not depend on
    ``workers``.
    """
    min_rule = MinimumChoice(min_rule)
    phi = Kernel.gaussian()
    c_phi = rescaling_constants(phi, phi, quad).c_smooth
    c_i = rescaling_constants(phi, Kernel.hi_robust(), quad).c_smooth
    workers = workers or default_workers()
    reps = list(range(scn.replications))
    chunks = [reps[i::workers] for i in range(workers)] if workers > 1 else [reps]
    jobs = [(scn, chunk, grid, min_rule, quad) for chunk in chunks if chunk]
    if len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=len(jobs)) as pool:
            results = [item for part in pool.map(_run_chunk, jobs) for item in part]
    else:
        results = _run_chunk(jobs[0])
    records = [r for r in results if isinstance(r, Replication)]
    failures = [r for r in results if not isinstance(r, Replication)]
    return StudyReport.build(scn, records, failures, c_phi, c_i)
