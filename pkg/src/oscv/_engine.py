"""Compiled local linear sums shared by the regression, selection and risk modules.

Kernels are passed in a flat encoding: ``kind == 0`` is a Gaussian mixture
with weights ``w``, means ``m`` and scales ``s``; ``kind == 1`` is a
polynomial with ascending coefficients ``coef`` supported on [-1, 1].
Every criterion value is accumulated sequentially in index order, so the
results do not depend on the number of threads.
"""

import math
import os

import numba
import numpy as np
from numba import njit, prange

SQRT_2PI = math.sqrt(2.0 * math.pi)
ZERO_GUARD = 1e-12
EPS = float(np.finfo(float).eps)

# the default layer probe warns about old TBB builds; workqueue is always present
if "NUMBA_THREADING_LAYER" not in os.environ:
    numba.config.THREADING_LAYER = "workqueue"

_threads = os.environ.get("OSCV_THREADS")
if _threads:
    try:
        numba.set_num_threads(max(1, min(int(_threads), numba.config.NUMBA_NUM_THREADS)))
    except ValueError:
        pass


def encode(kernel):
    """Flat numeric encoding of a :class:`~oscv.kernels.Kernel`."""
    rep = kernel._rep
    if hasattr(rep, "poly"):
        empty = np.zeros(0)
        return 1, empty, empty, empty, np.asarray(rep.poly.coef, dtype=float), float(kernel.support_hint)
    return 0, rep.w, rep.m, rep.s, np.zeros(0), float(kernel.support_hint)


@njit(cache=True, inline="always")
def _kval(u, kind, w, m, s, coef):
    if kind == 0:
        v = 0.0
        for c in range(w.shape[0]):
            z = (u - m[c]) / s[c]
            v += w[c] / (s[c] * SQRT_2PI) * math.exp(-0.5 * z * z)
        return v
    if u < -1.0 or u > 1.0:
        return 0.0
    v = 0.0
    for c in range(coef.shape[0] - 1, -1, -1):
        v = v * u + coef[c]
    return v


@njit(cache=True)
def fit_point(at, x, yc, lo, hi, skip, h, kind, w, m, s, coef, radius, kbuf):
    """Local linear estimate at ``at`` from points ``lo <= j < hi``, ``j != skip``.

    ``yc`` is the centred response; NaN signals an undefined fit.
    """
    left = np.searchsorted(x, at - radius * h)
    right = np.searchsorted(x, at + radius * h, side="right")
    a = max(lo, left)
    b = min(hi, right)
    t0 = 0.0
    t1 = 0.0
    t2 = 0.0
    sy0 = 0.0
    sy1 = 0.0
    for j in range(a, b):
        if j == skip:
            kbuf[j] = 0.0
            continue
        d = at - x[j]
        kv = _kval(d / h, kind, w, m, s, coef)
        kbuf[j] = kv
        kd = kv * d
        t0 += kv
        t1 += kd
        t2 += kd * d
        sy0 += kv * yc[j]
        sy1 += kd * yc[j]
    den = t2 * t0 - t1 * t1
    total = 0.0
    for j in range(a, b):
        if j == skip:
            continue
        total += abs(kbuf[j]) * abs(t2 - (at - x[j]) * t1)
    if abs(den) < ZERO_GUARD * (total + EPS):
        return np.nan
    return (t2 * sy0 - t1 * sy1) / den


@njit(cache=True)
def predict(ats, x, yc, los, his, skips, h, kind, w, m, s, coef, radius):
    out = np.empty(ats.shape[0])
    kbuf = np.empty(x.shape[0])
    for i in range(ats.shape[0]):
        out[i] = fit_point(ats[i], x, yc, los[i], his[i], skips[i], h, kind, w, m, s, coef, radius, kbuf)
    return out


@njit(cache=True, parallel=True)
def oscv_values(x, yc, bs, mm, kind, w, m, s, coef, radius):
    n = x.shape[0]
    out = np.empty(bs.shape[0])
    for k in prange(bs.shape[0]):
        kbuf = np.empty(n)
        acc = 0.0
        for i in range(mm, n):
            p = fit_point(x[i], x, yc, 0, i, -1, bs[k], kind, w, m, s, coef, radius, kbuf)
            if np.isnan(p):
                acc = np.nan
                break
            r = p - yc[i]
            acc += r * r
        out[k] = acc / (n - mm)
    return out


@njit(cache=True, parallel=True)
def cv_values(x, yc, hs, kind, w, m, s, coef, radius):
    n = x.shape[0]
    out = np.empty(hs.shape[0])
    for k in prange(hs.shape[0]):
        kbuf = np.empty(n)
        acc = 0.0
        for i in range(n):
            p = fit_point(x[i], x, yc, 0, n, i, hs[k], kind, w, m, s, coef, radius, kbuf)
            if np.isnan(p):
                acc = np.nan
                break
            r = p - yc[i]
            acc += r * r
        out[k] = acc / n
    return out


@njit(cache=True, parallel=True)
def ase_values(x, yc, rc, hs, kind, w, m, s, coef, radius):
    """ASE of full-sample fits; ``rc`` is the truth centred like ``yc``."""
    n = x.shape[0]
    out = np.empty(hs.shape[0])
    for k in prange(hs.shape[0]):
        kbuf = np.empty(n)
        acc = 0.0
        for i in range(n):
            p = fit_point(x[i], x, yc, 0, n, -1, hs[k], kind, w, m, s, coef, radius, kbuf)
            if np.isnan(p):
                acc = np.nan
                break
            r = p - rc[i]
            acc += r * r
        out[k] = acc / n
    return out
