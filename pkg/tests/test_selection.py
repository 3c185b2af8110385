import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from oscv.errors import NoMinimumError
from oscv.kernels import Kernel
from oscv.regression import Dataset, cv_loo_predictions, one_sided_loo_predictions
from oscv.selection import (
    MIN_GRID_POINTS,
    BandwidthGrid,
    CriterionCurve,
    Method,
    MinimumChoice,
    SelectionRule,
    cv_curve,
    default_cv_grid,
    default_oscv_grid,
    find_local_minima,
    oscv_curve,
    select_bandwidth,
)
from oscv.simulation import SimScenario, generate

PHI = Kernel.gaussian()


def _noisy(n=60, seed=1):
    rng = np.random.default_rng(seed)
    x = np.sort(rng.uniform(0, 1, n))
    return Dataset(x, np.sin(5 * x) + 0.2 * rng.standard_normal(n), 1.0)


def test_find_local_minima():
    assert find_local_minima([1, 2, 3, 4]) == []
    assert find_local_minima([3, 1, 2, 0.5, 4]) == [1, 3]
    assert find_local_minima([3, 1, np.nan, 2, 0.5, np.nan, 4]) == [1, 4]
    assert find_local_minima([3, 1, 1, 4]) == []
    assert find_local_minima([2.0, 1.0, 1.5], atol=0.6) == []


def test_grid_parse_and_validation():
    g = BandwidthGrid.parse("0.01:1:100:log")
    assert len(g) == 100 and g.points[0] == pytest.approx(0.01) and g.points[-1] == pytest.approx(1.0)
    lin = BandwidthGrid.parse("0.1:2:60:lin")
    assert np.allclose(np.diff(lin.points), lin.points[1] - lin.points[0])
    for bad in ("0.01:1:100", "0.01:1:10:log", "1:0.1:100:log", "0.01:1:100:cubic", "0:1:100:log"):
        with pytest.raises(ValueError):
            BandwidthGrid.parse(bad)
    assert MIN_GRID_POINTS == 50


def test_default_grids():
    d = _noisy()
    g = default_oscv_grid(d)
    assert len(g) == 200 and g.spacing == "log"
    assert g.lo == max(d.min_spacing, d.a / d.n) and g.hi == d.a
    assert default_cv_grid(d).lo == g.lo / 2


def test_curve_matches_oracle_criteria():
    d = _noisy(30, seed=4)
    g = BandwidthGrid.make(0.05, 1.0, 50)
    oc = oscv_curve(d, PHI, g)
    cc = cv_curve(d, PHI, g)
    for k in (0, 17, 49):
        b = g.points[k]
        assert oc.values[k] == pytest.approx(oracles.oscv(d.x, d.y, b, oracles.phi), rel=1e-9)
        assert cc.values[k] == pytest.approx(oracles.cv(d.x, d.y, b, oracles.phi), rel=1e-9)


def test_curve_matches_per_bandwidth_predictions():
    d = _noisy()
    g = default_oscv_grid(d)
    oc = oscv_curve(d, Kernel.hi_robust(), g)
    for k in (10, 100, 199):
        res = one_sided_loo_predictions(d, Kernel.hi_robust(), g.points[k]) - d.y[4:]
        assert oc.values[k] == pytest.approx(np.mean(res**2), rel=1e-12)
    cc = cv_curve(d, PHI, g)
    res = cv_loo_predictions(d, PHI, g.points[50]) - d.y
    assert cc.values[50] == pytest.approx(np.mean(res**2), rel=1e-12)


def test_curve_minima_structure():
    d = _noisy()
    c = oscv_curve(d, PHI, default_oscv_grid(d))
    defined = c.values[~np.isnan(c.values)]
    assert np.all(defined >= 0)
    assert c.global_min[1] <= defined.min()
    for b, v in c.local_minima:
        i = int(np.flatnonzero(c.grid.points == b)[0])
        assert v < c.values[i - 1] and v < c.values[i + 1]


def test_constant_data_curves_are_zero():
    x = np.linspace(0, 1, 40)
    d = Dataset(x, np.full(40, 2.5), 1.0)
    g = default_oscv_grid(d)
    oc = oscv_curve(d, PHI, g)
    assert np.all(oc.values == 0.0)
    assert oc.global_min == (g.points[0], 0.0)
    assert np.all(cv_curve(d, PHI, g).values == 0.0)


def test_linear_data_cv_zero():
    x = np.linspace(0, 1, 40)
    d = Dataset(x, 1 + 2 * x, 1.0)
    assert np.nanmax(cv_curve(d, PHI, default_cv_grid(d)).values) < 1e-18


def test_white_noise_cv_large_h():
    rng = np.random.default_rng(12)
    x = np.linspace(0, 1, 200)
    y = rng.standard_normal(200)
    d = Dataset(x, y, 1.0)
    c = cv_curve(d, PHI, BandwidthGrid.make(0.01, 100.0, 60))
    assert c.values[-1] == pytest.approx(np.mean(y**2), rel=0.2)


@settings(max_examples=10, deadline=None)
@given(shift=st.floats(-50, 50), lam=st.floats(0.05, 20))
def test_shift_and_scale_invariance(shift, lam):
    d = _noisy(50, seed=8)
    g = default_oscv_grid(d)
    base = oscv_curve(d, PHI, g)
    shifted = oscv_curve(Dataset(d.x, d.y + shift, d.a), PHI, g)
    np.testing.assert_allclose(shifted.values, base.values, rtol=1e-7, atol=1e-12)
    scaled = oscv_curve(Dataset(d.x, d.y * lam, d.a), PHI, g)
    np.testing.assert_allclose(scaled.values, lam**2 * base.values, rtol=1e-9)
    assert scaled.global_min[0] == base.global_min[0]
    assert [b for b, _ in scaled.local_minima] == [b for b, _ in base.local_minima]
    cv_base = cv_curve(d, PHI, g)
    cv_shift = cv_curve(Dataset(d.x, d.y + shift, d.a), PHI, g)
    np.testing.assert_allclose(cv_shift.values, cv_base.values, rtol=1e-7, atol=1e-12)


def test_undefined_values_excluded():
    g = BandwidthGrid.make(0.1, 1.0, 50)
    vals = np.linspace(5, 1, 50)
    vals[[10, 20]] = np.nan
    vals[30] = 0.5
    c = CriterionCurve(g, vals, PHI, "synthetic")
    assert c.n_undefined == 2 and c.n_defined == 48
    assert c.global_min == (g.points[30], 0.5)
    assert [b for b, _ in c.local_minima] == [g.points[30]]


def test_global_tie_prefers_smallest_b():
    g = BandwidthGrid.make(0.1, 1.0, 50)
    vals = np.full(50, 3.0)
    vals[[5, 40]] = 1.0
    c = CriterionCurve(g, vals, PHI, "synthetic")
    assert c.global_min[0] == g.points[5]
    assert c.largest_local_min()[0] == g.points[40]


def test_largest_local_falls_back_to_global():
    g = BandwidthGrid.make(0.1, 1.0, 50)
    c = CriterionCurve(g, np.linspace(2, 1, 50), PHI, "synthetic")
    assert c.local_minima == []
    assert c.largest_local_min() == c.global_min


def test_all_undefined_raises():
    x = np.linspace(0, 1, 20)
    d = Dataset(x, np.sin(x), 1.0)
    g = BandwidthGrid.make(1e-5, 1e-3, 50)
    with pytest.raises(NoMinimumError):
        oscv_curve(d, Kernel.epanechnikov(), g)
    with pytest.raises(NoMinimumError):
        CriterionCurve(g, np.full(50, np.nan), PHI, "x").largest_local_min()


def test_oscv_needs_enough_points():
    d = Dataset(np.linspace(0, 1, 5), np.arange(5.0), 1.0)
    with pytest.raises(ValueError):
        oscv_curve(d, PHI, BandwidthGrid.make(0.1, 1, 50))


def test_rescale_factors():
    assert SelectionRule(Method.CV).rescale() == 1.0
    assert SelectionRule(Method.OSCV_PHI).rescale() == pytest.approx(0.6168, abs=5e-4)
    assert SelectionRule(Method.OSCV_PHI_NONSMOOTH).rescale() == pytest.approx(0.5284, abs=5e-4)
    assert SelectionRule(Method.OSCV_HI_ROBUST).rescale() == pytest.approx(0.5217, abs=5e-4)
    assert SelectionRule(Method.OSCV_HB).rescale() == pytest.approx(0.1932, abs=5e-4)


def test_select_bandwidth():
    d = _noisy()
    sel = select_bandwidth(d, SelectionRule("oscv-robust"))
    b, h = sel
    assert h == pytest.approx(sel.rescale * b, rel=1e-15)
    assert sel.rescale == pytest.approx(0.5217, abs=5e-4)
    cv = select_bandwidth(d, SelectionRule("cv"))
    assert cv.h_hat == cv.b_hat
    ll = select_bandwidth(d, SelectionRule("oscv-robust", MinimumChoice.LARGEST_LOCAL))
    assert ll.b_hat >= min(b for b, _ in ll.curve.local_minima or [ll.curve.global_min])


def test_rule_validation():
    with pytest.raises(ValueError):
        SelectionRule("oscv-magic")
    with pytest.raises(ValueError):
        SelectionRule("cv", "smallest")


def test_hi_and_phi_curves_agree_away_from_zero():
    d = generate(SimScenario("r1", 100, 1 / 500, 1, 2), 0)
    g = default_oscv_grid(d)
    phi = oscv_curve(d, PHI, g).values
    hi = oscv_curve(d, Kernel.hi_robust(), g).values
    far = g.points >= d.a / 10
    np.testing.assert_allclose(hi[far], phi[far], rtol=1e-2)
    near = g.points < 0.03
    assert np.nanmax(np.abs(hi[near] / phi[near] - 1)) > 1e-2


def test_hb_curve_wiggles_while_phi_is_smooth():
    d = generate(SimScenario("r1", 100, 1 / 500, 1, 2, "uniform"), 0)
    g = default_oscv_grid(d)
    assert len(oscv_curve(d, Kernel.hb(), g).local_minima) >= 2
    assert len(oscv_curve(d, PHI, g).local_minima) == 1
