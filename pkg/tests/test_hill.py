import math

import numpy as np
import pytest

from delaycascade.hill import (
    HillCase,
    analyze,
    b_bar,
    b_from_ratio,
    check_hes1_global,
    cone_slope,
    g_eval,
    inflection_abscissa,
    inflection_ratio,
    ratio_from_b,
    region_curve,
    region_threshold,
    x0_root,
)
from delaycascade.model import Hill
from delaycascade.stability import Verdict
from oracles import hill_f, tangency_quotient, tangency_residual, xi0_h2
from test_model import raw_with_ratio

SQRT5_2 = math.sqrt(5) / 2


def test_g_eval_examples():
    fb = Hill(1.0, SQRT5_2, 2.0)
    assert g_eval(1.0, fb) == 0.0
    assert abs(g_eval(0.5, fb)) <= 1e-12
    for h in (1.5, 2.0, 4.0, 9.0):
        for b in (0.3, 1.0, 2.7):
            f = Hill(1.3, b, h)
            assert g_eval(0.0, f) == pytest.approx(f(1.0) - f(0.0), abs=1e-15)
            assert g_eval(0.0, f) < 0


def test_x0_closed_form_h2():
    for b in np.linspace(0.1, 5.0, 50):
        x0, case = x0_root(2.0, b)
        assert case is HillCase.TANGENT_INTERIOR or abs(b - math.sqrt(3)) < 1e-9
        assert abs(x0 - xi0_h2(b)) <= 1e-10


def test_x0_inflection_and_convex_cases():
    assert x0_root(3.0, 2.0 ** (1.0 / 3.0)) == (1.0, HillCase.INFLECTION_AT_ONE)
    for b in (1.0, 2.0, 10.0):
        assert x0_root(1.0, b) == (0.0, HillCase.CONVEX_FROM_ZERO)


def test_x0_on_inflection_side():
    rng = np.random.default_rng(5)
    for _ in range(100):
        h = rng.uniform(1.05, 10.0)
        b = math.exp(rng.uniform(-2.0, 2.0))
        x0, case = x0_root(h, b)
        xc = inflection_abscissa(h, b)
        if case is HillCase.TANGENT_INTERIOR:
            assert (x0 - 1.0) * (xc - 1.0) > 0
            assert abs(x0 - 1.0) > abs(xc - 1.0)


def test_tangency_identity_random():
    rng = np.random.default_rng(6)
    checked = 0
    for _ in range(100):
        h = rng.uniform(1.01, 10.0)
        b = math.exp(rng.uniform(-1.5, 1.5))
        x0, case = x0_root(h, b)
        if case is not HillCase.TANGENT_INTERIOR:
            continue
        assert abs(tangency_residual(x0, b, h)) <= 1e-10
        # the (z, a) relation: (ξ^h - 1)/(ξ - 1) equals the tangency quotient at z = ξ^h
        lhs = (x0**h - 1.0) / (x0 - 1.0)
        assert lhs == pytest.approx(tangency_quotient(x0**h, b**h + 1.0, h), rel=1e-9)
        checked += 1
    assert checked == 100


def test_cone_slope_examples():
    assert abs(cone_slope(2.0, SQRT5_2, 1.0) - 1.0) <= 1e-12
    # direct substitution of ξ₀ = 0.5: (b²+1)·2·0.5/(b²+0.25)² = 1
    b2 = 1.25
    assert (b2 + 1) * 2 * 0.5 / (b2 + 0.25) ** 2 == pytest.approx(1.0, abs=1e-15)
    for mu in (0.3, 1.0, 7.0):
        assert cone_slope(3.0, 2.0 ** (1.0 / 3.0), mu) / mu == pytest.approx(1.0, abs=1e-12)
    assert cone_slope(1.0, 2.0, 1.0) == pytest.approx(0.5, abs=1e-15)


def test_cone_property_by_sampling():
    rng = np.random.default_rng(8)
    xs = np.linspace(0.0, 50.0, 10_001)[1:]
    for _ in range(20):
        h = rng.uniform(1.1, 8.0)
        b = b_bar(h) * rng.uniform(1.0, 2.0)
        mu = rng.uniform(0.5, 2.0)
        alpha = cone_slope(h, b, mu)
        gap = np.abs(hill_f(xs, mu, b, h) - hill_f(1.0, mu, b, h)) - alpha * np.abs(xs - 1.0)
        assert gap.max() <= 1e-9
        assert alpha <= mu * (1 + 1e-9)


def test_b_bar_closed_forms():
    assert abs(b_bar(2.0) - SQRT5_2) <= 1e-9
    # at h = 3 the critical configuration is the inflection one: b̄ = 2^{1/3}
    assert abs(b_bar(3.0) - 2.0 ** (1.0 / 3.0)) <= 1e-12
    assert abs(b_bar(4.5, tol=1e-6) - b_bar(4.5, tol=1e-12)) <= 1e-6
    with pytest.raises(ValueError):
        b_bar(1.0)


def test_b_bar_criticality():
    for h in (1.5, 2.0, 2.5, 4.0, 7.0, 10.0):
        bb = b_bar(h)
        assert cone_slope(h, bb, 1.0) == pytest.approx(1.0, abs=1e-9)
        assert cone_slope(h, 1.01 * bb, 1.0) < 1.0
        assert cone_slope(h, 0.99 * bb, 1.0) > 1.0


def test_h2_threshold_chain():
    bb = SQRT5_2
    assert abs(bb**3 / (bb**2 + 1) - 5 * math.sqrt(5) / 18) <= 1e-15
    assert abs(region_threshold(2.0) - 5 * math.sqrt(5) / 18) <= 1e-9


@pytest.mark.parametrize(
    "h,value",
    [(1.0, 0.5), (1.5, 0.5293), (2.5, 0.7301), (5.1, 1.2122), (9.9, 1.5458)],
)
def test_region_threshold_reference_points(h, value):
    assert abs(region_threshold(h) - value) <= 2e-3


def test_region_threshold_monotone():
    vals = [region_threshold(h) for h in np.linspace(1.1, 10.0, 50)]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    with pytest.raises(ValueError):
        region_threshold(0.5)


def test_region_curve_grid():
    curve = region_curve()
    assert curve.h_grid[0] == 1.0 and curve.thresholds[0] == 0.5
    rows = dict(curve.rows())
    assert abs(rows[1.5] - 0.5293) <= 2e-3
    assert abs(rows[9.9] - 1.5458) <= 2e-3
    assert all(b >= a for a, b in zip(curve.thresholds, curve.thresholds[1:]))
    with pytest.raises(ValueError):
        region_curve(2.0, 1.0, 5)


def test_ratio_b_roundtrip():
    for h in (1.0, 2.0, 6.5):
        for b in (0.2, 1.0, 3.0):
            assert b_from_ratio(ratio_from_b(b, h), h) == pytest.approx(b, rel=1e-12)


def test_inflection_ratio_relation():
    for h in (2.0, 3.0, 5.0):
        b = ((h + 1) / (h - 1)) ** (1 / h)
        assert inflection_ratio(h) == pytest.approx(ratio_from_b(b, h), rel=1e-14)
        assert inflection_abscissa(h, b) == pytest.approx(1.0, abs=1e-14)
    assert inflection_ratio(3.0) == pytest.approx(region_threshold(3.0), rel=1e-12)


def test_check_hes1_global_examples():
    assert check_hes1_global(raw_with_ratio(0.7, 2.0)).verdict is Verdict.GLOBALLY_STABLE
    tie = check_hes1_global(raw_with_ratio(inflection_ratio(3.0), 3.0, mu=1.7, tau_r=2.0))
    assert tie.verdict is Verdict.GLOBALLY_STABLE
    assert any("refinement" in n for n in tie.notes)
    h4 = check_hes1_global(raw_with_ratio(inflection_ratio(4.0), 4.0))
    assert h4.verdict is Verdict.HOPF_BOUNDARY
    # at the inflection point |f'(1)|/μ = h/(b^h+1) = 4/(8/3) = 1.5
    assert h4.gamma_product / h4.mu_product == pytest.approx(-1.5, rel=1e-12)
    assert h4.tau_cr > 0


def test_check_hes1_global_low_ratio_small_gain():
    # below the threshold but with |f'(1)| < μ: locally stable for all delays, cones fail
    h = 2.0
    r = 0.6
    rep = check_hes1_global(raw_with_ratio(r, h))
    b = b_from_ratio(r, h)
    slope = h / (b**h + 1.0)
    assert slope < 1.0
    assert rep.verdict is Verdict.INCONCLUSIVE


def test_analyze_fields():
    info = analyze(2.0, 1.0, 2.0)
    assert info.x_c == pytest.approx(3 ** -0.5)
    assert info.cone_ratio == pytest.approx(info.cone_slope / 2.0)
    assert info.case is HillCase.TANGENT_INTERIOR
