"""Hill-feedback specializations for the two-species Hes1 cascade.

With ``f(ξ) = μ(B+1)/(B+ξ^h)``, ``B = b^h``, the tangency function

    g(ξ) = (ξ-1) f'(ξ) - (f(ξ) - f(1)) = μ (ξ-1)/(B+ξ^h) · ρ(ξ),
    ρ(ξ) = (ξ^h-1)/(ξ-1) - (B+1) h ξ^{h-1}/(B+ξ^h),

has a double root at 1; the remaining root of ρ is the tangency abscissa ``x₀``
where the line through ``(1, f(1))`` touches the graph. ``ρ`` is solved in
``u = log ξ`` because for ``h`` close to 1 the root lies many decades below 1.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from ._roots import BracketError, bisect
from .model import Hes1RawParams, Hill, hill_derivatives, rescale_hes1
from .stability import LinearizationData, StabilityReport, Verdict, classify

TRIPLE_ROOT_TOL = 1e-10
TIE_TOL = 1e-12
# below this distance of x_c from 1, the simple root of ρ is inside bisection noise
_NEAR_TRIPLE = 1e-5


class HillCase(str, enum.Enum):
    TANGENT_INTERIOR = "a"
    INFLECTION_AT_ONE = "b"
    CONVEX_FROM_ZERO = "c"


@dataclass(frozen=True)
class HillAnalysis:
    h: float
    b: float
    mu: float
    x_c: float
    x_0: float
    cone_slope: float
    case: HillCase

    @property
    def cone_ratio(self) -> float:
        """``α₁/μ``; global stability of the Hes1 system needs this ≤ 1."""
        return self.cone_slope / self.mu


def inflection_abscissa(h: float, b: float) -> float:
    """Root of ``f''``: ``((h-1)/(h+1))^{1/h} b`` (0 for ``h = 1``)."""
    if h <= 1:
        return 0.0
    return ((h - 1.0) / (h + 1.0)) ** (1.0 / h) * b


def g_eval(xi: float, fb: Hill) -> float:
    """``(ξ-1) f'(ξ) - (f(ξ) - f(1))``."""
    if xi < 0:
        raise ValueError(f"g_eval needs xi >= 0, got {xi!r}")
    d = hill_derivatives(xi, fb)
    return (xi - 1.0) * d.df - (d.f - fb.mu)


def _rho_log(u: float, h: float, bh: float) -> float:
    if u == 0.0:
        q = h
    else:
        q = math.expm1(h * u) / math.expm1(u)
    # h ξ^{h-1}/(B + ξ^h) with ξ = e^u; large u handled by dividing through by ξ^h
    hu = h * u
    if hu > 0:
        tail = h * math.exp(-u) / (bh * math.exp(-hu) + 1.0)
    else:
        tail = h * math.exp(hu - u) / (bh + math.exp(hu))
    return q - (bh + 1.0) * tail


def _rho_log_ext(u, h: float, bh: float):
    """:func:`_rho_log` in extended precision (``np.longdouble``) for the final polish."""
    u = np.longdouble(u)
    h = np.longdouble(h)
    bh = np.longdouble(bh)
    q = h if u == 0 else np.expm1(h * u) / np.expm1(u)
    hu = h * u
    if hu > 0:
        tail = h * np.exp(-u) / (bh * np.exp(-hu) + 1)
    else:
        tail = h * np.exp(hu - u) / (bh + np.exp(hu))
    return q - (bh + 1) * tail


def _polish(u0: float, h: float, bh: float) -> float:
    """Re-bisect a tiny bracket around ``u0`` in extended precision.

    Near steep Hill curves one ulp of ``x₀`` moves the tangency residual by
    ``|g'(x₀)|·ulp``, so the double-precision bracket end is not good enough;
    where ``longdouble`` is plain double this returns ``u0`` unchanged.
    """
    w = 64 * np.finfo(float).eps * max(1.0, abs(u0))
    lo, hi = np.longdouble(u0) - np.longdouble(w), np.longdouble(u0) + np.longdouble(w)
    try:
        return float(np.exp(bisect(lambda u: _rho_log_ext(u, h, bh), lo, hi)))
    except BracketError:
        return math.exp(u0)


def x0_root(h: float, b: float) -> tuple[float, HillCase]:
    """Tangency abscissa and case tag.

    ``h = 1``: the Hill curve is convex on ``[0, ∞)`` and the cone is set by the
    chord to 0 (case c). Otherwise the root of ρ is on the side of 1 where the
    inflection point ``x_c`` lies; ``x_c = 1`` (triple root of g) gives case b.
    """
    if h < 1 or not b > 0:
        raise ValueError(f"x0_root needs h >= 1 and b > 0, got h={h!r}, b={b!r}")
    if h == 1.0:
        return 0.0, HillCase.CONVEX_FROM_ZERO
    bh = b**h
    xc = inflection_abscissa(h, b)
    e = xc - 1.0
    if abs(e) <= TRIPLE_ROOT_TOL:
        return 1.0, HillCase.INFLECTION_AT_ONE

    def rho(u):
        return _rho_log(u, h, bh)

    uc = math.log(xc)
    width = 1.0
    if e < 0:
        far = uc - width
        while rho(far) <= 0 and far > -745.0:
            width *= 2.0
            far = uc - width
        lo, hi = max(far, -745.0), uc
    else:
        far = uc + width
        while rho(far) <= 0 and far < 700.0:
            width *= 2.0
            far = uc + width
        lo, hi = uc, min(far, 700.0)
    try:
        u0 = bisect(rho, lo, hi)
    except BracketError as exc:
        if abs(e) < _NEAR_TRIPLE:
            # local expansion of ρ about the triple root: x₀ - 1 ≈ 3/2 (x_c - 1)
            return 1.0 + 1.5 * e, HillCase.TANGENT_INTERIOR
        raise BracketError(math.exp(exc.lo), math.exp(exc.hi), exc.f_lo, exc.f_hi) from None
    return _polish(u0, h, bh), HillCase.TANGENT_INTERIOR


def _abs_df_over_mu(xi: float, h: float, bh: float) -> float:
    if xi == 0.0:
        return 1.0 / bh if h == 1.0 else 0.0
    xh = xi**h
    return (bh + 1.0) * h * xi ** (h - 1.0) / (bh + xh) ** 2


def analyze(h: float, b: float, mu: float = 1.0) -> HillAnalysis:
    if not mu > 0:
        raise ValueError(f"mu must be positive, got {mu!r}")
    x0, case = x0_root(h, b)
    bh = b**h
    if case is HillCase.CONVEX_FROM_ZERO:
        # chord from (0, f(0)) to (1, f(1)): f(0) - f(1) = μ/B
        slope = mu / bh
    else:
        slope = mu * _abs_df_over_mu(x0, h, bh)
    return HillAnalysis(h, b, mu, inflection_abscissa(h, b), x0, slope, case)


def cone_slope(h: float, b: float, mu: float) -> float:
    """Smallest ``α₁`` with ``|f(x) - f(1)| <= α₁ |x - 1|`` on ``[0, ∞)``."""
    return analyze(h, b, mu).cone_slope


def _criticality(b: float, h: float) -> float:
    x0, case = x0_root(h, b)
    return _abs_df_over_mu(x0, h, b**h) - 1.0


def b_bar(h: float, tol: float = 1e-14) -> float:
    """Critical shape ratio: the ``b`` at which the tangent slope equals ``μ``.

    The slope ratio decreases in ``b``, so a bracket around the inflection value
    ``((h+1)/(h-1))^{1/h}`` is grown by factors of 4 and then bisected.
    """
    if not h > 1:
        raise ValueError(f"b_bar needs h > 1, got {h!r}")
    b_infl = ((h + 1.0) / (h - 1.0)) ** (1.0 / h)
    lo, hi = b_infl / 4.0, b_infl * 4.0
    for _ in range(60):
        if _criticality(lo, h) > 0:
            break
        lo /= 4.0
    for _ in range(60):
        if _criticality(hi, h) < 0:
            break
        hi *= 4.0
    return bisect(lambda b: _criticality(b, h), lo, hi, xtol=tol * b_infl)


def ratio_from_b(b: float, h: float) -> float:
    """``k k_p k_r/(αβ) = b^{h+1}/(b^h+1)`` for the shape ratio ``b = k/p̄``."""
    bh = b**h
    return b * bh / (bh + 1.0)


def b_from_ratio(ratio: float, h: float) -> float:
    """Inverse of :func:`ratio_from_b` (increasing in ``b``)."""
    if not ratio > 0:
        raise ValueError("ratio must be positive")
    hi = 1.0
    while ratio_from_b(hi, h) < ratio:
        hi *= 2.0
    return bisect(lambda b: ratio_from_b(b, h) - ratio, 0.0, hi)


def inflection_ratio(h: float) -> float:
    """Ratio at which the steady state sits at the inflection point of ``f``."""
    if not h > 1:
        raise ValueError("inflection_ratio needs h > 1")
    return (h + 1.0) / (2.0 * h) * ((h + 1.0) / (h - 1.0)) ** (1.0 / h)


def region_threshold(h: float) -> float:
    """Critical ``k k_p k_r/(αβ)``; above it the Hes1 steady state is globally stable."""
    if h < 1:
        raise ValueError(f"region_threshold needs h >= 1, got {h!r}")
    if h == 1.0:
        return 0.5
    return ratio_from_b(b_bar(h), h)


def check_hes1_global(raw: Hes1RawParams) -> StabilityReport:
    r = raw.ratio
    h = raw.h
    thr = region_threshold(h)
    res = rescale_hes1(raw)
    info = analyze(h, res.b, res.mu)
    fb = res.feedback
    gamma = hill_derivatives(1.0, fb).df
    m = res.mu
    notes = [f"ratio={r:.17g}", f"threshold={thr:.17g}", f"case={info.case.value}",
             f"cone_slope={info.cone_slope:.17g}"]
    if r > thr * (1.0 + TIE_TOL):
        return StabilityReport(Verdict.GLOBALLY_STABLE, gamma, m, notes=tuple(notes))
    if abs(r - thr) <= TIE_TOL * thr:
        if info.case is not HillCase.TANGENT_INTERIOR:
            notes.append("threshold tie resolved by the inflection/convex refinement")
            return StabilityReport(Verdict.GLOBALLY_STABLE, gamma, m, notes=tuple(notes))
        notes.append("threshold tie with a tangent-interior cone: strict inequality unmet")
        return StabilityReport(Verdict.INCONCLUSIVE, gamma, m, notes=tuple(notes))
    data = LinearizationData((1.0, m), (gamma, 1.0), (res.tau, 0.0))
    rep = classify(data, alphas_available=(info.cone_slope, 1.0))
    return StabilityReport(rep.verdict, rep.gamma_product, rep.mu_product, rep.omega0, rep.tau_cr,
                           tuple(notes) + rep.notes)


@dataclass(frozen=True)
class RegionCurve:
    h_grid: tuple[float, ...]
    thresholds: tuple[float, ...]

    def rows(self):
        return list(zip(self.h_grid, self.thresholds))


def region_curve(h_min: float = 1.0, h_max: float = 10.0, n_points: int = 91) -> RegionCurve:
    if not (1.0 <= h_min < h_max) or n_points < 2:
        raise ValueError("region_curve needs 1 <= h_min < h_max and n_points >= 2")
    grid = np.linspace(h_min, h_max, n_points)
    # snap to 12 decimals so that grid points such as 1.5 or 9.9 are the literal values
    hs = tuple(float(round(v, 12)) for v in grid)
    return RegionCurve(hs, tuple(region_threshold(h) for h in hs))
