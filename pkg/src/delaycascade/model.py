"""Cascade systems with one feedback nonlinearity, their steady states and the Hes1 rescaling.

The cascade is::

    x_1'(t) = ∫ θ_1(s) f(x_k(t+s)) ds - μ_1 x_1(t)
    x_j'(t) = α_j ∫ θ_j(s) x_{j-1}(t+s) ds - μ_j x_j(t),   j = 2..k

All feedback functions are pure and vectorized over numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from ._roots import BracketError, bisect
from .kernels import DelayKernel, Dirac

_MONOTONE_SAMPLES = 256


class FeedbackFn:
    """Base class for the scalar production map ``f`` feeding ``x_k`` back into ``x_1``."""

    domain: tuple[float, float] = (0.0, math.inf)

    def evaluate(self, x):
        raise NotImplementedError

    def __call__(self, x):
        arr = np.asarray(x, dtype=float)
        lo, hi = self.domain
        if np.any(arr < lo) or np.any(arr > hi):
            raise ValueError(f"feedback evaluated outside its domain [{lo}, {hi}]")
        out = self.evaluate(arr)
        return float(out) if np.ndim(out) == 0 else out

    def supremum(self) -> float:
        """Upper bound of ``f`` on its domain (exact for the monotone variants)."""
        raise NotImplementedError

    def derivative(self, x: float, rel_step: float = 1e-6) -> float:
        lo, hi = self.domain
        dx = rel_step * max(1.0, abs(x))
        a, b = max(lo, x - dx), min(hi, x + dx)
        return (self(b) - self(a)) / (b - a)


@dataclass(frozen=True)
class Hill(FeedbackFn):
    """``f(ξ) = mu (b^h + 1) / (b^h + ξ^h)``, normalized so that ``f(1) = mu``."""

    mu: float
    b: float
    h: float
    domain: tuple[float, float] = (0.0, math.inf)

    def __post_init__(self):
        if not (self.mu > 0 and self.b > 0 and self.h > 0):
            raise ValueError(f"Hill needs mu, b, h > 0; got {self.mu}, {self.b}, {self.h}")

    @property
    def bh(self) -> float:
        return self.b**self.h

    def evaluate(self, x):
        bh = self.bh
        return self.mu * (bh + 1.0) / (bh + np.power(x, self.h))

    def supremum(self):
        return self.mu * (self.bh + 1.0) / self.bh

    def derivative(self, x, rel_step=None):
        return hill_derivatives(x, self).df


@dataclass(frozen=True)
class Affine(FeedbackFn):
    slope: float
    intercept: float
    domain: tuple[float, float] = (-math.inf, math.inf)

    def evaluate(self, x):
        return self.slope * x + self.intercept

    def supremum(self):
        lo, hi = self.domain
        if self.slope > 0:
            return self.slope * hi + self.intercept
        if self.slope < 0:
            return self.slope * lo + self.intercept
        return self.intercept

    def derivative(self, x, rel_step=None):
        return self.slope


@dataclass(frozen=True)
class TabulatedFeedback(FeedbackFn):
    """Piecewise-linear interpolant of a sampled curve; domain is the sample range."""

    xs: tuple[float, ...]
    ys: tuple[float, ...]
    domain: tuple[float, float] = field(init=False)

    def __post_init__(self):
        xs = tuple(float(v) for v in self.xs)
        ys = tuple(float(v) for v in self.ys)
        if len(xs) != len(ys) or len(xs) < 2:
            raise ValueError("tabulated feedback needs >= 2 samples")
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise ValueError("tabulated feedback abscissae must be strictly increasing")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)
        object.__setattr__(self, "domain", (xs[0], xs[-1]))

    def evaluate(self, x):
        return np.interp(x, self.xs, self.ys)

    def supremum(self):
        return max(self.ys)


@dataclass(frozen=True)
class Clamped(FeedbackFn):
    """``inner`` extended to the real line by its boundary values."""

    inner: FeedbackFn
    domain: tuple[float, float] = (-math.inf, math.inf)

    def evaluate(self, x):
        lo, hi = self.inner.domain
        if lo > -math.inf:
            x = np.maximum(x, lo)
        if hi < math.inf:
            x = np.minimum(x, hi)
        return self.inner.evaluate(x)

    def supremum(self):
        return self.inner.supremum()

    def derivative(self, x, rel_step=1e-6):
        lo, hi = self.inner.domain
        if x < lo or x > hi:
            return 0.0
        return self.inner.derivative(x)


def clamp_extend(f: FeedbackFn) -> FeedbackFn:
    """Extend ``f`` from its closed interval to ℝ by constants ``f(a)`` below and ``f(b)`` above."""
    if isinstance(f, Clamped):
        return f
    return Clamped(f)


class HillDerivatives(NamedTuple):
    f: float
    df: float
    d2f: float


def hill_derivatives(xi: float, fb: Hill) -> HillDerivatives:
    """``(f, f', f'')`` of a Hill feedback at ``xi >= 0``.

    For ``1 < h < 2`` the second derivative is unbounded at 0; the one-sided limit
    ``-inf`` is returned there.
    """
    if xi < 0:
        raise ValueError(f"hill_derivatives needs xi >= 0, got {xi!r}")
    if fb.h < 1:
        raise ValueError(f"hill_derivatives needs h >= 1, got {fb.h!r}")
    mu, h, bh = fb.mu, fb.h, fb.bh
    xh = xi**h
    den = bh + xh
    f = mu * (bh + 1.0) / den
    if h == 1.0:
        df = -mu * (bh + 1.0) / den**2
        d2f = 2.0 * mu * (bh + 1.0) / den**3
        return HillDerivatives(f, df, d2f)
    df = -mu * (bh + 1.0) * h * xi ** (h - 1.0) / den**2
    if xi == 0.0 and h < 2.0:
        return HillDerivatives(f, df, -math.inf)
    d2f = mu * h * xi ** (h - 2.0) * (bh + 1.0) * ((1.0 + h) * xh - bh * (h - 1.0)) / den**3
    return HillDerivatives(f, df, d2f)


@dataclass(frozen=True)
class CascadeSpec:
    """``k`` species, degradation rates ``mu``, chain rates ``alpha`` (j = 2..k), one kernel per equation."""

    k: int
    mu: tuple[float, ...]
    alpha: tuple[float, ...]
    feedback: FeedbackFn
    kernels: tuple[DelayKernel, ...]

    def __post_init__(self):
        object.__setattr__(self, "mu", tuple(float(m) for m in self.mu))
        object.__setattr__(self, "alpha", tuple(float(a) for a in self.alpha))
        object.__setattr__(self, "kernels", tuple(self.kernels))
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if len(self.mu) != self.k:
            raise ValueError(f"expected {self.k} degradation rates, got {len(self.mu)}")
        if len(self.alpha) != self.k - 1:
            raise ValueError(f"expected {self.k - 1} chain rates, got {len(self.alpha)}")
        if len(self.kernels) != self.k:
            raise ValueError(f"expected {self.k} kernels, got {len(self.kernels)}")
        for j, m in enumerate(self.mu):
            if not m > 0:
                raise ValueError(f"mu[{j}] must be positive, got {m}")
        for j, a in enumerate(self.alpha):
            if not a > 0:
                raise ValueError(f"alpha[{j}] must be positive, got {a}")
        taus = {kern.tau_max for kern in self.kernels}
        if len(taus) != 1:
            raise ValueError(f"kernels must share one tau_max, got {sorted(taus)}")

    @property
    def tau(self) -> float:
        return self.kernels[0].tau_max

    def deltas(self) -> tuple[float, ...]:
        """Scale factors with ``δ_k = 1`` and ``δ_j = δ_{j+1} μ_{j+1} / α_{j+1}``."""
        d = [1.0] * self.k
        for j in range(self.k - 2, -1, -1):
            d[j] = d[j + 1] * self.mu[j + 1] / self.alpha[j]
        return tuple(d)


@dataclass(frozen=True)
class SteadyState:
    xbar: tuple[float, ...]
    delta: tuple[float, ...]
    residual: float


def _check_nonincreasing(f: FeedbackFn, lo: float, hi: float) -> None:
    xs = np.linspace(lo, hi, _MONOTONE_SAMPLES)
    ys = np.asarray(f(xs))
    rises = np.diff(ys)
    if np.any(rises > 1e-12 * np.maximum(1.0, np.abs(ys[:-1]))):
        i = int(np.argmax(rises))
        raise ValueError(f"feedback not nonincreasing: f({xs[i + 1]!r}) > f({xs[i]!r})")


def steady_state(spec: CascadeSpec, tol: float = 1e-12) -> SteadyState:
    """Unique positive equilibrium from the balance ``f(x̄_k) = μ_1 δ_1 x̄_k``.

    With ``μ_1 = 1`` this is the usual ``f(x̄_k) = δ_1 x̄_k``; the other species follow
    from ``x̄_j = δ_j x̄_k``.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    f = spec.feedback
    delta = spec.deltas()
    slope = spec.mu[0] * delta[0]
    lo = max(0.0, f.domain[0])
    # f is nonincreasing, so its supremum on [lo, ∞) is f(lo) (= f(0) for Hill)
    f_lo = float(f(lo))
    if not f_lo > slope * lo:
        raise ValueError(f"no positive steady state: f({lo!r}) = {f_lo!r} is not above the decay line")
    hi = min(f_lo / slope, f.domain[1])
    _check_nonincreasing(f, lo, hi)

    def balance(x):
        return f(x) - slope * x

    try:
        xk = bisect(balance, lo, hi, ftol=tol)
    except BracketError as exc:
        raise ValueError(f"balance equation has no sign change: {exc}") from None
    residual = abs(balance(xk))
    return SteadyState(tuple(d * xk for d in delta), delta, residual)


@dataclass(frozen=True)
class Hes1RawParams:
    alpha: float
    k_half: float
    h: float
    beta: float
    k_r: float
    k_p: float
    tau_r: float

    def __post_init__(self):
        for name in ("alpha", "k_half", "h", "beta", "k_r", "k_p", "tau_r"):
            if not getattr(self, name) > 0:
                raise ValueError(f"hes1.{name} must be positive")
        if self.h < 1:
            raise ValueError("hes1.h must be >= 1")

    @property
    def ratio(self) -> float:
        """Dimensionless ``k k_p k_r / (α β)`` that decides global stability."""
        return self.k_half * self.k_p * self.k_r / (self.alpha * self.beta)

    def raw_feedback(self) -> Hill:
        # α k^h / (k^h + ξ^h) written in the f(1)-normalized Hill form with b = k
        kh = self.k_half**self.h
        return Hill(self.alpha * kh / (kh + 1.0), self.k_half, self.h)


@dataclass(frozen=True)
class RescaledHes1:
    spec: CascadeSpec
    mu: float
    b: float
    h: float
    tau: float
    p_bar: float

    @property
    def feedback(self) -> Hill:
        return self.spec.feedback


def hes1_spec(mu: float, b: float, h: float, kernel: DelayKernel) -> CascadeSpec:
    """Dimensionless two-species Hes1 system; ``kernel`` delays the feedback only."""
    return CascadeSpec(
        k=2,
        mu=(1.0, mu),
        alpha=(1.0,),
        feedback=Hill(mu, b, h),
        kernels=(kernel, Dirac(0.0, kernel.tau_max)),
    )


def rescale_hes1(raw: Hes1RawParams, tol: float = 1e-12) -> RescaledHes1:
    """Nondimensionalize the Hes1 model: time by ``k_r``, protein by ``p̄``, mRNA by ``p̄ k_r/β``."""
    tau = raw.k_r * raw.tau_r
    raw_spec = CascadeSpec(
        k=2,
        mu=(raw.k_r, raw.k_p),
        alpha=(raw.beta,),
        feedback=raw.raw_feedback(),
        kernels=(Dirac(-raw.tau_r, raw.tau_r), Dirac(0.0, raw.tau_r)),
    )
    p_bar = steady_state(raw_spec, tol=tol * max(1.0, raw.k_half)).xbar[1]
    mu = raw.k_p / raw.k_r
    b = raw.k_half / p_bar
    spec = hes1_spec(mu, b, raw.h, Dirac(-tau, tau))
    return RescaledHes1(spec, mu, b, raw.h, tau, p_bar)


def cone_slope_sampled(
    f: FeedbackFn, center: float, upper: float, samples: int = 20001
) -> float:
    """Smallest sampled ``c`` with ``|f(x) - f(center)| <= c |x - center|`` on ``[lo, upper]``."""
    lo = f.domain[0] if math.isfinite(f.domain[0]) else center - (upper - center)
    xs = np.linspace(lo, upper, samples)
    xs = xs[np.abs(xs - center) > 1e-9 * max(1.0, abs(center))]
    g = clamp_extend(f)
    return float(np.max(np.abs(g(xs) - g(center)) / np.abs(xs - center)))
