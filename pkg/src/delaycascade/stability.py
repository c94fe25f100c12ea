"""Delay-independent global stability test and the Hopf sharpness analysis.

Linearization at the (translated) steady state gives the characteristic function
``W(λ) = ∏(λ + μ_j) - Γ ∏ η_j(λ)`` with ``Γ = ∏ γ_j``. For point-mass delays the
imaginary-axis crossings are the positive roots of
``F(ω) = ∏(ω² + μ_j²) - Γ²``.
"""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._roots import bisect
from .kernels import DelayKernel

BOUNDARY_TOL = 1e-12


class Verdict(str, enum.Enum):
    GLOBALLY_STABLE = "GloballyStable"
    DELAY_INDEPENDENT_UNSTABLE = "DelayIndependentUnstable"
    HOPF_BOUNDARY = "HopfBoundary"
    UNSTABLE_ALL_DELAYS = "UnstableAllDelays"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class LinearizationData:
    mu: tuple[float, ...]
    gamma: tuple[float, ...]
    tau_points: tuple[float, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "mu", tuple(float(m) for m in self.mu))
        object.__setattr__(self, "gamma", tuple(float(g) for g in self.gamma))
        if len(self.mu) != len(self.gamma) or not self.mu:
            raise ValueError("mu and gamma must have the same positive length")
        if any(not m > 0 for m in self.mu):
            raise ValueError("all mu_j must be positive")
        if self.tau_points is not None:
            taus = tuple(float(t) for t in self.tau_points)
            if len(taus) != len(self.mu) or any(t < 0 for t in taus):
                raise ValueError("tau_points must be k nonnegative delays")
            object.__setattr__(self, "tau_points", taus)

    @classmethod
    def from_products(cls, mu: Sequence[float], gamma_product: float, tau: float | None = None):
        """All of ``Γ`` on the first equation and the whole delay on it too."""
        k = len(mu)
        gamma = (gamma_product,) + (1.0,) * (k - 1)
        taus = None if tau is None else (tau,) + (0.0,) * (k - 1)
        return cls(tuple(mu), gamma, taus)

    @property
    def k(self) -> int:
        return len(self.mu)

    @property
    def gamma_product(self) -> float:
        return math.prod(self.gamma)

    @property
    def mu_product(self) -> float:
        return math.prod(self.mu)

    @property
    def tau(self) -> float | None:
        return None if self.tau_points is None else sum(self.tau_points)


@dataclass(frozen=True)
class StabilityReport:
    verdict: Verdict
    gamma_product: float
    mu_product: float
    omega0: float | None = None
    tau_cr: float | None = None
    notes: tuple[str, ...] = field(default=())

    def csv_row(self) -> str:
        def fmt(v):
            return "" if v is None else f"{v:.17g}"

        return ",".join(
            [fmt(self.gamma_product), fmt(self.mu_product), fmt(self.omega0), fmt(self.tau_cr),
             self.verdict.value]
        )

    def summary(self) -> str:
        line = f"verdict={self.verdict.value} Gamma={self.gamma_product:.10g} M={self.mu_product:.10g}"
        if self.omega0 is not None:
            line += f" omega0={self.omega0:.10g} tau_cr={self.tau_cr:.10g}"
        return line


CSV_HEADER = "Gamma,M,omega0,tau_cr,verdict"


def check_global(alphas: Sequence[float], mus: Sequence[float]) -> bool:
    """Product condition ``α_1⋯α_k <= μ_1⋯μ_k`` (equality included), in log space."""
    if len(alphas) != len(mus):
        raise ValueError("alphas and mus must have the same length")
    for j, a in enumerate(alphas):
        if a < 0:
            raise ValueError(f"alpha[{j}] must be nonnegative, got {a}")
    for j, m in enumerate(mus):
        if not m > 0:
            raise ValueError(f"mu[{j}] must be positive, got {m}")
    if any(a == 0 for a in alphas):
        return True
    lhs = math.fsum(math.log(a) for a in alphas)
    rhs = math.fsum(math.log(m) for m in mus)
    return bool(lhs <= rhs + 4 * np.finfo(float).eps * max(1.0, abs(rhs)))


def char_F(omega: float, data: LinearizationData) -> float:
    """``∏(ω² + μ_j²) - Γ²``."""
    w2 = omega * omega
    return math.prod(w2 + m * m for m in data.mu) - data.gamma_product**2


def _char_F_slope(omega: float, data: LinearizationData) -> float:
    w2 = omega * omega
    terms = [w2 + m * m for m in data.mu]
    total = 0.0
    for j in range(len(terms)):
        total += 2.0 * omega * math.prod(t for i, t in enumerate(terms) if i != j)
    return total


def omega0(data: LinearizationData) -> float:
    """Unique positive root of ``F``; requires ``|Γ| > ∏μ``."""
    if char_F(0.0, data) >= 0:
        raise ValueError("omega0 needs |Gamma| > prod(mu), i.e. F(0) < 0")
    hi = 1.0
    while char_F(hi, data) <= 0:
        hi *= 2.0
    root = bisect(lambda w: char_F(w, data), 0.0, hi, xtol=0.0)
    if not _char_F_slope(root, data) > 0:
        raise ArithmeticError("transversality F'(omega0) > 0 failed")
    return root


def delay_free_roots(data: LinearizationData) -> np.ndarray:
    """Roots of ``∏(λ + μ_j) - Γ`` (companion-matrix eigenvalues)."""
    poly = np.array([1.0])
    for m in data.mu:
        poly = np.convolve(poly, [1.0, m])
    poly[-1] -= data.gamma_product
    return np.roots(poly)


def zero_delay_stable(data: LinearizationData) -> bool:
    return bool(np.max(delay_free_roots(data).real) < 0)


def tau_critical(data: LinearizationData) -> float:
    """Smallest positive total delay with a purely imaginary root ``iω₀``.

    From ``e^{-iω₀τ} = ∏(iω₀ + μ_j)/Γ``: ``τ_cr = Arg(Γ / ∏(iω₀ + μ_j)) / ω₀``
    with the argument taken in ``(0, 2π]``.
    """
    gamma = data.gamma_product
    if not gamma < 0:
        raise ValueError("tau_critical needs Gamma < 0")
    if not abs(gamma) > data.mu_product:
        raise ValueError("tau_critical needs |Gamma| > prod(mu)")
    if not zero_delay_stable(data):
        raise ValueError("tau_critical needs a stable zero-delay steady state")
    w0 = omega0(data)
    p = complex(1.0)
    for m in data.mu:
        p *= complex(m, w0)
    arg = cmath.phase(gamma / p)
    if arg <= 0:
        arg += 2.0 * math.pi
    return arg / w0


def _on_boundary(gamma: float, m: float) -> bool:
    return abs(abs(gamma) - m) <= BOUNDARY_TOL * max(1.0, m)


def classify(
    data: LinearizationData,
    alphas_available: Sequence[float] | None = None,
    kernels: Sequence[DelayKernel] | None = None,
) -> StabilityReport:
    """Trichotomy by the sign and size of ``Γ`` relative to ``M = ∏μ``.

    Cone slopes, when given, must pass :func:`check_global` before a global verdict
    is issued. With ``kernels`` a Mikhailov argument count is appended to the notes.
    """
    gamma, m = data.gamma_product, data.mu_product
    notes: list[str] = []
    confirmed = None
    if alphas_available is not None:
        confirmed = check_global(alphas_available, data.mu)
        notes.append(f"cone_product_condition={'pass' if confirmed else 'fail'}")
    if kernels is not None:
        notes.extend(_mikhailov_note(data, kernels))

    def report(verdict, **kw):
        return StabilityReport(verdict, gamma, m, notes=tuple(notes), **kw)

    small = abs(gamma) <= m or _on_boundary(gamma, m)
    if small:
        if _on_boundary(gamma, m) and confirmed is None:
            notes.append("products on the boundary |Gamma| = M without cone slopes")
            return report(Verdict.INCONCLUSIVE)
        if confirmed is False:
            notes.append("locally stable for all delays; cone slopes do not certify global stability")
            return report(Verdict.INCONCLUSIVE)
        return report(Verdict.GLOBALLY_STABLE)
    if gamma > 0:
        notes.append("W(0) < 0: a positive real characteristic root for every delay")
        return report(Verdict.DELAY_INDEPENDENT_UNSTABLE)
    if not zero_delay_stable(data):
        notes.append("unstable at zero delay and crossings are left-to-right")
        return report(Verdict.UNSTABLE_ALL_DELAYS, omega0=omega0(data))
    if kernels is not None and not all(_is_point_mass(k) for k in kernels):
        notes.append("Hopf boundary formula needs point-mass delays; simulate instead")
        return report(Verdict.INCONCLUSIVE, omega0=omega0(data))
    w0 = omega0(data)
    tcr = tau_critical(data)
    if data.tau is not None:
        side = "stable" if data.tau < tcr else "unstable" if data.tau > tcr else "critical"
        notes.append(f"tau={data.tau:.10g} is on the {side} side")
    return report(Verdict.HOPF_BOUNDARY, omega0=w0, tau_cr=tcr)


def _is_point_mass(kernel) -> bool:
    from .kernels import Dirac

    return isinstance(kernel, Dirac)


def characteristic(lam, data: LinearizationData, kernels: Sequence[DelayKernel] | None = None):
    """``W(λ)``; point delays from ``tau_points`` unless ``kernels`` are supplied."""
    lam = np.asarray(lam, dtype=complex)
    poly = np.ones_like(lam)
    for m in data.mu:
        poly = poly * (lam + m)
    eta = np.ones_like(lam)
    if kernels is not None:
        for kern in kernels:
            eta = eta * kern.laplace(lam)
    elif data.tau_points is not None:
        eta = np.exp(-lam * data.tau)
    return poly - data.gamma_product * eta


def mikhailov_argument(
    data: LinearizationData,
    kernels: Sequence[DelayKernel] | None,
    omega_max: float,
    samples: int,
) -> float:
    """Unwrapped change of ``arg W(iω)`` over ``[0, omega_max]``."""
    if samples < 3 or not omega_max > 0:
        raise ValueError("need omega_max > 0 and at least 3 samples")
    omega = np.linspace(0.0, omega_max, samples)
    w = characteristic(1j * omega, data, kernels)
    if np.any(w == 0):
        raise ArithmeticError("W(iω) vanishes on the sampling grid")
    jumps = np.angle(w[1:] / w[:-1])
    if np.max(np.abs(jumps)) > 0.5 * math.pi:
        raise ValueError("sampling too coarse: phase jump above π/2 between samples")
    total = np.concatenate([[0.0], np.cumsum(jumps)])
    tail = omega >= omega_max / 10.0
    drift = total[-1] - total[tail][0]
    if abs(drift) >= 0.01:
        raise ValueError(f"omega_max too small: last-decade argument drift {drift:.3g} rad")
    return float(total[-1])


def mikhailov_stable(change: float, k: int, tol: float = 0.05) -> bool:
    return abs(change - k * math.pi / 2.0) <= tol


def _mikhailov_note(data, kernels) -> list[str]:
    omega_max = 1000.0 * (sum(data.mu) + abs(data.gamma_product) ** (1.0 / data.k) + 1.0)
    tau = max((getattr(k, "tau_max", 0.0) for k in kernels), default=0.0)
    samples = int(min(2_000_000, max(20_001, 40 * omega_max * max(tau, 0.1))))
    try:
        change = mikhailov_argument(data, kernels, omega_max, samples)
    except (ValueError, ArithmeticError) as exc:
        return [f"mikhailov=unavailable ({exc})"]
    ok = mikhailov_stable(change, data.k)
    return [f"mikhailov_change={change:.6f} ({'stable' if ok else 'not stable'} at the given delays)"]
