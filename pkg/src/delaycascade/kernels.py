"""Delay kernels: probability measures on ``[-tau_max, 0]`` and their quadrature.

Every kernel discretizes onto the solver grid (integer multiples of the step), so
the distributed-delay integral ``∫ θ(s) g(x(t+s)) ds`` becomes a weighted sum of
stored history samples.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

_GRID_RTOL = 1e-9


@dataclass(frozen=True)
class QuadratureRule:
    """Weights on grid offsets ``s <= 0``; ``mass`` is the pre-normalization integral."""

    offsets: np.ndarray
    weights: np.ndarray
    step: float
    mass: float = 1.0

    def __post_init__(self):
        offsets = np.asarray(self.offsets, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if offsets.shape != weights.shape or offsets.ndim != 1 or offsets.size == 0:
            raise ValueError("offsets and weights must be equal-length 1-d arrays")
        if np.any(np.diff(offsets) <= 0):
            raise ValueError("offsets must be strictly increasing")
        if np.any(weights < 0):
            raise ValueError("weights must be nonnegative")
        if abs(weights.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {weights.sum()!r}, not 1")
        offsets.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(self, "weights", weights)

    @property
    def lags(self) -> np.ndarray:
        """Offsets as nonnegative integer step counts (``s = -lag * step``)."""
        return np.rint(-self.offsets / self.step).astype(np.int64)

    def apply(self, fn) -> float:
        """Quadrature of ``fn(s)`` against the rule."""
        values = np.asarray(fn(self.offsets), dtype=float)
        return float(np.dot(self.weights, values))


def _on_grid(x: float, step: float) -> int:
    n = round(x / step)
    if abs(n * step - x) > _GRID_RTOL * max(step, abs(x)):
        raise ValueError(f"{x!r} is not a multiple of step {step!r}")
    return int(n)


def _trapezoid(lo_idx: int, hi_idx: int, step: float):
    w = np.full(hi_idx - lo_idx + 1, step)
    w[0] = w[-1] = 0.5 * step
    offsets = np.arange(lo_idx, hi_idx + 1) * step
    return offsets, w


class DelayKernel:
    """Base class; concrete kernels are :class:`Dirac`, :class:`Uniform`, :class:`Tabulated`."""

    tau_max: float

    def support_separated_from_zero(self) -> tuple[bool, float]:
        raise NotImplementedError

    def support_infimum(self) -> float:
        raise NotImplementedError

    def discretize(self, step: float) -> QuadratureRule:
        raise NotImplementedError

    def laplace(self, lam):
        """``η(λ) = ∫ θ(s) e^{sλ} ds``, the transfer factor of ``x(t+s)`` for ``x = e^{λt}``."""
        raise NotImplementedError


def _check_tau(tau_max: float) -> None:
    if not (tau_max >= 0 and math.isfinite(tau_max)):
        raise ValueError(f"tau_max must be a finite nonnegative time, got {tau_max!r}")


def _check_step(step: float) -> None:
    if not step > 0:
        raise ValueError(f"step must be positive, got {step!r}")


@dataclass(frozen=True)
class Dirac(DelayKernel):
    at: float
    tau_max: float

    def __post_init__(self):
        _check_tau(self.tau_max)
        if not (-self.tau_max - 1e-12 <= self.at <= 0.0):
            raise ValueError(f"Dirac offset {self.at!r} outside [-{self.tau_max}, 0]")

    def support_separated_from_zero(self):
        return (self.at < 0.0, -self.at)

    def support_infimum(self):
        return self.at

    def discretize(self, step, snap_tol=None):
        # an off-grid atom would silently move the delay, so snapping is strict
        _check_step(step)
        lag = round(-self.at / step)
        err = abs(-lag * step - self.at)
        tol = _GRID_RTOL * step if snap_tol is None else snap_tol
        if err > min(tol, 0.5 * step):
            raise ValueError(
                f"Dirac offset {self.at!r} is {err:.3g} away from the step-{step!r} grid"
            )
        return QuadratureRule(np.array([-lag * step]), np.array([1.0]), step)

    def laplace(self, lam):
        return np.exp(self.at * np.asarray(lam))


@dataclass(frozen=True)
class Uniform(DelayKernel):
    a: float
    b: float
    tau_max: float

    def __post_init__(self):
        _check_tau(self.tau_max)
        if not (-self.tau_max - 1e-12 <= self.a < self.b <= 0.0):
            raise ValueError(f"need -tau_max <= a < b <= 0, got a={self.a!r}, b={self.b!r}")

    def support_separated_from_zero(self):
        return (self.b < 0.0, -self.b)

    def support_infimum(self):
        return self.a

    def discretize(self, step):
        _check_step(step)
        lo, hi = _on_grid(self.a, step), _on_grid(self.b, step)
        offsets, w = _trapezoid(lo, hi, step)
        mass = w.sum()
        return QuadratureRule(offsets, w / mass, step, mass=mass / (self.b - self.a))

    def laplace(self, lam):
        lam = np.asarray(lam, dtype=complex)
        out = np.empty_like(lam)
        small = np.abs(lam) < 1e-12
        big = ~small
        # ∫_a^b e^{sλ} ds / (b-a)
        out[big] = (np.exp(self.b * lam[big]) - np.exp(self.a * lam[big])) / (
            lam[big] * (self.b - self.a)
        )
        out[small] = 1.0
        return out


@dataclass(frozen=True)
class Tabulated(DelayKernel):
    """Density sampled at ``nodes`` and linearly interpolated; renormalized on discretization."""

    nodes: tuple[float, ...]
    densities: tuple[float, ...]
    tau_max: float
    source: str | None = field(default=None, compare=False)

    def __post_init__(self):
        _check_tau(self.tau_max)
        nodes = tuple(float(x) for x in self.nodes)
        dens = tuple(float(x) for x in self.densities)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "densities", dens)
        if len(nodes) != len(dens) or len(nodes) < 2:
            raise ValueError("tabulated kernel needs >= 2 (offset, density) pairs")
        if any(b <= a for a, b in zip(nodes, nodes[1:])):
            raise ValueError("tabulated offsets must be strictly increasing")
        if nodes[0] < -self.tau_max - 1e-12 or nodes[-1] > 0.0:
            raise ValueError(f"tabulated offsets must lie in [-{self.tau_max}, 0]")
        if any(d < 0 for d in dens):
            raise ValueError("tabulated densities must be nonnegative")
        if not any(d > 0 for d in dens):
            raise ValueError("tabulated density is identically zero")

    @classmethod
    def from_csv(cls, path, tau_max: float) -> "Tabulated":
        rows = []
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].strip().startswith("#"):
                    continue
                try:
                    rows.append((float(row[0]), float(row[1])))
                except ValueError:
                    if rows:
                        raise
                    continue  # header line
        nodes, dens = zip(*rows)
        return cls(nodes, dens, tau_max, source=str(Path(path)))

    def support_separated_from_zero(self):
        positive = [i for i, d in enumerate(self.densities) if d > 0]
        last = positive[-1]
        edge = self.nodes[min(last + 1, len(self.nodes) - 1)]
        return (edge < 0.0, -edge)

    def support_infimum(self):
        first = next(i for i, d in enumerate(self.densities) if d > 0)
        return self.nodes[max(first - 1, 0)]

    def density(self, s):
        return np.interp(s, self.nodes, self.densities, left=0.0, right=0.0)

    def discretize(self, step):
        _check_step(step)
        lo, hi = _on_grid(self.nodes[0], step), _on_grid(self.nodes[-1], step)
        if hi == lo:
            raise ValueError("tabulated support shorter than one step")
        offsets, w = _trapezoid(lo, hi, step)
        w = w * self.density(offsets)
        keep = w > 0
        if not keep.any():
            raise ValueError("tabulated density vanishes on the solver grid")
        mass = float(w.sum())
        return QuadratureRule(offsets[keep], w[keep] / mass, step, mass=mass)

    def laplace(self, lam, nodes: int = 4001):
        s = np.linspace(self.nodes[0], self.nodes[-1], nodes)
        dens = self.density(s)
        lam = np.atleast_1d(np.asarray(lam, dtype=complex))
        vals = dens[None, :] * np.exp(np.outer(lam, s))
        return np.trapezoid(vals, s, axis=1) / np.trapezoid(dens, s)


def support_separated_from_zero(kernel: DelayKernel) -> tuple[bool, float]:
    """``(True, tau_min)`` when all mass sits in ``[-tau, -tau_min]`` with ``tau_min > 0``."""
    return kernel.support_separated_from_zero()


def discretize(kernel: DelayKernel, step: float) -> QuadratureRule:
    return kernel.discretize(step)
