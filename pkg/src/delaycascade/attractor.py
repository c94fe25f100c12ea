"""Nested-box certificates that 0 is a strong attractor of a cyclic map.

The cycle map is ``H(y) = (h_1(y_k), h_2(y_1), ..., h_k(y_{k-1}))`` with slope
bounds ``|h_1(x)| < β_1|x|`` (x ≠ 0) and ``|h_j(x)| <= β_j|x|``. Boxes
``I_m = ∏[-a_j(m), a_j(m)]`` follow ``a_j(1) = q_j a`` and
``a_j(m+1) = β_j a_{j-1}(m)`` (index 0 meaning ``k``). When ``∏β = 1`` the first
slope is replaced by a strictly increasing majorant ``h̃_1`` squeezed between
``|h_1|`` and ``β_1|x|``.

All checks here sample the maps; they falsify, they do not prove.
"""

from __future__ import annotations

import bisect as _bisect
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.stats import qmc

from .hill import cone_slope
from .model import Hill, clamp_extend

ScalarMap = Callable[[np.ndarray], np.ndarray]

SLOPE_SAMPLES = 10_000
MAJORANT_GRID = 4096
DEFAULT_RADIUS_BOUND = 1e-8


class CertificationError(ValueError):
    """A sampled slope bound or a construction inequality does not hold."""

    def __init__(self, message: str, witness=None):
        self.witness = witness
        super().__init__(message if witness is None else f"{message} (witness {witness})")


@dataclass(frozen=True)
class CycleMap:
    h_fns: tuple[ScalarMap, ...]
    betas: tuple[float, ...]
    monotone: tuple[bool, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "h_fns", tuple(self.h_fns))
        object.__setattr__(self, "betas", tuple(float(b) for b in self.betas))
        if len(self.h_fns) != len(self.betas) or not self.betas:
            raise ValueError("one slope per map component is required")
        if any(b < 0 for b in self.betas):
            raise ValueError("slopes must be nonnegative")
        mono = tuple(self.monotone) or (False,) * self.k
        if len(mono) != self.k:
            raise ValueError("monotone flags must match k")
        object.__setattr__(self, "monotone", mono)

    @property
    def k(self) -> int:
        return len(self.betas)

    @property
    def beta_product(self) -> float:
        return math.prod(self.betas)

    def __call__(self, y) -> np.ndarray:
        """Apply ``H`` to points stored along the last axis."""
        y = np.asarray(y, dtype=float)
        out = np.empty_like(y)
        for j in range(self.k):
            out[..., j] = self.h_fns[j](y[..., j - 1])
        return out

    def replace(self, j: int, fn: ScalarMap, monotone: bool | None = None) -> "CycleMap":
        fns = list(self.h_fns)
        fns[j] = fn
        mono = list(self.monotone)
        if monotone is not None:
            mono[j] = monotone
        return CycleMap(tuple(fns), self.betas, tuple(mono))

    def certify_slopes(self, radius: Sequence[float], samples: int = SLOPE_SAMPLES,
                       strict_first: bool | None = None) -> None:
        """Check the slope bounds at ``samples`` points of ``[-R, R]`` per component.

        ``radius[j]`` bounds the argument of ``h_j``, i.e. it is the radius of
        component ``j-1`` of the working box. The bound on ``h_1`` is strict only
        when ``∏β = 1`` (default); below 1 the non-strict bound already contracts.
        """
        if strict_first is None:
            strict_first = self.beta_product >= 1.0
        for j in range(self.k):
            r = float(radius[j])
            if r == 0:
                continue
            xs = np.linspace(-r, r, samples)
            xs = xs[xs != 0.0]
            vals = np.abs(np.asarray(self.h_fns[j](xs), dtype=float))
            bound = self.betas[j] * np.abs(xs)
            bad = vals >= bound if (j == 0 and strict_first) else vals > bound
            if np.any(bad):
                i = int(np.argmax(bad))
                raise CertificationError(
                    f"slope bound for h_{j + 1} violated", witness=(float(xs[i]), float(vals[i]))
                )


def choose_q(betas: Sequence[float]) -> tuple[float, ...]:
    """``q_1..q_{k-1}`` with ``β_1⋯β_j < q_j < q_{j+1}/β_{j+1}`` (``q_k = 1``).

    ``q_j = β_1⋯β_j + ε_j`` with ``ε_k = 1 - ∏β`` and ``ε_j = ε_{j+1}/(2β_{j+1})``.
    """
    betas = [float(b) for b in betas]
    k = len(betas)
    prod = math.prod(betas)
    if not prod < 1:
        raise ValueError(f"choose_q needs a slope product below 1, got {prod!r}")
    eps = [0.0] * k
    eps[k - 1] = 1.0 - prod
    for j in range(k - 2, -1, -1):
        nxt = betas[j + 1]
        eps[j] = eps[j + 1] / (2.0 * nxt) if nxt > 0 else eps[j + 1]
    partial = np.cumprod(betas)
    q = [float(partial[j] + eps[j]) for j in range(k - 1)] + [1.0]
    for j in range(k - 1):
        if not partial[j] < q[j]:
            raise CertificationError(f"q_{j + 1} does not exceed beta_1..beta_{j + 1}")
        if betas[j + 1] > 0 and not q[j] < q[j + 1] / betas[j + 1]:
            raise CertificationError(f"q_{j + 1} is not below q_{j + 2}/beta_{j + 2}")
    return tuple(q[:-1])


@dataclass(frozen=True)
class TildeMajorant:
    """Piecewise-linear ``h̃_1(x) = (M(x) + β_1 x)/2`` on ``[0, x_max]``; ``M`` is the running max of ``|h_1|``."""

    nodes: np.ndarray
    values: np.ndarray
    beta1: float

    def __post_init__(self):
        object.__setattr__(self, "_xs", self.nodes.tolist())
        object.__setattr__(self, "_ys", self.values.tolist())

    @property
    def x_max(self) -> float:
        return float(self.nodes[-1])

    def scalar(self, x: float) -> float:
        if x < 0 or x > self.x_max * (1 + 1e-12):
            raise ValueError(f"majorant evaluated outside [0, {self.x_max}]")
        xs, ys = self._xs, self._ys
        i = min(max(_bisect.bisect_right(xs, x) - 1, 0), len(xs) - 2)
        w = (x - xs[i]) / (xs[i + 1] - xs[i])
        return ys[i] + w * (ys[i + 1] - ys[i])

    def __call__(self, x):
        if np.ndim(x) == 0:
            return self.scalar(float(x))
        return np.interp(x, self.nodes, self.values)


def tilde_majorant(h1: ScalarMap, beta1: float, x_max: float, grid: int = MAJORANT_GRID) -> TildeMajorant:
    if not x_max > 0 or grid < 2:
        raise ValueError("tilde_majorant needs x_max > 0 and grid >= 2")
    xs = np.linspace(0.0, x_max, grid)
    # |h_1| over both signs, so that the majorant bounds h_1 on [-x, x]
    mag = np.maximum(np.abs(h1(xs)), np.abs(h1(-xs)))
    bound = beta1 * xs
    if np.any(mag[1:] >= bound[1:]):
        i = 1 + int(np.argmax(mag[1:] >= bound[1:]))
        raise CertificationError("|h_1(x)| < beta_1 x fails", witness=(float(xs[i]), float(mag[i])))
    running = np.maximum.accumulate(mag)
    vals = 0.5 * (running + bound)
    inner = slice(1, None)
    if not (np.all(running[inner] < vals[inner]) and np.all(vals[inner] < bound[inner])):
        raise CertificationError("majorant is not strictly between |h_1| and beta_1 x")
    if np.any(np.diff(vals) <= 0):
        raise CertificationError("majorant is not strictly increasing")
    return TildeMajorant(xs, vals, beta1)


@dataclass(frozen=True)
class BoxSequence:
    """``radii[m-1, j]`` is ``a_{j+1}(m)``."""

    radii: np.ndarray
    q: tuple[float, ...]
    start: float
    strict_case: bool
    effective_betas: tuple[float, ...]
    K_radius: tuple[float, ...]
    majorant: TildeMajorant | None = field(default=None, repr=False)
    notes: tuple[str, ...] = ()

    @property
    def m_max(self) -> int:
        return self.radii.shape[0]

    @property
    def k(self) -> int:
        return self.radii.shape[1]

    def final_radius(self) -> float:
        return float(self.radii[-1].max())

    def rows(self):
        return [(m + 1, *map(float, self.radii[m])) for m in range(self.m_max)]


def box_sequence(cmap: CycleMap, K_radius: Sequence[float], m_max: int,
                 grid: int = MAJORANT_GRID) -> BoxSequence:
    """Nested boxes starting from a box that contains ``K`` in its interior."""
    if m_max < 2:
        raise ValueError("m_max must be at least 2")
    K = tuple(float(r) for r in K_radius)
    if len(K) != cmap.k or any(r < 0 for r in K):
        raise ValueError("K_radius needs k nonnegative entries")
    k, betas = cmap.k, cmap.betas
    prod = cmap.beta_product
    if prod > 1.0:
        raise CertificationError(f"slope product {prod!r} exceeds 1")
    notes: list[str] = []
    majorant = None
    if prod < 1.0:
        eff = betas
        q = choose_q(eff) + (1.0,)
        # interior: q_j a > K_j with a 1% margin; any a > 0 works for K = {0}
        need = max((K[j] / q[j] for j in range(k)), default=0.0)
        a = 1.01 * need if need > 0 else 1.0
    else:
        a_tilde = 1.01 * max(K) if max(K) > 0 else 1.0
        a = a_tilde / float(np.cumprod(betas).min())
        for attempt in range(50):
            majorant = tilde_majorant(cmap.h_fns[0], betas[0], a, grid)
            eff = (majorant.scalar(a) / a,) + betas[1:]
            q = choose_q(eff) + (1.0,)
            if all(q[j] * a > K[j] for j in range(k)):
                break
            # the literal a = ã/r uses the original β_1; enlarge with the replaced slope
            a = a_tilde / float(np.cumprod(eff).min())
            if attempt == 0:
                notes.append("start radius enlarged using h~(a)/a in place of beta_1")
        else:
            raise CertificationError("no start radius places K inside I_1")
        notes.append(f"product one: beta_1 replaced by h~(a)/a = {eff[0]:.17g}, a = {a:.17g}")
    # slope bounds must hold on the first box, which contains every later box
    cmap.certify_slopes([q[j - 1] * a for j in range(k)])
    radii = np.empty((m_max, k))
    radii[0] = [q[j] * a for j in range(k)]
    for m in range(1, m_max):
        prev = radii[m - 1]
        if majorant is None:
            radii[m, 0] = betas[0] * prev[k - 1]
        else:
            radii[m, 0] = majorant.scalar(float(prev[k - 1]))
        for j in range(1, k):
            radii[m, j] = betas[j] * prev[j - 1]
    if np.any(radii[1] >= radii[0]):
        notes.append("first step is not nested")
    return BoxSequence(radii, tuple(q[:-1]), a, prod < 1.0, tuple(eff), K, majorant, tuple(notes))


@dataclass(frozen=True)
class ConditionResult:
    status: str  # "pass", "fail" or "pending"
    detail: str
    witness: tuple | None = None

    @property
    def passed(self) -> bool:
        return self.status == "pass"


@dataclass(frozen=True)
class AttractorReport:
    b1: ConditionResult
    b2: ConditionResult
    b3: ConditionResult
    caveat: str = "sampling-based falsification check, not a proof"

    @property
    def passed(self) -> bool:
        return self.b1.passed and self.b2.passed and self.b3.passed

    @property
    def failed(self) -> bool:
        return any(c.status == "fail" for c in (self.b1, self.b2, self.b3))

    def lines(self) -> list[str]:
        return [f"{name}: {c.status} - {c.detail}" for name, c in
                (("B1", self.b1), ("B2", self.b2), ("B3", self.b3))] + [f"note: {self.caveat}"]


def _face_points(radii: np.ndarray, samples: int, sampler) -> np.ndarray:
    k = radii.size
    corners = np.array(np.meshgrid(*[[-r, r] for r in radii], indexing="ij")).reshape(k, -1).T
    if samples <= 0:
        return corners
    u = sampler[:samples]
    pts = [corners]
    for j in range(k):
        for sign in (-1.0, 1.0):
            face = (2.0 * u - 1.0) * radii
            face[:, j] = sign * radii[j]
            pts.append(face)
    return np.vstack(pts)


def verify_strong_attractor(cmap: CycleMap, boxes: BoxSequence, samples_per_face: int = 64,
                            radius_bound: float = DEFAULT_RADIUS_BOUND) -> AttractorReport:
    radii = boxes.radii
    k, m_max = boxes.k, boxes.m_max
    K = np.array(boxes.K_radius)
    if np.all(K < radii[0]):
        b1 = ConditionResult("pass", "K lies in the interior of I_1")
    else:
        j = int(np.argmax(K >= radii[0]))
        b1 = ConditionResult("fail", f"K reaches the boundary of I_1 in component {j + 1}",
                             (j + 1, float(K[j]), float(radii[0, j])))

    sampler = qmc.Halton(d=k, scramble=False).random(max(samples_per_face, 1) + 1)[1:]
    b2 = ConditionResult("pass", f"H(I_m) in I_(m+1) in int(I_m) for m = 1..{m_max - 1}")
    for m in range(m_max - 1):
        cur, nxt = radii[m], radii[m + 1]
        if np.any(nxt >= cur) and m > 0:
            j = int(np.argmax(nxt >= cur))
            b2 = ConditionResult("fail", f"I_{m + 2} is not inside int(I_{m + 1})",
                                 (m + 1, j + 1, float(nxt[j]), float(cur[j])))
            break
        # sampled image
        pts = _face_points(cur, samples_per_face, sampler)
        img = np.abs(cmap(pts))
        over = img > nxt
        if np.any(over):
            i, j = np.argwhere(over)[0]
            b2 = ConditionResult("fail", f"H(I_{m + 1}) leaves I_{m + 2} in component {j + 1}",
                                 (m + 1, tuple(map(float, pts[i])), float(img[i, j]), float(nxt[j])))
            break
        # exact image of the monotone components: endpoints of the argument interval
        bad = None
        for j in range(k):
            if not cmap.monotone[j]:
                continue
            arg = cur[j - 1]
            ends = np.abs(np.asarray(cmap.h_fns[j](np.array([-arg, arg])), dtype=float))
            if ends.max() > nxt[j]:
                bad = (m + 1, j + 1, float(ends.max()), float(nxt[j]))
                break
        if bad is not None:
            b2 = ConditionResult("fail", f"exact monotone image leaves I_{m + 2}", bad)
            break

    final = float(radii[-1].max())
    diffs = np.diff(radii[1:], axis=0) if m_max > 2 else np.zeros((0, k))
    if diffs.size and np.any(diffs >= 0):
        m = int(np.argwhere(diffs >= 0)[0][0]) + 2
        b3 = ConditionResult("fail", f"radii stop decreasing at m = {m}", (m,))
    elif final < radius_bound:
        b3 = ConditionResult("pass", f"max radius at m = {m_max} is {final:.3e} < {radius_bound:.1e}")
    else:
        b3 = ConditionResult("pending", f"not yet below tolerance: max radius at m = {m_max} is "
                                        f"{final:.3e} >= {radius_bound:.1e}")
    return AttractorReport(b1, b2, b3)


def iterate_map(cmap: CycleMap, y0: Sequence[float], n: int) -> np.ndarray:
    """Orbit ``y(0..n)`` of ``y(n+1) = H(y(n))``."""
    orbit = np.empty((n + 1, cmap.k))
    orbit[0] = y0
    for i in range(n):
        orbit[i + 1] = cmap(orbit[i])
    return orbit


def hes1_cycle_map(h: float, b: float, mu: float, slack: float = 1e-6) -> CycleMap:
    """Cycle map of the dimensionless Hes1 system translated to its steady state ``(μ, 1)``.

    ``h_1(v) = f(v+1) - f(1)`` (with ``f`` clamp-extended below ``v = -1``) and
    ``h_2(u) = u/μ``; ``β_1`` is the cone slope inflated by ``slack`` for the
    strict inequality.
    """
    f = clamp_extend(Hill(mu, b, h))

    def h1(v):
        return f(np.asarray(v, dtype=float) + 1.0) - mu

    def h2(u):
        return np.asarray(u, dtype=float) / mu

    beta1 = cone_slope(h, b, mu) * (1.0 + slack)
    return CycleMap((h1, h2), (beta1, 1.0 / mu), (True, True))
