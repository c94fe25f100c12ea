"""Fixed-step method-of-steps integrator for cascades with distributed delays.

Classic RK4 advances the state; delayed values come from the stored grid (kernel
nodes are multiples of the step) or, at RK half-stages, from the cubic Hermite
midpoint of the bracketing (state, derivative) pairs. Every lookup is computed in
integer/half-integer grid positions, so integrations are bit-identical under a
shift of ``t0``.

Independent initial histories with the same system are integrated as one batch.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .kernels import QuadratureRule
from .model import CascadeSpec, Hill, clamp_extend

POSITIVITY_FLOOR = -1e-9


class BlowUpError(FloatingPointError):
    """Non-finite state; ``time`` is the first grid time where it appeared."""

    def __init__(self, time: float):
        self.time = time
        super().__init__(f"solution left the finite range at t = {time!r}")


class PositivityError(RuntimeError):
    def __init__(self, time: float, value: float):
        self.time, self.value = time, value
        super().__init__(f"state {value!r} < {POSITIVITY_FLOOR} at t = {time!r}")


@dataclass(frozen=True)
class InitialHistory:
    """Piecewise-linear ``φ`` on ``[-tau, 0]``: ``values[i]`` is the state at ``offsets[i]``."""

    offsets: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        offsets = np.asarray(self.offsets, dtype=float).reshape(-1)
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.shape[0] != offsets.size:
            raise ValueError("one state vector per history offset is required")
        if offsets.size > 1 and np.any(np.diff(offsets) <= 0):
            raise ValueError("history offsets must be strictly increasing")
        if offsets[-1] != 0.0:
            raise ValueError("history must end at offset 0")
        if not np.all(np.isfinite(values)):
            raise ValueError("initial history must be finite")
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(self, "values", values)

    @classmethod
    def constant(cls, value, tau: float = 0.0) -> "InitialHistory":
        value = np.atleast_1d(np.asarray(value, dtype=float))
        if tau == 0:
            return cls(np.array([0.0]), value[None, :])
        return cls(np.array([-tau, 0.0]), np.vstack([value, value]))

    @property
    def k(self) -> int:
        return self.values.shape[1]

    @property
    def tau(self) -> float:
        return -float(self.offsets[0])

    def __call__(self, s) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        if np.any(s > 0) or np.any(s < self.offsets[0] - 1e-12):
            raise ValueError("history queried outside [-tau, 0]")
        if self.offsets.size == 1:
            return np.repeat(self.values, s.size, axis=0)
        return np.column_stack(
            [np.interp(s, self.offsets, self.values[:, j]) for j in range(self.k)]
        )


@dataclass
class History:
    """Initial function plus the computed grid solution with derivatives (dense via Hermite)."""

    t0: float
    phi: InitialHistory
    times: np.ndarray
    states: np.ndarray
    derivs: np.ndarray

    def __post_init__(self):
        if self.times.size > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("history nodes must be strictly increasing")
        if self.states.shape[1] != self.phi.k:
            raise ValueError("state length does not match the initial function")

    @property
    def k(self) -> int:
        return self.states.shape[1]

    def evaluate(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        lo = self.t0 - self.phi.tau
        hi = self.times[-1]
        if np.any(t < lo - 1e-12) or np.any(t > hi + 1e-12 * max(1.0, abs(hi))):
            raise ValueError(f"history queried outside [{lo!r}, {hi!r}]")
        out = np.empty((t.size, self.k))
        before = t < self.t0
        if before.any():
            out[before] = self.phi(t[before] - self.t0)
        after = ~before
        if after.any():
            ta = np.minimum(t[after], hi)
            m = np.clip(np.searchsorted(self.times, ta, side="right") - 1, 0, self.times.size - 2)
            h = self.times[m + 1] - self.times[m]
            s = ((ta - self.times[m]) / h)[:, None]
            h = h[:, None]
            h00 = (1 + 2 * s) * (1 - s) ** 2
            h10 = s * (1 - s) ** 2
            h01 = s * s * (3 - 2 * s)
            h11 = s * s * (s - 1)
            out[after] = (
                h00 * self.states[m]
                + h10 * h * self.derivs[m]
                + h01 * self.states[m + 1]
                + h11 * h * self.derivs[m + 1]
            )
        return out


@dataclass
class Trajectory:
    history: History
    step: float
    meta: dict = field(default_factory=dict)

    @property
    def times(self) -> np.ndarray:
        return self.history.times

    @property
    def states(self) -> np.ndarray:
        return self.history.states

    @property
    def t_end(self) -> float:
        return float(self.history.times[-1])

    def __call__(self, t) -> np.ndarray:
        return self.history.evaluate(t)

    @classmethod
    def from_samples(cls, times, states, meta=None) -> "Trajectory":
        """Wrap externally sampled data (equispaced) so the analysis helpers apply."""
        times = np.asarray(times, dtype=float)
        states = np.asarray(states, dtype=float)
        if states.ndim == 1:
            states = states[:, None]
        step = float(times[1] - times[0])
        derivs = np.gradient(states, times, axis=0)
        phi = InitialHistory.constant(states[0])
        hist = History(float(times[0]), phi, times, states, derivs)
        return cls(hist, step, dict(meta or {}))

    def to_csv(self, path) -> None:
        write_csv(path, self.times, self.states)


def write_csv(path, times, states) -> None:
    k = states.shape[1]
    with open(path, "w", newline="") as fh:
        fh.write(",".join(["t"] + [f"x{j + 1}" for j in range(k)]) + "\n")
        for t, row in zip(times, states):
            fh.write(",".join(f"{v:.17g}" for v in (t, *row)) + "\n")


def _grid_count(span: float, step: float, what: str) -> int:
    n = round(span / step)
    if abs(n * step - span) > 1e-9 * max(step, abs(span)):
        raise ValueError(f"step {step!r} does not divide {what} {span!r}")
    return int(n)


class _Marcher:
    """Batched RK4 on a fixed grid; ``combine(x, past)`` returns derivatives.

    ``past[:, i, :]`` holds the state at ``lags[i]`` steps before the stage time
    (lag 0 is the stage state itself).
    """

    def __init__(self, lags: np.ndarray, combine: Callable, phis: Sequence[InitialHistory],
                 step: float, n_steps: int):
        self.lags = np.asarray(lags, dtype=np.int64)
        self.combine = combine
        self.step = step
        self.n_steps = n_steps
        self.max_lag = int(self.lags.max()) if self.lags.size else 0
        self.batch = len(phis)
        self.k = phis[0].k
        # half-grid store: index 2*(p + max_lag) for grid position p
        size = 2 * (self.max_lag + n_steps) + 1
        self.half = np.zeros((self.batch, size, self.k))
        pre = np.arange(-2 * self.max_lag, 1) / 2.0 * step
        for b, phi in enumerate(phis):
            if phi.k != self.k:
                raise ValueError("all initial histories must have the same dimension")
            if phi.offsets.size > 1 and pre[0] < phi.offsets[0] - 1e-9 * step:
                raise ValueError("initial history shorter than the largest delay")
            self.half[b, : pre.size] = phi(np.maximum(pre, phi.offsets[0]))
        self.derivs = np.zeros((self.batch, n_steps + 1, self.k))
        self._zero_lag = np.flatnonzero(self.lags == 0)
        self._idx0 = 2 * (self.max_lag - self.lags)

    def _past(self, n: int, c2: int, x: np.ndarray) -> np.ndarray:
        # c2 = 2 * stage offset (0, 1 or 2)
        past = self.half[:, self._idx0 + (2 * n + c2), :]
        if self._zero_lag.size:
            past[:, self._zero_lag, :] = x[:, None, :]
        return past

    def _rhs(self, n: int, c2: int, x: np.ndarray) -> np.ndarray:
        return self.combine(x, self._past(n, c2, x))

    def run(self, t0: float) -> tuple[np.ndarray, np.ndarray]:
        h = self.step
        base = 2 * self.max_lag
        x = self.half[:, base].copy()
        self.derivs[:, 0] = self._rhs(0, 0, x)
        for n in range(self.n_steps):
            d = self.derivs[:, n]
            k2 = self._rhs(n, 1, x + 0.5 * h * d)
            k3 = self._rhs(n, 1, x + 0.5 * h * k2)
            k4 = self._rhs(n, 2, x + h * k3)
            x = x + (h / 6.0) * (d + 2.0 * k2 + 2.0 * k3 + k4)
            if not np.all(np.isfinite(x)):
                raise BlowUpError(t0 + (n + 1) * h)
            i = base + 2 * (n + 1)
            self.half[:, i] = x
            d1 = self._rhs(n + 1, 0, x)
            if not np.all(np.isfinite(d1)):
                raise BlowUpError(t0 + (n + 1) * h)
            self.derivs[:, n + 1] = d1
            # Hermite midpoint of [t_n, t_{n+1}]
            self.half[:, i - 1] = 0.5 * (self.half[:, i - 2] + x) + (h / 8.0) * (d - d1)
        states = self.half[:, base::2]
        return states, self.derivs


def _as_history(phi, k: int, tau: float) -> InitialHistory:
    if isinstance(phi, InitialHistory):
        return phi
    return InitialHistory.constant(np.broadcast_to(np.asarray(phi, dtype=float), (k,)), tau)


def _spec_hash(spec) -> str:
    return hashlib.sha256(repr(spec).encode()).hexdigest()[:16]


def _cascade_combine(spec: CascadeSpec, rules: list[QuadratureRule]):
    lags = np.unique(np.concatenate([r.lags for r in rules]))
    pos = [np.searchsorted(lags, r.lags) for r in rules]
    weights = [np.asarray(r.weights) for r in rules]
    f = clamp_extend(spec.feedback)
    k = spec.k
    mu = np.asarray(spec.mu)
    alpha = spec.alpha

    # point-mass rules read one column instead of a weighted sum
    single = [int(p[0]) if w.size == 1 else None for p, w in zip(pos, weights)]

    def combine(x, past):
        out = np.empty_like(x)
        if single[0] is not None:
            out[:, 0] = f.evaluate(past[:, single[0], k - 1])
        else:
            out[:, 0] = f.evaluate(past[:, pos[0], k - 1]) @ weights[0]
        for j in range(1, k):
            if single[j] is not None:
                out[:, j] = alpha[j - 1] * past[:, single[j], j - 1]
            else:
                out[:, j] = alpha[j - 1] * (past[:, pos[j], j - 1] @ weights[j])
        out -= mu * x
        return out

    return lags, combine


def _finish(states, derivs, phis, t0, step, meta, check_positive) -> list[Trajectory]:
    n1 = states.shape[1]
    times = t0 + step * np.arange(n1)
    out = []
    for b, phi in enumerate(phis):
        s = np.ascontiguousarray(states[b])
        if check_positive and np.all(phi.values >= 0):
            j = np.unravel_index(np.argmin(s), s.shape)
            if s[j] < POSITIVITY_FLOOR:
                raise PositivityError(float(times[j[0]]), float(s[j]))
        hist = History(t0, phi, times, s, np.ascontiguousarray(derivs[b]))
        out.append(Trajectory(hist, step, dict(meta)))
    return out


def integrate_batch(spec: CascadeSpec, phis, t_end: float, step: float, t0: float = 0.0) -> list[Trajectory]:
    """Integrate ``spec`` from each initial history in ``phis`` on a shared grid."""
    if not step > 0:
        raise ValueError("step must be positive")
    if not t_end > t0:
        raise ValueError("t_end must exceed t0")
    if spec.tau > 0:
        _grid_count(spec.tau, step, "tau_max")
    n_steps = _grid_count(t_end - t0, step, "the integration span")
    phis = [_as_history(p, spec.k, spec.tau) for p in phis]
    for p in phis:
        if p.k != spec.k:
            raise ValueError(f"initial history has {p.k} components, system has {spec.k}")
    rules = [kern.discretize(step) for kern in spec.kernels]
    lags, combine = _cascade_combine(spec, rules)
    states, derivs = _Marcher(lags, combine, phis, step, n_steps).run(t0)
    meta = {
        "spec_hash": _spec_hash(spec),
        "rules": [(r.offsets.tolist(), r.weights.tolist()) for r in rules],
    }
    positive = isinstance(spec.feedback, Hill)
    return _finish(states, derivs, phis, t0, step, meta, positive)


def integrate(spec: CascadeSpec, phi, t_end: float, step: float, t0: float = 0.0) -> Trajectory:
    """Single integration; ``phi`` is an :class:`InitialHistory` or a constant state."""
    return integrate_batch(spec, [phi], t_end, step, t0)[0]


def integrate_rhs(
    rhs: Callable[[np.ndarray, np.ndarray], np.ndarray],
    k: int,
    tau: float,
    phis,
    t_end: float,
    step: float,
    t0: float = 0.0,
) -> list[Trajectory]:
    """Generic hook for systems outside the cascade form with one discrete delay ``tau``.

    ``rhs(x, x_tau)`` receives batched arrays of shape ``(batch, k)`` for ``x(t)``
    and ``x(t - tau)``.
    """
    if not step > 0:
        raise ValueError("step must be positive")
    lag = _grid_count(tau, step, "tau") if tau > 0 else 0
    n_steps = _grid_count(t_end - t0, step, "the integration span")
    if isinstance(phis, InitialHistory) or not isinstance(phis, (list, tuple)):
        phis = [phis]
    phis = [_as_history(p, k, tau) for p in phis]
    lags = np.array([0, lag]) if lag else np.array([0])
    last = lags.size - 1

    def combine(x, past):
        return rhs(x, past[:, last, :])

    states, derivs = _Marcher(lags, combine, phis, step, n_steps).run(t0)
    return _finish(states, derivs, phis, t0, step, {"rhs": getattr(rhs, "__name__", "rhs")}, False)


@dataclass(frozen=True)
class ConvergenceVerdict:
    converged: bool
    sup_deviation: float
    window: float


def _window_mask(traj: Trajectory, window: float) -> np.ndarray:
    span = traj.t_end - float(traj.times[0])
    if window > span + 1e-12:
        raise ValueError(f"window {window!r} longer than trajectory span {span!r}")
    return traj.times >= traj.t_end - window - 1e-12 * max(1.0, abs(traj.t_end))


def default_window(tau: float) -> float:
    return max(tau, 10.0)


def check_convergence(traj: Trajectory, target, tol: float = 1e-6, window: float | None = None) -> ConvergenceVerdict:
    """Converged iff the trailing-window sup-norm distance to ``target`` is at most ``tol``."""
    if window is None:
        window = default_window(traj.history.phi.tau)
    mask = _window_mask(traj, window)
    dev = np.abs(traj.states[mask] - np.asarray(target, dtype=float))
    sup = float(dev.max()) if dev.size else 0.0
    return ConvergenceVerdict(sup <= tol, sup, window)


@dataclass(frozen=True)
class OscillationMetrics:
    amplitude: np.ndarray
    period: float | None
    crossings: int


def oscillation_metrics(traj: Trajectory, window: float) -> OscillationMetrics:
    """Half peak-to-peak amplitude per component; period from upward mean crossings."""
    mask = _window_mask(traj, window)
    t = traj.times[mask]
    x = traj.states[mask]
    amp = 0.5 * (x.max(axis=0) - x.min(axis=0))
    j = int(np.argmax(amp))
    if amp[j] == 0:
        return OscillationMetrics(amp, None, 0)
    y = x[:, j] - x[:, j].mean()
    up = np.flatnonzero((y[:-1] < 0) & (y[1:] >= 0))
    if up.size < 4:
        return OscillationMetrics(amp, None, int(up.size))
    # linear interpolation of crossing instants
    tc = t[up] - y[up] * (t[up + 1] - t[up]) / (y[up + 1] - y[up])
    return OscillationMetrics(amp, float(np.mean(np.diff(tc))), int(up.size))


def random_history(seed: int, k: int, tau: float, bounds, nodes: int = 11) -> InitialHistory:
    """Piecewise-linear history with i.i.d. uniform values at equispaced offsets."""
    if nodes < 2:
        raise ValueError("nodes must be >= 2")
    b = np.asarray(bounds, dtype=float)
    if b.ndim == 1:
        b = np.broadcast_to(b, (k, 2))
    if b.shape != (k, 2) or np.any(b[:, 1] < b[:, 0]):
        raise ValueError("bounds must be k (lo, hi) pairs with lo <= hi")
    rng = np.random.default_rng(seed)
    values = rng.uniform(b[:, 0], b[:, 1], size=(nodes, k))
    if tau == 0:
        return InitialHistory(np.array([0.0]), values[-1:])
    offsets = np.linspace(-tau, 0.0, nodes)
    offsets[-1] = 0.0
    return InitialHistory(offsets, values)
