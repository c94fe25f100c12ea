"""Bracketed bisection shared by the steady-state, Hopf and Hill solvers."""

from __future__ import annotations

import math
from typing import Callable


class BracketError(ValueError):
    """No sign change on the supplied bracket."""

    def __init__(self, lo: float, hi: float, f_lo: float, f_hi: float):
        self.lo, self.hi, self.f_lo, self.f_hi = lo, hi, f_lo, f_hi
        super().__init__(
            f"no sign change on [{lo!r}, {hi!r}]: f(lo)={f_lo!r}, f(hi)={f_hi!r}"
        )


def bisect(
    fn: Callable[[float], float],
    lo: float,
    hi: float,
    xtol: float = 0.0,
    ftol: float = 0.0,
    max_iter: int = 400,
) -> float:
    """Root of ``fn`` on ``[lo, hi]`` by plain bisection.

    Stops when the bracket is narrower than ``xtol``, when ``|fn(mid)| <= ftol``,
    or when the midpoint no longer moves in floating point.
    """
    f_lo, f_hi = fn(lo), fn(hi)
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    if math.copysign(1.0, f_lo) == math.copysign(1.0, f_hi):
        raise BracketError(lo, hi, f_lo, f_hi)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid <= min(lo, hi) or mid >= max(lo, hi):
            break
        f_mid = fn(mid)
        if f_mid == 0.0 or abs(f_mid) <= ftol:
            return mid
        if math.copysign(1.0, f_mid) == math.copysign(1.0, f_lo):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
        if abs(hi - lo) <= xtol:
            break
    return 0.5 * (lo + hi)
