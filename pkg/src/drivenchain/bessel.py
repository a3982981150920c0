"""Integer-order Bessel functions of the first kind.

Small arguments use the ascending power series.  Larger arguments use Miller's
downward recurrence normalised with 1 = J_0 + 2 sum_k J_2k, which is stable for
every order because the recurrence is started far above both n and |x|.
"""

from __future__ import annotations

import math
from functools import lru_cache

from .errors import ConvergenceError

MAX_ARGUMENT = 1e4
SERIES_LIMIT = 8.0
_RESCALE = 1e200
_AGREEMENT = 1e-13


def _series(n: int, x: float) -> float:
    half = 0.5 * x
    if half == 0.0:
        return 1.0 if n == 0 else 0.0
    log_lead = n * math.log(half) - math.lgamma(n + 1)
    if log_lead < -745.0:
        return 0.0
    term = math.exp(log_lead)
    total = term
    q = -half * half
    for k in range(1, 500):
        term *= q / (k * (k + n))
        total += term
        if abs(term) <= 1e-17 * max(abs(total), 1e-300):
            return total
    raise ConvergenceError(f"power series for J_{n}({x}) did not converge")


def _miller(n: int, x: float, start: int) -> float:
    two_over_x = 2.0 / x
    j_above, j_here = 0.0, 1e-300
    norm = 0.0
    wanted = 0.0
    for k in range(start, 0, -1):
        j_below = k * two_over_x * j_here - j_above
        j_above, j_here = j_here, j_below
        if abs(j_here) > _RESCALE:
            j_here /= _RESCALE
            j_above /= _RESCALE
            norm /= _RESCALE
            wanted /= _RESCALE
        # j_here now holds J_{k-1} up to a common factor
        if k - 1 == n:
            wanted = j_here
        if (k - 1) % 2 == 0 and k - 1 > 0:
            norm += j_here
    norm = 2.0 * norm + j_here
    return wanted / norm


def _start_index(n: int, x: float) -> int:
    top = max(n, x)
    m = int(top + 30 + math.sqrt(160.0 * top))
    return m + (m % 2)


def bessel_j(n: int, x: float) -> float:
    """J_n(x) for integer n and |x| <= 1e4, absolute accuracy about 1e-12."""
    n = int(n)
    x = float(x)
    if not math.isfinite(x) or abs(x) > MAX_ARGUMENT:
        raise ValueError(f"bessel_j argument must satisfy |x| <= {MAX_ARGUMENT:g}, got {x}")
    if n < 0:
        return (-1) ** (-n) * bessel_j(-n, x)
    if x == 0.0:
        return 1.0 if n == 0 else 0.0
    sign = -1.0 if (x < 0 and n % 2) else 1.0
    ax = abs(x)
    if ax <= SERIES_LIMIT:
        return sign * _series(n, ax)

    start = _start_index(n, ax)
    value = _miller(n, ax, start)
    for _ in range(4):
        start += max(40, start // 4)
        refined = _miller(n, ax, start)
        if abs(refined - value) <= _AGREEMENT:
            return sign * refined
        value = refined
    raise ConvergenceError(f"Miller recurrence for J_{n}({x}) did not converge")


@lru_cache(maxsize=None)
def bessel_j0_zero(k: int) -> float:
    """k-th positive zero of J_0, located by bisection (k >= 1)."""
    if k < 1:
        raise ValueError("zero index starts at 1")
    centre = (k - 0.25) * math.pi
    lo, hi = centre - 0.5, centre + 0.5
    f_lo = bessel_j(0, lo)
    if f_lo * bessel_j(0, hi) > 0:
        raise ConvergenceError(f"J_0 zero {k} not bracketed by [{lo}, {hi}]")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        f_mid = bessel_j(0, mid)
        if f_mid == 0.0:
            return mid
        if (f_mid > 0) == (f_lo > 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def z01() -> float:
    return bessel_j0_zero(1)


def z02() -> float:
    return bessel_j0_zero(2)
