"""
Euler-Maclaurin constants of decreasing summands and zeta on (0,1) u (1,inf).

    C = lim_{b->inf} ( sum_{j=a}^b f(j) - int_a^b f(t) dt )
"""
import logging
import math
import os
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np
from dotenv import load_dotenv

from dimension_kernel import adaptive_integral
from errors import BudgetExceeded, DomainError, NotDecreasing, PoleAtOne

load_dotenv()
logger = logging.getLogger(__name__)

# Configuration
CHUNK = int(os.getenv("SPECTRA_CHUNK", str(1 << 20)))
EM_START = 1 << 10
MAX_TERMS = 1 << 30
POLE_GUARD = 1e-9
DEFAULT_TOL = float(os.getenv("SPECTRA_TOL", "1e-10"))


@dataclass
class SummationEstimate:
    constant: float
    error_bracket: float
    b_used: int


def compensated_sum(values: Iterable[float]) -> float:
    """fsum over fixed-size chunks, then fsum of the chunk partials."""
    arr = np.asarray(values, dtype=float).ravel()
    partials = [math.fsum(arr[i:i + CHUNK]) for i in range(0, arr.size, CHUNK)]
    return math.fsum(partials)


def _takes_arrays(f, a):
    try:
        return np.asarray(f(np.array([a, a + 1.0])), dtype=float).shape == (2,)
    except (TypeError, ValueError):
        return False


def _evaluate(f, j, vectorised=True):
    if vectorised:
        return np.asarray(f(j), dtype=float)
    return np.fromiter((f(float(t)) for t in j), dtype=float, count=j.size)


def _partial_sums(f, start, stop, previous, vectorised=True):
    """fsum partials of f(j) for start <= j <= stop, checking monotonicity on the way."""
    partials = []
    for lo in range(start, stop + 1, CHUNK):
        j = np.arange(lo, min(lo + CHUNK, stop + 1), dtype=float)
        vals = _evaluate(f, j, vectorised)
        if np.any(vals < 0) or not np.all(np.isfinite(vals)):
            raise NotDecreasing(f"summand is negative or non-finite near j={lo}")
        if vals[0] > previous or np.any(np.diff(vals) > 0):
            raise NotDecreasing(f"summand increases between j={lo} and j={int(j[-1])}")
        previous = vals[-1]
        partials.append(math.fsum(vals))
    return partials, previous


def euler_maclaurin_constant(f: Callable, a: int = 1, target_tol: float = DEFAULT_TOL) -> SummationEstimate:
    """
    Doubles b from 2^10 until f(b) <= target_tol. The sum and the integral
    are both extended over [b, 2b] at each doubling, so no work is repeated.
    error_bracket is f(b_used), the size of the first-order remainder.
    """
    if a < 1 or int(a) != a:
        raise DomainError(f"start index must be a positive integer, got {a}")
    if not target_tol > 0:
        raise DomainError("target_tol must be positive")
    a = int(a)
    vectorised = _takes_arrays(f, float(a))
    if vectorised:
        scalar = lambda t: float(np.asarray(f(np.array([t])), dtype=float)[0])
    else:
        scalar = lambda t: float(f(float(t)))

    b = EM_START
    while b < a:
        b *= 2
    sums, last = _partial_sums(f, a, b, math.inf, vectorised)
    pieces = [adaptive_integral(scalar, a, b)] if b > a else []

    while last > target_tol:
        if 2 * b > MAX_TERMS:
            raise BudgetExceeded(f"f(b) = {last:.3g} still above {target_tol:.3g} at b = {b}")
        more, last = _partial_sums(f, b + 1, 2 * b, last, vectorised)
        sums.extend(more)
        pieces.append(adaptive_integral(scalar, b, 2 * b))
        b *= 2
        logger.debug(f" -> b = {b}, f(b) = {last:.3g}")

    constant = math.fsum(sums) - math.fsum(pieces)
    return SummationEstimate(constant=constant, error_bracket=last, b_used=b)


def zeta_truncation(d: float, tol: float) -> int:
    """Smallest b with d * b^(-d-1) / 12 <= tol, the first omitted Euler-Maclaurin term."""
    b = math.ceil((d / (12.0 * tol)) ** (1.0 / (d + 1.0)))
    return max(64, 2 * b)


def zeta_extended(d: float, tol: float = DEFAULT_TOL) -> float:
    """
    zeta(d) for real d > 0, d != 1, from

        sum_{j<=b} j^-d - int_1^b t^-d dt  ->  zeta(d) - 1/(d-1)

    with the midpoint term -b^-d/2. For d < 1 the partial sums diverge but
    the difference converges; for d > 1 the integral is the tail estimate.
    """
    if not d > 0:
        raise DomainError(f"zeta_extended needs d > 0, got {d}")
    if abs(d - 1.0) < POLE_GUARD:
        raise PoleAtOne(f"d = {d} is within {POLE_GUARD} of the pole")
    if not tol > 0:
        raise DomainError("tol must be positive")

    b = zeta_truncation(d, tol)
    if b > MAX_TERMS:
        raise BudgetExceeded(f"zeta({d}) to {tol:.1e} needs b = {b} terms")

    partials = []
    for lo in range(1, b + 1, CHUNK):
        j = np.arange(lo, min(lo + CHUNK, b + 1), dtype=float)
        partials.append(math.fsum(j ** -d))
    head = math.fsum(partials)
    # int_1^b t^-d dt = (b^(1-d) - 1)/(1-d); adding 1/(d-1) cancels the -1
    return math.fsum([head, b ** (1.0 - d) / (d - 1.0), -0.5 * b ** (-d)])
