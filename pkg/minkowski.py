"""Tubular neighbourhoods and (generalised) Minkowski content of string boundaries."""
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from dimension_kernel import DimensionFunction, eval_g_inverse, eval_h
from errors import DomainError, InfiniteMeasure, NoCrossover
from string_spectrum import ZETA_TOL, FractalString, TailMode, tail_sum

logger = logging.getLogger(__name__)

# Configuration
MEASURABLE_SPREAD = 0.05
QUARTILE = 4
SLOPE_TOL = 1e-3
DEFAULT_D_GRID = tuple(round(0.05 * i, 2) for i in range(20))

Probe = Union[float, DimensionFunction]


@dataclass
class ContentEstimate:
    eps_grid: list
    values: list
    upper: float
    lower: float
    measurable_flag: bool
    probe: str = ""
    window: list = field(default_factory=list)
    tubular: list = field(default_factory=list)


def _check_eps_grid(eps_grid):
    eps = np.asarray(eps_grid, dtype=float)
    if eps.size == 0 or np.any(~(eps > 0)):
        raise DomainError("eps grid must be nonempty and positive")
    if np.any(np.diff(eps) >= 0):
        raise DomainError("eps grid must be strictly decreasing")
    return eps


def tubular_measure(s: FractalString, eps: float, tol: float = ZETA_TOL) -> float:
    """
    |(dOmega)_eps n Omega| = sum_j min(l_j, 2 eps). Intervals longer than 2 eps
    contribute two collars; the rest contribute their whole length.
    """
    if not eps > 0:
        raise DomainError(f"eps must be positive, got {eps}")
    if not s.finite_measure:
        return math.inf

    width = 2.0 * eps
    parts = [math.fsum(np.minimum(np.asarray(s.prefix, dtype=float), width))] if s.prefix else []
    tail = s.tail
    if tail is None:
        return math.fsum(parts)
    if tail.mode is not TailMode.EXACT:
        logger.info(" -> tubular measure of a non-exact tail uses the representative lengths")

    # j* = largest j >= j0 with l_j > 2 eps
    j_star = max(tail.j0 - 1, int(math.floor(eval_g_inverse(tail.df, tail.L, width))))
    while tail.lengths(float(j_star + 1)) > width:
        j_star += 1
    while j_star >= tail.j0 and not tail.lengths(float(j_star)) > width:
        j_star -= 1

    parts.append(width * (j_star - tail.j0 + 1))
    parts.append(tail.L * tail_sum(tail.df, j_star + 1, tol))
    return math.fsum(parts)


def _describe_probe(probe):
    return probe.describe() if isinstance(probe, DimensionFunction) else f"d={probe!r}"


def _scaled_values(probe, eps, tub):
    if isinstance(probe, DimensionFunction):
        # n = 1: eps^-1 h(eps) |(dOmega)_eps n Omega|
        return eval_h(probe, eps) / eps * tub
    d = float(probe)
    if not 0 <= d < 1:
        raise DomainError(f"exponent probes need 0 <= d < 1, got {d}")
    return eps ** (-(1.0 - d)) * tub


def minkowski_content(s: FractalString, probe: Probe, eps_grid: Sequence[float],
                      tol: float = ZETA_TOL) -> ContentEstimate:
    """
    Scaled tubular measures along a decreasing eps grid. The max and min over
    the last quartile of the grid stand in for the upper and lower content.
    """
    if not s.finite_measure:
        raise InfiniteMeasure("boundary content is undefined for tails with d > 1")
    eps = _check_eps_grid(eps_grid)
    tub = np.array([tubular_measure(s, e, tol) for e in eps])
    values = _scaled_values(probe, eps, tub)

    width = max(1, math.ceil(len(values) / QUARTILE))
    window = values[-width:]
    upper, lower = float(window.max()), float(window.min())
    measurable = upper > 0 and (upper - lower) / upper <= MEASURABLE_SPREAD
    logger.info(f" -> content window: last {width} of {len(values)} eps values, "
                f"spread {0.0 if upper == 0 else (upper - lower) / upper:.3g}")
    return ContentEstimate(
        eps_grid=eps.tolist(),
        values=values.tolist(),
        upper=upper,
        lower=lower,
        measurable_flag=bool(measurable),
        probe=_describe_probe(probe),
        window=eps[-width:].tolist(),
        tubular=tub.tolist(),
    )


def _log_slope(eps, tub, d):
    """Slope of log(scaled values) against log(1/eps) over the small-eps half of the grid."""
    half = len(eps) // 2
    values = _scaled_values(d, eps[half:], tub[half:])
    if np.any(~(values > 0)):
        raise DomainError("scaled values must be positive for a slope fit")
    return float(np.polyfit(np.log(1.0 / eps[half:]), np.log(values), 1)[0])


def dimension_scan(s: FractalString, d_grid: Sequence[float] = DEFAULT_D_GRID,
                   eps_grid: Sequence[float] = (), tol: float = ZETA_TOL) -> float:
    """
    The probe exponent where the scaled values switch from growing to
    vanishing, by bisection on the sign of the log-log slope.
    """
    if not s.finite_measure:
        raise InfiniteMeasure("Minkowski dimension is only scanned for finite-measure strings")
    if not len(eps_grid):
        eps_grid = [2.0 ** -k for k in range(4, 21)]
    eps = _check_eps_grid(eps_grid)
    if len(eps) < 4:
        raise DomainError("dimension scan needs at least 4 eps values")
    tub = np.array([tubular_measure(s, e, tol) for e in eps])

    grid = sorted(float(d) for d in d_grid)
    slopes = [_log_slope(eps, tub, d) for d in grid]
    for d, slope in zip(grid, slopes):
        if abs(slope) <= SLOPE_TOL:
            return d

    for (d_lo, s_lo), (d_hi, s_hi) in zip(zip(grid, slopes), zip(grid[1:], slopes[1:])):
        if s_lo > 0 > s_hi:
            break
    else:
        side = "diverge" if all(v > 0 for v in slopes) else "vanish"
        raise NoCrossover(f"all probes {side} on d in [{grid[0]}, {grid[-1]}]")

    for _ in range(60):
        mid = 0.5 * (d_lo + d_hi)
        slope = _log_slope(eps, tub, mid)
        if abs(slope) <= SLOPE_TOL or d_hi - d_lo < 1e-9:
            return mid
        if slope > 0:
            d_lo = mid
        else:
            d_hi = mid
    return 0.5 * (d_lo + d_hi)
