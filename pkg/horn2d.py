"""
Dirichlet-Neumann bracketing for the Laplacian on horns

    Omega = {(x, y) : x >= 1, |y| <= L g(x)},   d > 1

cut into unit-length rectangles. Mixed rectangles Q^j (half-width g(j)) give
the upper count, Dirichlet rectangles Q_j (half-width g(j+1)) the lower one.
"""
import logging
import math
import os
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from dotenv import load_dotenv

from dimension_kernel import DimensionFunction, Regime, eval_f_scaled, eval_g, eval_g_inverse
from errors import BudgetExceeded, DomainError, RegimeError
from string_spectrum import guarded_floor

load_dotenv()
logger = logging.getLogger(__name__)

# Configuration
CHUNK = int(os.getenv("SPECTRA_CHUNK", str(1 << 20)))
MAX_RECTANGLES = 1 << 30
ENVELOPE_SLACK = 0.2
PI = math.pi


@dataclass(frozen=True)
class HornDomain:
    df: DimensionFunction
    L: float = 1.0

    def __post_init__(self):
        if self.df.regime is not Regime.NON_INTEGRABLE:
            raise RegimeError(f"horn profiles need d > 1, got d={self.df.d}")
        if not self.L > 0:
            raise DomainError(f"profile scale must be positive, got L={self.L}")

    def profile(self, x):
        return self.L * eval_g(self.df, x)

    def describe(self) -> str:
        return f"{self.df.describe()};L={self.L!r}"


@dataclass
class BracketResult:
    lam: float
    lower: int
    upper: int
    j_max_lower: int
    j_max_upper: int

    def to_record(self) -> dict:
        return {
            "lambda": self.lam,
            "lower": self.lower,
            "upper": self.upper,
            "j_max_lower": self.j_max_lower,
            "j_max_upper": self.j_max_upper,
        }


# ==========================================
# RECTANGLES
# ==========================================
# A rectangle of length 1 and half-width hw has eigenvalues
# h^2 pi^2 + k^2 pi^2 / (4 hw^2), k >= 1, with h >= 0 (mixed) or h >= 1 (Dirichlet).

def _k_limits(hw, lam):
    """Number of k >= 1 with k^2 pi^2 / (4 hw^2) <= lam."""
    return guarded_floor(2.0 * hw * math.sqrt(lam) / PI)[0]


def _h_counts(hw, k, lam):
    """Number of h >= 1 with h^2 pi^2 <= lam - k^2 pi^2 / (4 hw^2)."""
    rest = np.maximum(lam - (k * PI / (2.0 * hw)) ** 2, 0.0)
    return guarded_floor(np.sqrt(rest) / PI)[0]


def _check_rectangle(half_width, lam):
    if not half_width > 0:
        raise DomainError(f"half width must be positive, got {half_width}")
    if not lam >= 0 or not math.isfinite(lam):
        raise DomainError(f"lambda must be a finite nonnegative number, got {lam}")


def rectangle_count_mixed(half_width: float, lam: float) -> int:
    """#{(h, k) : h >= 0, k >= 1, eigenvalue <= lam}, k outer."""
    _check_rectangle(half_width, lam)
    hw = np.array([float(half_width)])
    kmax = int(_k_limits(hw, lam)[0])
    if kmax == 0:
        return 0
    k = np.arange(1, kmax + 1, dtype=float)
    return int(kmax + _h_counts(hw, k, lam).sum())


def rectangle_count_dirichlet(half_width: float, lam: float) -> int:
    """#{(h, k) : h >= 1, k >= 1, eigenvalue <= lam}: the mixed count without the h = 0 column."""
    _check_rectangle(half_width, lam)
    hw = np.array([float(half_width)])
    kmax = int(_k_limits(hw, lam)[0])
    if kmax == 0:
        return 0
    k = np.arange(1, kmax + 1, dtype=float)
    return int(_h_counts(hw, k, lam).sum())


def mixed_upper_bound(half_width: float, lam: float) -> float:
    """Quarter-ellipse area plus the h = 0 column."""
    return half_width * (lam / (2 * PI) + 2 * math.sqrt(lam) / PI)


def dirichlet_lower_bound(half_width: float, lam: float) -> float:
    """Quarter-ellipse area minus both axes and the corner."""
    root = math.sqrt(lam)
    return half_width * lam / (2 * PI) - root / PI - 2 * half_width * root / PI - 1


# ==========================================
# HORN BRACKETS
# ==========================================

def _upper_cutoff(horn: HornDomain, lam: float) -> int:
    """Largest j whose mixed rectangle admits an eigenvalue <= lam."""
    nonzero = lambda j: _k_limits(np.array([horn.profile(float(j))]), lam)[0] >= 1
    if not nonzero(1):
        return 0
    # hw >= pi / (2 sqrt(lam)) is the analytic pre-estimate
    estimate = float(eval_g_inverse(horn.df, horn.L, PI / (2.0 * math.sqrt(lam))))
    if estimate > MAX_RECTANGLES:
        raise BudgetExceeded(f"about {estimate:.3g} rectangles needed at lambda={lam!r}")
    J = max(1, int(estimate))
    while nonzero(J + 1):
        J += 1
    while J > 1 and not nonzero(J):
        J -= 1
    return J


def horn_bracket(horn: HornDomain, lam: float) -> BracketResult:
    """
    lower = sum_j N_D(L g(j+1)), upper = sum_j N_mixed(L g(j)), both truncated
    where the rectangles stop admitting eigenvalues. The column sums run
    k outer over numpy chunks of j.
    """
    if not lam > 0 or not math.isfinite(lam):
        raise DomainError(f"lambda must be positive, got {lam}")

    J = _upper_cutoff(horn, lam)
    upper = lower = 0
    dirichlet_nonzero = 0

    for lo in range(1, J + 1, CHUNK):
        j = np.arange(lo, min(lo + CHUNK, J + 1), dtype=float)
        hw = horn.profile(j)
        kmax = _k_limits(hw, lam)
        # the h counts of rectangle j' >= 2 are the Dirichlet count of rectangle j' - 1
        shifted = j >= 2
        for k in range(1, int(kmax[0]) + 1):
            n = int(np.count_nonzero(kmax >= k))
            heights = _h_counts(hw[:n], float(k), lam)
            upper += n + int(heights.sum())
            lower += int(heights[shifted[:n]].sum())
            if k == 1:
                dirichlet_nonzero += int(np.count_nonzero(heights >= 1))

    j_max_lower = max(dirichlet_nonzero - 1, 0)
    logger.debug(f" -> lambda={lam!r}: {J} mixed rectangles, {j_max_lower} Dirichlet rectangles")
    return BracketResult(lam=lam, lower=lower, upper=upper, j_max_lower=j_max_lower, j_max_upper=J)


def horn_asymptotic_bounds(horn: HornDomain, lam: float) -> Tuple[float, float]:
    """
    Leading terms of the bracket:
        lower_pred = 1/(d-1) (sqrt(lam)/pi) f_L(sqrt(lam)/(2 pi))
        upper_pred = d/(d-1) sqrt(lam) f_L(2 sqrt(lam)/pi)
    """
    d = horn.df.d
    if not d > 1:
        raise RegimeError(f"horn bounds need d > 1, got d={d}")
    if not lam > 0:
        raise DomainError(f"lambda must be positive, got {lam}")
    root = math.sqrt(lam)
    lower_pred = root / PI * float(eval_f_scaled(horn.df, horn.L, root / (2 * PI))) / (d - 1)
    upper_pred = d / (d - 1) * root * float(eval_f_scaled(horn.df, horn.L, 2 * root / PI))
    return lower_pred, upper_pred


def within_envelope(result: BracketResult, bounds: Tuple[float, float], slack: float = ENVELOPE_SLACK) -> bool:
    """lower >= (1 - slack) lower_pred and upper <= (1 + slack) upper_pred."""
    lower_pred, upper_pred = bounds
    logger.info(f" -> envelope slack {slack:.0%} is heuristic, the o(.) terms carry no rate")
    return result.lower >= (1 - slack) * lower_pred and result.upper <= (1 + slack) * upper_pred
