"""
Dimension functions h in G_d and their transforms

    g(x) = h^{-1}(1/x)      interval lengths
    f(x) = 1 / h(1/x)       boundary-term scale

plus the diagnostics used to check the class hypotheses on a grid and the
shared quadrature wrapper.
"""
import logging
import math
import os
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Sequence

import numpy as np
from dotenv import load_dotenv
from scipy.integrate import quad

from errors import (
    BracketFailure,
    DomainError,
    NonPositiveInput,
    QuadratureNonConvergence,
)

load_dotenv()
logger = logging.getLogger(__name__)

# ==========================================
# CONFIGURATION
# ==========================================
TOL_REL = float(os.getenv("SPECTRA_INVERSION_TOL", "1e-12"))
MAX_EXPANSIONS = 60
MAX_BISECTIONS = 400
# Homogeneity deviations below this are reported as exact zeros
ROUNDOFF_FLOOR = 64 * np.finfo(float).eps
HOMOGENEITY_TOL = 0.1
QUAD_EPSABS = 1e-13
QUAD_EPSREL = 1e-11
QUAD_LIMIT = 200


class Family(Enum):
    POWER = "power"
    POWERLOG = "powerlog"
    POWERLOGLOG = "powerloglog"
    CUSTOM = "custom"


class Regime(Enum):
    INTEGRABLE = "integrable"
    NON_INTEGRABLE = "non_integrable"


def _fmt(value):
    return np.format_float_positional(value, trim="-")


@dataclass(frozen=True)
class DimensionFunction:
    """
    A member of G_d. `custom` is only used by the CUSTOM family and must
    accept numpy arrays.
    """
    family: Family
    d: float
    a: float = 0.0
    custom: Optional[Callable] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if not (self.d > 0) or not math.isfinite(self.d):
            raise DomainError(f"dimension exponent must be positive, got d={self.d}")
        if abs(self.d - 1.0) < 1e-9:
            raise DomainError("d = 1 belongs to neither regime")
        if self.a < 0 or not math.isfinite(self.a):
            raise DomainError(f"log-correction exponent must be >= 0, got a={self.a}")
        if self.family is Family.CUSTOM and not callable(self.custom):
            raise DomainError("custom family needs an evaluator")

    @property
    def regime(self) -> Regime:
        return Regime.INTEGRABLE if self.d < 1 else Regime.NON_INTEGRABLE

    @property
    def is_pure_power(self) -> bool:
        if self.family is Family.POWER:
            return True
        return self.family in (Family.POWERLOG, Family.POWERLOGLOG) and self.a == 0

    @classmethod
    def power(cls, d: float) -> "DimensionFunction":
        return cls(Family.POWER, d)

    @classmethod
    def powerlog(cls, d: float, a: float) -> "DimensionFunction":
        return cls(Family.POWERLOG, d, a)

    @classmethod
    def powerloglog(cls, d: float, a: float) -> "DimensionFunction":
        return cls(Family.POWERLOGLOG, d, a)

    @classmethod
    def from_callable(cls, h: Callable, d: float) -> "DimensionFunction":
        return cls(Family.CUSTOM, d, custom=h)

    @classmethod
    def parse(cls, text: str) -> "DimensionFunction":
        """Parses `power:d=0.5`, `powerlog:d=0.5,a=1`, `powerloglog:d=0.5,a=2`."""
        name, _, params = text.strip().partition(":")
        try:
            family = Family(name.strip().lower())
        except ValueError:
            raise DomainError(f"unknown dimension family '{name}'") from None
        if family is Family.CUSTOM:
            raise DomainError("custom dimension functions cannot be given as text")

        values = {}
        for item in filter(None, (p.strip() for p in params.split(","))):
            key, sep, raw = item.partition("=")
            if not sep or key.strip() not in ("d", "a"):
                raise DomainError(f"bad parameter '{item}' in '{text}'")
            try:
                values[key.strip()] = float(raw)
            except ValueError:
                raise DomainError(f"parameter '{item}' is not a number") from None
        if "d" not in values:
            raise DomainError(f"'{text}' is missing d=")
        if family is Family.POWER:
            if values.get("a", 0.0) != 0.0:
                raise DomainError("power family takes no a=")
            return cls(family, values["d"])
        return cls(family, values["d"], values.get("a", 0.0))

    def describe(self) -> str:
        if self.family is Family.POWER:
            return f"power:d={_fmt(self.d)}"
        return f"{self.family.value}:d={_fmt(self.d)},a={_fmt(self.a)}"


def _as_positive(x):
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0)):
        raise NonPositiveInput(f"evaluator needs x > 0, got min {np.min(arr)!r}")
    return arr


def _out(x, arr):
    return float(arr) if np.ndim(x) == 0 else arr


def _h(df, arr):
    if df.is_pure_power:
        return arr ** df.d
    if df.family is Family.POWERLOG:
        return arr ** df.d / np.log1p(1.0 / arr) ** df.a
    if df.family is Family.POWERLOGLOG:
        # log(log(1/x + e)) rewritten to stay accurate for large and small x
        return arr ** df.d / np.log1p(np.log1p(1.0 / (math.e * arr))) ** df.a
    with np.errstate(all="ignore"):
        out = np.asarray(df.custom(arr), dtype=float)
    if np.any(~np.isfinite(out)):
        raise DomainError("custom evaluator returned a non-finite value")
    return np.broadcast_to(out, arr.shape).astype(float)


def eval_h(df: DimensionFunction, x):
    """h(x) for scalar or array x > 0."""
    arr = _as_positive(x)
    return _out(x, _h(df, arr))


@dataclass
class TransformCache:
    """Root brackets for h(y) = target, one per target; per-call scratch."""
    bracket_lo: np.ndarray
    bracket_hi: np.ndarray
    tol_rel: float = TOL_REL

    @classmethod
    def seeded(cls, df: DimensionFunction, x: np.ndarray, tol_rel: float = TOL_REL) -> "TransformCache":
        guess = x ** (-1.0 / df.d)
        return cls(guess / 10.0, guess * 10.0, tol_rel)

    def expand(self, df: DimensionFunction, target: np.ndarray) -> None:
        for _ in range(MAX_EXPANSIONS):
            low = _h(df, self.bracket_lo) >= target
            if not np.any(low):
                break
            self.bracket_lo = np.where(low, self.bracket_lo / 10.0, self.bracket_lo)
        else:
            raise BracketFailure("lower bracket did not drop below the target")
        for _ in range(MAX_EXPANSIONS):
            high = _h(df, self.bracket_hi) <= target
            if not np.any(high):
                break
            self.bracket_hi = np.where(high, self.bracket_hi * 10.0, self.bracket_hi)
        else:
            raise BracketFailure("upper bracket did not rise above the target")
        if not np.all(np.isfinite(self.bracket_lo) & np.isfinite(self.bracket_hi)):
            raise BracketFailure("bracket left the floating-point range")

    def bisect(self, df: DimensionFunction, target: np.ndarray) -> np.ndarray:
        """
        Geometric bisection until hi/lo - 1 <= tol_rel. Each entry stops on its
        own, so a result never depends on the other targets in the batch.
        """
        self.expand(df, target)
        lo, hi = self.bracket_lo, self.bracket_hi
        for _ in range(MAX_BISECTIONS):
            active = hi > lo * (1.0 + self.tol_rel)
            if not active.any():
                break
            mid = lo * np.sqrt(hi / lo)
            below = _h(df, mid) < target
            lo = np.where(active & below, mid, lo)
            hi = np.where(active & ~below, mid, hi)
        self.bracket_lo, self.bracket_hi = lo, hi
        return lo * np.sqrt(hi / lo)


def eval_g(df: DimensionFunction, x, tol_rel: float = TOL_REL):
    """The unique y with h(y) = 1/x."""
    arr = _as_positive(x)
    if df.is_pure_power:
        return _out(x, arr ** (-1.0 / df.d))
    cache = TransformCache.seeded(df, np.atleast_1d(arr).astype(float), tol_rel)
    y = cache.bisect(df, 1.0 / np.atleast_1d(arr))
    return _out(x, y.reshape(arr.shape))


def eval_f(df: DimensionFunction, x):
    """f(x) = 1/h(1/x)."""
    arr = _as_positive(x)
    if df.is_pure_power:
        return _out(x, arr ** df.d)
    return _out(x, 1.0 / _h(df, 1.0 / arr))


def eval_f_scaled(df: DimensionFunction, L: float, x):
    """f_L, the inverse of 1/(L g): f_L(x) = f(L x)."""
    return eval_f(df, L * np.asarray(x, dtype=float))


def eval_g_inverse(df: DimensionFunction, L: float, y):
    """The t with L g(t) = y, i.e. 1/h(y/L) = f(L/y)."""
    arr = _as_positive(y)
    return _out(y, eval_f(df, L / arr))


# ==========================================
# DIAGNOSTICS
# ==========================================

@dataclass
class HomogeneityReport:
    t_grid: list
    x_seq: list
    max_deviation: list
    tolerance: float
    passed: bool

    def status(self) -> str:
        return "PASS" if self.passed else "FAIL"


def verify_homogeneity(df: DimensionFunction, t_grid: Sequence[float], x_seq: Sequence[float],
                       tolerance: float = HOMOGENEITY_TOL) -> HomogeneityReport:
    """
    Max over t of |h(t x)/h(x) - t^d| for each x. PASS when the maxima are
    non-increasing over the second half of x_seq and end below tolerance.
    """
    t = np.asarray(t_grid, dtype=float)
    maxima = []
    for x in x_seq:
        ratio = eval_h(df, t * x) / eval_h(df, x)
        dev = np.abs(ratio - t ** df.d)
        dev[dev <= ROUNDOFF_FLOOR * np.maximum(1.0, t ** df.d)] = 0.0
        maxima.append(float(dev.max()))

    tail = maxima[len(maxima) // 2:]
    settling = all(b <= a for a, b in zip(tail, tail[1:]))
    passed = bool(maxima) and settling and maxima[-1] <= tolerance
    if not passed:
        logger.info(f"[!] {df.describe()}: homogeneity maxima {maxima} do not settle below {tolerance}")
    return HomogeneityReport(list(t_grid), list(x_seq), maxima, tolerance, passed)


def adaptive_integral(func: Callable[[float], float], a: float, b: float,
                      epsabs: float = QUAD_EPSABS, epsrel: float = QUAD_EPSREL,
                      limit: int = QUAD_LIMIT) -> float:
    """Adaptive Gauss-Kronrod quadrature; raises when QUADPACK gives up."""
    result = quad(func, a, b, epsabs=epsabs, epsrel=epsrel, limit=limit, full_output=1)
    value, abserr = result[0], result[1]
    if len(result) > 3:
        # QUADPACK flagged the result; accept it only if the error estimate is still usable
        if not math.isfinite(value) or abserr > 1e3 * max(epsabs, epsrel * abs(value)):
            raise QuadratureNonConvergence(
                f"quadrature on [{a}, {b}] stopped at error {abserr:.3g}: {result[3]}")
        logger.debug(f" -> quadrature on [{a}, {b}] accepted with warning: {result[3]}")
    return value


def tail_ratio(df: DimensionFunction, x: float) -> float:
    """
    d < 1: int_x^inf g / (x g(x)), tends to d/(1-d).
    d > 1: int_1^x g / (x g(x)), tends to d/(d-1).
    """
    if not x >= 10:
        raise DomainError(f"tail_ratio needs x >= 10, got {x}")
    gx = eval_g(df, x)
    if df.regime is Regime.INTEGRABLE:
        # u = x/v maps [x, inf) onto (0, 1]
        def integrand(v):
            if v <= 0:
                return 0.0
            return eval_g(df, x / v) / gx / (v * v)
        return adaptive_integral(integrand, 0.0, 1.0)

    # u = x s maps [1, x] onto [1/x, 1]
    return adaptive_integral(lambda s: eval_g(df, x * s) / gx, 1.0 / x, 1.0)
