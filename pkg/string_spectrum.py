"""
Eigenvalue counting for the one-dimensional p-Laplacian on fractal strings.

The Dirichlet eigenvalues of an interval of length T are pi_p^p k^p / T^p, so
on a string with lengths l_j

    N(lambda) = sum_j floor(l_j x),    x = lambda^(1/p) / pi_p

which is a lattice-point count under the curve j -> x l_j.
"""
import logging
import math
import os
import threading
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import NamedTuple, Optional, Sequence

import mpmath
import numpy as np
from dotenv import load_dotenv

from dimension_kernel import (
    DimensionFunction,
    Regime,
    adaptive_integral,
    eval_f_scaled,
    eval_g,
)
from errors import (
    BracketFailure,
    BudgetExceeded,
    CountOverflow,
    DomainError,
    InexactTail,
    InverseFailure,
    RegimeError,
)
from summation import EM_START, euler_maclaurin_constant, zeta_extended

load_dotenv()
logger = logging.getLogger(__name__)

# ==========================================
# CONFIGURATION
# ==========================================
CHUNK = int(os.getenv("SPECTRA_CHUNK", str(1 << 20)))
GUARD_DELTA = 1e-13
INTEGER_SNAP = GUARD_DELTA
SCAN_LIMIT = 4
DIAGONAL_TOL = 1e-9
MAX_NAIVE_TERMS = 1 << 36
INT64_LIMIT = (1 << 63) - 1
ZETA_TOL = float(os.getenv("SPECTRA_TOL", "1e-10"))
MAX_TAIL_TERMS = 1 << 26
PI_P_DPS = 30


class TailMode(Enum):
    EXACT = "exact"
    ASYMPTOTIC = "asymptotic"
    TWO_SIDED = "twosided"


class Algorithm(Enum):
    NAIVE = "naive"
    HYPERBOLA = "hyperbola"
    ASYMPTOTIC_ONLY = "asymptotic"


@dataclass(frozen=True)
class TailLaw:
    """
    l_j = L g(j) (EXACT), l_j ~ L g(j) (ASYMPTOTIC) or
    c1 L g(j) <= l_j <= c2 L g(j) (TWO_SIDED), for j >= j0.
    """
    df: DimensionFunction
    mode: TailMode = TailMode.EXACT
    L: float = 1.0
    j0: int = 1
    c1: float = 1.0
    c2: float = 1.0

    def __post_init__(self):
        if not self.L > 0:
            raise DomainError(f"tail scale must be positive, got L={self.L}")
        if self.j0 < 1 or int(self.j0) != self.j0:
            raise DomainError(f"tail start must be a positive integer, got j0={self.j0}")
        if not (0 < self.c1 <= self.c2):
            raise DomainError(f"two-sided constants need 0 < c1 <= c2, got {self.c1}, {self.c2}")

    @property
    def d(self) -> float:
        return self.df.d

    def lengths(self, j):
        """Representative lengths L g(j)."""
        return self.L * eval_g(self.df, j)


@dataclass(frozen=True)
class FractalString:
    prefix: tuple = ()
    tail: Optional[TailLaw] = None

    def __post_init__(self):
        prefix = tuple(float(v) for v in self.prefix)
        object.__setattr__(self, "prefix", prefix)
        if any(not v > 0 for v in prefix):
            raise DomainError("interval lengths must be positive")
        if any(b > a for a, b in zip(prefix, prefix[1:])):
            raise DomainError("prefix lengths must be nonincreasing")
        if self.tail is not None and prefix:
            first = self.tail.lengths(float(self.tail.j0))
            if prefix[-1] < first * (1 - 1e-12):
                message = f"prefix ends at {prefix[-1]!r} below the first tail length {first!r}"
                if self.tail.mode is TailMode.EXACT:
                    raise DomainError(message)
                # representative lengths only pin the tail up to its constants
                logger.warning(f"[!] {message}")

    @classmethod
    def interval(cls, T: float) -> "FractalString":
        return cls(prefix=(T,))

    @classmethod
    def finite(cls, lengths: Sequence[float]) -> "FractalString":
        return cls(prefix=tuple(sorted((float(v) for v in lengths), reverse=True)))

    @classmethod
    def power(cls, d: float, L: float = 1.0) -> "FractalString":
        """l_j = L j^(-1/d)."""
        return cls(tail=TailLaw(DimensionFunction.power(d), L=L))

    @property
    def finite_measure(self) -> bool:
        return self.tail is None or self.tail.df.regime is Regime.INTEGRABLE

    @property
    def measure(self) -> float:
        return _string_measure(self, ZETA_TOL)

    def measure_at(self, tol: float) -> float:
        return _string_measure(self, tol)

    def describe(self) -> str:
        parts = []
        if self.prefix:
            parts.append("prefix=" + ",".join(repr(v) for v in self.prefix))
        if self.tail is not None:
            t = self.tail
            parts.append(f"{t.df.describe()};L={t.L!r};j0={t.j0};mode={t.mode.value}")
        return " ".join(parts) or "empty"


@lru_cache(maxsize=64)
def _string_measure(s, tol):
    head = math.fsum(s.prefix)
    if s.tail is None:
        return head
    if not s.finite_measure:
        return math.inf
    return math.fsum([head, s.tail.L * tail_sum(s.tail.df, s.tail.j0, tol)])


def tail_sum(df: DimensionFunction, j0: int = 1, tol: float = ZETA_TOL) -> float:
    """sum_{j >= j0} g(j) for d < 1."""
    if df.regime is not Regime.INTEGRABLE:
        return math.inf
    if df.is_pure_power:
        if j0 == 1:
            return zeta_extended(1.0 / df.d, tol)
        # Hurwitz zeta sum_{j >= j0} j^(-1/d)
        with mpmath.workdps(PI_P_DPS):
            return float(mpmath.zeta(1.0 / df.d, j0))
    rest = _tail_integral(df, j0)
    b = _tail_cut(df, j0, tol * max(1.0, rest))
    # stop the doubling at b, then add the midpoint term -g(b)/2
    target = float(eval_g(df, float(b))) * (1 + 1e-9)
    estimate = euler_maclaurin_constant(lambda t: eval_g(df, t), j0, target)
    return estimate.constant + rest - 0.5 * estimate.error_bracket


def _tail_integral(df, j0):
    """
    int_{j0}^inf g via t = j0 v^(-q). q = d/(1-d) leaves a bounded integrand;
    the cap on q keeps the cut-off point tiny when d is close to 1.
    """
    q = min(df.d / (1.0 - df.d), 8.0)

    def integrand(v):
        log_t = math.log(j0) - q * math.log(v) if v > 0 else math.inf
        # g(t) ~ t^(-1/d) would leave the normal float range
        if log_t > 650 * df.d:
            return 0.0
        t = math.exp(log_t)
        return eval_g(df, t) * q * t / v

    return adaptive_integral(integrand, 0.0, 1.0)


def _tail_cut(df, j0, tol):
    """
    First power of two b >= 2^10 whose midpoint remainder, at most
    (g(b-1) - g(b))/8 for convex g, is below tol. Raises before any summing
    when b would pass the term budget.
    """
    b = EM_START
    while b < j0:
        b *= 2
    while (eval_g(df, b - 1.0) - eval_g(df, float(b))) / 8 > tol:
        b *= 2
        if b > MAX_TAIL_TERMS:
            raise BudgetExceeded(f"tail sum of {df.describe()} to {tol:.1e} needs more than {MAX_TAIL_TERMS} terms")
    return b


@dataclass
class CountBreakdown:
    lam: float
    p: float
    algorithm: Algorithm
    exact: Optional[int] = None
    weyl_term: Optional[float] = None
    boundary_term: float = 0.0
    residual: Optional[float] = None
    cutoff_J: Optional[int] = None
    terms: int = 0
    lower_bound: Optional[float] = None
    upper_bound: Optional[float] = None
    guard_hits: int = 0

    def to_record(self) -> dict:
        return {
            "lambda": self.lam,
            "p": self.p,
            "exact": self.exact,
            "weyl": self.weyl_term,
            "boundary": self.boundary_term,
            "residual": self.residual,
            "cutoff_j": self.cutoff_J,
            "algorithm": self.algorithm.value,
            "terms": self.terms,
            "lower": self.lower_bound,
            "upper": self.upper_bound,
        }


class OscillationCount(NamedTuple):
    exact: int
    s_value: float


# ==========================================
# pi_p AND SINGLE INTERVALS
# ==========================================

_PI_P_LOCK = threading.Lock()


def _check_p(p):
    if not (p > 1) or not math.isfinite(p):
        raise DomainError(f"p must lie in (1, inf), got {p}")


@lru_cache(maxsize=None)
def _pi_p(p):
    with mpmath.workdps(PI_P_DPS):
        mp_p = mpmath.mpf(p)
        q = mp_p / (mp_p - 1)

        # s = 1 - t^q: the (p u)^(-1/p) blow-up at s = 1 cancels against dt^q
        def integrand(t):
            if t == 0:
                return q * mp_p ** (-1 / mp_p)
            u = t ** q
            return q * t ** (q - 1) * (-mpmath.expm1(mp_p * mpmath.log1p(-u))) ** (-1 / mp_p)

        integral = mpmath.quad(integrand, [0, 0.5, 1], method="tanh-sinh")
        return float(2 * (mp_p - 1) ** (1 / mp_p) * integral)


def pi_p(p: float) -> float:
    """pi_p = 2 (p-1)^(1/p) int_0^1 (1 - s^p)^(-1/p) ds; pi_2 = pi."""
    _check_p(p)
    with _PI_P_LOCK:
        return _pi_p(float(p))


def pi_p_closed_form(p: float) -> float:
    _check_p(p)
    return 2 * math.pi * (p - 1) ** (1 / p) / (p * math.sin(math.pi / p))


def interval_eigenvalue(T: float, p: float, k: int) -> float:
    """k-th Dirichlet eigenvalue of the p-Laplacian on an interval of length T."""
    _check_p(p)
    if not T > 0:
        raise DomainError(f"interval length must be positive, got {T}")
    if k < 1 or int(k) != k:
        raise DomainError(f"eigenvalue index must be a positive integer, got {k}")
    return pi_p(p) ** p * float(k) ** p / T ** p


def spectral_scale(p: float, lam: float) -> float:
    """x = lambda^(1/p) / pi_p, the slope of the counting lattice."""
    _check_p(p)
    if not lam >= 0 or not math.isfinite(lam):
        raise DomainError(f"lambda must be a finite nonnegative number, got {lam}")
    return lam ** (1.0 / p) / pi_p(p)


# ==========================================
# FLOORS
# ==========================================

def guarded_floor(y: np.ndarray) -> tuple:
    """
    floor(y) as int64, rounding up when y sits within GUARD_DELTA * y below an
    integer. Returns (floors, number of snapped entries).
    """
    y = np.asarray(y, dtype=float)
    if y.size and float(np.max(y)) >= 2.0 ** 62:
        raise CountOverflow(f"floor argument {float(np.max(y)):.3g} exceeds the 64-bit range")
    n = np.floor(y)
    snap = (n + 1.0 - y) <= GUARD_DELTA * y
    hits = int(np.count_nonzero(snap))
    return (n + snap).astype(np.int64), hits


def _int_total(values):
    if values.size == 0:
        return 0
    if int(values.max()) <= INT64_LIMIT // max(values.size, 1):
        return int(values.sum(dtype=np.int64))
    return sum(int(v) for v in values)


class TailFloor:
    """
    F(j) = floor(l_j x) on the tail. Uses integer arithmetic when l_j = L j^(-1/d)
    with L x an integer and d or 1/d an integer, otherwise the guarded float floor.
    """

    def __init__(self, tail: TailLaw, x: float):
        self.tail = tail
        self.x = x
        self.hits = 0
        self.evaluations = 0
        self.kind = "float"

        X = tail.L * x
        Xr = round(X)
        if not (tail.df.is_pure_power and tail.mode is TailMode.EXACT):
            return
        if Xr < 1 or abs(X - Xr) > INTEGER_SNAP * X or Xr > 2 ** 52:
            return
        inv, d = 1.0 / tail.d, tail.d
        if abs(inv - round(inv)) < INTEGER_SNAP and round(inv) <= 8:
            self.kind, self.X, self.m = "divide", int(Xr), int(round(inv))
        elif abs(d - round(d)) < INTEGER_SNAP and float(3 * Xr) ** round(d) < 2.0 ** 62:
            self.kind, self.X, self.q = "root", int(Xr), int(round(d))
            self.Xq = self.X ** self.q

    def __call__(self, j: np.ndarray) -> np.ndarray:
        j = np.asarray(j, dtype=np.int64)
        self.evaluations += j.size
        if self.kind == "divide":
            return self.X // j ** self.m
        if self.kind == "root":
            # largest n with n^q * j <= X^q
            n = np.floor(self.X * j.astype(float) ** (-1.0 / self.q)).astype(np.int64)
            for _ in range(2):
                n = np.where((n + 1) ** self.q * j <= self.Xq, n + 1, n)
            for _ in range(2):
                n = np.where(n ** self.q * j > self.Xq, n - 1, n)
            return n
        floors, hits = guarded_floor(self.tail.lengths(j.astype(float)) * self.x)
        self.hits += hits
        return floors

    def at(self, j: int) -> int:
        return int(self(np.array([j]))[0])


def _prefix_count(s, x):
    if not s.prefix:
        return 0, 0, 0
    floors, hits = guarded_floor(np.asarray(s.prefix) * x)
    return _int_total(floors), hits, int(np.count_nonzero(floors))


def _tail_cutoff(F: TailFloor) -> int:
    """Largest j >= j0 with F(j) >= 1, or j0 - 1 if none."""
    tail = F.tail
    estimate = float(eval_f_scaled(tail.df, tail.L, F.x)) if F.x > 0 else 0.0
    J = max(tail.j0 - 1, int(min(estimate, 2.0 ** 62)))
    if J - tail.j0 > MAX_NAIVE_TERMS:
        raise BudgetExceeded(f"cutoff near {J:.3g} exceeds the term budget")

    steps = 0
    while F.at(J + 1) >= 1:
        J += 1
        steps += 1
    while J >= tail.j0 and F.at(J) < 1:
        J -= 1
        steps += 1
    if steps > SCAN_LIMIT:
        logger.info(f"[!] cutoff estimate off by {steps} steps at x={F.x!r}")
    return J


def _naive_tail(F, J):
    total = 0
    for lo in range(F.tail.j0, J + 1, CHUNK):
        j = np.arange(lo, min(lo + CHUNK, J + 1), dtype=np.int64)
        total += _int_total(F(j))
    return total


def _diagonal(F, J):
    """K with x L g(K) = K, by bisection on [1, J + 1]."""
    tail = F.tail

    def phi(t):
        try:
            value = F.x * float(tail.lengths(t)) - t
        except BracketFailure as exc:
            raise InverseFailure(f"cannot evaluate g at t={t!r}: {exc}") from exc
        if not math.isfinite(value):
            raise InverseFailure(f"x L g(t) - t is not finite at t={t!r}")
        return value

    # any K in [j0 - 1, J] gives the same count; the diagonal only minimises work
    lo, hi = 1.0, float(J + 1)
    if phi(lo) <= 0:
        return lo
    if phi(hi) >= 0:
        return hi
    for _ in range(200):
        if hi - lo <= DIAGONAL_TOL * max(1.0, lo):
            break
        mid = 0.5 * (lo + hi)
        if phi(mid) >= 0:
            lo = mid
        else:
            hi = mid
    return lo


def _hyperbola_tail(F: TailFloor, J: int) -> int:
    """
    Lattice points (j, k), j0 <= j <= J, 1 <= k <= F(j), counted as the columns
    j <= K plus the rows k <= F(K+1) to the right of K:

        sum_{j0<=j<=K} F(j) + sum_{k=1}^{F(K+1)} M(k) - K F(K+1)

    with M(k) the largest j having F(j) >= k.
    """
    tail = F.tail
    K = min(max(int(math.floor(_diagonal(F, J))), tail.j0 - 1), J)

    columns = 0
    for lo in range(tail.j0, K + 1, CHUNK):
        j = np.arange(lo, min(lo + CHUNK, K + 1), dtype=np.int64)
        columns += _int_total(F(j))

    top = F.at(K + 1) if K < J else 0
    if top == 0:
        return columns

    rows = 0
    for lo in range(1, top + 1, CHUNK):
        k = np.arange(lo, min(lo + CHUNK, top + 1), dtype=np.int64)
        estimate = eval_f_scaled(tail.df, tail.L, F.x / k.astype(float))
        M = np.clip(np.floor(estimate), K + 1, J).astype(np.int64)
        while True:
            up =(M < J) & (F(np.minimum(M + 1, J)) >= k)
            if not up.any():
                break
            M = M + up
        while True:
            down =F(M) < k
            if not down.any():
                break
            M = M - down
        rows += _int_total(M)
    return columns + rows - K * top


def _exact_count(s: FractalString, x: float, algorithm: Algorithm) -> tuple:
    """(count, cutoff J, floor evaluations, guard hits) at scale x."""
    count, hits, nonzero = _prefix_count(s, x)
    terms = len(s.prefix)
    if s.tail is None:
        return count, nonzero, terms, hits
    if s.tail.mode is not TailMode.EXACT:
        raise InexactTail(f"tail mode '{s.tail.mode.value}' admits no exact count")

    F = TailFloor(s.tail, x)
    J = _tail_cutoff(F)
    if J >= s.tail.j0:
        if F.at(s.tail.j0) > INT64_LIMIT // max(J - s.tail.j0 + 1, 1):
            raise CountOverflow(f"count at x={x!r} may exceed 2^63")
        if algorithm is Algorithm.HYPERBOLA:
            count += _hyperbola_tail(F, J)
        else:
            count += _naive_tail(F, J)
    if count > INT64_LIMIT:
        raise CountOverflow(f"count {count} exceeds 2^63 - 1")
    terms += F.evaluations
    hits += F.hits
    return count, J, terms, hits


def _run_count(s: FractalString, p: float, lam: float, algorithm: Algorithm) -> CountBreakdown:
    x = spectral_scale(p, lam)
    count, J, terms, hits = _exact_count(s, x, algorithm)
    if hits:
        logger.info(f"[!] floor guard band engaged {hits} times at lambda={lam!r}")
    return CountBreakdown(lam=lam, p=p, algorithm=algorithm, exact=count,
                          cutoff_J=J, terms=terms, guard_hits=hits)


def count_naive(s: FractalString, p: float, lam: float) -> CountBreakdown:
    """N = sum_j floor(l_j x), term by term up to the cutoff."""
    return _run_count(s, p, lam, Algorithm.NAIVE)


def count_hyperbola(s: FractalString, p: float, lam: float) -> CountBreakdown:
    """Same count as count_naive, split at the diagonal x L g(K) = K."""
    if s.tail is None:
        raise DomainError("the hyperbola split needs a tail law")
    return _run_count(s, p, lam, Algorithm.HYPERBOLA)


# ==========================================
# ASYMPTOTICS
# ==========================================

def asymptotic_count(s: FractalString, p: float, lam: float, tol: float = ZETA_TOL) -> CountBreakdown:
    """
    d < 1:  N ~ |Omega| x + zeta(d) f_L(x)
    d > 1:  N ~ zeta(d) f_L(x), or the O-bracket
            [f_L(c1 x)/(d-1), d f_L(c2 x)/(d-1)] for two-sided tails
    """
    if s.tail is None:
        raise RegimeError("asymptotic counting needs a tail law")
    if not lam > 0:
        raise DomainError(f"lambda must be positive, got {lam}")
    tail = s.tail
    d = tail.d
    x = spectral_scale(p, lam)
    f_x = float(eval_f_scaled(tail.df, tail.L, x))
    out = CountBreakdown(lam=lam, p=p, algorithm=Algorithm.ASYMPTOTIC_ONLY,
                         cutoff_J=int(min(f_x, 2.0 ** 62)))

    if tail.df.regime is Regime.INTEGRABLE:
        if tail.mode is TailMode.TWO_SIDED:
            raise RegimeError("two-sided tails have no counting statement for d < 1")
        if tail.mode is TailMode.ASYMPTOTIC:
            logger.info(" -> measure of an asymptotic tail taken from the representative lengths")
        out.weyl_term = s.measure_at(tol) * x
        out.boundary_term = zeta_extended(d, tol) * f_x
        return out

    out.boundary_term = zeta_extended(d, tol) * f_x
    if tail.mode is TailMode.TWO_SIDED:
        out.lower_bound = float(eval_f_scaled(tail.df, tail.L, tail.c1 * x)) / (d - 1)
        out.upper_bound = d * float(eval_f_scaled(tail.df, tail.L, tail.c2 * x)) / (d - 1)
    return out


def count(s: FractalString, p: float, lam: float, algorithm: Algorithm = Algorithm.HYPERBOLA,
          tol: float = ZETA_TOL) -> CountBreakdown:
    """Exact count plus the asymptotic terms and their residual."""
    if algorithm is Algorithm.HYPERBOLA and s.tail is None:
        algorithm = Algorithm.NAIVE
    out = _run_count(s, p, lam, algorithm)
    if s.tail is None:
        out.weyl_term = s.measure_at(tol) * spectral_scale(p, lam)
        out.boundary_term = 0.0
    elif lam > 0:
        asym = asymptotic_count(s, p, lam, tol)
        out.weyl_term = asym.weyl_term
        out.boundary_term = asym.boundary_term
        out.lower_bound, out.upper_bound = asym.lower_bound, asym.upper_bound
    else:
        return out
    out.residual = out.exact - (out.weyl_term or 0.0) - out.boundary_term
    return out


def eigenvalue_growth(s: FractalString, p: float, k: int, tol: float = ZETA_TOL) -> float:
    """Predicted k-th eigenvalue [L g(pi_p^d k / zeta(d))]^(-p), d > 1."""
    if s.tail is None or s.tail.df.regime is not Regime.NON_INTEGRABLE:
        raise RegimeError("eigenvalue growth is stated for tails with d > 1")
    if s.tail.mode is TailMode.TWO_SIDED:
        raise RegimeError("eigenvalue growth needs an exact or asymptotic tail")
    if k < 1:
        raise DomainError(f"k must be positive, got {k}")
    d = s.tail.d
    y = pi_p(p) ** d * k / zeta_extended(d, tol)
    return float(s.tail.lengths(y)) ** (-p)


def eigenvalue_rank(s: FractalString, p: float, k: int) -> float:
    """
    The exact k-th eigenvalue: the smallest lambda with N(lambda) >= k,
    found by bisection on x.
    """
    if k < 1 or int(k) != k:
        raise DomainError(f"k must be a positive integer, got {k}")
    algorithm = Algorithm.HYPERBOLA if s.tail is not None else Algorithm.NAIVE
    counter = lambda x: _exact_count(s, x, algorithm)[0]

    lo, hi = 0.0, 1.0
    while counter(hi) < k:
        lo, hi = hi, hi * 2.0
        if hi > 1e150:
            raise BudgetExceeded(f"fewer than {k} eigenvalues found below x = {hi:.3g}")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if counter(mid) >= k:
            hi = mid
        else:
            lo = mid
    return (pi_p(p) * hi) ** p


def oscillating_count(m: int, n: int, p: float, lam: float) -> OscillationCount:
    """
    m^k intervals of length n^(1-k), k >= 1, with m > n: N = sum_k m^k floor(x / n^(k-1)).
    s_value is the normalised count m N / lambda^(d/p), d = log m / log n.
    """
    if int(m) != m or int(n) != n or n < 2 or m <= n:
        raise DomainError(f"need integers m > n >= 2, got m={m}, n={n}")
    if not lam > 0:
        raise DomainError(f"lambda must be positive, got {lam}")
    m, n = int(m), int(n)
    x = spectral_scale(p, lam)

    total = 0
    k = 1
    while n ** (k - 1) <= x * (1 + GUARD_DELTA):
        floors, _ = guarded_floor(np.array([x / n ** (k - 1)]))
        total += m ** k * int(floors[0])
        k += 1
    d = math.log(m) / math.log(n)
    return OscillationCount(total, total * m / lam ** (d / p))
