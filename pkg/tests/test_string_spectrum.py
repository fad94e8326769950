import math

import numpy as np
import pytest

import string_spectrum
from dimension_kernel import DimensionFunction
from errors import BudgetExceeded, CountOverflow, DomainError, InexactTail, RegimeError
from string_spectrum import (
    Algorithm,
    FractalString,
    TailLaw,
    TailMode,
    asymptotic_count,
    count,
    count_hyperbola,
    count_naive,
    eigenvalue_growth,
    eigenvalue_rank,
    guarded_floor,
    interval_eigenvalue,
    oscillating_count,
    pi_p,
    pi_p_closed_form,
    tail_sum,
)

PI = math.pi
ZETA_HALF = -1.4603545088095868


# --- pi_p and single intervals ---

def test_pi_2_is_pi():
    assert pi_p(2.0) == pytest.approx(PI, abs=1e-12)


@pytest.mark.parametrize("p", [1.1, 1.2, 1.5, 2.0, 3.0, 5.0, 10.0])
def test_pi_p_matches_closed_form(p):
    assert pi_p(p) == pytest.approx(pi_p_closed_form(p), abs=1e-10)


def test_pi_3_value():
    assert pi_p(3.0) == pytest.approx(3.0470, abs=1e-3)


@pytest.mark.parametrize("p", [1.0, 0.5, -2.0, math.inf])
def test_pi_p_domain(p):
    with pytest.raises(DomainError):
        pi_p(p)


def test_interval_eigenvalues():
    assert interval_eigenvalue(1.0, 2.0, 1) == pytest.approx(PI ** 2, rel=1e-14)
    assert interval_eigenvalue(2.0, 2.0, 3) == pytest.approx(9 * PI ** 2 / 4, rel=1e-14)
    assert interval_eigenvalue(1.0, 3.0, 2) == pytest.approx(8 * pi_p(3.0) ** 3, rel=1e-14)
    assert interval_eigenvalue(1.0, 3.0, 2) == pytest.approx(226.31, abs=0.01)
    with pytest.raises(DomainError):
        interval_eigenvalue(0.0, 2.0, 1)
    with pytest.raises(DomainError):
        interval_eigenvalue(1.0, 2.0, 0)


# --- exact counting ---

def test_count_naive_examples():
    unit = FractalString.interval(1.0)
    assert count_naive(unit, 2.0, (3.5 * PI) ** 2).exact == 3
    assert count_naive(unit, 2.0, 0.5 * PI ** 2).exact == 0
    result = count_naive(FractalString.power(0.5), 2.0, (10 * PI) ** 2)
    assert result.exact == 10 + 2 + 1
    assert result.cutoff_J == 3
    assert result.algorithm is Algorithm.NAIVE


def test_count_at_zero():
    assert count_naive(FractalString.power(0.5), 2.0, 0.0).exact == 0
    assert count_hyperbola(FractalString.power(2.0), 2.0, 0.0).exact == 0


def test_count_hyperbola_example():
    result = count_hyperbola(FractalString.power(0.5), 2.0, (10 * PI) ** 2)
    assert result.exact == 13
    assert result.algorithm is Algorithm.HYPERBOLA


def test_inexact_tails_have_no_exact_count():
    s = FractalString(tail=TailLaw(DimensionFunction.power(0.5), TailMode.ASYMPTOTIC))
    with pytest.raises(InexactTail):
        count_naive(s, 2.0, 100.0)
    with pytest.raises(InexactTail):
        count_hyperbola(s, 2.0, 100.0)


def _grid():
    for d in (0.4, 0.5, 0.75, 1.5, 2.0, 3.0):
        for p in (1.5, 2.0, 3.0):
            for k in range(4):
                marks = [pytest.mark.slow] if (d == 3.0 and k == 3) else []
                yield pytest.param(d, p, k, marks=marks, id=f"d={d}-p={p}-k={k}")


@pytest.mark.parametrize("d, p, k", list(_grid()))
def test_hyperbola_equals_naive_on_grid(d, p, k):
    s = FractalString.power(d)
    lam = (10 ** k * pi_p(p)) ** p
    naive = count_naive(s, p, lam)
    fast = count_hyperbola(s, p, lam)
    assert fast.exact == naive.exact
    assert fast.cutoff_J == naive.cutoff_J


@pytest.mark.parametrize("df", [
    DimensionFunction.powerlog(0.5, 1.0),
    DimensionFunction.powerlog(2.0, 1.0),
    DimensionFunction.powerloglog(1.5, 2.0),
], ids=lambda df: df.describe())
@pytest.mark.parametrize("lam", [50.0, 1234.5, 98765.4])
def test_hyperbola_equals_naive_for_log_families(df, lam):
    s = FractalString(tail=TailLaw(df, L=0.7))
    assert count_hyperbola(s, 2.0, lam).exact == count_naive(s, 2.0, lam).exact


def test_hyperbola_with_prefix_and_late_start():
    s = FractalString(prefix=(2.0, 1.5), tail=TailLaw(DimensionFunction.power(0.5), j0=3))
    for lam in (10.0, 987.0, 12345.6, (100 * PI) ** 2):
        assert count_hyperbola(s, 2.0, lam).exact == count_naive(s, 2.0, lam).exact
    # prefix floors 20 + 15, tail sum_{j>=3} floor(10/j^2) = 1
    assert count_naive(s, 2.0, (10 * PI) ** 2).exact == 36


def test_count_is_monotone_in_lambda():
    s = FractalString.power(0.75)
    counts = [count_hyperbola(s, 2.0, lam).exact for lam in np.linspace(0.0, 5e4, 60)]
    assert counts[0] == 0
    assert all(b >= a for a, b in zip(counts, counts[1:]))


@pytest.mark.parametrize("lam", [12.3, 456.7, 8910.1])
def test_single_interval_scaling(lam):
    T, p = 2.5, 3.0
    assert (count_naive(FractalString.interval(T), p, lam).exact
            == count_naive(FractalString.interval(1.0), p, T ** p * lam).exact)


def test_hyperbola_needs_fewer_terms():
    s = FractalString.power(2.0)
    lam = (1000 * PI) ** 2
    naive, fast = count_naive(s, 2.0, lam), count_hyperbola(s, 2.0, lam)
    assert fast.exact == naive.exact
    assert fast.terms / naive.terms <= 0.2


# --- asymptotic laws ---

def test_finite_measure_residual_shrinks():
    s = FractalString.power(0.5)
    ratios = []
    for k in range(2, 6):
        result = count(s, 2.0, (10 ** k * PI) ** 2)
        ratios.append(abs(result.residual) / math.sqrt(10 ** k))
    assert all(b < a for a, b in zip(ratios, ratios[1:]))
    assert ratios[2] <= 0.1


def test_finite_measure_residual_values():
    result = count(FractalString.power(0.5), 2.0, (1e4 * PI) ** 2)
    assert result.exact == 16307
    assert result.weyl_term == pytest.approx(PI ** 2 / 6 * 1e4, rel=1e-9)
    assert result.boundary_term == pytest.approx(ZETA_HALF * 100, rel=1e-8)
    assert result.residual == pytest.approx(result.exact - result.weyl_term - result.boundary_term)


def test_infinite_measure_ratio_approaches_zeta():
    s = FractalString.power(2.0)
    zeta2 = PI ** 2 / 6
    gaps = []
    for x in (100.0, 1000.0, 3000.0):
        n = count_hyperbola(s, 2.0, (x * PI) ** 2).exact
        gaps.append(abs(n / x ** 2 - zeta2) / zeta2)
    assert gaps[1] <= 0.05
    assert gaps[0] > gaps[1] > gaps[2]


def test_asymptotic_coefficients_finite_measure():
    lam = 1e6
    result = asymptotic_count(FractalString.power(0.5), 2.0, lam)
    assert result.weyl_term / math.sqrt(lam) == pytest.approx(PI / 6, rel=1e-9)
    assert result.boundary_term / lam ** 0.25 == pytest.approx(ZETA_HALF / math.sqrt(PI), rel=1e-8)
    assert result.boundary_term / lam ** 0.25 == pytest.approx(-0.8239, abs=1e-4)
    assert result.algorithm is Algorithm.ASYMPTOTIC_ONLY


def test_asymptotic_coefficient_infinite_measure():
    result = asymptotic_count(FractalString.power(2.0), 2.0, 5e5)
    assert result.weyl_term is None
    assert result.boundary_term / 5e5 == pytest.approx(1 / 6, rel=1e-9)


def test_scale_enters_through_f_L():
    lam = 1e6
    plain = asymptotic_count(FractalString.power(2.0), 2.0, lam)
    scaled = asymptotic_count(FractalString.power(2.0, L=3.0), 2.0, lam)
    assert scaled.boundary_term == pytest.approx(9.0 * plain.boundary_term, rel=1e-12)


def test_two_sided_bracket():
    s = FractalString(tail=TailLaw(DimensionFunction.power(2.0), TailMode.TWO_SIDED, c1=0.5, c2=2.0))
    lam = (100 * PI) ** 2
    result = asymptotic_count(s, 2.0, lam)
    assert result.lower_bound == pytest.approx(0.25 * 1e4, rel=1e-12)
    assert result.upper_bound == pytest.approx(8.0 * 1e4, rel=1e-12)
    assert result.lower_bound < result.boundary_term < result.upper_bound


def test_asymptotic_regime_errors():
    with pytest.raises(RegimeError):
        asymptotic_count(FractalString.interval(1.0), 2.0, 100.0)
    s = FractalString(tail=TailLaw(DimensionFunction.power(0.5), TailMode.TWO_SIDED, c1=0.5, c2=2.0))
    with pytest.raises(RegimeError):
        asymptotic_count(s, 2.0, 100.0)


def test_asymptotic_tail_uses_representative_measure():
    s = FractalString(tail=TailLaw(DimensionFunction.power(0.5), TailMode.ASYMPTOTIC))
    result = asymptotic_count(s, 2.0, (100 * PI) ** 2)
    assert result.weyl_term == pytest.approx(PI ** 2 / 6 * 100, rel=1e-9)


# --- eigenvalue growth ---

@pytest.mark.parametrize("k", [1, 10, 1000, 10 ** 6])
def test_eigenvalue_growth_closed_form(k):
    assert eigenvalue_growth(FractalString.power(2.0), 2.0, k) == pytest.approx(6.0 * k, rel=1e-9)


def test_eigenvalue_growth_inverts_the_asymptotic_count():
    s = FractalString.power(2.0)
    for k in (10, 10 ** 3, 10 ** 5):
        lam = eigenvalue_growth(s, 2.0, k)
        assert asymptotic_count(s, 2.0, lam).boundary_term == pytest.approx(k, rel=1e-9)


def test_eigenvalue_growth_log_family_inverts_asymptotically():
    s = FractalString(tail=TailLaw(DimensionFunction.powerlog(2.0, 1.0)))
    gaps = []
    for k in (10, 10 ** 4, 10 ** 8):
        lam = eigenvalue_growth(s, 2.0, k)
        gaps.append(abs(asymptotic_count(s, 2.0, lam).boundary_term / k - 1))
    assert gaps[2] < gaps[0]


def test_eigenvalue_growth_matches_exact_rank():
    s = FractalString.power(2.0)
    k = 10 ** 6
    exact = eigenvalue_rank(s, 2.0, k)
    assert abs(eigenvalue_growth(s, 2.0, k) - exact) / exact <= 0.02
    assert count_naive(s, 2.0, exact * (1 + 1e-9)).exact >= k
    assert count_naive(s, 2.0, exact * (1 - 1e-9)).exact < k


def test_eigenvalue_rank_small_cases():
    assert eigenvalue_rank(FractalString.interval(1.0), 2.0, 3) == pytest.approx(9 * PI ** 2, rel=1e-12)
    assert eigenvalue_rank(FractalString.power(0.5), 2.0, 13) == pytest.approx((10 * PI) ** 2, rel=1e-12)


def test_count_just_below_an_integer_crossing():
    # x = 10 (1 - 1e-12): the first interval holds 9 modes, not 10
    lam = 986.9604401069621
    assert lam < (10 * PI) ** 2
    assert count_naive(FractalString.power(0.5), 2.0, lam).exact == 12
    assert count_hyperbola(FractalString.power(0.5), 2.0, lam).exact == 12
    assert count_naive(FractalString.power(0.5), 2.0, (10 * PI) ** 2).exact == 13


def test_eigenvalue_growth_regime():
    with pytest.raises(RegimeError):
        eigenvalue_growth(FractalString.power(0.5), 2.0, 10)


# --- self-similar oscillating string ---

def test_oscillating_examples():
    assert oscillating_count(4, 2, 2.0, 0.5 * PI ** 2).exact == 0
    assert oscillating_count(4, 2, 2.0, (8 * PI) ** 2).exact == 4 * 8 + 16 * 4 + 64 * 2 + 256 * 1


@pytest.mark.parametrize("j", range(6, 13))
def test_oscillating_log_periodicity(j):
    m, n, p = 4, 2, 2.0
    lam = (2 ** j * PI) ** 2
    d = math.log(m) / math.log(n)
    here = oscillating_count(m, n, p, lam).s_value
    there = oscillating_count(m, n, p, n ** p * lam).s_value
    assert abs(here - there) <= 10 * lam ** (1 / p) * m / lam ** (d / p)
    assert here == pytest.approx((32 - 16 * 2.0 ** -j) / PI ** 2, rel=1e-12)


@pytest.mark.parametrize("m, n", [(2, 2), (2, 3), (4, 1)])
def test_oscillating_domain(m, n):
    with pytest.raises(DomainError):
        oscillating_count(m, n, 2.0, 100.0)


# --- floors and strings ---

def test_guarded_floor():
    floors, hits = guarded_floor(np.array([2.9999999999999996, 2.5, 3.0, 0.3]))
    assert floors.tolist() == [3, 2, 3, 0]
    assert hits == 1
    with pytest.raises(CountOverflow):
        guarded_floor(np.array([2.0 ** 63]))


def test_measures():
    assert FractalString.power(0.5).measure == pytest.approx(PI ** 2 / 6, abs=1e-10)
    assert FractalString.power(2.0).measure == math.inf
    assert FractalString.finite([0.25, 1.0, 0.5]).measure == 1.75
    late = FractalString(tail=TailLaw(DimensionFunction.power(0.5), j0=3))
    assert late.measure == pytest.approx(PI ** 2 / 6 - 1.25, abs=1e-12)


def test_powerlog_measure_uses_euler_maclaurin():
    df = DimensionFunction.powerlog(0.5, 1.0)
    s = FractalString(tail=TailLaw(df))
    j = np.arange(1, 200001, dtype=float)
    direct = math.fsum(s.tail.lengths(j))
    # g(j) decays like (2 log j)^2 / j^2, so the part beyond 2e5 stays below 1e-2
    assert direct < s.measure < direct + 1e-2


def test_slowly_decaying_tail_measure():
    # g(j) ~ (log j / j)^(10/9): the doubling stops near 2^14 instead of running to the term budget
    s = FractalString(tail=TailLaw(DimensionFunction.powerlog(0.9, 1.0)))
    j = np.arange(1, 100001, dtype=float)
    direct = math.fsum(s.tail.lengths(j))
    assert direct < s.measure
    assert s.measure_at(1e-6) == pytest.approx(s.measure, rel=1e-5)


def test_tail_sum_budget_is_checked_before_summing(monkeypatch):
    monkeypatch.setattr(string_spectrum, "MAX_TAIL_TERMS", 2048)
    with pytest.raises(BudgetExceeded):
        tail_sum(DimensionFunction.powerlog(0.9, 1.0), 1, 1e-10)


def test_prefix_must_reach_the_tail():
    with pytest.raises(DomainError):
        FractalString(prefix=(0.1,), tail=TailLaw(DimensionFunction.power(0.5)))
    loose = FractalString(prefix=(0.1,), tail=TailLaw(DimensionFunction.power(0.5), TailMode.ASYMPTOTIC))
    assert loose.prefix == (0.1,)


def test_string_validation():
    with pytest.raises(DomainError):
        FractalString(prefix=(1.0, -0.5))
    with pytest.raises(DomainError):
        FractalString(prefix=(0.5, 1.0))
    with pytest.raises(DomainError):
        TailLaw(DimensionFunction.power(0.5), L=0.0)
    with pytest.raises(DomainError):
        TailLaw(DimensionFunction.power(0.5), j0=0)


def test_record_schema():
    record = count(FractalString.power(0.5), 2.0, (10 * PI) ** 2).to_record()
    assert list(record)[:8] == ["lambda", "p", "exact", "weyl", "boundary", "residual", "cutoff_j", "algorithm"]
    assert record["exact"] == 13
    assert record["algorithm"] == "hyperbola"
