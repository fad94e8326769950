"""
Cross-validation of the asymptotic formulas against exact counts.

Every check appends one row with its computed value, the value it is held
against and a PASS/FAIL status; the table is returned as a DataFrame.
"""
import logging
import math
import os

import pandas as pd

from dimension_kernel import DimensionFunction
from errors import SpectraError
from horn2d import (
    HornDomain,
    dirichlet_lower_bound,
    horn_asymptotic_bounds,
    horn_bracket,
    mixed_upper_bound,
    rectangle_count_dirichlet,
    rectangle_count_mixed,
    within_envelope,
)
from minkowski import minkowski_content
from string_spectrum import (
    FractalString,
    count,
    count_hyperbola,
    count_naive,
    oscillating_count,
    pi_p,
    pi_p_closed_form,
)
from summation import euler_maclaurin_constant, zeta_extended

logger = logging.getLogger(__name__)

# Configuration
OUTPUT_FOLDER = "qa_reports"
OUTPUT_FILE = os.path.join(OUTPUT_FOLDER, "cross_validation.csv")
EULER_GAMMA = 0.5772156649015329


def _row(check, value, expected, passed):
    return {"Check": check, "Value": value, "Expected": expected, "Status": "PASS" if passed else "FAIL"}


def check_pi_p(results: list) -> None:
    for p in (1.2, 1.5, 2.0, 3.0, 5.0):
        value, oracle = pi_p(p), pi_p_closed_form(p)
        results.append(_row(f"pi_p at p={p}", value, oracle, abs(value - oracle) <= 1e-10))


def check_zeta(results: list) -> None:
    for d, oracle in ((2.0, math.pi ** 2 / 6), (4.0, math.pi ** 4 / 90)):
        value = zeta_extended(d, 1e-12)
        results.append(_row(f"zeta({d:g})", value, oracle, abs(value - oracle) <= 1e-10))
    value = zeta_extended(0.5, 1e-9)
    results.append(_row("zeta(0.5) sign", value, "< 0", value < 0))
    em = euler_maclaurin_constant(lambda t: 1.0 / t, 1, 1e-8).constant
    results.append(_row("Euler-Maclaurin constant of 1/t", em, EULER_GAMMA, abs(em - EULER_GAMMA) <= 1e-6))


def check_hyperbola(results: list) -> None:
    for d in (0.5, 2.0):
        s = FractalString.power(d)
        for k in (1, 2):
            lam = (10 ** k * math.pi) ** 2
            naive, fast = count_naive(s, 2.0, lam).exact, count_hyperbola(s, 2.0, lam).exact
            results.append(_row(f"hyperbola vs naive, d={d:g}, lambda=(10^{k} pi)^2", fast, naive, fast == naive))


def check_two_term_laws(results: list) -> None:
    finite = count(FractalString.power(0.5), 2.0, (1e4 * math.pi) ** 2)
    ratio = abs(finite.residual) / 1e2
    results.append(_row("finite measure |residual| / f at lambda=(10^4 pi)^2", ratio, "<= 0.1", ratio <= 0.1))

    infinite = count_hyperbola(FractalString.power(2.0), 2.0, (1e3 * math.pi) ** 2)
    ratio = infinite.exact / 1e6
    oracle = math.pi ** 2 / 6
    results.append(_row("infinite measure N / f at lambda=(10^3 pi)^2", ratio, oracle,
                        abs(ratio - oracle) <= 0.05 * oracle))


def check_content(results: list) -> None:
    d = 0.5
    estimate = minkowski_content(FractalString.power(d), d, [2.0 ** -k for k in range(4, 21)])
    oracle = 2 ** (1 - d) / (1 - d)
    value = estimate.values[-1]
    results.append(_row("content of j^-2 at eps=2^-20", value, oracle, abs(value - oracle) <= 0.03 * oracle))


def check_horn(results: list) -> None:
    horn = HornDomain(DimensionFunction.power(2.0))
    bracket = horn_bracket(horn, 1e3)
    results.append(_row("horn bracket ordering at lambda=1e3", bracket.lower, f"<= {bracket.upper}",
                        0 <= bracket.lower <= bracket.upper))
    ok = True
    for j in range(1, bracket.j_max_upper + 1):
        hw = float(horn.profile(float(j)))
        ok &= rectangle_count_mixed(hw, 1e3) <= mixed_upper_bound(hw, 1e3)
        ok &= rectangle_count_dirichlet(hw, 1e3) >= dirichlet_lower_bound(hw, 1e3)
    results.append(_row("ellipse bounds on every rectangle at lambda=1e3", ok, True, ok))
    for d in (1.5, 2.0):
        horn = HornDomain(DimensionFunction.power(d))
        bracket = horn_bracket(horn, 1e5)
        lower_pred, upper_pred = horn_asymptotic_bounds(horn, 1e5)
        inside = within_envelope(bracket, (lower_pred, upper_pred))
        results.append(_row(f"horn envelope, d={d:g}, lambda=1e5", f"[{bracket.lower}, {bracket.upper}]",
                            f"[{lower_pred:.6g}, {upper_pred:.6g}] +- 20%", inside))


def check_oscillation(results: list) -> None:
    value = oscillating_count(4, 2, 2.0, (8 * math.pi) ** 2).exact
    results.append(_row("oscillating string N((8 pi)^2)", value, 480, value == 480))


CHECKS = (
    check_pi_p,
    check_zeta,
    check_hyperbola,
    check_two_term_laws,
    check_content,
    check_horn,
    check_oscillation,
)


def run_checks() -> pd.DataFrame:
    results = []
    for check in CHECKS:
        logger.info(f"--- {check.__name__} ---")
        try:
            check(results)
        except SpectraError as exc:
            logger.error(f"[!] {check.__name__} raised {type(exc).__name__}: {exc}")
            results.append(_row(check.__name__, type(exc).__name__, "no error", False))
    return pd.DataFrame(results, columns=["Check", "Value", "Expected", "Status"])


def main():
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    os.makedirs(OUTPUT_FOLDER, exist_ok=True)
    report = run_checks()
    print(report.to_string(index=False))
    report.to_csv(OUTPUT_FILE, index=False, float_format="%.17g", lineterminator="\n")
    print(f"Saved: {OUTPUT_FILE}")
    failed = int((report["Status"] == "FAIL").sum())
    print(f"{len(report) - failed} passed, {failed} failed.")


if __name__ == "__main__":
    main()
