"""Exact binomial-tail lower confidence bound on coverage.

Given a sample size m, an observed success count, and a confidence
parameter delta, solve_bound finds the minimal b with

    BinomialCDF(successes; m, b) <= 1 - delta

by bisection. The CDF is evaluated in log space for small m and through
the regularized incomplete beta identity for large m, so the solver stays
stable up to very large sample sizes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .stats import incomplete_beta

__all__ = ["BoundQuery", "BoundResult", "binomial_cdf", "solve_bound"]

BISECTION_TOL = 1e-10

# Above this sample size the direct log-space summation is replaced by the
# incomplete-beta identity BinomialCDF(x; m, b) = I_{1-b}(m-x, x+1).
_DIRECT_SUM_MAX_M = 1000

# Tails narrower than this are summed directly even for huge m.
_TAIL_SUM_MAX_TERMS = 100_000


@dataclass(frozen=True)
class BoundQuery:
    """Inputs to the bound solver: sample size, success count, confidence."""

    m: int
    successes: int
    delta: float

    def __post_init__(self) -> None:
        if self.m < 1:
            raise ValueError(f"m must be >= 1, got {self.m}")
        if not 0 <= self.successes <= self.m:
            raise ValueError(
                f"successes must lie in [0, {self.m}], got {self.successes}"
            )
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")


@dataclass(frozen=True)
class BoundResult:
    """Solved bound. satisfiable is False only for successes == m."""

    b_star: float
    satisfiable: bool

    def __post_init__(self) -> None:
        if not 0.0 <= self.b_star <= 1.0:
            raise ValueError(f"b_star {self.b_star} outside [0, 1]")


@lru_cache(maxsize=64)
def _log_binom_coeffs(m: int, x: int) -> np.ndarray:
    # ln C(m, j) for j = 0..x from exact integer coefficients; each entry
    # is accurate to one ulp, so the summed CDF stays near machine
    # precision.
    out = np.array([math.log(math.comb(m, j)) for j in range(x + 1)])
    out.setflags(write=False)
    return out


def binomial_cdf(x: int, m: int, b: float) -> float:
    """P(X <= x) for X ~ Binomial(m, b)."""
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    if not 0 <= x <= m:
        raise ValueError(f"x must lie in [0, {m}], got {x}")
    if not 0.0 <= b <= 1.0:
        raise ValueError(f"b must lie in [0, 1], got {b}")
    if x == m or b == 0.0:
        return 1.0
    if b == 1.0:
        return 0.0
    if m <= _DIRECT_SUM_MAX_M:
        j = np.arange(x + 1)
        log_terms = _log_binom_coeffs(m, x) + j * math.log(b) + (m - j) * math.log1p(-b)
        peak = log_terms.max()
        total = peak + math.log(np.exp(log_terms - peak).sum())
        return min(1.0, math.exp(total))
    # Tails thin relative to m are summed directly (the continued
    # fraction converges slowly right at its symmetry switch, which is
    # where extreme x/m ratios land); the bulk goes through the
    # incomplete-beta identity. The upper tail of (m, b) is the lower
    # tail of (m, 1-b); 1-b is exact here because a thin upper tail
    # implies b >= 0.5 wherever the tail mass is non-negligible.
    thin = min(m // 100, _TAIL_SUM_MAX_TERMS)
    if x + 1 <= thin:
        return min(1.0, _lower_tail_sum(m, x, b))
    if m - x <= thin:
        return max(0.0, 1.0 - _lower_tail_sum(m, m - x - 1, 1.0 - b))
    return incomplete_beta(m - x, x + 1, 1.0 - b)


def _lower_tail_sum(m: int, x: int, b: float) -> float:
    # Sum of Binomial(m, b) pmf over j in [0, x], evaluated in extended
    # precision. Log binomial coefficients accumulate via cumulative sums
    # of log((m - j + 1) / j), which extended precision keeps below 1e-13
    # absolute error even over 1e5 terms.
    long = np.longdouble
    j_pos = np.arange(1, x + 1, dtype=long)
    log_coef = np.concatenate(
        [np.zeros(1, dtype=long), np.cumsum(np.log(m - j_pos + 1) - np.log(j_pos))]
    )
    j = np.arange(x + 1)
    log_terms = log_coef + j * np.log(long(b)) + (m - j) * np.log1p(-long(b))
    return float(np.exp(log_terms).sum())


@lru_cache(maxsize=200_000)
def _solve_bound_cached(m: int, successes: int, delta: float) -> tuple[float, bool]:
    if successes == m:
        # CDF is identically 1, so the constraint is unsatisfiable; fall
        # back to the exact Clopper-Pearson lower bound for a full-success
        # sample and flag it.
        return delta ** (1.0 / m), False
    limit = 1.0 - delta
    lo, hi = 0.0, 1.0
    # cdf(lo)=1 > limit (infeasible), cdf(hi)=0 <= limit (feasible); bisect
    # until the bracket is narrower than the tolerance.
    while hi - lo > BISECTION_TOL:
        mid = 0.5 * (lo + hi)
        if binomial_cdf(successes, m, mid) <= limit:
            hi = mid
        else:
            lo = mid
    return hi, True


def solve_bound(q: BoundQuery) -> BoundResult:
    """Minimal b with BinomialCDF(successes; m, b) <= 1 - delta."""
    b_star, satisfiable = _solve_bound_cached(q.m, q.successes, q.delta)
    return BoundResult(b_star=b_star, satisfiable=satisfiable)
