"""Independent brute-force oracles used by the tests.

These deliberately re-derive expected values through different code paths
than the library: direct log-space summation on a fixed grid for the
bound solver, a plain double loop for MMD, and hand ECDF enumeration for
KS. They must stay independent of the implementations they check.
"""

import math

import numpy as np

GRID_STEP = 1e-6
_COARSE = 1000  # coarse stride in grid units


def _log_binom_coeffs(m: int, successes: int) -> np.ndarray:
    return np.array(
        [
            math.lgamma(m + 1) - math.lgamma(j + 1) - math.lgamma(m - j + 1)
            for j in range(successes + 1)
        ]
    )


def _cdf_on_grid(m: int, successes: int, b: np.ndarray, log_coeffs: np.ndarray) -> np.ndarray:
    # Direct evaluation of the binomial sum in log space, vectorized over b.
    j = np.arange(successes + 1)
    out = np.empty(b.size)
    interior = (b > 0.0) & (b < 1.0)
    bi = b[interior]
    log_terms = (
        log_coeffs[None, :]
        + j[None, :] * np.log(bi)[:, None]
        + (m - j)[None, :] * np.log1p(-bi)[:, None]
    )
    peak = log_terms.max(axis=1, keepdims=True)
    out[interior] = np.exp(peak[:, 0] + np.log(np.exp(log_terms - peak).sum(axis=1)))
    out[b <= 0.0] = 1.0
    out[b >= 1.0] = 1.0 if successes == m else 0.0
    return out


def grid_scan_bound(m: int, successes: int, delta: float) -> float:
    """First feasible b on the 1e-6 grid for the binomial tail constraint.

    Feasibility (CDF <= 1 - delta) is monotone in b, so a coarse scan
    followed by a fine scan of the bracketing cell returns exactly the
    same grid point as a full linear scan.
    """
    limit = 1.0 - delta
    log_coeffs = _log_binom_coeffs(m, successes)
    coarse_idx = np.arange(0, 1_000_001, _COARSE)
    feasible = _cdf_on_grid(m, successes, coarse_idx * GRID_STEP, log_coeffs) <= limit
    first = int(coarse_idx[np.argmax(feasible)])
    if first == 0:
        return 0.0
    fine_idx = np.arange(first - _COARSE + 1, first + 1)
    feasible = _cdf_on_grid(m, successes, fine_idx * GRID_STEP, log_coeffs) <= limit
    return float(fine_idx[np.argmax(feasible)] * GRID_STEP)


def mmd2_double_loop(x: np.ndarray, y: np.ndarray, sigma: float) -> float:
    """Naive O(n^2) unbiased squared-MMD reimplementation."""

    def k(u, v):
        d = u - v
        return math.exp(-float(np.dot(d, d)) / (2.0 * sigma * sigma))

    m, n = len(x), len(y)
    xx = sum(k(x[i], x[j]) for i in range(m) for j in range(m) if i != j)
    yy = sum(k(y[i], y[j]) for i in range(n) for j in range(n) if i != j)
    xy = sum(k(x[i], y[j]) for i in range(m) for j in range(n))
    return xx / (m * (m - 1)) + yy / (n * (n - 1)) - 2.0 * xy / (m * n)


def ks_statistic_enumerated(a, b) -> float:
    """KS statistic by explicit ECDF evaluation at every pooled point."""
    a = sorted(a)
    b = sorted(b)
    best = 0.0
    for point in a + b:
        fa = sum(1 for v in a if v <= point) / len(a)
        fb = sum(1 for v in b if v <= point) / len(b)
        best = max(best, abs(fa - fb))
    return best
