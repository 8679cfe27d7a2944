"""Sample statistics and the exact trimmed-mean decomposition.

The centered trimmed mean splits exactly into a centered Winsorized mean
plus a remainder built from the mismatch between trim counts and the
binomial counts at the population quantiles.  The remainder has two
algebraically equal forms (signed order-statistic sums and signed
empirical-quantile integrals); both are computed and compared on every
call, so a convention bug in either cannot pass silently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .distributions import DistributionSpec, quantile
from .errors import DomainError, InternalConsistencyError, InvalidTrimError
from .functionals import mu_functional


@dataclass(frozen=True)
class CountStatistics:
    """Binomial count N_nu = #{i : X_i <= xi_nu} and both fraction views."""

    n_nu: int
    a_cap: float  # N_nu / n
    b_cap: float  # (n - N_nu) / n


@dataclass(frozen=True)
class SampleDecomposition:
    n: int
    t_n: float
    w_bar: float
    e_wbar: float
    r_n: float
    r_n_alpha: float
    r_n_beta: float
    identity_residual: float


def order_statistics(sample) -> np.ndarray:
    xs = np.asarray(sample, dtype=float)
    if xs.ndim != 1 or xs.size == 0:
        raise DomainError("sample must be a nonempty 1-d array")
    if not np.all(np.isfinite(xs)):
        raise DomainError("sample values must be finite")
    return np.sort(xs)


def empirical_quantile(sample, u: float) -> float:
    """F_n^{-1}(u) = X_{i:n} on the half-open cell (i-1)/n < u <= i/n."""
    xs = order_statistics(sample)
    return _empirical_quantile_sorted(xs, u)


def _empirical_quantile_sorted(xs: np.ndarray, u: float) -> float:
    if not 0.0 < u <= 1.0:
        raise DomainError("empirical quantile argument must lie in (0, 1]")
    n = xs.size
    i = max(1, math.ceil(n * u))
    return float(xs[i - 1])


def _check_trim(n: int, k: int, m: int) -> None:
    if k != int(k) or m != int(m) or k < 0 or m < 0 or k >= n - m:
        raise InvalidTrimError(f"trim counts must satisfy 0 <= k < n - m <= n, got k={k}, m={m}, n={n}")


def trimmed_mean(sample, k: int, m: int) -> float:
    """(1/n) * sum of the order statistics X_{k+1:n} .. X_{n-m:n}."""
    xs = order_statistics(sample)
    n = xs.size
    _check_trim(n, k, m)
    return float(xs[k : n - m].sum() / n)


def trimmed_mean_integral(sample, a: float, b: float) -> float:
    """Quantile-integral form: integral of F_n^{-1} over (a, 1-b).

    When a and b sit exactly on cell boundaries the evaluation reduces to
    the same slice-sum expression as the sum form, so the two forms agree
    bit for bit on dyadic trim fractions.
    """
    if not (0.0 <= a < 1.0 - b <= 1.0):
        raise DomainError("trim fractions must satisfy 0 <= a < 1 - b <= 1")
    xs = order_statistics(sample)
    n = xs.size
    ka, kb = a * n, b * n
    if ka == math.floor(ka) and kb == math.floor(kb):
        k, m = int(ka), int(kb)
        return float(xs[k : n - m].sum() / n)
    i = np.arange(1, n + 1, dtype=float)
    lo = np.maximum((i - 1.0) / n, a)
    hi = np.minimum(i / n, 1.0 - b)
    w = np.clip(hi - lo, 0.0, None)
    return float(np.dot(w, xs))


def winsorize(sample, xi_a: float, xi_b: float) -> np.ndarray:
    """Clamp elementwise to [xi_a, xi_b]: values <= xi_a become xi_a, values > xi_b become xi_b."""
    if not xi_a <= xi_b:
        raise DomainError(f"winsorize bounds inverted: {xi_a} > {xi_b}")
    xs = np.asarray(sample, dtype=float)
    return np.clip(xs, xi_a, xi_b)


def counts(sample, xi_nu: float) -> CountStatistics:
    xs = np.asarray(sample, dtype=float)
    if xs.size == 0:
        raise DomainError("sample must be nonempty")
    n_nu = int(np.count_nonzero(xs <= xi_nu))
    n = xs.size
    return CountStatistics(n_nu=n_nu, a_cap=n_nu / n, b_cap=(n - n_nu) / n)


def remainder(sample, k: int, m: int, xi_a: float, xi_b: float) -> tuple[float, float, float]:
    """(r_n, r_alpha, r_beta) of the decomposition remainder.

    Evaluates both the signed-sum form and the signed-integral form and
    raises InternalConsistencyError if they disagree beyond 1e-12
    (relative to the larger term); such a disagreement means a bug, not a
    data problem.
    """
    xs = order_statistics(sample)
    _check_trim(xs.size, k, m)
    return _remainder_sorted(xs, k, m, xi_a, xi_b)


def _signed_sum(xs: np.ndarray, boundary: int, count: int, ref: float) -> float:
    """sgn(count - boundary) * sum_{i=(boundary^count)+1}^{count v boundary} (X_{i:n} - ref) / n."""
    lo, hi = min(boundary, count), max(boundary, count)
    if hi == lo:
        return 0.0
    sign = 1.0 if count > boundary else -1.0
    return sign * float((xs[lo:hi] - ref).sum()) / xs.size


def _signed_cell_integral(xs: np.ndarray, boundary: int, count: int, ref: float) -> float:
    """Signed integral of (F_n^{-1}(u) - ref) du between boundary/n and count/n."""
    n = xs.size
    lo, hi = min(boundary, count), max(boundary, count)
    if hi == lo:
        return 0.0
    sign = 1.0 if count > boundary else -1.0
    i = np.arange(lo + 1, hi + 1, dtype=float)
    widths = i / n - (i - 1.0) / n
    return sign * float(np.dot(xs[lo:hi] - ref, widths))


def _remainder_sorted(xs: np.ndarray, k: int, m: int, xi_a: float, xi_b: float) -> tuple[float, float, float]:
    n = xs.size
    n_a = int(np.count_nonzero(xs <= xi_a))
    n_b = int(np.count_nonzero(xs <= xi_b))

    r_alpha = _signed_sum(xs, k, n_a, xi_a)
    r_beta = _signed_sum(xs, n - m, n_b, xi_b)
    r_alpha_int = _signed_cell_integral(xs, k, n_a, xi_a)
    r_beta_int = _signed_cell_integral(xs, n - m, n_b, xi_b)

    for name, s, q in (("alpha", r_alpha, r_alpha_int), ("beta", r_beta, r_beta_int)):
        tol = 1e-12 * max(1.0, abs(s), abs(q))
        if abs(s - q) > tol:
            raise InternalConsistencyError(
                f"remainder {name} forms disagree: sum={s!r} integral={q!r}"
            )
    return r_alpha - r_beta, r_alpha, r_beta


def decompose(sample, spec: DistributionSpec, k: int, m: int) -> SampleDecomposition:
    """Assemble the exact decomposition of the centered trimmed mean.

    The population Winsorized mean is the quantile-domain expression
    a*xi_a + mu_n + b*xi_b, which makes the identity residual zero up to
    rounding for continuous F.
    """
    xs = order_statistics(sample)
    n = xs.size
    _check_trim(n, k, m)
    a, b = k / n, m / n
    xi_a = quantile(spec, a) if k > 0 else -math.inf
    xi_b = quantile(spec, 1.0 - b) if m > 0 else math.inf

    t_n = float(xs[k : n - m].sum() / n)
    w_bar = float(np.clip(xs, xi_a, xi_b).mean())
    mu_n = mu_functional(spec, a, b)
    e_wbar = mu_n
    if k > 0:
        e_wbar += a * xi_a
    if m > 0:
        e_wbar += b * xi_b

    r_n, r_alpha, r_beta = _remainder_sorted(xs, k, m, xi_a, xi_b)
    residual = (t_n - mu_n) - (w_bar - e_wbar) - r_n
    return SampleDecomposition(
        n=n,
        t_n=t_n,
        w_bar=w_bar,
        e_wbar=e_wbar,
        r_n=r_n,
        r_n_alpha=r_alpha,
        r_n_beta=r_beta,
        identity_residual=residual,
    )
