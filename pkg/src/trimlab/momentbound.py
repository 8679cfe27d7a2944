"""Order-statistic absolute-moment bound and its empirical verification.

For moment orders k and delta with rho = k/delta, all n >= 2 rho + 1 and
indices rho <= i <= n - rho + 1, the k-th absolute moment of the i-th
order statistic is bounded by C(rho) [ (alpha_i (1 - alpha_i))^{-1}
E|X|^delta ]^rho with alpha_i = i/(n+1) and C(rho) = 2 sqrt(rho)
exp(rho + 7/6).  The case k > delta is allowed; the bound is non-trivial
only when E|X|^delta is finite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rng
from .distributions import DistributionSpec, abs_moment, quantile
from .errors import BoundWindowError, DomainError, MomentError


@dataclass(frozen=True)
class BoundQuery:
    """One cell of the bound: moment order k assuming E|X|^delta finite, at X_{i:n}."""

    k: float
    delta: float
    i: int
    n: int

    def __post_init__(self):
        if not (self.k > 0 and self.delta > 0):
            raise DomainError("moment orders k and delta must be positive")
        if self.n < 2:
            raise DomainError("sample size n must be at least 2")
        if not 1 <= self.i <= self.n:
            raise DomainError("order-statistic index i must lie in [1, n]")
        rho = self.rho
        if self.n < 2.0 * rho + 1.0:
            raise BoundWindowError(f"bound requires n >= 2 rho + 1 = {2 * rho + 1:g}, got n={self.n}")
        if not rho <= self.i <= self.n - rho + 1.0:
            raise BoundWindowError(
                f"bound requires rho <= i <= n - rho + 1, got i={self.i} with rho={rho:g}, n={self.n}"
            )

    @property
    def rho(self) -> float:
        return self.k / self.delta

    @property
    def alpha_i(self) -> float:
        return self.i / (self.n + 1)


def constant(rho: float) -> float:
    """C(rho) = 2 sqrt(rho) exp(rho + 7/6)."""
    if not rho > 0:
        raise DomainError("rho must be positive")
    return 2.0 * math.sqrt(rho) * math.exp(rho + 7.0 / 6.0)


def bound_value(query: BoundQuery, abs_moment_delta: float) -> float:
    """The bound C(rho) [ (alpha_i (1 - alpha_i))^{-1} E|X|^delta ]^rho."""
    if not (abs_moment_delta > 0 and math.isfinite(abs_moment_delta)):
        raise MomentError("E|X|^delta must be finite and positive for the bound to be non-trivial")
    a = query.alpha_i
    return constant(query.rho) * (abs_moment_delta / (a * (1.0 - a))) ** query.rho


@dataclass(frozen=True)
class BoundVerification:
    query: BoundQuery
    mc_estimate: float
    standard_error: float
    bound: float

    @property
    def margin(self) -> float:
        return self.bound / self.mc_estimate

    def to_json(self) -> dict:
        q = self.query
        return {
            "k": q.k,
            "delta": q.delta,
            "i": q.i,
            "n": q.n,
            "rho": q.rho,
            "alpha_i": q.alpha_i,
            "mc_estimate": self.mc_estimate,
            "standard_error": self.standard_error,
            "bound": self.bound,
            "margin": self.margin,
        }


def verify_bound(
    spec: DistributionSpec,
    query: BoundQuery,
    reps: int,
    seed: int,
    stream_index: int = 0,
) -> BoundVerification:
    """Monte Carlo check that E|X_{i:n}|^k stays strictly under the bound.

    Samples `reps` full samples of size n (sorted per replication) and
    averages |X_{i:n}|^k; the margin bound/estimate should exceed 1 well
    beyond the Monte Carlo error.
    """
    if reps < 10_000:
        raise DomainError("verify_bound requires at least 10^4 replications")
    m_delta = abs_moment(spec, query.delta)
    if not math.isfinite(m_delta):
        raise MomentError(f"E|X|^{query.delta:g} diverges for {spec.family}; bound is trivial")
    bound = bound_value(query, m_delta)

    n, i = query.n, query.i
    values = np.empty(reps)
    # Row blocks keep memory flat; the block size is a fixed function of n,
    # so each replication always reads the same substream slice.
    block = max(1, (1 << 22) // n)
    pos = 0
    b_idx = 0
    while pos < reps:
        rows = min(block, reps - pos)
        u = rng.uniforms(seed, rows * n, rng.DOMAIN_BOUND, stream_index * 4096 + b_idx).reshape(rows, n)
        x = quantile(spec, u)
        order = np.partition(x, i - 1, axis=1)[:, i - 1]
        values[pos : pos + rows] = np.abs(order) ** query.k
        pos += rows
        b_idx += 1
    mc = float(values.mean())
    se = float(values.std(ddof=1) / math.sqrt(reps))
    return BoundVerification(query=query, mc_estimate=mc, standard_error=se, bound=bound)
