"""Population-level functionals over quantile windows.

The location functional integrates F^{-1} over (u, 1-v); the variance
functional is the double Lebesgue-Stieltjes integral of (s^t - st)
against dF^{-1} twice, with the half-open [a, b) convention for the
left-continuous integrator.  For continuous F the variance functional
equals the variance of the Winsorized variable, and that single-integral
form is the primary computation route; the double-integral route is kept
as an independent cross-check (exact for step quantile functions).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .distributions import (
    DistributionSpec,
    quantile,
    quantile_integral,
)
from .errors import DegenerateWindowError, DomainError

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(5)


@dataclass(frozen=True)
class PopulationFunctionals:
    """Values of the window functionals at one window (u, 1 - v)."""

    mu: float
    sigma2: float
    winsor_mean: float
    winsor_var: float
    window: tuple[float, float]


def _check_window(u: float, v: float) -> None:
    if not (0.0 <= u < 1.0 - v <= 1.0):
        raise DomainError(f"window (u, 1-v) = ({u}, {1.0 - v}) is empty or inverted")


def mu_functional(spec: DistributionSpec, u: float, v: float) -> float:
    """mu(u, 1-v): integral of F^{-1} over the window."""
    _check_window(u, v)
    return _mu_cached(spec, float(u), float(v))


@lru_cache(maxsize=16384)
def _mu_cached(spec: DistributionSpec, u: float, v: float) -> float:
    return quantile_integral(spec, u, 1.0 - v, power=1)


def winsorized_moments(spec: DistributionSpec, a: float, b: float) -> tuple[float, float]:
    """(mean, variance) of the variable Winsorized outside (xi_a, xi_{1-b}].

    Quantile-domain formulas: the clamped mass a sits at xi_a and mass b
    at xi_{1-b}; the middle is the window integral of F^{-1}.  For
    continuous F these are the moments of the Winsorized observation.
    """
    _check_window(a, b)
    return _winsor_cached(spec, float(a), float(b))


@lru_cache(maxsize=16384)
def _winsor_cached(spec: DistributionSpec, a: float, b: float) -> tuple[float, float]:
    hi = 1.0 - b
    xi_a = quantile(spec, a) if a > 0.0 else None
    xi_b = quantile(spec, hi) if b > 0.0 else None
    if xi_a is not None and xi_b is not None and xi_a == xi_b:
        raise DegenerateWindowError(f"xi_{a} == xi_{hi} == {xi_a}: Winsorized law degenerate")
    mean = quantile_integral(spec, a, hi, power=1)
    m2 = quantile_integral(spec, a, hi, power=2)
    if xi_a is not None:
        mean += a * xi_a
        m2 += a * xi_a * xi_a
    if xi_b is not None:
        mean += b * xi_b
        m2 += b * xi_b * xi_b
    return mean, max(m2 - mean * mean, 0.0)


def sigma2_functional(spec: DistributionSpec, u: float, v: float) -> float:
    """sigma^2(u, 1-v); Winsorized single-integral form for continuous F,
    exact double Stieltjes sum for step quantile functions."""
    _check_window(u, v)
    if spec.is_discrete:
        return sigma2_stieltjes(spec, u, v)
    return winsorized_moments(spec, u, v)[1]


def population_functionals(spec: DistributionSpec, u: float, v: float) -> PopulationFunctionals:
    wm, wv = winsorized_moments(spec, u, v)
    return PopulationFunctionals(
        mu=mu_functional(spec, u, v),
        sigma2=sigma2_functional(spec, u, v),
        winsor_mean=wm,
        winsor_var=wv,
        window=(u, 1.0 - v),
    )


def normalizers(spec: DistributionSpec, schedule, n: int) -> tuple[float, float]:
    """(mu_n, sigma_W) for the trimming schedule evaluated at n."""
    from .schedules import evaluate  # local import avoids a module cycle

    _, _, a_n, b_n = evaluate(schedule, n)
    return normalizers_at(spec, a_n, b_n)


def normalizers_at(spec: DistributionSpec, a: float, b: float) -> tuple[float, float]:
    mu_n = mu_functional(spec, a, b)
    _, wv = winsorized_moments(spec, a, b)
    sigma_w = math.sqrt(wv)
    if not sigma_w > 0.0:
        raise DegenerateWindowError("sigma_W vanishes on this window")
    return mu_n, sigma_w


# ---------------------------------------------------------------------------
# Double-integral route.
# ---------------------------------------------------------------------------


def _sigma2_step(locations: np.ndarray, masses: np.ndarray) -> float:
    """Exact double Stieltjes sum for a purely atomic dF^{-1}.

    With atoms (u_i, m_i) sorted by u_i, the kernel sum collapses to a
    single pass: sum_{ij} (u_i ^ u_j) m_i m_j = sum_i u_i m_i (m_i + 2 T_i)
    with T_i the mass strictly above i, and the product part is the
    squared first moment.
    """
    if len(locations) == 0:
        return 0.0
    um = locations * masses
    tail = np.concatenate((np.cumsum(masses[::-1])[-2::-1], [0.0]))
    min_part = float(np.sum(um * (masses + 2.0 * tail)))
    s1 = float(np.sum(um))
    return min_part - s1 * s1


def sigma2_stieltjes(
    spec: DistributionSpec, u: float, v: float, cells: int = 8192
) -> float:
    """sigma^2(u, 1-v) by direct double integration against dF^{-1} twice.

    Step quantile functions are handled exactly (atoms of dF^{-1} located
    with the [a, b) convention).  Continuous quantile functions are
    discretized into `cells` steps whose atom positions are the
    dF^{-1}-centroids of each cell, which makes the off-diagonal part of
    the kernel sum exact; only the diagonal cells contribute an
    O(cells^{-2}) error.
    """
    _check_window(u, v)
    hi = 1.0 - v
    if spec.is_discrete:
        w1 = spec.param("w1")
        if u <= w1 < hi:
            jump = spec.param("x2") - spec.param("x1")
            return _sigma2_step(np.array([w1]), np.array([jump]))
        return 0.0

    edges = np.linspace(u, hi, cells + 1)
    q_edges = quantile(spec, edges)
    masses = np.diff(q_edges)

    # integral of F^{-1} over each cell by 5-point Gauss-Legendre.
    half = (edges[1:] - edges[:-1]) / 2.0
    mid = (edges[1:] + edges[:-1]) / 2.0
    nodes = mid[:, None] + half[:, None] * _GL_NODES[None, :]
    cell_int = half * (quantile(spec, nodes) @ _GL_WEIGHTS)

    # centroid of dF^{-1} in the cell via integration by parts:
    # int s dF^{-1} = [s F^{-1}] - int F^{-1} ds.
    sq = edges * q_edges
    keep = masses > 0.0
    centroids = np.where(keep, (sq[1:] - sq[:-1] - cell_int) / np.where(keep, masses, 1.0), 0.0)
    centroids = np.clip(centroids, edges[:-1], edges[1:])
    return _sigma2_step(centroids[keep], masses[keep])
