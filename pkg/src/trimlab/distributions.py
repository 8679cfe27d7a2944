"""Parametric population models.

Each family provides the df F, its left-continuous inverse
F^{-1}(u) = inf{x : F(x) >= u}, inverse-transform sampling from
counter-based uniform streams, absolute moments E|X|^p, and closed-form
integrals of powers of F^{-1} over quantile windows (with an independent
adaptive-quadrature route kept for cross-checks).

Convention: quantile(0) is the right limit F^{-1}(0+), which is -inf for
families unbounded below; quantile(1) is an error unless the support is
bounded above.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from . import rng
from .errors import DomainError, MomentError, UnboundedQuantileError

FAMILIES = (
    "Uniform",
    "Exponential",
    "Normal",
    "Pareto",
    "StudentT",
    "Cauchy",
    "TwoPointMixture",
)

_PARAM_NAMES = {
    "Uniform": ("lo", "hi"),
    "Exponential": ("rate",),
    "Normal": ("mean", "sd"),
    "Pareto": ("tail_index", "scale"),
    "StudentT": ("df",),
    "Cauchy": ("location", "scale"),
    "TwoPointMixture": ("x1", "x2", "w1"),
}

_SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class DistributionSpec:
    """A population F identified by family name and parameter tuple.

    Immutable and hashable, so specs can key caches and be shared freely
    across worker processes.
    """

    family: str
    params: tuple[tuple[str, float], ...]

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise DomainError(f"unknown family {self.family!r}")
        names = tuple(name for name, _ in self.params)
        if names != _PARAM_NAMES[self.family]:
            raise DomainError(
                f"{self.family} expects parameters {_PARAM_NAMES[self.family]}, got {names}"
            )
        for name, value in self.params:
            value = float(value)
            if not math.isfinite(value):
                raise DomainError(f"parameter {name} must be finite")
        p = dict(self.params)
        if self.family == "Uniform" and not p["lo"] < p["hi"]:
            raise DomainError("Uniform requires lo < hi")
        if self.family == "Exponential" and not p["rate"] > 0:
            raise DomainError("Exponential rate must be > 0")
        if self.family == "Normal" and not p["sd"] > 0:
            raise DomainError("Normal sd must be > 0")
        if self.family == "Pareto" and not (p["tail_index"] > 0 and p["scale"] > 0):
            raise DomainError("Pareto tail_index and scale must be > 0")
        if self.family == "StudentT" and not p["df"] > 0:
            raise DomainError("StudentT df must be > 0")
        if self.family == "Cauchy" and not p["scale"] > 0:
            raise DomainError("Cauchy scale must be > 0")
        if self.family == "TwoPointMixture":
            if not p["x1"] < p["x2"]:
                raise DomainError("TwoPointMixture requires x1 < x2")
            if not 0.0 < p["w1"] < 1.0:
                raise DomainError("TwoPointMixture weight w1 must lie in (0, 1)")

    def param(self, name: str) -> float:
        return dict(self.params)[name]

    @property
    def is_discrete(self) -> bool:
        return self.family == "TwoPointMixture"

    def to_json(self) -> dict:
        return {"family": self.family, "params": {k: v for k, v in self.params}}


def _make(family: str, **kwargs: float) -> DistributionSpec:
    params = tuple((name, float(kwargs[name])) for name in _PARAM_NAMES[family])
    return DistributionSpec(family, params)


def uniform(lo: float, hi: float) -> DistributionSpec:
    return _make("Uniform", lo=lo, hi=hi)


def exponential(rate: float) -> DistributionSpec:
    return _make("Exponential", rate=rate)


def normal(mean: float = 0.0, sd: float = 1.0) -> DistributionSpec:
    return _make("Normal", mean=mean, sd=sd)


def pareto(tail_index: float, scale: float = 1.0) -> DistributionSpec:
    return _make("Pareto", tail_index=tail_index, scale=scale)


def student_t(df: float) -> DistributionSpec:
    return _make("StudentT", df=df)


def cauchy(location: float = 0.0, scale: float = 1.0) -> DistributionSpec:
    return _make("Cauchy", location=location, scale=scale)


def two_point(x1: float, x2: float, w1: float) -> DistributionSpec:
    """Two-atom mixture: x1 with probability w1, x2 with probability 1 - w1."""
    return _make("TwoPointMixture", x1=x1, x2=x2, w1=w1)


def from_json(doc: dict) -> DistributionSpec:
    if set(doc) != {"family", "params"}:
        raise DomainError("distribution document must have exactly 'family' and 'params'")
    family = doc["family"]
    if family not in FAMILIES:
        raise DomainError(f"unknown family {family!r}")
    expected = set(_PARAM_NAMES[family])
    got = set(doc["params"])
    if got != expected:
        raise DomainError(f"{family} expects parameters {sorted(expected)}, got {sorted(got)}")
    return _make(family, **{k: float(v) for k, v in doc["params"].items()})


def _student_t_quantile(df: float, u):
    """Inverse t df; stdtrit refined by one Newton step on stdtr.

    stdtrit alone round-trips only to ~5e-12; the refinement restores the
    1e-12 cdf(quantile(u)) = u contract.
    """
    t = special.stdtrit(df, u)
    norm = math.exp(math.lgamma((df + 1.0) / 2.0) - math.lgamma(df / 2.0)) / math.sqrt(df * math.pi)
    with np.errstate(invalid="ignore", over="ignore"):
        density = norm * (1.0 + t * t / df) ** (-(df + 1.0) / 2.0)
        step = np.where(density > 0.0, (special.stdtr(df, t) - u) / np.where(density > 0.0, density, 1.0), 0.0)
    return np.where(np.isfinite(t), t - step, t)


def support(spec: DistributionSpec) -> tuple[float, float]:
    """(inf, sup) of the support; infinite endpoints where unbounded."""
    p = dict(spec.params)
    if spec.family == "Uniform":
        return p["lo"], p["hi"]
    if spec.family == "Exponential":
        return 0.0, math.inf
    if spec.family == "Pareto":
        return p["scale"], math.inf
    if spec.family == "TwoPointMixture":
        return p["x1"], p["x2"]
    return -math.inf, math.inf


def cdf(spec: DistributionSpec, x):
    """F(x); vectorized over x.  Non-finite x is a domain error."""
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("cdf argument must be finite")
    p = dict(spec.params)
    if spec.family == "Uniform":
        out = np.clip((arr - p["lo"]) / (p["hi"] - p["lo"]), 0.0, 1.0)
    elif spec.family == "Exponential":
        out = -np.expm1(-p["rate"] * np.maximum(arr, 0.0))
    elif spec.family == "Normal":
        out = special.ndtr((arr - p["mean"]) / p["sd"])
    elif spec.family == "Pareto":
        theta, scale = p["tail_index"], p["scale"]
        ratio = scale / np.maximum(arr, scale)
        out = np.where(arr >= scale, 1.0 - ratio**theta, 0.0)
    elif spec.family == "StudentT":
        out = special.stdtr(p["df"], arr)
    elif spec.family == "Cauchy":
        out = 0.5 + np.arctan((arr - p["location"]) / p["scale"]) / math.pi
    else:  # TwoPointMixture
        out = p["w1"] * (arr >= p["x1"]) + (1.0 - p["w1"]) * (arr >= p["x2"])
    if np.isscalar(x) or np.ndim(x) == 0:
        return float(out)
    return out


def quantile(spec: DistributionSpec, u):
    """Left-continuous generalized inverse F^{-1}(u); vectorized over u in [0, 1]."""
    arr = np.asarray(u, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
        raise DomainError("quantile argument must lie in [0, 1]")
    lo_sup, hi_sup = support(spec)
    if np.any(arr == 1.0) and not math.isfinite(hi_sup):
        raise UnboundedQuantileError(
            "quantile(1) undefined: support unbounded above"
        )
    p = dict(spec.params)
    with np.errstate(divide="ignore"):
        if spec.family == "Uniform":
            out = p["lo"] + (p["hi"] - p["lo"]) * arr
        elif spec.family == "Exponential":
            out = -np.log1p(-arr) / p["rate"]
        elif spec.family == "Normal":
            out = p["mean"] + p["sd"] * special.ndtri(arr)
        elif spec.family == "Pareto":
            out = p["scale"] * (1.0 - arr) ** (-1.0 / p["tail_index"])
        elif spec.family == "StudentT":
            out = _student_t_quantile(p["df"], arr)
        elif spec.family == "Cauchy":
            out = p["location"] + p["scale"] * np.tan(math.pi * (arr - 0.5))
            out = np.where(arr == 0.0, -math.inf, out)
        else:  # TwoPointMixture: x1 on (0, w1], x2 on (w1, 1]
            out = np.where(arr <= p["w1"], p["x1"], p["x2"])
            out = np.asarray(out, dtype=float)
    # The u = 0 convention: right limit, i.e. the lower support endpoint.
    if np.any(arr == 0.0):
        out = np.where(arr == 0.0, lo_sup, out)
    if np.isscalar(u) or np.ndim(u) == 0:
        return float(out)
    return out


def sample(spec: DistributionSpec, seed: int, n: int, domain: int = 0, index: int = 0) -> np.ndarray:
    """n i.i.d. draws by inverse transform of the (seed, domain, index) uniform stream."""
    if n < 1:
        raise DomainError("sample size must be at least 1")
    return quantile(spec, rng.uniforms(seed, n, domain, index))


def _gamma_ratio(log_terms_plus, log_terms_minus) -> float:
    acc = sum(math.lgamma(t) for t in log_terms_plus)
    acc -= sum(math.lgamma(t) for t in log_terms_minus)
    try:
        return math.exp(acc)
    except OverflowError:
        return math.inf


def abs_moment(spec: DistributionSpec, p: float) -> float:
    """E|X|^p; closed form where the family admits one, else quadrature.

    Returns +inf when the moment diverges (Pareto p >= tail_index,
    Cauchy p >= 1, StudentT p >= df).
    """
    if not p > 0:
        raise DomainError("moment order p must be > 0")
    prm = dict(spec.params)
    if spec.family == "Uniform":
        lo, hi = prm["lo"], prm["hi"]

        def g(x):
            return math.copysign(abs(x) ** (p + 1.0), x) / (p + 1.0)

        return (g(hi) - g(lo)) / (hi - lo)
    if spec.family == "Exponential":
        return _gamma_ratio([p + 1.0], []) / prm["rate"] ** p
    if spec.family == "Normal":
        if prm["mean"] == 0.0:
            return prm["sd"] ** p * 2.0 ** (p / 2.0) * _gamma_ratio([(p + 1.0) / 2.0], []) / math.sqrt(math.pi)
        return _abs_moment_quad(spec, p)
    if spec.family == "Pareto":
        theta = prm["tail_index"]
        if p >= theta:
            return math.inf
        return theta * prm["scale"] ** p / (theta - p)
    if spec.family == "StudentT":
        df = prm["df"]
        if p >= df:
            return math.inf
        return df ** (p / 2.0) * _gamma_ratio(
            [(p + 1.0) / 2.0, (df - p) / 2.0], [df / 2.0]
        ) / math.sqrt(math.pi)
    if spec.family == "Cauchy":
        if p >= 1.0:
            return math.inf
        if prm["location"] == 0.0:
            return prm["scale"] ** p / math.cos(math.pi * p / 2.0)
        return _abs_moment_quad(spec, p)
    # TwoPointMixture
    return prm["w1"] * abs(prm["x1"]) ** p + (1.0 - prm["w1"]) * abs(prm["x2"]) ** p


def _abs_moment_quad(spec: DistributionSpec, p: float) -> float:
    """integral of |F^{-1}(u)|^p over (0,1), split at 1/2 for the two tails."""

    def f(u):
        return abs(quantile(spec, u)) ** p

    lo, _ = integrate.quad(f, 0.0, 0.5, epsabs=0.0, epsrel=1e-9, limit=500)
    hi, _ = integrate.quad(f, 0.5, 1.0, epsabs=0.0, epsrel=1e-9, limit=500)
    return lo + hi


# ---------------------------------------------------------------------------
# Quantile-window integrals: closed forms per family plus a numeric route.
# ---------------------------------------------------------------------------


def _check_integrability(spec: DistributionSpec, a: float, b: float, power: int) -> None:
    """Raise MomentError when integral of (F^{-1})^power over (a, b) diverges at an endpoint."""
    prm = dict(spec.params)
    if a == 0.0:
        if spec.family == "Cauchy":
            raise MomentError("Cauchy quantile integral diverges at u = 0")
        if spec.family == "StudentT" and prm["df"] <= power:
            raise MomentError("StudentT quantile integral diverges at u = 0")
    if b == 1.0:
        if spec.family == "Cauchy":
            raise MomentError("Cauchy quantile integral diverges at u = 1")
        if spec.family == "StudentT" and prm["df"] <= power:
            raise MomentError("StudentT quantile integral diverges at u = 1")
        if spec.family == "Pareto" and prm["tail_index"] <= power:
            raise MomentError("Pareto quantile integral diverges at u = 1")


def quantile_integral(spec: DistributionSpec, a: float, b: float, power: int = 1) -> float:
    """integral of (F^{-1}(s))^power ds over [a, b], power in {1, 2}."""
    if power not in (1, 2):
        raise DomainError("power must be 1 or 2")
    if not (0.0 <= a <= b <= 1.0):
        raise DomainError("integration window must satisfy 0 <= a <= b <= 1")
    if a == b:
        return 0.0
    _check_integrability(spec, a, b, power)
    prm = dict(spec.params)
    fam = spec.family

    if fam == "Uniform":
        lo, hi = prm["lo"], prm["hi"]
        span = hi - lo
        if power == 1:
            return lo * (b - a) + span * (b * b - a * a) / 2.0
        return ((lo + span * b) ** 3 - (lo + span * a) ** 3) / (3.0 * span)

    if fam == "Exponential":
        lam = prm["rate"]
        if power == 1:
            def j1(s):
                if s == 1.0:
                    return 1.0
                return (1.0 - s) * math.log1p(-s) + s
            return (j1(b) - j1(a)) / lam
        def k2(w):
            if w == 0.0:
                return 0.0
            lw = math.log(w)
            return w * (lw * lw - 2.0 * lw + 2.0)
        return (k2(1.0 - a) - k2(1.0 - b)) / (lam * lam)

    if fam == "Normal":
        mean, sd = prm["mean"], prm["sd"]
        za, zb = special.ndtri(a), special.ndtri(b)

        def phi(z):
            return math.exp(-0.5 * z * z) / _SQRT_2PI if math.isfinite(z) else 0.0

        def zphi(z):
            return z * phi(z) if math.isfinite(z) else 0.0

        i1 = phi(za) - phi(zb)
        if power == 1:
            return mean * (b - a) + sd * i1
        i2 = (b - zphi(zb)) - (a - zphi(za))
        return mean * mean * (b - a) + 2.0 * mean * sd * i1 + sd * sd * i2

    if fam == "Pareto":
        theta, scale = prm["tail_index"], prm["scale"]
        e = 1.0 - power / theta
        if e != 0.0:
            base = ((1.0 - a) ** e - (1.0 - b) ** e) / e
        else:
            base = math.log((1.0 - a) / (1.0 - b))
        return scale**power * base

    if fam == "Cauchy":
        x0, gam = prm["location"], prm["scale"]

        def t(s):
            return math.tan(math.pi * (s - 0.5))

        def a1(s):
            return -math.log(math.sin(math.pi * s)) / math.pi

        d1 = a1(b) - a1(a)
        if power == 1:
            return x0 * (b - a) + gam * d1
        d2 = (t(b) / math.pi - b) - (t(a) / math.pi - a)
        return x0 * x0 * (b - a) + 2.0 * x0 * gam * d1 + gam * gam * d2

    if fam == "TwoPointMixture":
        x1, x2, w1 = prm["x1"], prm["x2"], prm["w1"]
        len1 = max(0.0, min(b, w1) - a)
        len2 = max(0.0, b - max(a, w1))
        return x1**power * len1 + x2**power * len2

    # StudentT: no elementary antiderivative kept; numeric route.
    return quantile_integral_numeric(spec, a, b, power)


def quantile_integral_numeric(
    spec: DistributionSpec, a: float, b: float, power: int = 1, tol: float = 1e-10
) -> float:
    """Adaptive-quadrature route for the same integral; used as a cross-check oracle."""
    if not (0.0 <= a <= b <= 1.0):
        raise DomainError("integration window must satisfy 0 <= a <= b <= 1")
    if a == b:
        return 0.0
    _check_integrability(spec, a, b, power)
    if spec.is_discrete:
        # quad cannot see a step integrand reliably; split at the jump.
        w1 = spec.param("w1")
        pieces = sorted({a, b, min(max(w1, a), b)})
    else:
        pieces = sorted({a, b, min(max(0.5, a), b)})

    def f(u):
        return quantile(spec, u) ** power

    total = 0.0
    for lo, hi in zip(pieces[:-1], pieces[1:]):
        if hi > lo:
            val, _ = integrate.quad(f, lo, hi, epsabs=tol, epsrel=1e-11, limit=2000)
            total += val
    return total
