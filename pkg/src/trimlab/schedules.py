"""Trimming schedules and finite-n diagnostics of the asymptotic regime conditions.

Asymptotic hypotheses cannot be decided from finitely many n, so every
check returns a three-valued verdict (consistent / inconsistent /
inconclusive) together with the fitted decay exponent and the fit
residual.  Decay rates are classified by fitting the log-diagnostic
against both log n (polynomial decay) and log log n (log-power decay)
over the top half of the grid and keeping whichever model fits better:
polynomial decay dominates every log power, so it settles the log-power
conditions outright.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .distributions import DistributionSpec, quantile
from .errors import DomainError, ScheduleError

RULES = ("PowerLaw", "LogPower", "FixedFraction", "Explicit")

CONSISTENT = "consistent"
INCONSISTENT = "inconsistent"
INCONCLUSIVE = "inconclusive"

#: default evaluation grid; schedule evaluation is O(1) per point.
DEFAULT_N_GRID = (1_000, 3_000, 10_000, 30_000, 100_000, 1_000_000, 10_000_000)

#: max-abs log-scale fit residual accepted before a verdict degrades to inconclusive.
RESIDUAL_TOL = 0.1


@dataclass(frozen=True)
class TrimmingSchedule:
    """A rule n -> (k_n, m_n); left and right sides are parameterized separately."""

    rule: str
    params: tuple

    def __post_init__(self):
        if self.rule not in RULES:
            raise DomainError(f"unknown trimming rule {self.rule!r}")

    def param(self, name: str):
        return dict(self.params)[name]

    def to_json(self) -> dict:
        if self.rule == "Explicit":
            table = [list(row) for row in self.param("table")]
            return {"rule": self.rule, "params": {"table": table}}
        return {"rule": self.rule, "params": {k: v for k, v in self.params}}


def power_law(rho_left: float, rho_right: float | None = None) -> TrimmingSchedule:
    """k_n = ceil(n**rho_left), m_n = ceil(n**rho_right)."""
    rr = rho_left if rho_right is None else rho_right
    if rho_left < 0 or rr < 0:
        raise DomainError("PowerLaw exponents must be >= 0")
    return TrimmingSchedule("PowerLaw", (("rho_left", float(rho_left)), ("rho_right", float(rr))))


def log_power(gamma_left: float, gamma_right: float | None = None) -> TrimmingSchedule:
    """k_n = ceil(n / (log n)**gamma_left), m_n analogous."""
    gr = gamma_left if gamma_right is None else gamma_right
    if gamma_left <= 0 or gr <= 0:
        raise DomainError("LogPower exponents must be > 0")
    return TrimmingSchedule("LogPower", (("gamma_left", float(gamma_left)), ("gamma_right", float(gr))))


def fixed_fraction(left: float, right: float | None = None) -> TrimmingSchedule:
    """k_n = ceil(left * n), m_n = ceil(right * n)."""
    r = left if right is None else right
    if not (0.0 <= left < 1.0 and 0.0 <= r < 1.0):
        raise DomainError("FixedFraction fractions must lie in [0, 1)")
    return TrimmingSchedule("FixedFraction", (("left", float(left)), ("right", float(r))))


def explicit(table) -> TrimmingSchedule:
    """Explicit (n, k_n, m_n) rows; evaluation is defined only at listed n."""
    rows = tuple(sorted((int(n), int(k), int(m)) for n, k, m in table))
    if not rows:
        raise DomainError("explicit schedule table must be nonempty")
    return TrimmingSchedule("Explicit", (("table", rows),))


def from_json(doc: dict) -> TrimmingSchedule:
    if set(doc) != {"rule", "params"}:
        raise DomainError("schedule document must have exactly 'rule' and 'params'")
    rule, params = doc["rule"], doc["params"]
    makers = {
        "PowerLaw": (power_law, ("rho_left", "rho_right")),
        "LogPower": (log_power, ("gamma_left", "gamma_right")),
        "FixedFraction": (fixed_fraction, ("left", "right")),
    }
    if rule == "Explicit":
        if set(params) != {"table"}:
            raise DomainError("Explicit expects a single 'table' parameter")
        return explicit(params["table"])
    if rule not in makers:
        raise DomainError(f"unknown trimming rule {rule!r}")
    maker, names = makers[rule]
    if not set(params) <= set(names) or not params:
        raise DomainError(f"{rule} expects parameters from {names}")
    return maker(**{k: float(v) for k, v in params.items()})


def _snap_ceil(v: float) -> int:
    """Ceiling that ignores float noise when v sits on an integer.

    n**rho can land an ulp above an exact integer (1e5**0.4 evaluates to
    100.00000000000004); the schedule formulas mean the exact value.
    """
    nearest = round(v)
    if abs(v - nearest) <= 1e-9 * max(1.0, abs(v)):
        return int(nearest)
    return math.ceil(v)


def evaluate(schedule: TrimmingSchedule, n: int) -> tuple[int, int, float, float]:
    """(k_n, m_n, a_n, b_n) at sample size n; enforces 0 <= k_n < n - m_n <= n."""
    if n < 2:
        raise DomainError("schedule evaluation requires n >= 2")
    if schedule.rule == "PowerLaw":
        k = _snap_ceil(n ** schedule.param("rho_left"))
        m = _snap_ceil(n ** schedule.param("rho_right"))
    elif schedule.rule == "LogPower":
        ln = math.log(n)
        k = _snap_ceil(n / ln ** schedule.param("gamma_left"))
        m = _snap_ceil(n / ln ** schedule.param("gamma_right"))
    elif schedule.rule == "FixedFraction":
        k = _snap_ceil(schedule.param("left") * n)
        m = _snap_ceil(schedule.param("right") * n)
    else:
        rows = {row[0]: (row[1], row[2]) for row in schedule.param("table")}
        if n not in rows:
            raise ScheduleError(f"explicit schedule has no entry for n={n}")
        k, m = rows[n]
    if not (0 <= k < n - m <= n):
        raise ScheduleError(f"schedule violates 0 <= k_n < n - m_n <= n at n={n}: k_n={k}, m_n={m}")
    return k, m, k / n, m / n


@dataclass(frozen=True)
class ConditionReport:
    """Finite-n diagnostic of one asymptotic condition.

    The verdict never overstates an asymptotic claim: it degrades to
    inconclusive whenever the decay fit is poor or the margin to the
    threshold is thin.
    """

    condition: str
    n_grid: tuple[int, ...]
    diagnostics: dict[str, tuple[float, ...]] = field(default_factory=dict)
    exponent: float | None = None
    residual: float | None = None
    threshold: float | None = None
    verdict: str = INCONCLUSIVE
    detail: str = ""

    def to_json(self) -> dict:
        rows = []
        for i, n in enumerate(self.n_grid):
            row: dict = {"n": n}
            for name, vals in self.diagnostics.items():
                row[name] = vals[i]
            rows.append(row)
        return {
            "condition": self.condition,
            "verdict": self.verdict,
            "exponent": self.exponent,
            "residual": self.residual,
            "threshold": self.threshold,
            "detail": self.detail,
            "rows": rows,
        }


def _check_grid(n_grid) -> tuple[int, ...]:
    grid = tuple(int(n) for n in n_grid)
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise DomainError("n grid must be strictly increasing")
    return grid


def _grid_adequate(grid: tuple[int, ...]) -> bool:
    return len(grid) >= 5 and grid[-1] >= 1000 * grid[0]


def _ls_fit(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    """(slope, intercept, max abs residual) of a least-squares line."""
    coeffs = np.polyfit(x, y, 1)
    resid = y - np.polyval(coeffs, x)
    return float(coeffs[0]), float(coeffs[1]), float(np.max(np.abs(resid)))


def _top_half(grid, values):
    half = len(grid) // 2
    return np.asarray(grid[half:], dtype=float), np.asarray(values[half:], dtype=float)


def _decay_fit(ns: np.ndarray, vals: np.ndarray) -> dict:
    """Fit log(vals) against log n and against log log n; smaller residual wins."""
    y = np.log(vals)
    s_pow, _, r_pow = _ls_fit(np.log(ns), y)
    s_log, _, r_log = _ls_fit(np.log(np.log(ns)), y)
    return {
        "s_pow": s_pow,
        "r_pow": r_pow,
        "gamma_hat": -s_log,
        "r_log": r_log,
        "power_wins": r_pow <= r_log,
    }


def _logpower_verdict(ns, vals, threshold: float, band: float) -> tuple[str, float, float, str]:
    """Classify decay of vals against the target (log n)^{-threshold}.

    Returns (verdict, exponent, residual, note).  Exponent is +inf when
    the decay is polynomial in n, which dominates every log power.
    """
    vals = np.asarray(vals, dtype=float)
    if np.all(vals == 0.0):
        return CONSISTENT, math.inf, 0.0, "diagnostic identically zero"
    if np.any(vals <= 0.0):
        return INCONCLUSIVE, math.nan, math.nan, "diagnostic touches zero; decay rate undefined"
    fit = _decay_fit(ns, vals)
    if fit["power_wins"] and fit["r_pow"] <= RESIDUAL_TOL and fit["s_pow"] < -0.05:
        return CONSISTENT, math.inf, fit["r_pow"], (
            f"polynomial decay n^{fit['s_pow']:.3f} dominates every log power"
        )
    if fit["r_log"] <= RESIDUAL_TOL:
        gamma_hat = fit["gamma_hat"]
        if gamma_hat > threshold + band:
            return CONSISTENT, gamma_hat, fit["r_log"], ""
        if gamma_hat < threshold - band:
            return INCONSISTENT, gamma_hat, fit["r_log"], ""
        return INCONCLUSIVE, gamma_hat, fit["r_log"], "fitted exponent within the threshold band"
    return INCONCLUSIVE, fit["gamma_hat"], fit["r_log"], "poor fit in both decay models"


def _aggregate(verdicts) -> str:
    if any(v == INCONSISTENT for v in verdicts):
        return INCONSISTENT
    if any(v == INCONCLUSIVE for v in verdicts):
        return INCONCLUSIVE
    return CONSISTENT


def check_intermediate(schedule: TrimmingSchedule, p: float, n_grid=DEFAULT_N_GRID) -> ConditionReport:
    """Diagnose the intermediate-trimming conditions: trim counts diverge,
    log n over the smaller trim count vanishes, and the trim fraction is
    O((log n)^{-gamma}) for some gamma > 2p/(p-2)."""
    if not p > 2:
        raise DomainError("moment order p must exceed 2")
    grid = _check_grid(n_grid)
    threshold = 2.0 * p / (p - 2.0)
    evals = [evaluate(schedule, n) for n in grid]
    k_min_m = tuple(min(k, m) for k, m, _, _ in evals)
    log_ratio = tuple(math.log(n) / max(km, 1) for n, km in zip(grid, k_min_m))
    a_max_b = tuple(max(a, b) for _, _, a, b in evals)
    diags = {"k_min_m": tuple(float(v) for v in k_min_m),
             "log_n_over_k_min_m": log_ratio,
             "a_max_b": a_max_b}
    if not _grid_adequate(grid):
        return ConditionReport("intermediate", grid, diags, None, None, threshold,
                               INCONCLUSIVE, "grid too small: need >= 5 points over >= 3 decades")

    ns_top, km_top = _top_half(grid, k_min_m)
    _, lr_top = _top_half(grid, log_ratio)

    if km_top[-1] >= 2.0 * km_top[0] and np.all(np.diff(km_top) >= 0):
        v_kn = CONSISTENT
    elif km_top[-1] <= km_top[0]:
        v_kn = INCONSISTENT
    else:
        v_kn = INCONCLUSIVE

    if np.all(np.diff(lr_top) <= 0) and lr_top[-1] <= 0.5 * lr_top[0]:
        v_ckn = CONSISTENT
    elif lr_top[-1] >= lr_top[0]:
        v_ckn = INCONSISTENT
    else:
        v_ckn = INCONCLUSIVE

    _, ab_top = _top_half(grid, a_max_b)
    v_can, exponent, residual, note = _logpower_verdict(ns_top, ab_top, threshold, band=0.25)

    verdict = _aggregate([v_kn, v_ckn, v_can])
    detail = f"k_min_m->inf: {v_kn}; log n/(k^m)->0: {v_ckn}; trim-fraction decay: {v_can}"
    if note:
        detail += f" ({note})"
    return ConditionReport("intermediate", grid, diags, exponent, residual, threshold, verdict, detail)


def check_c_an2(schedule: TrimmingSchedule, p: float, n_grid=DEFAULT_N_GRID) -> ConditionReport:
    """Diagnose a_n v b_n = o((n log n)^{-p/(2(p-1))})."""
    return _check_c_an2_cached(schedule, float(p), tuple(int(n) for n in n_grid))


@lru_cache(maxsize=256)
def _check_c_an2_cached(schedule: TrimmingSchedule, p: float, n_grid: tuple) -> ConditionReport:
    if not p > 2:
        raise DomainError("moment order p must exceed 2")
    grid = _check_grid(n_grid)
    q = p / (2.0 * (p - 1.0))
    evals = [evaluate(schedule, n) for n in grid]
    a_max_b = tuple(max(a, b) for _, _, a, b in evals)
    scaled = tuple(ab * (n * math.log(n)) ** q for n, ab in zip(grid, a_max_b))
    diags = {"a_max_b": a_max_b, "scaled_by_target": scaled}
    if not _grid_adequate(grid):
        return ConditionReport("c_an2", grid, diags, None, None, q,
                               INCONCLUSIVE, "grid too small: need >= 5 points over >= 3 decades")

    ns_top, ab_top = _top_half(grid, a_max_b)
    if np.all(ab_top == 0.0):
        return ConditionReport("c_an2", grid, diags, math.inf, 0.0, q, CONSISTENT,
                               "trim fraction identically zero")
    # When the ceiling pins the driving trim count at 1 or 2 across the top
    # half, a_n v b_n decays exactly like 1/n regardless of the rule, and the
    # grid says nothing about the rule's asymptotics.
    _, counts_top = _top_half(grid, tuple(max(k, m) for k, m, _, _ in evals))
    if counts_top[0] == counts_top[-1] and counts_top[-1] <= 2:
        return ConditionReport("c_an2", grid, diags, None, None, q, INCONCLUSIVE,
                               "trim counts pinned at the ceiling floor on this grid")
    fit = _decay_fit(ns_top, ab_top)
    if fit["power_wins"]:
        if fit["r_pow"] > RESIDUAL_TOL:
            return ConditionReport("c_an2", grid, diags, -fit["s_pow"], fit["r_pow"], q,
                                   INCONCLUSIVE, "poor polynomial-decay fit")
        s_hat = -fit["s_pow"]
        if s_hat > q + 0.02:
            verdict, note = CONSISTENT, f"polynomial decay rate {s_hat:.4f} beats {q:.4f}"
        elif s_hat < q - 0.02:
            verdict, note = INCONSISTENT, f"polynomial decay rate {s_hat:.4f} misses {q:.4f}"
        else:
            verdict, note = INCONCLUSIVE, "decay rate within the threshold band"
        return ConditionReport("c_an2", grid, diags, s_hat, fit["r_pow"], q, verdict, note)
    if fit["r_log"] <= RESIDUAL_TOL:
        return ConditionReport("c_an2", grid, diags, fit["gamma_hat"], fit["r_log"], q, INCONSISTENT,
                               "log-power decay is slower than any power of n")
    return ConditionReport("c_an2", grid, diags, fit["gamma_hat"], fit["r_log"], q,
                           INCONCLUSIVE, "poor fit in both decay models")


def check_heavy(schedule: TrimmingSchedule, n_grid=DEFAULT_N_GRID) -> ConditionReport:
    """Diagnose the heavy-trimming condition: 0 < liminf a_n,
    limsup(1-b_n) < 1, and limsup a_n < liminf(1-b_n)."""
    grid = _check_grid(n_grid)
    evals = [evaluate(schedule, n) for n in grid]
    a_vals = tuple(a for _, _, a, _ in evals)
    u_vals = tuple(1.0 - b for _, _, _, b in evals)
    diags = {"a_n": a_vals, "one_minus_b_n": u_vals}

    def band(vals):
        """(lim_lo, lim_hi, rel_range, trend) over the top half of the grid."""
        _, top = _top_half(grid, vals)
        lo, hi = float(np.min(top)), float(np.max(top))
        rel = (hi - lo) / max(abs(hi), 1e-300)
        d = np.diff(top)
        trend = "flat" if rel <= 0.05 else ("down" if np.all(d <= 0) else ("up" if np.all(d >= 0) else "mixed"))
        return lo, hi, rel, trend

    a1, a2, a_rel, a_trend = band(a_vals)
    b1, b2, u_rel, u_trend = band(u_vals)

    notes = []
    inconclusive = False
    if a_trend == "down":
        a1, note = 0.0, "a_n still decreasing: liminf treated as 0"
        notes.append(note)
    elif a_trend in ("up", "mixed"):
        inconclusive = True
        notes.append("a_n not settled on the grid")
    if u_trend == "up":
        b2, note = 1.0, "1-b_n still increasing: limsup treated as 1"
        notes.append(note)
    elif u_trend in ("down", "mixed"):
        inconclusive = True
        notes.append("1-b_n not settled on the grid")

    ok = a1 > 0.0 and b2 < 1.0 and a2 < b1
    if not ok:
        verdict = INCONSISTENT
    elif inconclusive or not _grid_adequate(grid):
        verdict = INCONCLUSIVE
    else:
        verdict = CONSISTENT
    detail = f"a1={a1:.6g} a2={a2:.6g} b1={b1:.6g} b2={b2:.6g}"
    if notes:
        detail += "; " + "; ".join(notes)
    return ConditionReport("heavy", grid, diags, None, max(a_rel, u_rel), None, verdict, detail)


def smoothness_GH(spec: DistributionSpec, schedule: TrimmingSchedule, t: float, n: int) -> tuple[float, float]:
    """Quantile increments at the trim points under sqrt(a_n log n / n)-scale shifts."""
    _, _, a, b = evaluate(schedule, n)
    logn = math.log(n)
    out = []
    for base, frac in ((a, a), (1.0 - b, b)):
        shift = t * math.sqrt(frac * logn / n)
        if frac == 0.0 or shift == 0.0:
            out.append(0.0)
            continue
        arg = base + shift
        if not 0.0 < arg < 1.0:
            raise DomainError(f"shifted quantile argument {arg:.6g} outside (0, 1): n too small for this t")
        out.append(float(quantile(spec, arg) - quantile(spec, base)))
    return out[0], out[1]


def check_cgh(
    spec: DistributionSpec,
    schedule: TrimmingSchedule,
    t_set,
    n_grid=DEFAULT_N_GRID,
    eps_grid=(0.05, 0.1, 0.5, 1.0),
) -> ConditionReport:
    """Diagnose G_n(t), H_n(t) = O((log n)^{-(1+eps)}) for some eps > 0, per t."""
    grid = _check_grid(n_grid)
    threshold = 1.0 + min(eps_grid)
    diags: dict[str, tuple[float, ...]] = {}
    verdicts = []
    exponents = []
    residuals = []
    for t in t_set:
        gs, hs = [], []
        for n in grid:
            g, h = smoothness_GH(spec, schedule, t, n)
            gs.append(abs(g))
            hs.append(abs(h))
        diags[f"abs_G(t={t:g})"] = tuple(gs)
        diags[f"abs_H(t={t:g})"] = tuple(hs)
        for vals in (gs, hs):
            ns_top, top = _top_half(grid, vals)
            v, e, r, _ = _logpower_verdict(ns_top, top, threshold, band=0.05)
            verdicts.append(v)
            if e is not None and not math.isnan(e):
                exponents.append(e)
            if r is not None and not math.isnan(r):
                residuals.append(r)
    if not _grid_adequate(grid):
        verdict = INCONCLUSIVE
        detail = "grid too small: need >= 5 points over >= 3 decades"
    else:
        verdict = _aggregate(verdicts)
        detail = f"aggregated over t in {tuple(t_set)}"
    return ConditionReport(
        "cgh", grid, diags,
        min(exponents) if exponents else None,
        max(residuals) if residuals else None,
        threshold, verdict, detail,
    )


def psi_1n(spec: DistributionSpec, schedule: TrimmingSchedule, t: float, n: int) -> float:
    """Lower-trim normality diagnostic: scaled quantile increment at a_n,
    with t clamped to [-(1/2) sqrt(a_n n), (1/2) sqrt(a_n n)]."""
    from .functionals import normalizers

    _, _, a, _ = evaluate(schedule, n)
    if not 0.0 < a < 1.0:
        raise DomainError("psi requires a_n in (0, 1); schedule trims nothing on the left")
    _, sigma_w = normalizers(spec, schedule, n)
    clamp = 0.5 * math.sqrt(a * n)
    tc = min(max(t, -clamp), clamp)
    arg = a + tc * math.sqrt(a / n)
    if not 0.0 < arg < 1.0:
        raise DomainError(f"shifted quantile argument {arg:.6g} outside (0, 1)")
    return math.sqrt(a) / sigma_w * (quantile(spec, arg) - quantile(spec, a))


def psi_2n(spec: DistributionSpec, schedule: TrimmingSchedule, t: float, n: int) -> float:
    """Upper-trim companion of psi_1n, mirrored at 1 - b_n."""
    from .functionals import normalizers

    _, _, _, b = evaluate(schedule, n)
    if not 0.0 < b < 1.0:
        raise DomainError("psi requires b_n in (0, 1); schedule trims nothing on the right")
    _, sigma_w = normalizers(spec, schedule, n)
    clamp = 0.5 * math.sqrt(b * n)
    tc = min(max(t, -clamp), clamp)
    arg = 1.0 - b + tc * math.sqrt(b / n)
    if not 0.0 < arg < 1.0:
        raise DomainError(f"shifted quantile argument {arg:.6g} outside (0, 1)")
    return math.sqrt(b) / sigma_w * (quantile(spec, arg) - quantile(spec, 1.0 - b))
