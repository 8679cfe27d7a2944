import math

import pytest

import trimlab as tl
from trimlab.errors import BoundWindowError, DomainError, MomentError

# 2 exp(13/6) to 20 digits, computed with mpmath
C1_ORACLE = 17.458276727440264844


def test_constant_rho_one():
    assert tl.constant(1.0) == pytest.approx(C1_ORACLE, rel=1e-12)


def test_bound_value_uniform_cell():
    q = tl.BoundQuery(k=2, delta=2, i=6, n=11)
    assert q.alpha_i == 0.5
    assert tl.bound_value(q, 1.0 / 3.0) == pytest.approx(C1_ORACLE * 4.0 / 3.0, rel=1e-12)


def test_bound_window_enforced():
    with pytest.raises(BoundWindowError):
        tl.BoundQuery(k=4, delta=1, i=2, n=21)  # i < rho = 4
    with pytest.raises(BoundWindowError):
        tl.BoundQuery(k=4, delta=1, i=19, n=21)  # i > n - rho + 1
    with pytest.raises(BoundWindowError):
        tl.BoundQuery(k=3, delta=2, i=2, n=3)  # n < 2 rho + 1
    # non-integer rho, real-valued window
    tl.BoundQuery(k=3, delta=2, i=2, n=4)
    with pytest.raises(BoundWindowError):
        tl.BoundQuery(k=3, delta=2, i=1, n=4)  # i < 1.5


def test_bound_query_validation():
    with pytest.raises(DomainError):
        tl.BoundQuery(k=0, delta=1, i=1, n=5)
    with pytest.raises(DomainError):
        tl.BoundQuery(k=1, delta=1, i=9, n=5)


def test_bound_value_symmetry_and_monotonicity():
    lo = tl.BoundQuery(k=2, delta=2, i=3, n=11)
    hi = tl.BoundQuery(k=2, delta=2, i=9, n=11)  # i -> n+1-i
    assert tl.bound_value(lo, 0.7) == tl.bound_value(hi, 0.7)
    mid = tl.BoundQuery(k=2, delta=2, i=6, n=11)
    assert tl.bound_value(mid, 0.7) < tl.bound_value(lo, 0.7)  # alpha(1-alpha) largest at center
    assert tl.bound_value(mid, 0.7) < tl.bound_value(mid, 0.9)


def test_bound_value_moment_errors():
    q = tl.BoundQuery(k=2, delta=2, i=6, n=11)
    with pytest.raises(MomentError):
        tl.bound_value(q, math.inf)


def test_verify_bound_beta_oracle():
    # X_{6:11} of U(0,1) is Beta(6,6): E X^2 = 6*7/(12*13)
    q = tl.BoundQuery(k=2, delta=2, i=6, n=11)
    v = tl.verify_bound(tl.uniform(0, 1), q, 20_000, seed=5)
    assert v.mc_estimate == pytest.approx(42.0 / 156.0, abs=3 * v.standard_error)
    assert v.margin > 10.0


def test_verify_bound_heavy_tail_k_exceeds_delta():
    q = tl.BoundQuery(k=4, delta=2, i=11, n=21)
    v = tl.verify_bound(tl.pareto(3, 1), q, 20_000, seed=5, stream_index=1)
    assert v.mc_estimate + 3 * v.standard_error < v.bound


def test_verify_bound_moment_error():
    with pytest.raises(MomentError):
        tl.verify_bound(tl.cauchy(), tl.BoundQuery(k=2, delta=2, i=6, n=11), 20_000, seed=5)


def test_verify_bound_requires_replications():
    with pytest.raises(DomainError):
        tl.verify_bound(tl.uniform(0, 1), tl.BoundQuery(k=1, delta=1, i=3, n=5), 100, seed=5)


def test_verify_bound_deterministic():
    q = tl.BoundQuery(k=1, delta=1, i=5, n=9)
    a = tl.verify_bound(tl.exponential(1), q, 10_000, seed=7)
    b = tl.verify_bound(tl.exponential(1), q, 10_000, seed=7)
    assert a.mc_estimate == b.mc_estimate
