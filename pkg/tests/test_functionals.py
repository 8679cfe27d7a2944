import math

import numpy as np
import pytest

import trimlab as tl
from trimlab.errors import DegenerateWindowError, DomainError, MomentError
from trimlab.functionals import normalizers_at

CONTINUOUS = [
    tl.uniform(0.0, 1.0),
    tl.exponential(1.0),
    tl.normal(0.0, 1.0),
    tl.pareto(3.0, 1.0),
    tl.student_t(5.0),
    tl.cauchy(0.0, 1.0),
]


def test_mu_examples():
    assert tl.mu_functional(tl.uniform(0, 1), 0.1, 0.1) == pytest.approx(0.4, abs=1e-12)
    assert tl.mu_functional(tl.exponential(1), 0.0, 0.0) == pytest.approx(1.0, abs=1e-12)
    for u in (0.05, 0.2, 0.45):
        assert tl.mu_functional(tl.normal(0, 1), u, u) == pytest.approx(0.0, abs=1e-12)


def test_mu_window_errors():
    with pytest.raises(DomainError):
        tl.mu_functional(tl.uniform(0, 1), 0.6, 0.5)
    with pytest.raises(MomentError):
        tl.mu_functional(tl.cauchy(), 0.0, 0.1)
    with pytest.raises(MomentError):
        tl.mu_functional(tl.pareto(0.8, 1.0), 0.1, 0.0)


def test_population_means():
    assert tl.mu_functional(tl.uniform(0, 1), 0, 0) == pytest.approx(0.5, abs=1e-8)
    assert tl.mu_functional(tl.pareto(3, 1), 0, 0) == pytest.approx(1.5, abs=1e-8)
    assert tl.mu_functional(tl.normal(1.25, 2.0), 0, 0) == pytest.approx(1.25, abs=1e-8)


def test_sigma2_examples():
    assert tl.sigma2_functional(tl.uniform(0, 1), 0, 0) == pytest.approx(1.0 / 12.0, abs=1e-10)
    assert tl.sigma2_functional(tl.uniform(0, 1), 0.25, 0.25) == pytest.approx(1.0 / 24.0, abs=1e-9)
    assert tl.sigma2_functional(tl.normal(0, 1), 0, 0) == pytest.approx(1.0, abs=1e-10)


def test_winsorized_examples():
    mean, var = tl.winsorized_moments(tl.uniform(0, 1), 0.25, 0.25)
    assert mean == pytest.approx(0.5, abs=1e-12)
    assert var == pytest.approx(1.0 / 24.0, abs=1e-12)
    mean0, var0 = tl.winsorized_moments(tl.uniform(0, 1), 0.0, 0.0)
    assert (mean0, var0) == (pytest.approx(0.5, abs=1e-10), pytest.approx(1.0 / 12.0, abs=1e-10))
    # symmetric specs: Winsorized mean sits at the center of symmetry
    assert tl.winsorized_moments(tl.normal(2.0, 1.0), 0.1, 0.1)[0] == pytest.approx(2.0, abs=1e-10)
    assert tl.winsorized_moments(tl.cauchy(-1.0, 2.0), 0.2, 0.2)[0] == pytest.approx(-1.0, abs=1e-10)


def test_winsorized_degenerate_window():
    spec = tl.two_point(0.0, 1.0, 0.8)
    with pytest.raises(DegenerateWindowError):
        tl.winsorized_moments(spec, 0.1, 0.5)  # window (0.1, 0.5) inside the first atom


@pytest.mark.parametrize("spec", CONTINUOUS, ids=lambda s: s.family)
def test_sigma2_equals_winsor_var(spec):
    rng = np.random.default_rng(17)
    for _ in range(25):
        u = rng.uniform(0.02, 0.45)
        v = rng.uniform(0.02, 0.45)
        s2 = tl.sigma2_functional(spec, u, v)
        _, wv = tl.winsorized_moments(spec, u, v)
        assert abs(s2 - wv) <= 1e-6 * max(1.0, wv)


@pytest.mark.parametrize("spec", CONTINUOUS, ids=lambda s: s.family)
def test_stieltjes_cross_check(spec):
    rng = np.random.default_rng(23)
    for _ in range(10):
        u = rng.uniform(0.05, 0.4)
        v = rng.uniform(0.05, 0.4)
        direct = tl.sigma2_stieltjes(spec, u, v)
        _, wv = tl.winsorized_moments(spec, u, v)
        assert abs(direct - wv) <= 1e-6 * max(1.0, wv)


def test_stieltjes_uniform_window_accuracy():
    assert tl.sigma2_stieltjes(tl.uniform(0, 1), 0.25, 0.25) == pytest.approx(1.0 / 24.0, abs=1e-9)


def test_stieltjes_atom_convention():
    spec = tl.two_point(0.0, 1.0, 0.5)
    # jump at 0.5; [a, b) convention for the window [u, 1-v)
    assert tl.sigma2_stieltjes(spec, 0.5, 0.2) == pytest.approx(0.25, abs=1e-15)  # 0.5 in [0.5, 0.8)
    assert tl.sigma2_stieltjes(spec, 0.2, 0.5) == 0.0  # 0.5 not in [0.2, 0.5)
    assert tl.sigma2_functional(spec, 0.0, 0.0) == pytest.approx(0.25, abs=1e-15)


def test_sigma2_monotone_in_window():
    spec = tl.normal(0, 1)
    vals = [tl.sigma2_functional(spec, w, w) for w in (0.4, 0.3, 0.2, 0.1, 0.05)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))


def test_sigma2_vanishes_on_shrinking_window():
    spec = tl.exponential(1.0)
    vals = [tl.sigma2_functional(spec, 0.5 - w, 0.5 - w) for w in (0.2, 0.1, 0.05, 0.01, 0.001)]
    assert all(b < a for a, b in zip(vals, vals[1:]))
    assert vals[-1] < 1e-5


def test_normalizers_examples():
    # mu_n is the window integral of F^{-1}, not the Winsorized mean:
    # for U(0,1) on (1/4, 3/4) that is (0.75^2 - 0.25^2)/2 = 1/4
    mu_n, sw = tl.normalizers(tl.uniform(0, 1), tl.fixed_fraction(0.25, 0.25), 100)
    assert mu_n == pytest.approx(0.25, abs=1e-12)
    assert sw == pytest.approx(math.sqrt(1.0 / 24.0), rel=1e-12)
    mu_n, _ = tl.normalizers(tl.normal(0, 1), tl.fixed_fraction(0.1, 0.1), 500)
    assert mu_n == pytest.approx(0.0, abs=1e-12)
    mu_n, sw = tl.normalizers(tl.exponential(1), tl.fixed_fraction(0.0, 0.0), 100)
    assert (mu_n, sw) == (pytest.approx(1.0, abs=1e-8), pytest.approx(1.0, rel=1e-7))


def test_normalizers_cached_consistency():
    spec = tl.normal(0, 1)
    a = normalizers_at(spec, 0.05, 0.1)
    b = normalizers_at(spec, 0.05, 0.1)
    assert a == b


def test_population_functionals_bundle():
    pf = tl.population_functionals(tl.uniform(0, 1), 0.25, 0.25)
    assert pf.window == (0.25, 0.75)
    assert pf.sigma2 >= 0.0
    assert pf.winsor_var >= 0.0
    assert pf.sigma2 == pytest.approx(pf.winsor_var, abs=1e-12)
