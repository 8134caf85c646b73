import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sojourn import analytic
from sojourn.analytic import (BoundPair, alpha_grid, expected_occupation, gamma_fn, normal_survival,
                              pickands_lower_bound_new, pickands_lower_bound_old, t_constant_closed,
                              t_constant_finite, tilt_rhs)
from sojourn.paths import DomainError

alphas = st.floats(min_value=0.05, max_value=2.0, allow_nan=False)


@pytest.mark.parametrize("x, want", [(1.0, 1.0), (0.5, 1.7724538509055159), (5.0, 24.0)])
def test_gamma_examples(x, want):
    assert math.isclose(gamma_fn(x), want, rel_tol=1e-13)


@settings(max_examples=300, deadline=None)
@given(st.floats(min_value=0.05, max_value=50.0, allow_nan=False))
def test_gamma_vs_mpmath(x):
    assert math.isclose(gamma_fn(x), float(mpmath.gamma(x)), rel_tol=1e-12)


@pytest.mark.parametrize("x", [0.04, 50.5, -1.0])
def test_gamma_domain(x):
    with pytest.raises(DomainError):
        gamma_fn(x)


def test_normal_survival_examples():
    assert normal_survival(0.0) == 0.5
    assert math.isclose(normal_survival(3.0), 1.349898e-3, rel_tol=1e-6)


@settings(max_examples=200, deadline=None)
@given(st.floats(min_value=-8, max_value=8, allow_nan=False))
def test_normal_survival_symmetry_and_oracle(u):
    assert abs(normal_survival(u) + normal_survival(-u) - 1.0) <= 1e-14
    ref = float(mpmath.erfc(mpmath.mpf(u) / mpmath.sqrt(2)) / 2)
    assert math.isclose(normal_survival(u), ref, rel_tol=1e-13, abs_tol=1e-300)


@pytest.mark.parametrize("alpha, new, old", [
    (1.0, 0.25, 0.0625),
    (2.0, 0.4431134627, 0.141047),
    (0.5, 1 / 24, 1 / 128),
])
def test_bound_examples(alpha, new, old):
    assert math.isclose(pickands_lower_bound_new(alpha), new, rel_tol=1e-6)
    assert math.isclose(pickands_lower_bound_old(alpha), old, rel_tol=1e-5)


@pytest.mark.parametrize("alpha, want", [(1.0, 4.0), (2.0, 4 / math.sqrt(math.pi))])
def test_expected_occupation_examples(alpha, want):
    assert math.isclose(expected_occupation(alpha), want, rel_tol=1e-13)


@settings(max_examples=200, deadline=None)
@given(alphas)
def test_duplication_identity(alpha):
    assert abs(1.0 / expected_occupation(alpha) - pickands_lower_bound_new(alpha)) <= 1e-12


def test_dominance_grid():
    grid = alpha_grid()
    assert grid.size == 40 and grid[0] == 0.05 and grid[-1] == 2.0
    assert all(BoundPair.at(a).dominates for a in grid)


@settings(max_examples=100, deadline=None)
@given(alphas)
def test_bounds_vs_mpmath(alpha):
    a = mpmath.mpf(alpha)
    new = mpmath.gamma(1 / a) / (4 * mpmath.gamma(2 / a))
    old = mpmath.power(4, -1 / a - 1) / mpmath.gamma(1 / a + 1)
    assert math.isclose(pickands_lower_bound_new(alpha), float(new), rel_tol=1e-11)
    assert math.isclose(pickands_lower_bound_old(alpha), float(old), rel_tol=1e-11)


@pytest.mark.parametrize("alpha", [0.0, -0.5, 2.01])
def test_bound_domain(alpha):
    with pytest.raises(DomainError):
        pickands_lower_bound_new(alpha)


def test_t_closed_examples():
    assert math.isclose(t_constant_closed(1.5, 1, 0, 2), math.exp(-1), rel_tol=1e-15)
    assert t_constant_closed(1.5, 1, 0.2, 0.1) == 1.0
    assert t_constant_closed(1.5, 1, 0.2, 0.3) == math.exp(-0.2 ** 1.5)
    assert t_constant_closed(1.5, 1, 0.2, 0.3) == pytest.approx(0.914437, abs=5e-6)
    assert math.isclose(t_constant_closed(1.5, 1, 0.0, 2.0, interior=False), math.exp(-2 ** 1.5))


def test_t_closed_branches_jump_at_odd_multiples():
    eta = 0.2
    for k in range(1, 5):
        at = (2 * k - 1) * eta
        assert t_constant_closed(1.5, 1, eta, at) == math.exp(-(k * eta) ** 1.5)
        assert t_constant_closed(1.5, 1, eta, at - 1e-6) == math.exp(-((k - 1) * eta) ** 1.5)


def test_t_negative_x():
    with pytest.raises(DomainError):
        t_constant_closed(1.5, 1, 0, -0.1)
    with pytest.raises(DomainError):
        t_constant_finite(1.5, 1, 0, 10, -0.1)


def test_t_finite_examples():
    assert math.isclose(t_constant_finite(1.5, 1, 0, 10, 2), math.exp(-1), rel_tol=1e-15)
    assert t_constant_finite(1.5, 1, 0, 10, 20) == 0.0
    assert t_constant_finite(1.5, 1, 0, 10, 25) == 0.0
    assert t_constant_finite(1.5, 1, 0.2, 10, 0.3) == t_constant_closed(1.5, 1, 0.2, 0.3)


@settings(max_examples=150, deadline=None)
@given(st.floats(min_value=0, max_value=5, allow_nan=False), st.sampled_from([0.0, 0.1, 0.2, 0.5]),
       st.booleans())
def test_t_finite_matches_closed_inside_window(x, eta, interior):
    assert t_constant_finite(1.5, 1, eta, 10, x, interior) == pytest.approx(
        t_constant_closed(1.5, 1, eta, x, interior), rel=1e-12)


@settings(max_examples=150, deadline=None)
@given(st.floats(min_value=0, max_value=5, allow_nan=False), st.floats(min_value=0, max_value=5, allow_nan=False),
       st.sampled_from([0.0, 0.2]))
def test_t_nonincreasing_in_x(x1, x2, eta):
    lo, hi = sorted((x1, x2))
    assert t_constant_closed(1.5, 1, eta, hi) <= t_constant_closed(1.5, 1, eta, lo)


def test_tilt_rhs():
    assert math.isclose(tilt_rhs(2), 0.3173105, rel_tol=1e-6)
    assert math.isclose(tilt_rhs(4), 0.0455003, rel_tol=1e-5)
    assert tilt_rhs(1e-9) == pytest.approx(1.0, abs=1e-9)
    with pytest.raises(DomainError):
        tilt_rhs(0)


def test_tampered_coefficients_break_dominance(monkeypatch):
    monkeypatch.setattr(analytic, "LANCZOS_COEFFS", tuple(c * 0.1 for c in analytic.LANCZOS_COEFFS))
    assert not all(BoundPair.at(a).dominates for a in alpha_grid())
