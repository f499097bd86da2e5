from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import beta, erf, hyp2f1

from fujita_lab.geometry import sphere_area
from fujita_lab.riesz import (EmptyDomainError, RadialFunction, TailDivergenceError, angular_kernel,
                              green_bounded_sup_I2, hmv_condition_ratio, inverse_power, riesz_apply,
                              riesz_constant, small_r_kernel_constant)


def kernel_oracle(r, s, n, a):
    """Gegenbauer form: omega_{N-2} B((N-1)/2, 1/2) M^(a-N) 2F1(lam, lam-(N-2)/2; N/2; (m/M)^2)."""
    big, small = max(r, s), min(r, s)
    lam = (n - a) / 2
    return (sphere_area(n - 2) * beta((n - 1) / 2, 0.5) * big ** (a - n)
            * hyp2f1(lam, lam - (n - 2) / 2, n / 2, (small / big) ** 2))


def test_newton_constant():
    assert riesz_constant(3, 2.0) == pytest.approx(1 / (4 * math.pi))


@pytest.mark.parametrize("n, a", [(3, 1.0), (3, 2.0), (4, 1.0), (5, 2.5), (3, 0.5)])
@pytest.mark.parametrize("r, s", [(1.0, 2.0), (1.0, 1.1), (3.0, 0.2), (1.0, 1.0001), (50.0, 1.0)])
def test_angular_kernel_matches_hypergeometric(n, a, r, s):
    assert angular_kernel(r, s, n, a) == pytest.approx(kernel_oracle(r, s, n, a), rel=1e-9)


def test_angular_kernel_closed_form_in_three_dimensions():
    r, s, a = 1.3, 0.7, 1.5
    exact = 2 * math.pi / (r * s) * ((r + s) ** (a - 1) - abs(r - s) ** (a - 1)) / (a - 1)
    assert angular_kernel(r, s, 3, a) == pytest.approx(exact, rel=1e-10)


def test_angular_kernel_pole():
    assert angular_kernel(0.0, 2.0, 3, 1.0) == pytest.approx(4 * math.pi / 4.0)


@given(r=st.floats(0.01, 100.0), s=st.floats(0.01, 100.0), a=st.floats(0.3, 2.5))
def test_angular_kernel_symmetric(r, s, a):
    if abs(r - s) < 1e-9 * r:
        return
    assert angular_kernel(r, s, 3, a) == pytest.approx(angular_kernel(s, r, 3, a), rel=1e-9)


@given(a=st.floats(0.2, 0.6))
def test_small_r_constant_matches_diagonal_limit(a):
    # next order is O(1), so keep d^(a-1) dominant
    r, d = 1.0, 1e-10
    k = angular_kernel(r, r + d, 3, a)
    lead = small_r_kernel_constant(3, a) * r ** (1 - 3) * d ** (a - 1)
    assert k / lead == pytest.approx(1.0, rel=2e-2)


def test_newtonian_potential_of_gaussian():
    f = RadialFunction.from_callable(lambda r: np.exp(-r**2), 1e-3, 30.0, 121)
    xs = np.array([0.0, 0.5, 1.0, 2.0, 5.0])
    got = riesz_apply(f, 2.0, 3, xs)
    with np.errstate(invalid="ignore", divide="ignore"):
        exact = np.where(xs > 0, math.sqrt(math.pi) * erf(xs) / (4 * np.maximum(xs, 1e-300)), 0.5)
    assert np.allclose(got, exact, rtol=1e-6)


def test_scaling_law():
    lam, a = 2.0, 1.0
    f = RadialFunction.from_callable(lambda r: np.exp(-r**2), 1e-3, 30.0, 121)
    g = RadialFunction.from_callable(lambda r: np.exp(-(lam * r) ** 2), 1e-3, 30.0, 121)
    x = np.array([0.3, 1.0])
    assert np.allclose(riesz_apply(g, a, 3, x), lam**-a * riesz_apply(f, a, 3, lam * x), rtol=1e-7)


def test_heavy_tail_is_refused():
    f = RadialFunction.from_callable(lambda r: 1 / (1 + r), 1e-3, 1e3, 81)
    with pytest.raises(TailDivergenceError):
        riesz_apply(f, 2.0, 3, [1.0])


def test_decay_hint_is_checked():
    with pytest.raises(ValueError, match="decay"):
        RadialFunction.from_callable(lambda r: 1 / (1 + r), 1e-3, 1e3, 81, decay=4.0)


def test_zero_function():
    z = RadialFunction.from_callable(lambda r: 0 * r, 1e-3, 1e3, 41)
    assert np.all(riesz_apply(z, 1.0, 3, [0.0, 1.0]) == 0)
    with pytest.raises(EmptyDomainError):
        hmv_condition_ratio(z, 3)


def test_riesz_is_positive_and_monotone_in_data():
    f = inverse_power(1.0, 4.0, n=81)
    g = inverse_power(2.0, 4.0, n=81)
    x = np.array([0.1, 1.0, 10.0])
    a, b = riesz_apply(f, 1.0, 3, x), riesz_apply(g, 1.0, 3, x)
    assert np.all(a > 0) and np.allclose(b, 2 * a, rtol=1e-12)


def test_green_bound_flags_slow_decay():
    assert green_bounded_sup_I2(inverse_power(1.0, 1.5, n=81), 3).diverged
    gb = green_bounded_sup_I2(inverse_power(1.0, 3.0, n=81), 3)
    assert not gb.diverged and np.isfinite(gb.sup) and gb.sup > 0
