from __future__ import annotations

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fujita_lab.testfunctional import (G_SLOPE_BOUND, CutoffFamily, VolumeLaw, functional_report, g_derivative,
                                       g_profile, j_sum, j_sum_negative_weight, l_sum, ladder_slope)

mpmath.mp.dps = 40


def test_g_profile_shape():
    t = np.linspace(0, 3, 3001)
    g = g_profile(t)
    assert np.all(g[t <= 1] == 1) and np.all(g[t >= 2] == 0)
    assert np.all(np.diff(g) <= 0)
    assert np.abs(g_derivative(t)).max() == pytest.approx(G_SLOPE_BOUND, rel=1e-6)
    fd = np.gradient(g, t)
    assert np.allclose(fd[5:-5], g_derivative(t)[5:-5], atol=1e-4)


@given(i=st.integers(2, 8), r=st.floats(0, 2**18), t=st.floats(0, 4.0**18))
def test_cutoff_bounds(i, r, t):
    c = CutoffFamily(i)
    phi = float(c.phi(r, t))
    assert 0.0 <= phi <= 1.0 + 1e-12
    assert float(c.grad_phi(r, t)) <= 0 and float(c.dt_phi(r, t)) <= 0


@given(i=st.integers(2, 8))
def test_cutoff_is_one_near_origin_and_zero_far(i):
    c = CutoffFamily(i)
    assert float(c.phi(2.0 ** (i + 1), 4.0 ** (i + 1))) == pytest.approx(1.0)
    assert float(c.phi(2.0 ** (2 * i + 1), 0.0)) == 0.0
    assert float(c.phi(0.0, 2 * 4.0 ** (2 * i))) == 0.0


@given(i=st.integers(2, 6), r=st.floats(1, 2**13), t=st.floats(1, 4.0**13), theta=st.floats(0.5, 3.0))
def test_disjoint_supports_give_power_identity(i, r, t, theta):
    c = CutoffFamily(i)
    assert float(c.grad_phi_power(r, t, theta)) == pytest.approx(abs(float(c.grad_phi(r, t))) ** theta,
                                                                 rel=1e-9, abs=1e-300)
    assert float(c.dt_phi_power(r, t, theta)) == pytest.approx(abs(float(c.dt_phi(r, t))) ** theta,
                                                               rel=1e-9, abs=1e-300)


def _nu(law, k):
    r = mpmath.mpf(2) ** (k + 1)
    return law.c * r**law.P * mpmath.log(r) ** law.Q


def _j_direct(i, p, law, d2):
    e = p + mpmath.mpf(1) / i - 1
    s = sum(mpmath.mpf(2) ** (2 * k + 1) * (mpmath.mpf(2) ** (k + 1)) ** (d2 * p / i / e)
            * mpmath.mpf(2) ** (-2 * p * k / e) * _nu(law, k) for k in range(i + 1, 2 * i + 1))
    return s ** (e / p) / i


def _l_direct(i, p, law, d2, final):
    e = p + mpmath.mpf(1) / i - 1
    if final:
        s = sum(mpmath.mpf(2) ** (-2 * k * p / (p - 1)) * mpmath.mpf(2) ** (2 * k) * _nu(law, k)
                for k in range(i + 1, 2 * i + 1))
        return (mpmath.mpf(i) ** (-p / (p - 1)) * s) ** (e / p)
    s = sum(mpmath.mpf(2) ** (-2 * k * p / e) * mpmath.mpf(2) ** (2 * k)
            * (mpmath.mpf(2) ** (k + 1)) ** (d2 * p / i / e) * _nu(law, k) for k in range(i + 1, 2 * i + 1))
    return (mpmath.mpf(i) ** (-p / e) * s) ** (e / p)


def _jneg_direct(i, p, law, d1):
    e = p - mpmath.mpf(1) / i - 1
    s = sum(mpmath.mpf(2) ** (2 * k + 1) * mpmath.mpf(2) ** (-2 * p * k / e)
            * (mpmath.mpf(2) ** k) ** (d1 * p / i / e) * _nu(law, k) for k in range(i + 1, 2 * i + 1))
    return s ** (e / p) / i


@pytest.mark.parametrize("i", [4, 16, 64])
@pytest.mark.parametrize("p, eps, d", [(2.0, 0.0, 0.0), (2.0, 0.5, 0.3), (1.5, 0.2, 0.0), (3.0, 0.0, 0.7)])
def test_sums_match_high_precision_direct_evaluation(i, p, eps, d):
    law = VolumeLaw.sharp(p, eps)
    assert j_sum(i, p, law, d) == pytest.approx(float(_j_direct(i, p, law, d)), rel=1e-10)
    assert l_sum(i, p, law, d) == pytest.approx(float(_l_direct(i, p, law, d, False)), rel=1e-10)
    assert l_sum(i, p, law, 0.0, "final") == pytest.approx(float(_l_direct(i, p, law, 0, True)), rel=1e-10)
    assert j_sum_negative_weight(i, p, law, d) == pytest.approx(float(_jneg_direct(i, p, law, d)), rel=1e-10)


def test_negative_weight_needs_large_i():
    with pytest.raises(ValueError, match="not positive"):
        j_sum_negative_weight(2, 1.4, VolumeLaw.sharp(1.4))


def test_argument_checks():
    with pytest.raises(ValueError):
        j_sum(1, 2.0, VolumeLaw.sharp(2.0))
    with pytest.raises(ValueError):
        l_sum(4, 2.0, VolumeLaw.sharp(2.0), variant="other")
    with pytest.raises(ValueError):
        CutoffFamily(1)


def test_large_scale_slopes_approach_theory():
    # deep in the ladder the sharp law gives flat sums and the relaxed law
    # grows like i^(eps (p-1)/p)
    ladder = (1024, 2048, 4096, 8192)
    sharp = functional_report(2.0, VolumeLaw.sharp(2.0), ladder).slopes
    relaxed = functional_report(2.0, VolumeLaw.sharp(2.0, 0.5), ladder).slopes
    for name in ("j", "l_time"):
        assert abs(sharp[name]) < 0.05
        assert relaxed[name] == pytest.approx(0.25, rel=0.2)


def test_ladder_slope_of_power():
    ladder = (4, 8, 16)
    assert ladder_slope([i**0.7 for i in ladder], ladder) == pytest.approx(0.7)


def test_report_rows():
    rep = functional_report(1.2, VolumeLaw.sharp(1.2), (4, 8, 16))
    assert len(rep.rows()) == 3
    assert np.isnan(rep.j_neg[0])
