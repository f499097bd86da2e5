from __future__ import annotations

import math

import mpmath
import numpy as np
import pytest

from fujita_lab.duhamel import (DuhamelConfig, DuhamelContext, NonContractionError, auto_lambda,
                                compare_with_direct, contraction_scaling, envelope_check,
                                kernel_time_integral, picard_iterate)
from fujita_lab.geometry import ModelManifold, RadialGrid, laplacian_operator
from fujita_lab.htransform import HProfile

R3 = ModelManifold(3)
GRID = RadialGrid.stretched(R3, 100.0, 0.05, 1.02, 0.5)
OP = laplacian_operator(R3, GRID)
H1 = HProfile.constant(GRID)


@pytest.fixture(scope="module")
def converged():
    ctx = DuhamelContext(OP, H1, DuhamelConfig(2.0, 50.0))
    return ctx, picard_iterate(ctx, keep_history=True)


def test_picard_converges_geometrically(converged):
    ctx, res = converged
    assert res.converged and res.iterations <= 30
    assert res.differences[-1] < 1e-8
    assert all(f < 0.1 for f in res.factors)
    assert res.residual < 1e-8


def test_fixed_point_stays_in_envelope(converged):
    ctx, res = converged
    rep = envelope_check(ctx, res.history)
    assert rep.passed and rep.worst_margin > 0
    slow = envelope_check(ctx, res.history, slow=True)
    assert slow.passed and slow.worst_margin <= rep.worst_margin + 1e-12


def test_fixed_point_matches_strang_solver(converged):
    ctx, res = converged
    diffs = compare_with_direct(ctx, res)
    assert max(diffs.values()) < 1e-3


def test_iterates_are_positive_and_increasing(converged):
    _, res = converged
    prev = None
    for it in res.history:
        assert np.all(it >= 0)
        if prev is not None:
            assert np.all(it >= prev - 1e-12 * np.abs(it).max())
        prev = it


def test_large_lambda_does_not_contract():
    ctx = DuhamelContext(OP, H1, DuhamelConfig(2.0, 5000.0))
    with pytest.raises(NonContractionError) as info:
        picard_iterate(ctx, keep_history=True)
    assert len(info.value.iterates) >= 1


def test_contraction_factor_scales_like_lambda():
    slope, _ = contraction_scaling(OP, H1, 2.0, [12.5, 25.0, 50.0])
    assert slope == pytest.approx(1.0, rel=0.15)


def test_auto_lambda_halves_the_largest_passing():
    choice = auto_lambda(OP, H1, 2.0)
    assert choice.lam == choice.largest_passing / 2
    assert [ok for _, ok in choice.scanned][-1] is True
    assert not any(ok for _, ok in choice.scanned[:-1])


def test_config_checks():
    with pytest.raises(ValueError, match="p must exceed 1"):
        DuhamelConfig(1.0, 1.0)
    with pytest.raises(ValueError):
        DuhamelConfig(2.0, 1.0, delta=2.0)
    with pytest.raises(ValueError):
        DuhamelConfig(2.0, 1.0, data_fraction=0.8)


def test_h_far_from_one_is_refused():
    h = HProfile.from_function(GRID, lambda r: (1 + r) ** 1.5)
    with pytest.raises(ValueError, match="envelope ratio"):
        DuhamelContext(OP, h, DuhamelConfig(2.0, 1.0))


def test_sample_times_must_be_on_the_step_lattice():
    with pytest.raises(ValueError, match="multiple"):
        DuhamelContext(OP, H1, DuhamelConfig(2.0, 1.0, dt=0.3))


def _integral_oracle(pp, qq, p, delta, t):
    f = lambda s: 1 / ((s + delta) ** (pp / 2) * mpmath.log(mpmath.sqrt(s + delta)) ** qq) ** (p - 1)  # noqa: E731
    pts = [0] + [10**k for k in range(0, int(math.log10(t)) + 1)]
    return float(mpmath.quad(f, pts))


@pytest.mark.parametrize("pp, qq, p", [(2.0, 1.0, 2.0), (2.0, 1.5, 2.0), (3.0, 0.0, 2.0), (4.0, 2.0, 1.5)])
def test_kernel_time_integral_matches_direct_quadrature(pp, qq, p):
    delta = math.exp(4.0)
    got = kernel_time_integral((pp, qq), p, delta, (1e4, 1e6))
    for t, v in got.items():
        assert v == pytest.approx(_integral_oracle(pp, qq, p, delta, t), rel=1e-8)


def test_kernel_time_integral_is_increasing():
    got = kernel_time_integral((2.0, 1.0), 2.0, math.exp(4.0), (1e2, 1e4, 1e6, 1e8))
    vals = [got[t] for t in sorted(got)]
    assert all(b > a for a, b in zip(vals, vals[1:]))


def test_kernel_time_integral_guards():
    with pytest.raises(ValueError):
        kernel_time_integral((0.0, 1.0), 2.0)
    with pytest.raises(ValueError):
        kernel_time_integral((2.0, 1.0), 2.0, delta=0.5)
