"""
Acceptance suite: one test per criterion, each printing a PASS/FAIL line
(collected again at the end of the pytest run).

Run directly with ``python tests/test_acceptance.py`` or through pytest.
"""

from __future__ import annotations

import math
import time
from pathlib import Path

import numpy as np

from fujita_lab.config import parse_config
from fujita_lab.duhamel import (DuhamelConfig, DuhamelContext, auto_lambda, compare_with_direct,
                                contraction_scaling, envelope_check, kernel_time_integral, picard_iterate)
from fujita_lab.evolution import EvolutionConfig, Outcome, evolve_nonlinear, transform_equivalence_check
from fujita_lab.geometry import ModelManifold, RadialGrid, laplacian_operator
from fujita_lab.htransform import HProfile, measure_weights, solve_h
from fujita_lab.potentials import ExponentBundle, PotentialSpec, alpha_of_omega, hardy_profile
from fujita_lab.riesz import hmv_condition_ratio, inverse_power, verify_I1_asymptotics
from fujita_lab.semigroup import HeatSemigroup, euclidean_heat_kernel, kernel_column, unit_mass
from fujita_lab.testfunctional import VolumeLaw, functional_report

R3 = ModelManifold(3)
CONFIGS = Path(__file__).parent.parent / "configs"


def test_criterion_01_fujita_dichotomy(criterion):
    g = RadialGrid.stretched(R3, 200.0, 0.02, 1.02, 0.1)
    t0 = time.perf_counter()
    sub = evolve_nonlinear(EvolutionConfig(1.4, 0.01, 1.0), R3, g)
    sup = evolve_nonlinear(EvolutionConfig(2.0, 0.01, 1.0), R3, g)
    wall = time.perf_counter() - t0
    ok = sub.cls is Outcome.BLOWUP and sup.cls is Outcome.GLOBAL and wall <= 300.0
    assert criterion(1, ok, f"M={g.m}: p=1.4 -> {sub.cls.value} (t={sub.t_blowup:.1f}), "
                            f"p=2.0 -> {sup.cls.value}, {wall:.1f}s")


def test_criterion_02_closed_form_h(criterion):
    v = PotentialSpec.hardy(3, -0.25)
    g = RadialGrid.uniform(R3, 100.0, 4096)
    h = solve_h(R3, v, g)
    err = float(np.abs(h.values / hardy_profile(v, g.nodes) - 1.0).max())
    assert criterion(2, h.certified and err <= 1e-3, f"max rel error {err:.3e} (<= 1e-3)")


def test_criterion_03_alpha_asymptotics(criterion):
    g = RadialGrid.stretched(R3, 1e4, 0.02, 1.02)
    h = solve_h(R3, PotentialSpec.regularized_inverse_square(1.0, 1.0), g)
    target = (math.sqrt(5.0) - 1.0) / 2.0
    rel = abs(h.delta_hat - target) / target
    assert criterion(3, rel <= 0.05, f"delta_hat={h.delta_hat:.4f} vs {target:.4f}, rel {rel:.2%} (<= 5%)")


def test_criterion_04_riesz_slopes(criterion):
    rep = verify_I1_asymptotics(1.0, 4.0, 3, fit_range=(10.0, 1e3))
    coarse = hmv_condition_ratio(inverse_power(1.0, 4.0, n=71), 3)
    fine = hmv_condition_ratio(inverse_power(1.0, 4.0, n=141), 3)
    change = abs(fine - coarse) / fine
    ok = abs(rep.slope + 2.0) <= 0.1 and np.isfinite(fine) and change < 0.10
    assert criterion(4, ok, f"I1 slope {rep.slope:.4f} (-2 +- 0.1); HMV ratio {coarse:.5f} -> {fine:.5f} "
                            f"({change:.2%} < 10%)")


def test_criterion_05_heat_kernel(criterion):
    g = RadialGrid.stretched(R3, 30.0, 0.02, 1.02, 0.5)
    op = laplacian_operator(R3, g)
    dt = 0.005
    col = kernel_column(0, 1.0, op, dt)
    exact = euclidean_heat_kernel(3, 1.0, g.r)
    l1 = float(np.sum(np.abs(col.values - exact) * op.weights) / np.sum(exact * op.weights))
    sg = HeatSemigroup(op, dt)
    masses = [op.mass(unit_mass(op))]
    direct = sg.evolve(unit_mass(op), 2.0, masses)
    split = sg.evolve(col.values, 1.0)
    semi = float(np.abs(direct - split).max() / np.abs(direct).max())
    rise = float(np.max(np.diff(masses)))
    ok = l1 <= 0.02 and semi <= 1e-6 and rise <= 1e-12
    assert criterion(5, ok, f"L1 error {l1:.3%} (<= 2%), semigroup {semi:.1e} (<= 1e-6), "
                            f"max mass increase {rise:.1e} (<= 1e-12)")


def test_criterion_06_transform_commutation(criterion):
    v = PotentialSpec.hardy(3, -0.25)
    g = RadialGrid.stretched(R3, 50.0, 0.01, 1.02, 0.1)
    h = HProfile.from_function(g, lambda r: hardy_profile(v, r))
    dev = transform_equivalence_check(EvolutionConfig(2.0, 0.5, 1.0), R3, v, g, h, t=1.0, dt=0.01)
    assert criterion(6, dev <= 1e-3, f"sup |u - h v| / sup |u| = {dev:.2e} at T=1 (<= 1e-3)")


def test_criterion_07_sharpness_ladders(criterion):
    p, eps = 2.0, 0.5
    ladder = (4, 8, 16, 32, 64)
    sharp = functional_report(p, VolumeLaw.sharp(p), ladder).slopes
    relaxed = functional_report(p, VolumeLaw.sharp(p, eps), ladder).slopes
    target = eps * (p - 1.0) / p
    names = ("j", "l_time", "l_final")
    ok_sharp = all(abs(sharp[k]) <= 0.05 for k in names)
    ok_relaxed = all(abs(relaxed[k] - target) <= 0.2 * target for k in names)
    fmt = lambda s: ", ".join(f"{k} {s[k]:+.3f}" for k in names)  # noqa: E731
    assert criterion(7, ok_sharp and ok_relaxed,
                     f"sharp [{fmt(sharp)}] (|.| <= 0.05); Q+0.5 [{fmt(relaxed)}] (0.25 +- 20%)")


def test_criterion_08_duhamel(criterion):
    g = RadialGrid.stretched(R3, 100.0, 0.05, 1.02, 0.5)
    op = laplacian_operator(R3, g)
    h = HProfile.constant(g)
    lam0 = auto_lambda(op, h, 2.0).lam
    ctx = DuhamelContext(op, h, DuhamelConfig(2.0, lam0))
    res = picard_iterate(ctx, keep_history=True)
    env = envelope_check(ctx, res.history)
    diffs = compare_with_direct(ctx, res, (1.0, 10.0))
    slope, _ = contraction_scaling(op, h, 2.0, [lam0 / 4, lam0 / 2, lam0])
    ok = (res.converged and res.iterations <= 30 and res.differences[-1] < 1e-8 and env.passed
          and max(diffs.values()) <= 1e-3 and abs(slope - 1.0) <= 0.15)
    assert criterion(8, ok, f"lambda0={lam0:g}: {res.iterations} iterations (diff {res.differences[-1]:.1e}), "
                            f"envelope margin {env.worst_margin:.2f}, vs solver {max(diffs.values()):.1e}, "
                            f"factor slope {slope:.3f} (1 +- 15%)")


def test_criterion_09_integral_dichotomy(criterion):
    b = ExponentBundle(2.0)
    delta = math.exp(4.0)
    relaxed = kernel_time_integral((b.P, b.Q + 0.5), 2.0, delta, (1e4, 1e6, 1e8))
    sharp = kernel_time_integral((b.P, b.Q), 2.0, delta, (1e4, 1e6, 1e8))
    growth = (relaxed[1e8] - relaxed[1e4]) / relaxed[1e4]
    incr = sharp[1e8] - sharp[1e6]
    floor = math.log(math.log(1e8) / math.log(1e6))
    ok = growth <= 0.10 and incr >= floor
    assert criterion(9, ok, f"Q+1/2: trace grows {growth:.1%} from 1e4 to 1e8 (<= 10%); "
                            f"sharp Q: increment {incr:.3f} from 1e6 to 1e8 (>= {floor:.3f})")


def _acceptance_setups():
    for path in sorted(CONFIGS.glob("*.ini")):
        cfg = parse_config(path)
        if not cfg.has("manifold"):
            continue
        mg, pv = cfg["manifold"], cfg["potential"]
        m = ModelManifold(mg["k"]) if mg["profile"] == "euclidean" else \
            ModelManifold(mg["k"], "logpoly", mg["alpha"], (mg["blend_a"], mg["blend_b"]))
        g = RadialGrid.uniform(m, mg["r_max"], mg["cells"]) if mg["grid"] == "uniform" else \
            RadialGrid.stretched(m, mg["r_max"], mg["dr_core"], mg["ratio"], mg["dr_max"])
        fam = pv["family"]
        v = {"zero": PotentialSpec.zero,
             "hardy": lambda: PotentialSpec.hardy(mg["k"], pv["omega"]),
             "inverse_power": lambda: PotentialSpec.inverse_power(pv["omega"], pv["b"]),
             "regularized_inverse_square": lambda: PotentialSpec.regularized_inverse_square(pv["omega"],
                                                                                             pv["theta"])}[fam]()
        yield path.stem, m, g, v


def test_criterion_10_property_suites(criterion):
    rng = np.random.default_rng(10)
    failures = []
    n_cfg = 0
    for name, m, g, v in _acceptance_setups():
        n_cfg += 1
        h = solve_h(m, v, g) if v.family != "zero" else HProfile.constant(g)
        if v.family in ("hardy", "regularized_inverse_square"):
            a = alpha_of_omega(m.k, v.omega)
            if abs(a * (a + m.k - 2) - v.omega) > 1e-12:
                failures.append(f"{name}: alpha round-trip")
        if not h.certified:
            failures.append(f"{name}: h not positive")
            continue
        w = measure_weights(h)
        if not np.allclose(w.nu**2, w.mu * w.mu0, rtol=1e-12):
            failures.append(f"{name}: measure identity")
        ops = [laplacian_operator(m, g)]
        if v.family != "zero" and h.envelope_ratio() <= 1e6:
            ops.append(laplacian_operator(m, g, weight=h))
        for op in ops:
            rs = op.row_sums()
            if np.any(rs > 1e-12 * np.abs(op.diag)):
                failures.append(f"{name}: row sums")
            sg = HeatSemigroup(op, 10 * g.dr_min)
            lo = rng.uniform(0, 1, g.m)
            hi = lo + rng.uniform(0, 1, g.m)
            a_lo, a_hi = sg.evolve(lo, 20 * g.dr_min), sg.evolve(hi, 20 * g.dr_min)
            if np.any(a_lo < 0):
                failures.append(f"{name}: positivity")
            if np.any(a_hi < a_lo):
                failures.append(f"{name}: comparison")
            if a_hi.max() > hi.max() * (1 + 1e-12):
                failures.append(f"{name}: sub-Markov sup bound")
    ok = not failures and n_cfg > 0
    detail = f"{n_cfg} configs: positivity, comparison, row sums, measure identity, alpha round-trip"
    assert criterion(10, ok, detail + ("" if ok else f"; failed {failures}"))


if __name__ == "__main__":
    import sys

    import pytest

    sys.exit(pytest.main([__file__, "-v"]))
