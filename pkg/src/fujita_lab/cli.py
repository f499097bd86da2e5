"""
Command-line entry point: ``fujita-lab SUBCOMMAND --config PATH [--out DIR]``.

Exit codes: 0 success, 1 scientific failure (non-contraction, lost
positivity, envelope violation, all-undecided sweep), 2 usage or config error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import duhamel as dh
from . import experiments as ex
from . import htransform as ht
from . import riesz as rz
from . import semigroup as sg
from . import testfunctional as tf
from .config import ConfigError, ExperimentConfig, parse_config
from .evolution import EvolutionConfig, evolve_nonlinear
from .geometry import GridResolutionError, ModelManifold, RadialGrid, laplacian_operator
from .io import atomic_write_csv, atomic_write_json
from .potentials import ExponentBundle, PotentialSpec, hardy_profile

logger = logging.getLogger("fujita_lab")

SUBCOMMANDS = ("hsolve", "riesz", "evolve", "sweep", "duhamel", "testfn", "kernel", "volume")

EXIT_OK, EXIT_SCIENCE, EXIT_USAGE = 0, 1, 2


class ScientificFailure(RuntimeError):
    """A run finished but its scientific check failed; artifacts are still written."""


def build_manifold(cfg: ExperimentConfig) -> ModelManifold:
    m = cfg["manifold"]
    if m["profile"] == "euclidean":
        return ModelManifold(m["k"])
    return ModelManifold(m["k"], "logpoly", m["alpha"], (m["blend_a"], m["blend_b"]))


def build_grid(cfg: ExperimentConfig, m: ModelManifold) -> RadialGrid:
    g = cfg["manifold"]
    if g["grid"] == "uniform":
        return RadialGrid.uniform(m, g["r_max"], g["cells"])
    return RadialGrid.stretched(m, g["r_max"], g["dr_core"], g["ratio"],
                                g["dr_max"] if g["dr_max"] is not None else np.inf)


def build_potential(cfg: ExperimentConfig) -> PotentialSpec:
    v = cfg["potential"]
    fam = v["family"]
    if fam == "zero":
        return PotentialSpec.zero()
    if fam == "inverse_power":
        return PotentialSpec.inverse_power(v["omega"], v["b"])
    if fam == "regularized_inverse_square":
        return PotentialSpec.regularized_inverse_square(v["omega"], v["theta"])
    if fam == "hardy":
        return PotentialSpec.hardy(cfg["manifold"]["k"], v["omega"])
    return PotentialSpec.tabulated(v["radii"], v["values"])


def _h_profile(cfg, m, g, pot):
    if pot.family == "zero":
        return ht.HProfile.constant(g)
    return ht.solve_h(m, pot, g)


def _name(cfg, out: Path, stem: str) -> Path:
    return out / f"{cfg['output']['prefix']}{stem}"


def cmd_hsolve(cfg, out, args):
    m, pot = build_manifold(cfg), build_potential(cfg)
    g = build_grid(cfg, m)
    h = ht.solve_h(m, pot, g)
    r = h.r
    with np.errstate(divide="ignore"):
        env = r ** h.delta_hat if np.isfinite(h.delta_hat) else np.full_like(r, np.nan)
    rows = [(float(a), float(b), float(c)) for a, b, c in zip(r, h.values, env)]
    atomic_write_csv(_name(cfg, out, "hsolve.csv"), ("r", "h", "envelope"), rows)
    block = {"certified": h.certified, "failure_radius": h.failure_radius, "delta_hat": h.delta_hat,
             "delta_band": h.delta_band, "residual": h.residual}
    if pot.family == "hardy":
        block["max_rel_error_closed_form"] = float(np.max(np.abs(h.values / hardy_profile(pot, r) - 1.0)))
    if h.certified:
        ch = ht.check_condition_H(h)
        block["condition_H"] = {"delta1": ch.delta1, "delta2": ch.delta2, "passed": ch.passed}
        try:
            fit = ht.volume_growth_fit(m, h, "nu")
            b = ExponentBundle(cfg["evolution"]["p"])
            block["volume_fit_nu"] = {"P": fit.P, "Q": fit.Q, "residual": fit.residual}
            block["verdict"] = ht.nonexistence_verdict(b, fit).value
        except ht.DegenerateFitError as exc:
            block["volume_fit_nu"] = {"error": str(exc)}
    atomic_write_json(_name(cfg, out, "hsolve.json"), block)
    if not h.certified:
        raise ScientificFailure(f"h lost positivity at r={h.failure_radius}")


def cmd_riesz(cfg, out, args):
    pot = build_potential(cfg)
    n = cfg["manifold"]["k"]
    r = cfg["riesz"]
    decay = pot.b if pot.family == "inverse_power" else None
    f = rz.RadialFunction.from_callable(pot, r["r_min"], r["r_max"], r["samples"], decay=decay)
    xs = np.geomspace(r["x_min"], r["x_max"], r["points"])
    i1 = rz.riesz_apply(f, 1.0, n, xs)
    try:
        i2 = rz.riesz_apply(f, 2.0, n, xs)
    except rz.TailDivergenceError:
        i2 = np.full_like(xs, np.inf)
    atomic_write_csv(_name(cfg, out, "riesz.csv"), ("x", "I1V", "I2V"),
                     [(float(a), float(b), float(c)) for a, b, c in zip(xs, i1, i2)])
    top = xs >= xs[-1] / 100.0
    slope = float(np.polyfit(np.log(xs[top]), np.log(np.abs(i1[top])), 1)[0])
    ratio = rz.hmv_condition_ratio(f, n)
    gb = rz.green_bounded_sup_I2(f, n)
    atomic_write_json(_name(cfg, out, "riesz.json"), {
        "I1_slope_last_two_decades": slope, "hmv_ratio_sup": ratio,
        "green_sup_I2": gb.sup, "green_diverged": gb.diverged})


def _evolution_config(cfg):
    e = cfg["evolution"]
    return EvolutionConfig(e["p"], e["amplitude"], e["sigma"], e["t_max"], e["u_max"], e["dt_min_factor"],
                           e["decay_window"], e["eps_boundary"], e["dt_max"])


def cmd_evolve(cfg, out, args):
    m, pot = build_manifold(cfg), build_potential(cfg)
    g = build_grid(cfg, m)
    evo = _evolution_config(cfg)
    if cfg["evolution"]["transform"]:
        res = evolve_nonlinear(evo, m, g, h=_h_profile(cfg, m, g, pot))
    else:
        res = evolve_nonlinear(evo, m, g, potential=pot)
    atomic_write_csv(_name(cfg, out, "evolve.csv"), ("t", "sup_u", "mass"),
                     zip(res.times.tolist(), res.sups.tolist(), res.masses.tolist()))
    atomic_write_json(_name(cfg, out, "evolve.json"), {
        "class": res.cls.value, "t_blowup": res.t_blowup, "t_final": res.t_final,
        "sup_final": res.sup_final, "boundary_flag": res.boundary_flag, "steps": int(res.times.size - 1)})


def cmd_sweep(cfg, out, args):
    s = cfg["sweep"]
    mg = cfg["manifold"]
    workers = args.workers or s["workers"]
    sc = ex.SweepConfig(build_manifold(cfg), build_potential(cfg), s["p_min"], s["p_max"], s["p_step"],
                        s["amplitudes"], cfg["evolution"]["sigma"], s["t_max"],
                        ex.GridSpec(mg["r_max"], mg["dr_core"], mg["ratio"],
                                    mg["dr_max"] if mg["dr_max"] is not None else np.inf),
                        workers)
    try:
        rep = ex.fujita_sweep(sc)
    except ex.AllUndecidedError as exc:
        atomic_write_json(_name(cfg, out, "sweep.json"), {"error": str(exc)})
        raise ScientificFailure(str(exc)) from None
    ex.report_render(rep, out, stem=f"{cfg['output']['prefix']}sweep")


def cmd_duhamel(cfg, out, args):
    d = cfg["duhamel"]
    m, pot = build_manifold(cfg), build_potential(cfg)
    g = RadialGrid.stretched(m, d["r_max"], d["dr_core"], d["ratio"], d["dr_max"])
    h = _h_profile(cfg, m, g, pot)
    op = laplacian_operator(m, g, weight=None if pot.family == "zero" else h)
    kw = dict(delta=d["delta"], tol=d["tol"], max_iter=d["max_iter"], dt=d["dt"])
    log: dict = {"p": d["p"]}
    failed = None
    if d["lam"] == "auto":
        choice = dh.auto_lambda(op, h, d["p"], **kw)
        lam = choice.lam
        log["lambda_scan"] = [list(x) for x in choice.scanned]
    else:
        lam = d["lam"]
    log["lambda"] = lam
    ctx = dh.DuhamelContext(op, h, dh.DuhamelConfig(d["p"], lam, **kw))
    iterates = []
    try:
        res = dh.picard_iterate(ctx, slow=args.slow, keep_history=True)
        iterates = res.history
        log.update(iterations=res.iterations, converged=res.converged, differences=list(res.differences),
                   factors=list(res.factors), fixed_point_residual=res.residual)
        if not res.converged:
            failed = f"convergence: sup-difference stayed above tol={d['tol']} after {res.iterations} iterations"
        else:
            log["direct_solver_rel_diff"] = dh.compare_with_direct(ctx, res)
    except dh.NonContractionError as exc:
        iterates = exc.iterates
        failed = f"contraction: {exc}"
    env = dh.envelope_check(ctx, iterates, slow=args.slow) if iterates else None
    if env is not None:
        log["envelope"] = {"passed": env.passed, "worst_margin": env.worst_margin, "where": list(env.where)}
        if not env.passed and failed is None:
            failed = "envelope: v_n(x,t) <= lambda P_{t+delta}(x,x0) violated"
    log["failed_inequality"] = failed
    b = ExponentBundle(d["p"])
    sharp = dh.kernel_time_integral((b.P, b.Q), d["p"], d["delta"], d["horizons"])
    relaxed = dh.kernel_time_integral((b.P, b.Q + d["eps"]), d["p"], d["delta"], d["horizons"])
    atomic_write_csv(_name(cfg, out, "duhamel_integral.csv"), ("T", "sharp_Q", "relaxed_Q"),
                     [(t, sharp[t], relaxed[t]) for t in sorted(sharp)])
    atomic_write_json(_name(cfg, out, "duhamel.json"), log)
    if failed:
        raise ScientificFailure(failed)


def cmd_testfn(cfg, out, args):
    t = cfg["testfn"]
    law = tf.VolumeLaw.sharp(t["p"], t["eps"])
    rep = tf.functional_report(t["p"], law, t["ladder"], t["delta1"], t["delta2"])
    atomic_write_csv(_name(cfg, out, "testfn.csv"), ("i", "J", "L_time", "L_final", "J_neg"), rep.rows())
    atomic_write_json(_name(cfg, out, "testfn.json"), {"slopes": rep.slopes, "eps": t["eps"],
                                                       "target_slope": t["eps"] * (t["p"] - 1) / t["p"]})


def cmd_kernel(cfg, out, args):
    m, pot = build_manifold(cfg), build_potential(cfg)
    g = build_grid(cfg, m)
    k = cfg["kernel"]
    h = _h_profile(cfg, m, g, pot)
    op = laplacian_operator(m, g, weight=None if pot.family == "zero" else h)
    cols = sg.kernel_ladder(op, k["times"], k["source"], k["dt"])
    rows = [(float(r), c.t, float(v)) for c in cols for r, v in zip(g.r, c.values)]
    atomic_write_csv(_name(cfg, out, "kernel.csv"), ("r", "t", "P_t"), rows)
    due = sg.due_check(cols, op.weights, g)
    atomic_write_json(_name(cfg, out, "kernel.json"), {
        "times": list(due.times), "ratios": list(due.ratios), "resolved": list(due.resolved),
        "sup_ratio": due.sup_ratio, "masses": [c.mass for c in cols]})


def cmd_volume(cfg, out, args):
    m, pot = build_manifold(cfg), build_potential(cfg)
    g = build_grid(cfg, m)
    h = _h_profile(cfg, m, g, pot)
    w = ht.measure_weights(h)
    radii = w.edges[1:]
    rows = zip(radii.tolist(), np.cumsum(w.mu0).tolist(), np.cumsum(w.mu).tolist(), np.cumsum(w.nu).tolist())
    atomic_write_csv(_name(cfg, out, "volume.csv"), ("r", "mu0", "mu", "nu"), rows)
    fits = {}
    for name in ("mu0", "mu", "nu"):
        try:
            f = ht.volume_growth_fit(m, h, name)
            fits[name] = {"P": f.P, "Q": f.Q, "residual": f.residual, "P_band": f.P_band, "Q_band": f.Q_band}
        except ht.DegenerateFitError as exc:
            fits[name] = {"error": str(exc)}
    block = {"fits": fits}
    if "P" in fits["nu"]:
        b = ExponentBundle(cfg["evolution"]["p"])
        fit = ht.VolumeFit(fits["nu"]["P"], fits["nu"]["Q"], fits["nu"]["residual"],
                           fits["nu"]["P_band"], fits["nu"]["Q_band"])
        block["verdict"] = ht.nonexistence_verdict(b, fit).value
        block["p"] = b.p
    atomic_write_json(_name(cfg, out, "volume.json"), block)


COMMANDS = {"hsolve": cmd_hsolve, "riesz": cmd_riesz, "evolve": cmd_evolve, "sweep": cmd_sweep,
            "duhamel": cmd_duhamel, "testfn": cmd_testfn, "kernel": cmd_kernel, "volume": cmd_volume}


def dispatch(subcommand: str, cfg: ExperimentConfig, out_dir, args=None) -> int:
    """Run one subcommand; returns the process exit code."""
    if subcommand not in COMMANDS:
        print(f"unknown subcommand {subcommand!r}; choose from {', '.join(SUBCOMMANDS)}", file=sys.stderr)
        return EXIT_USAGE
    args = args or argparse.Namespace(workers=None, slow=False)
    out = Path(out_dir)
    try:
        COMMANDS[subcommand](cfg, out, args)
    except ScientificFailure as exc:
        print(f"scientific failure: {exc}", file=sys.stderr)
        return EXIT_SCIENCE
    except (GridResolutionError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


def _workers_default():
    env = os.environ.get("FUJITA_LAB_WORKERS")
    if env is None:
        return None
    try:
        n = int(env)
    except ValueError:
        return None
    return n if n >= 1 else None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fujita-lab", description="Blow-up vs global existence laboratory.")
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", required=True, type=Path, help="experiment config file")
    ap.add_argument("--out", type=Path, default=None, help="output directory (default: [output] dir)")
    ap.add_argument("--workers", type=int, default=None, help="parallel workers (env FUJITA_LAB_WORKERS)")
    ap.add_argument("--slow", action="store_true", help="full-grid checks instead of the sample lattice")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.workers is None:
        args.workers = _workers_default()
    if args.workers is not None and args.workers < 1:
        print("--workers must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = parse_config(args.config)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_USAGE
    out = args.out if args.out is not None else Path(cfg["output"]["dir"])
    return dispatch(args.subcommand, cfg, out, args)


if __name__ == "__main__":
    sys.exit(main())
