"""
Phase-diagram sweeps over ``p`` and a ladder of data amplitudes, with the
empirical critical bracket set against the theoretical exponent.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .evolution import EvolutionConfig, Outcome, evolve_nonlinear
from .geometry import ModelManifold, RadialGrid
from .io import atomic_write_csv, atomic_write_json
from .potentials import PotentialSpec, fujita_exponent_theory

logger = logging.getLogger(__name__)


class AllUndecidedError(RuntimeError):
    """Every point of the sweep came back UNDECIDED."""


@dataclass(frozen=True)
class GridSpec:
    r_max: float = 200.0
    dr_core: float = 0.02
    ratio: float = 1.02
    dr_max: float = 0.1

    def build(self, m: ModelManifold) -> RadialGrid:
        return RadialGrid.stretched(m, self.r_max, self.dr_core, self.ratio, self.dr_max)


@dataclass(frozen=True)
class SweepConfig:
    manifold: ModelManifold
    potential: PotentialSpec = field(default_factory=PotentialSpec.zero)
    p_min: float = 1.3
    p_max: float = 2.2
    p_step: float = 0.1
    amplitudes: tuple = (1e-3, 1e-2, 1e-1)
    sigma: float = 1.0
    t_max: float = 1e3
    grid: GridSpec = field(default_factory=GridSpec)
    workers: int = 1

    def __post_init__(self):
        errs = []
        if not (1.0 < self.p_min <= self.p_max <= 10.0):
            errs.append("p-grid must lie in (1, 10] with p_min <= p_max")
        if not self.p_step > 0:
            errs.append("p_step must be positive")
        if not self.t_max > 0:
            errs.append("evolution budget t_max must be positive")
        if not self.amplitudes or any(a <= 0 for a in self.amplitudes):
            errs.append("data ladder needs positive amplitudes")
        if self.workers < 1:
            errs.append("workers must be >= 1")
        if errs:
            raise ValueError("; ".join(errs))

    @property
    def p_grid(self) -> tuple:
        n = int(math.floor((self.p_max - self.p_min) / self.p_step + 1e-9)) + 1
        return tuple(round(self.p_min + j * self.p_step, 10) for j in range(n))


@dataclass(frozen=True)
class RunRecord:
    p: float
    amplitude: float
    cls: Outcome
    t_blowup: float | None
    sup_final: float
    boundary_flag: bool


@dataclass(frozen=True)
class SweepReport:
    records: tuple
    per_p: dict
    p_lo: float | None
    p_hi: float | None
    band: float | None
    p_star: float | None
    provenance: str
    repair_flag: bool
    theory_conflicts: tuple = ()

    def to_dict(self) -> dict:
        return {
            "per_p": {repr(p): c.value for p, c in self.per_p.items()},
            "bracket": [self.p_lo, self.p_hi],
            "undecided_band": self.band,
            "p_star": self.p_star,
            "p_star_provenance": self.provenance,
            "monotonicity_repair_flag": self.repair_flag,
            "theory_conflicts": list(self.theory_conflicts),
            "plot": {"points": [[p, _CODE[c]] for p, c in self.per_p.items()], "theory_line": self.p_star},
            "runs": len(self.records),
        }


_CODE = {Outcome.BLOWUP: 1, Outcome.UNDECIDED: 0, Outcome.GLOBAL: -1}


def theory_exponent(m: ModelManifold, v: PotentialSpec) -> tuple[float | None, str]:
    """Critical exponent predicted for the configuration and where it comes from."""
    fam = v.family
    if m.profile == "euclidean":
        n = m.k
        if fam == "zero":
            return 1.0 + 2.0 / n, "Fujita: 1 + 2/N"
        if fam == "inverse_power" and v.b > 2 and v.omega >= 0:
            return 1.0 + 2.0 / n, "potential decays faster than r^-2: 1 + 2/N"
        if fam == "hardy":
            return fujita_exponent_theory(n, v.omega), "1 + 2/(N + alpha(omega)), closed-form h"
        if fam == "regularized_inverse_square":
            return fujita_exponent_theory(n, v.omega), "1 + 2/(N + alpha(omega)), inverse-square tail"
        return None, "no theory oracle for this potential"
    if fam == "zero":
        return 1.0 + 2.0 / m.alpha, "volume r^a ln^(a/2) r: 1 + 2/a"
    return None, "no theory oracle for this configuration"


def _run_point(args):
    cfg, p, amp = args
    m = cfg.manifold
    g = cfg.grid.build(m)
    evo = EvolutionConfig(p, amplitude=amp, sigma=cfg.sigma, t_max=cfg.t_max)
    out = evolve_nonlinear(evo, m, g, potential=cfg.potential)
    return RunRecord(p, amp, out.cls, out.t_blowup, out.sup_final, out.boundary_flag)


def _classify_point(records) -> Outcome:
    classes = [r.cls for r in records]
    if Outcome.GLOBAL in classes:
        return Outcome.GLOBAL
    if Outcome.BLOWUP in classes:
        return Outcome.BLOWUP
    return Outcome.UNDECIDED


def aggregate(records, p_star=None, provenance="") -> SweepReport:
    ps = sorted({r.p for r in records})
    per_p = {p: _classify_point([r for r in records if r.p == p]) for p in ps}
    blow = [p for p in ps if per_p[p] is Outcome.BLOWUP]
    glob = [p for p in ps if per_p[p] is Outcome.GLOBAL]
    if not blow and not glob:
        raise AllUndecidedError("every sweep point is UNDECIDED; raise the evolution budget")
    p_lo = max(blow) if blow else None
    p_hi = min(glob) if glob else None
    repair = bool(blow and glob and max(blow) > min(glob))
    if len(ps) == 1:
        p_lo = p_hi = ps[0]
    band = None if p_lo is None or p_hi is None else p_hi - p_lo
    conflicts = ()
    if p_star is not None:
        conflicts = tuple(p for p in glob if p <= p_star)
    return SweepReport(tuple(records), per_p, p_lo, p_hi, band, p_star, provenance, repair, conflicts)


def fujita_sweep(cfg: SweepConfig) -> SweepReport:
    """
    Run every ``(p, amplitude)`` pair and bracket the critical exponent.

    A ``p`` counts as GLOBAL when any amplitude gives GLOBAL, otherwise as
    BLOWUP when any amplitude blows up. Work is split statically: worker
    ``w`` takes every ``workers``-th job.
    """
    jobs = [(cfg, p, a) for p in cfg.p_grid for a in cfg.amplitudes]
    if cfg.workers == 1:
        records = [_run_point(j) for j in jobs]
    else:
        parts = [jobs[w::cfg.workers] for w in range(cfg.workers)]
        with ProcessPoolExecutor(max_workers=cfg.workers) as ex:
            done = list(ex.map(_run_partition, parts))
        by_key = {(r.p, r.amplitude): r for part in done for r in part}
        records = [by_key[(p, a)] for _, p, a in jobs]
    p_star, prov = theory_exponent(cfg.manifold, cfg.potential)
    return aggregate(records, p_star, prov)


def _run_partition(jobs):
    return [_run_point(j) for j in jobs]


CSV_HEADER = ("p", "amplitude", "class", "t_blowup", "sup_final", "boundary_flag")


def report_render(report: SweepReport, out_dir, stem: str = "sweep") -> tuple[Path, Path]:
    """Write ``<stem>.csv`` (one row per run) and ``<stem>.json`` (summary and plot data)."""
    if not report.records:
        raise ValueError("empty sweep")
    out = Path(out_dir)
    rows = [(r.p, r.amplitude, r.cls, r.t_blowup, r.sup_final, r.boundary_flag) for r in report.records]
    c = atomic_write_csv(out / f"{stem}.csv", CSV_HEADER, rows)
    j = atomic_write_json(out / f"{stem}.json", report.to_dict())
    return c, j


def nonexistence_consistent(report: SweepReport) -> bool:
    """No GLOBAL point at or below the theoretical exponent."""
    return not report.theory_conflicts
