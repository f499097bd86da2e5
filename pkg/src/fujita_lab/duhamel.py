"""
Picard iteration of the Duhamel operator

    T v(t) = e^{tL} v0 + int_0^t e^{(t-s)L} h^(p-1) v(s)^p ds

on the discrete weighted semigroup, the envelope ``v <= lam P_{t+delta}``
and the time integral of ``1 / mu(B(sqrt(s+delta)))^(p-1)``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .evolution import EvolutionConfig, run_split
from .geometry import TridiagonalOperator
from .htransform import HProfile
from .semigroup import unit_mass
from .tridiag import check_m_matrix, solve_tridiag

logger = logging.getLogger(__name__)

SAMPLE_TIMES = (0.1, 1.0, 10.0, 100.0)


class NonContractionError(RuntimeError):
    """Successive Picard differences stopped shrinking; ``iterates`` holds the finite ones."""

    def __init__(self, msg, iterates=()):
        super().__init__(msg)
        self.iterates = list(iterates)


@dataclass(frozen=True)
class DuhamelConfig:
    """
    ``v0 = data_fraction * lam * P_delta(., x0)``; the default fraction 1/2
    sits exactly on the admissible bound.
    """

    p: float
    lam: float
    delta: float = math.exp(4.0)
    source: int = 0
    tol: float = 1e-8
    max_iter: int = 30
    data_fraction: float = 0.5
    dt: float = 0.05
    sample_times: tuple = SAMPLE_TIMES
    n_radii: int = 32

    def __post_init__(self):
        errs = []
        if not self.p > 1:
            errs.append("p must exceed 1")
        if not self.lam > 0:
            errs.append("lambda must be positive")
        if not math.log(self.delta) > 1.0:
            errs.append("delta must satisfy ln(delta) > 1")
        if not 0 <= self.data_fraction <= 0.5:
            errs.append("data_fraction must lie in [0, 1/2]")
        if not self.dt > 0:
            errs.append("dt must be positive")
        if errs:
            raise ValueError("; ".join(errs))


class _Half:
    def __init__(self, op: TridiagonalOperator, dt: float):
        h = 0.5 * dt
        self.a = -h * op.lower
        self.b = 1.0 - h * op.diag
        self.c = -h * op.upper
        check_m_matrix(self.a, self.b, self.c)

    def __call__(self, v):
        return solve_tridiag(self.a, self.b, self.c, v)


@dataclass(eq=False)
class DuhamelContext:
    """
    Discrete semigroup shared by every iterate: a step is two backward-Euler
    half steps, the same linear propagator the Strang solver uses.
    """

    op: TridiagonalOperator
    h: HProfile
    cfg: DuhamelConfig
    t_end: float = field(init=False)
    n_steps: int = field(init=False)
    half: _Half = field(init=False, repr=False)

    def __post_init__(self):
        cfg = self.cfg
        if self.h.envelope_ratio() > 10.0:
            raise ValueError("h is not comparable to 1 (envelope ratio > 10); construction out of scope")
        self.half = _Half(self.op, cfg.dt)
        self.t_end = max(cfg.sample_times)
        self.n_steps = int(round(self.t_end / cfg.dt))
        for t in cfg.sample_times:
            if abs(t / cfg.dt - round(t / cfg.dt)) > 1e-9:
                raise ValueError(f"sample time {t} is not a multiple of dt={cfg.dt}")

    @property
    def delta_steps(self) -> int:
        return max(1, int(round(self.cfg.delta / self.cfg.dt)))

    @property
    def delta(self) -> float:
        """``delta`` rounded to a multiple of ``dt``."""
        return self.delta_steps * self.cfg.dt

    def step(self, v):
        return self.half(self.half(v))

    def propagate(self, v, n: int):
        for _ in range(n):
            v = self.step(v)
        return v

    @property
    def coef(self):
        return self.h.values[:-1] ** (self.cfg.p - 1.0)

    def kernel_path(self, v=None):
        """``P_{t_k + delta}(., x0)`` for every step ``k``."""
        v = self.propagate(unit_mass(self.op, self.cfg.source), self.delta_steps) if v is None else v
        out = np.empty((self.n_steps + 1, v.size))
        out[0] = v
        for k in range(self.n_steps):
            v = self.step(v)
            out[k + 1] = v
        return out

    def initial_data(self):
        return self.cfg.data_fraction * self.cfg.lam * self.propagate(
            unit_mass(self.op, self.cfg.source), self.delta_steps)

    def linear_path(self, v0):
        out = np.empty((self.n_steps + 1, v0.size))
        out[0] = v0
        v = v0
        for k in range(self.n_steps):
            v = self.step(v)
            out[k + 1] = v
        return out

    def apply_T(self, v0, path):
        """
        One application of the discrete Duhamel map.

        ``w_{k+1} = H(H w_k + dt a (H v_k)^p)`` with ``H`` the half step, so
        the fixed point obeys the Strang recursion up to ``O(dt^2)``.
        """
        p, dt, a = self.cfg.p, self.cfg.dt, self.coef
        out = np.empty_like(path)
        out[0] = v0
        w = v0
        for k in range(self.n_steps):
            mid = self.half(path[k])
            w = self.half(self.half(w) + dt * a * np.maximum(mid, 0.0) ** p)
            out[k + 1] = w
        return out

    def sample_index(self):
        """Rows (time steps) and columns (nodes) of the space-time lattice."""
        rows = np.array([int(round(t / self.cfg.dt)) for t in self.cfg.sample_times])
        r = self.op.grid.r
        targets = np.geomspace(r[1], self.op.grid.r_max / 2.0, self.cfg.n_radii)
        cols = np.unique(np.searchsorted(r, targets).clip(0, r.size - 1))
        return rows, cols


@dataclass(frozen=True, eq=False)
class PicardResult:
    path: np.ndarray = field(repr=False)
    iterations: int = 0
    differences: tuple = ()
    factors: tuple = ()
    converged: bool = False
    residual: float = math.nan
    history: list = field(default_factory=list, repr=False)


def _lattice_diff(a, b, rows, cols):
    da = np.abs(a[np.ix_(rows, cols)] - b[np.ix_(rows, cols)]).max()
    scale = np.abs(a[np.ix_(rows, cols)]).max()
    return float(da / scale) if scale > 0 else float(da)


def picard_iterate(ctx: DuhamelContext, v0=None, slow: bool = False, keep_history: bool = False) -> PicardResult:
    """
    Iterate ``v_{n+1} = T v_n`` from ``v_0 = e^{tL} v0``.

    Convergence is declared when the relative sup difference of successive
    iterates over the sample lattice (the full grid with ``slow``) drops
    below ``tol``. Contraction factors are ratios of successive differences.

    Raises
    ------
    NonContractionError
        If three consecutive factors are ``>= 1`` or an iterate overflows.
    """
    cfg = ctx.cfg
    v0 = ctx.initial_data() if v0 is None else np.asarray(v0, float)
    rows, cols = ctx.sample_index()
    if slow:
        rows = np.arange(ctx.n_steps + 1)
        cols = np.arange(v0.size)
    cur = ctx.linear_path(v0)
    hist = [cur] if keep_history else []
    diffs, factors = [], []
    bad = 0
    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(1, cfg.max_iter + 1):
            nxt = ctx.apply_T(v0, cur)
            if not np.all(np.isfinite(nxt)):
                raise NonContractionError(f"iterate {n} overflowed", hist)
            d = _lattice_diff(nxt, cur, rows, cols)
            diffs.append(d)
            if len(diffs) >= 2 and diffs[-2] > 0:
                f = d / diffs[-2]
                factors.append(f)
                bad = bad + 1 if f >= 1.0 else 0
                if bad >= 3:
                    raise NonContractionError(f"factors >= 1 for 3 iterations (last {f:.3g})", hist + [nxt] if keep_history else ())
            cur = nxt
            if keep_history:
                hist.append(cur)
            if d < cfg.tol:
                res = _lattice_diff(ctx.apply_T(v0, cur), cur, rows, cols)
                return PicardResult(cur, n, tuple(diffs), tuple(factors), True, res, hist)
    logger.warning("Picard iteration hit max_iter=%d", cfg.max_iter)
    return PicardResult(cur, cfg.max_iter, tuple(diffs), tuple(factors), False, math.nan, hist)


@dataclass(frozen=True)
class EnvelopeReport:
    passed: bool
    worst_margin: float
    where: tuple = ()


def envelope_check(ctx: DuhamelContext, iterates, kernel=None, slow: bool = False) -> EnvelopeReport:
    """
    Check ``v_n(x, t) <= lam P_{t+delta}(x, x0)`` on the sample lattice for
    every iterate. The margin is ``1 - v / (lam P)``; the worst one is reported
    with its (iterate, time, radius).
    """
    kern = ctx.kernel_path() if kernel is None else kernel
    rows, cols = ctx.sample_index()
    if slow:
        rows, cols = np.arange(ctx.n_steps + 1), np.arange(kern.shape[1])
    bound = ctx.cfg.lam * kern[np.ix_(rows, cols)]
    worst, where = math.inf, ()
    for n, it in enumerate(iterates):
        v = it[np.ix_(rows, cols)]
        with np.errstate(divide="ignore", invalid="ignore"):
            margin = np.where(bound > 0, 1.0 - v / bound, np.where(v > 0, -np.inf, 1.0))
        i, j = np.unravel_index(np.argmin(margin), margin.shape)
        if margin[i, j] < worst:
            worst = float(margin[i, j])
            where = (n, float(rows[i] * ctx.cfg.dt), float(ctx.op.grid.r[cols[j]]))
    return EnvelopeReport(bool(worst >= 0.0), worst, where)


def compare_with_direct(ctx: DuhamelContext, result: PicardResult, times=(1.0, 10.0)) -> dict:
    """
    Relative sup difference between the fixed point and the Strang solver
    run with the same propagator and step at each of ``times``.
    """
    v0 = result.path[0]
    evo = EvolutionConfig(ctx.cfg.p, amplitude=max(float(v0.max()), 1e-300), t_max=max(times),
                          u_max=1e300, sigma=1.0)
    out = run_split(ctx.op, ctx.coef, v0, evo, dt=ctx.cfg.dt, snapshot_times=times, adaptive=False)
    diffs = {}
    for t in times:
        k = int(round(t / ctx.cfg.dt))
        ref = out.snapshots[float(t)]
        diffs[float(t)] = float(np.abs(result.path[k] - ref).max() / np.abs(ref).max())
    return diffs


@dataclass(frozen=True)
class LambdaChoice:
    lam: float
    largest_passing: float
    scanned: tuple


def auto_lambda(op: TridiagonalOperator, h: HProfile, p: float, lam_hi: float = 1e6, factor: float = 10.0,
                n_scan: int = 12, **cfg_kw) -> LambdaChoice:
    """
    Largest ``lam`` on a geometric ladder (descending from ``lam_hi``) whose
    Picard iteration contracts and stays inside the envelope, halved.
    """
    lam = lam_hi
    scanned = []
    for _ in range(n_scan):
        cfg = DuhamelConfig(p, lam, **cfg_kw)
        ctx = DuhamelContext(op, h, cfg)
        ok = False
        try:
            res = picard_iterate(ctx, keep_history=True)
            ok = res.converged and envelope_check(ctx, res.history).passed
        except NonContractionError:
            ok = False
        scanned.append((lam, ok))
        if ok:
            return LambdaChoice(lam / 2.0, lam, tuple(scanned))
        lam /= factor
    raise NonContractionError("no lambda on the scan ladder passed")


def contraction_scaling(op, h, p: float, lams, **cfg_kw) -> tuple[float, list]:
    """
    Fitted exponent of the first contraction factor against ``lam``
    (the theory predicts ``p - 1``).
    """
    first = []
    for lam in lams:
        ctx = DuhamelContext(op, h, DuhamelConfig(p, lam, **cfg_kw))
        res = picard_iterate(ctx)
        if not res.factors:
            raise ValueError("need at least two Picard differences to form a factor")
        first.append(res.factors[0])
    slope = float(np.polyfit(np.log(lams), np.log(first), 1)[0])
    return slope, first


def kernel_time_integral(volume_law, p: float, delta: float = math.exp(4.0),
                         horizons=(1e4, 1e6, 1e8), c: float = 1.0) -> dict:
    """
    ``int_0^T ds / mu(B(sqrt(s + delta)))^(p-1)`` for ``mu(B_r) = c r^P' ln^Q' r``.

    With ``u = ln(s + delta)`` the integrand is
    ``exp(u (1 - P'(p-1)/2)) / (c^(p-1) (u/2)^(Q'(p-1)))``, smooth on
    ``[ln delta, ln(T + delta)]``.

    Raises
    ------
    ValueError
        If ``P' <= 0`` or ``ln sqrt(delta) <= 0`` (the log factor is not positive).
    """
    pp, qq = volume_law
    if not pp > 0:
        raise ValueError("volume power must be positive")
    if not p > 1:
        raise ValueError("p must exceed 1")
    if not 0.5 * math.log(delta) > 0:
        raise ValueError("delta too small: ln sqrt(s + delta) must stay positive")
    e1 = 1.0 - pp * (p - 1.0) / 2.0
    e2 = qq * (p - 1.0)

    def f(u):
        return math.exp(e1 * u) / (c ** (p - 1.0) * (u / 2.0) ** e2)

    out = {}
    lo = math.log(delta)
    acc = 0.0
    for t in sorted(horizons):
        hi = math.log(t + delta)
        acc += integrate.quad(f, lo, hi, epsabs=0.0, epsrel=1e-12, limit=200)[0]
        out[float(t)] = acc
        lo = hi
    return out
