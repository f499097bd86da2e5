"""
Linear heat semigroup of a (weighted) finite-volume Laplacian: implicit
stepping, discrete heat-kernel columns and the diagonal upper estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import RadialGrid, TridiagonalOperator, sphere_area


@dataclass(frozen=True, eq=False)
class RadialField:
    """Values on the unknown nodes of a grid at time ``t``."""

    grid: RadialGrid
    values: np.ndarray = field(repr=False)
    t: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, float)
        if v.shape != (self.grid.m,):
            raise ValueError(f"field needs {self.grid.m} values, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, grid: RadialGrid, func, t: float = 0.0) -> "RadialField":
        return cls(grid, np.asarray(func(grid.r), float), t)

    def sup(self) -> float:
        return float(np.abs(self.values).max())


def step_count(t: float, dt: float) -> tuple[int, float]:
    """Number of steps of size close to ``dt`` covering ``t`` exactly."""
    if t <= 0:
        raise ValueError("time must be positive")
    k = t / dt
    n = int(round(k))
    if n >= 1 and abs(k - n) <= 1e-9 * max(n, 1):
        return n, dt
    n = max(1, int(math.ceil(k)))
    return n, t / n


@dataclass(frozen=True, eq=False)
class HeatSemigroup:
    """
    Backward-Euler approximation of ``e^{tL}`` with a fixed step ``dt``.

    Using one step size for every evolution makes the discrete semigroup law
    ``S(t + s) = S(s) S(t)`` exact whenever ``t`` and ``s`` are multiples of ``dt``.
    """

    op: TridiagonalOperator
    dt: float

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        # one M-matrix check up front; every later solve reuses the same matrix
        self.op.solve_implicit(self.dt, np.zeros(self.op.diag.size), check=True)

    @classmethod
    def for_operator(cls, op: TridiagonalOperator, dt: float | None = None) -> "HeatSemigroup":
        return cls(op, op.grid.dr_min if dt is None else dt)

    def evolve(self, values, t: float, masses: list | None = None):
        v = np.asarray(values, float).copy()
        if t == 0:
            return v
        n, dt = step_count(t, self.dt)
        for _ in range(n):
            v = self.op.solve_implicit(dt, v, check=False)
            if masses is not None:
                masses.append(self.op.mass(v))
        return v


def evolve_linear(fld: RadialField, t: float, op: TridiagonalOperator, dt: float | None = None,
                  masses: list | None = None) -> RadialField:
    """
    Backward-Euler evolution of ``v_t = L v`` over ``[fld.t, fld.t + t]``.

    The step defaults to the smallest grid spacing. Nonnegative data stay
    nonnegative and the weighted mass never increases. When ``masses`` is a
    list, the mass after every step is appended to it.

    Raises
    ------
    NotAnMMatrixError
        If ``I - dt L`` is not an M-matrix.
    """
    if op.grid is not fld.grid:
        raise ValueError("field and operator live on different grids")
    sg = HeatSemigroup.for_operator(op, dt)
    return RadialField(fld.grid, sg.evolve(fld.values, t, masses), fld.t + t)


@dataclass(frozen=True, eq=False)
class KernelColumn:
    """``P_t(., x0)`` sampled per cell, normalised to unit weighted mass at ``t = 0``."""

    source: int
    t: float
    values: np.ndarray = field(repr=False)
    mass: float = 1.0


def unit_mass(op: TridiagonalOperator, source: int = 0) -> np.ndarray:
    """A unit point mass in cell ``source`` for the operator's weights."""
    v = np.zeros(op.diag.size)
    v[source] = 1.0 / op.weights[source]
    return v


def kernel_column(source: int, t: float, op: TridiagonalOperator, dt: float | None = None) -> KernelColumn:
    """Evolve a unit point mass at cell ``source`` for time ``t``."""
    if not 0 <= source < op.diag.size:
        raise ValueError("source cell out of range")
    sg = HeatSemigroup.for_operator(op, dt)
    v = sg.evolve(unit_mass(op, source), t)
    return KernelColumn(source, t, v, op.mass(v))


def kernel_ladder(op: TridiagonalOperator, times, source: int = 0, dt: float | None = None):
    """Kernel columns at increasing ``times``, each propagated from the previous one."""
    sg = HeatSemigroup.for_operator(op, dt)
    times = np.sort(np.asarray(times, float))
    v = unit_mass(op, source)
    out, t_prev = [], 0.0
    for t in times:
        if t > t_prev:
            v = sg.evolve(v, t - t_prev)
        out.append(KernelColumn(source, float(t), v.copy(), op.mass(v)))
        t_prev = t
    return out


def euclidean_heat_kernel(k: int, t: float, r):
    """``(4 pi t)^(-k/2) exp(-r^2 / 4t)``."""
    return (4.0 * np.pi * t) ** (-k / 2.0) * np.exp(-np.asarray(r, float) ** 2 / (4.0 * t))


@dataclass(frozen=True)
class DUEReport:
    times: tuple
    ratios: tuple
    resolved: tuple
    sup_ratio: float


def due_check(columns, weights: np.ndarray, grid: RadialGrid, n_cells: int = 3) -> DUEReport:
    """
    ``sup_x P_t(x, x0) mu(B(x0, sqrt t))`` for each column (source at the pole).

    ``weights`` are the cell masses of ``mu`` on the unknown cells. Columns
    with ``sqrt t`` below ``n_cells`` spacings of the source cell are marked
    unresolved and left out of the supremum.
    """
    edges = grid.cell_edges[1:-1]
    cum = np.cumsum(weights)
    dr0 = grid.nodes[1] - grid.nodes[0]
    times, ratios, ok = [], [], []
    for col in columns:
        if col.source != 0:
            raise ValueError("the ball measure is taken about the pole")
        rad = math.sqrt(col.t)
        ball = float(np.interp(rad, np.concatenate(([0.0], edges)), np.concatenate(([0.0], cum))))
        times.append(col.t)
        ratios.append(float(np.max(col.values)) * ball)
        ok.append(rad >= n_cells * dr0 and rad <= edges[-1])
    good = [q for q, f in zip(ratios, ok) if f]
    return DUEReport(tuple(times), tuple(ratios), tuple(ok), max(good) if good else math.nan)


def due_constant_euclidean(k: int) -> float:
    """Exact ``P_t(0, 0) |B(0, sqrt t)|`` for the Euclidean heat kernel."""
    return (4.0 * math.pi) ** (-k / 2.0) * sphere_area(k - 1) / k
