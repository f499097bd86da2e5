"""
Positive solutions of ``Delta h = V h`` on model manifolds, the measures
``mu = h^2 mu_0`` and ``nu = h mu_0``, and volume-growth certificates.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import numpy as np

from .geometry import ModelManifold, RadialGrid
from .potentials import ExponentBundle, PotentialSpec, evaluate

logger = logging.getLogger(__name__)


class HSolveError(RuntimeError):
    """Marching ``Delta h = V h`` produced non-finite values."""


class DegenerateFitError(ValueError):
    """Too few decades or points for an asymptotic regression."""


def _fit_slope(x, y):
    """Least-squares slope of ``y`` on ``x`` and its standard error."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    if x.size < 4:
        raise DegenerateFitError("need at least four points for a slope fit")
    a = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(a, y, rcond=None)
    resid = y - a @ coef
    dof = max(x.size - 2, 1)
    s2 = float(resid @ resid) / dof
    sxx = float(np.sum((x - x.mean()) ** 2))
    return float(coef[0]), float(np.sqrt(s2 / sxx)) if sxx > 0 else np.inf, float(np.abs(resid).max())


def _decade_window(r, r_hi, decades=1.0):
    lo = r_hi / 10.0**decades
    return (r >= lo * (1 - 1e-12)) & (r <= r_hi * (1 + 1e-12)) & (r > 0)


@dataclass(frozen=True, eq=False)
class HProfile:
    """
    Nodal values of a positive radial ``h`` (normalised ``h_0 = 1``) with its
    fitted growth exponent over the last decade of the grid.
    """

    grid: RadialGrid
    values: np.ndarray = field(repr=False)
    delta_hat: float = 0.0
    delta_band: float = 0.0
    certified: bool = True
    failure_radius: float | None = None
    residual: float = 0.0

    @classmethod
    def from_values(cls, grid: RadialGrid, values, residual: float = 0.0) -> "HProfile":
        h = np.asarray(values, dtype=float)
        if h.shape != grid.nodes.shape:
            raise ValueError("h must be sampled on every grid node")
        positive = bool(np.all(np.isfinite(h)) and np.all(h > 0))
        bad = None
        if not positive:
            idx = int(np.argmax(~(np.isfinite(h) & (h > 0))))
            bad = float(grid.nodes[idx])
        d, band = (np.nan, np.inf)
        if positive:
            try:
                d, band = growth_exponent(grid.nodes, h)
            except DegenerateFitError:
                pass
        h = h.copy()
        h.setflags(write=False)
        return cls(grid, h, d, band, positive, bad, residual)

    @classmethod
    def from_function(cls, grid: RadialGrid, func) -> "HProfile":
        return cls.from_values(grid, func(grid.nodes))

    @classmethod
    def constant(cls, grid: RadialGrid) -> "HProfile":
        return cls.from_values(grid, np.ones_like(grid.nodes))

    @property
    def r(self):
        return self.grid.nodes

    def envelope_ratio(self, decades: float = 1.0) -> float:
        """``max h / min h`` over the last ``decades`` of the grid."""
        sel = _decade_window(self.r, self.grid.r_max, decades)
        h = self.values[sel]
        return float(h.max() / h.min())

    def measures(self) -> "MeasureWeights":
        return measure_weights(self)


def growth_exponent(r, h, r_hi=None):
    """
    Slope of ``ln h`` against ``ln r`` over the decade ending at ``r_hi``.

    The band is the larger of three standard errors and twice the spread of
    the two half-decade refits.
    """
    r = np.asarray(r, float)
    h = np.asarray(h, float)
    r_hi = r[-1] if r_hi is None else r_hi
    sel = _decade_window(r, r_hi)
    x, y = np.log(r[sel]), np.log(h[sel])
    d, se, _ = _fit_slope(x, y)
    mid = 0.5 * (x.min() + x.max())
    spread = 0.0
    for part in (x <= mid, x >= mid):
        if np.count_nonzero(part) >= 4:
            spread = max(spread, abs(_fit_slope(x[part], y[part])[0] - d))
    return d, max(3.0 * se, 2.0 * spread, 1e-12)


def solve_h(m: ModelManifold, v: PotentialSpec, g: RadialGrid) -> HProfile:
    """
    March the finite-volume form of ``h'' + (S'/S) h' = V h`` outward.

    Starting from ``h_0 = 1`` with zero flux at the pole, node ``j`` gives
    ``h_{j+1}`` from the cell balance
    ``c_{j+1/2}(h_{j+1} - h_j) - c_{j-1/2}(h_j - h_{j-1}) = V_j |cell_j| h_j``,
    i.e. the discrete equation of :func:`laplacian_operator` holds exactly.
    The regular solution is selected; if ``h`` turns non-positive the profile
    comes back uncertified with the offending radius.
    """
    if g.manifold != m:
        raise ValueError("grid was built on a different manifold")
    r = g.nodes
    c = m.surface_area(g.interfaces) / np.diff(r)
    src = np.asarray(evaluate(v, g.r), float) * g.cell_volumes
    if not np.all(np.isfinite(src)):
        raise ValueError("potential is not finite on the grid")
    h = np.empty(r.size)
    h[0] = 1.0
    flux = 0.0
    for j in range(g.m):
        flux = flux + src[j] * h[j]  # c_{j+1/2}(h_{j+1}-h_j)
        h[j + 1] = h[j] + flux / c[j]
    if not np.all(np.isfinite(h)):
        raise HSolveError("h overflowed; potential too strong for the grid range")
    dh = np.diff(h) * c
    au = dh - np.concatenate(([0.0], dh[:-1]))
    scale = np.abs(dh).max() + np.abs(src * h[:-1]).max()
    resid = float(np.abs(au - src * h[:-1]).max() / scale) if scale > 0 else 0.0
    prof = HProfile.from_values(g, h, residual=resid)
    if not prof.certified:
        logger.warning("h lost positivity at r=%.4g", prof.failure_radius)
    return prof


def discrete_potential(h: HProfile) -> np.ndarray:
    """
    ``(A h) / h`` on the unknown nodes, with ``A`` the unweighted finite-volume
    Laplacian fed the full nodal ``h`` (wall value included).

    The weighted operator equals ``h^-1 (A - V_h) h`` exactly for this ``V_h``.
    """
    g = h.grid
    hv = h.values
    c = g.manifold.surface_area(g.interfaces) / np.diff(g.nodes)
    flux = c * np.diff(hv)
    net = flux - np.concatenate(([0.0], flux[:-1]))
    return net / g.cell_volumes / hv[:-1]


@dataclass(frozen=True, eq=False)
class MeasureWeights:
    """Cell masses of ``mu_0``, ``mu = h^2 mu_0`` and ``nu = h mu_0`` (all ``M + 1`` cells)."""

    edges: np.ndarray
    mu0: np.ndarray
    mu: np.ndarray
    nu: np.ndarray

    def get(self, name: str) -> np.ndarray:
        if name not in ("mu0", "mu", "nu"):
            raise ValueError(f"unknown measure {name!r}")
        return getattr(self, name)

    def ball(self, name: str):
        """Radii ``r_{j+1/2}`` and the measure of the balls they bound."""
        return self.edges[1:], np.cumsum(self.get(name))


def measure_weights(h: HProfile) -> MeasureWeights:
    vol = h.grid.all_cell_volumes
    hv = h.values
    return MeasureWeights(h.grid.cell_edges, vol, hv**2 * vol, hv * vol)


@dataclass(frozen=True)
class VolumeFit:
    P: float  # noqa: N815
    Q: float  # noqa: N815
    residual: float
    P_band: float = 0.0  # noqa: N815
    Q_band: float = 0.0  # noqa: N815


def _volume_regression(lr, lv):
    llr = np.log(lr)
    a = np.vstack([np.ones_like(lr), lr, llr, 1.0 / lr]).T
    coef, *_ = np.linalg.lstsq(a, lv, rcond=None)
    resid = float(np.abs(lv - a @ coef).max())
    return float(coef[1]), float(coef[2]), resid


def fit_volume_law(radii, volumes, decades: float = 2.0) -> VolumeFit:
    """
    Fit ``ln V(r) = c + P ln r + Q ln ln r + d / ln r`` over the top
    ``decades`` of the data.

    The ``1/ln r`` term absorbs the first correction of integrating
    ``r^(P-1) ln^Q r``; without it ``Q`` is biased by about ``1/ln r``.
    The bands are the spread of the same fit over the two halves of the
    window, floored at the regression round-off level.
    """
    radii = np.asarray(radii, float)
    volumes = np.asarray(volumes, float)
    r_hi = radii[-1]
    if r_hi / 10.0**decades <= np.e or radii[radii > 0].min() * 10.0**3 > r_hi * (1 + 1e-9):
        raise DegenerateFitError("volume fit needs >= 3 decades and a window beyond r = e")
    sel = _decade_window(radii, r_hi, decades)
    if np.count_nonzero(sel) < 12:
        raise DegenerateFitError("too few points in the fit window")
    lr, lv = np.log(radii[sel]), np.log(volumes[sel])
    p_hat, q_hat, resid = _volume_regression(lr, lv)
    bands_p, bands_q = [0.0], [0.0]
    half = 0.5 * (lr.min() + lr.max())
    for part in (lr <= half, lr >= half):
        if np.count_nonzero(part) >= 8:
            pp, qq, _ = _volume_regression(lr[part], lv[part])
            bands_p.append(abs(pp - p_hat))
            bands_q.append(abs(qq - q_hat))
    return VolumeFit(p_hat, q_hat, resid, max(bands_p), max(bands_q))


def volume_growth_fit(m: ModelManifold, h: HProfile, measure: str = "nu") -> VolumeFit:
    """Fitted ``(P, Q)`` of ``measure(B_r) ~ r^P ln^Q r`` over the top two decades of the grid."""
    if h.grid.manifold != m:
        raise ValueError("profile lives on a different manifold")
    radii, vols = measure_weights(h).ball(measure)
    return fit_volume_law(radii, vols)


@dataclass(frozen=True)
class ConditionH:
    delta1: float
    delta2: float
    passed: bool
    window_slopes: tuple = ()


def check_condition_H(h: HProfile, decades: float = 2.0, n_windows: int = 4) -> ConditionH:  # noqa: N802
    """
    Polynomial envelope ``c r^-delta1 <= h <= C r^delta2`` at large ``r``.

    The local log-log slope is fitted on ``n_windows`` consecutive windows
    covering the top ``decades``; the envelope passes only if the last two
    slopes agree, which rejects super-polynomial growth or decay.
    """
    if not h.certified:
        raise ValueError("condition (H) needs a positive profile")
    r, v = h.r, h.values
    r_hi = h.grid.r_max
    edges = np.log(r_hi) - np.linspace(decades, 0.0, n_windows + 1) * np.log(10.0)
    slopes = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        sel = (r > 0) & (np.log(np.maximum(r, 1e-300)) >= lo - 1e-12) & (np.log(np.maximum(r, 1e-300)) <= hi + 1e-12)
        if np.count_nonzero(sel) >= 4:
            slopes.append(_fit_slope(np.log(r[sel]), np.log(v[sel]))[0])
    if len(slopes) < 2:
        raise DegenerateFitError("not enough grid points for the envelope windows")
    last, prev = slopes[-1], slopes[-2]
    stable = abs(last - prev) <= 0.05 + 0.05 * abs(last)
    d = h.delta_hat if np.isfinite(h.delta_hat) else last
    passed = bool(stable and np.isfinite(d))
    d1 = max(0.0, -d) if passed else np.inf
    d2 = max(0.0, d) if passed else np.inf
    return ConditionH(d1, d2, passed, tuple(slopes))


class Verdict(str, enum.Enum):
    NONEXISTENCE_CERTIFIED = "NONEXISTENCE_CERTIFIED"
    OUTSIDE_THEOREM = "OUTSIDE_THEOREM"


P_TOL = 0.02
Q_TOL = 0.1


def nonexistence_verdict(bundle: ExponentBundle, fit: VolumeFit) -> Verdict:
    """
    Compare the fitted volume law with ``r^P ln^Q r``.

    ``P_hat`` well below ``P`` certifies regardless of the log power; when the
    powers agree within tolerance the log exponents decide. Tolerances are
    the fit bands floored at ``P_TOL`` and ``Q_TOL``.
    """
    tp = max(P_TOL, fit.P_band)
    tq = max(Q_TOL, fit.Q_band)
    if fit.P < bundle.P - tp:
        return Verdict.NONEXISTENCE_CERTIFIED
    if abs(fit.P - bundle.P) <= tp and fit.Q <= bundle.Q + tq:
        return Verdict.NONEXISTENCE_CERTIFIED
    return Verdict.OUTSIDE_THEOREM
