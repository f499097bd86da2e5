"""
Rotationally symmetric model manifolds, radial grids and the finite-volume
Laplace-Beltrami operator.

A model manifold is ``dr^2 + psi(r)^2 dtheta^2`` in ``k`` dimensions. Radial
functions only see the one-dimensional operator

    (1/S) d/dr (S d/dr),   S(r) = omega_{k-1} psi(r)^{k-1},

which is discretised here as a node-centred finite-volume scheme. The same
scheme with the flux multiplied by ``h^2`` gives the weighted Laplacian
``h^{-2} div(h^2 grad)`` of the h-transformed manifold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import integrate
from scipy.special import gamma

from .tridiag import check_m_matrix, solve_tridiag


class GridResolutionError(ValueError):
    """The grid is too coarse for the requested geometry or time horizon."""


def sphere_area(n: int) -> float:
    """Area of the unit sphere S^n sitting in R^{n+1}."""
    return 2.0 * math.pi ** ((n + 1) / 2.0) / gamma((n + 1) / 2.0)


def _smoothstep(x):
    x = np.clip(x, 0.0, 1.0)
    return x * x * x * (10.0 - 15.0 * x + 6.0 * x * x)


def _dsmoothstep(x):
    inside = (x > 0.0) & (x < 1.0)
    x = np.clip(x, 0.0, 1.0)
    return np.where(inside, 30.0 * x * x * (1.0 - x) ** 2, 0.0)


@dataclass(frozen=True)
class ModelManifold:
    """
    Dimension plus warp function.

    ``profile="euclidean"`` gives ``psi(r) = r``. ``profile="logpoly"`` gives
    ``psi(r) = r`` below ``blend[0]`` and
    ``(r^(alpha-1) ln^(alpha/2) r)^(1/(k-1))`` above ``blend[1]``, joined by a
    quintic smoothstep in between.
    """

    k: int
    profile: str = "euclidean"
    alpha: float | None = None
    blend: tuple[float, float] = (1.0, 2.0)

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 2:
            raise ValueError("dimension k must be an integer >= 2")
        if self.profile not in ("euclidean", "logpoly"):
            raise ValueError(f"unknown warp profile {self.profile!r}")
        if self.profile == "logpoly":
            if self.alpha is None or self.alpha <= 0:
                raise ValueError("logpoly profile needs alpha > 0")
            ra, rb = self.blend
            if not (1.0 <= ra < rb):
                raise ValueError("blend interval must satisfy 1 <= r_a < r_b")

    @property
    def omega(self) -> float:
        return sphere_area(self.k - 1)

    def _check(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(r < 0):
            raise ValueError("radius must be nonnegative")
        return r

    def _large_branch(self, r):
        # only meaningful for r > 1
        rs = np.maximum(r, 1.0 + 1e-300)
        lnr = np.log(rs)
        base = rs ** (self.alpha - 1.0) * lnr ** (self.alpha / 2.0)
        psi_l = base ** (1.0 / (self.k - 1))
        lnr_safe = np.where(lnr > 0, lnr, 1.0)
        dlog = ((self.alpha - 1.0) / rs + (self.alpha / 2.0) / (rs * lnr_safe)) / (self.k - 1)
        dpsi_l = np.where(lnr > 0, psi_l * dlog, 0.0)
        return psi_l, dpsi_l

    def psi(self, r):
        r = self._check(r)
        if self.profile == "euclidean":
            return r.copy() if r.ndim else r * 1.0
        ra, rb = self.blend
        s = _smoothstep((r - ra) / (rb - ra))
        psi_l, _ = self._large_branch(r)
        return np.where(r <= ra, r, (1.0 - s) * r + s * psi_l)

    def dpsi(self, r):
        r = self._check(r)
        if self.profile == "euclidean":
            return np.ones_like(r)
        ra, rb = self.blend
        x = (r - ra) / (rb - ra)
        s = _smoothstep(x)
        ds = _dsmoothstep(x) / (rb - ra)
        psi_l, dpsi_l = self._large_branch(r)
        blended = (1.0 - s) + s * dpsi_l + ds * (psi_l - r)
        return np.where(r <= ra, 1.0, blended)

    def surface_area(self, r):
        """``omega_{k-1} psi(r)^{k-1}``."""
        return self.omega * self.psi(r) ** (self.k - 1)

    def dsurface_area(self, r):
        return self.omega * (self.k - 1) * self.psi(r) ** (self.k - 2) * self.dpsi(r)

    def ball_volume(self, r):
        """Riemannian volume of the geodesic ball of radius ``r`` about the pole."""
        r = self._check(r)
        if self.profile == "euclidean":
            return self.omega * r**self.k / self.k
        out = np.array([self._ball_volume_scalar(float(x)) for x in np.atleast_1d(r)])
        return out.reshape(r.shape) if r.ndim else float(out[0])

    def _ball_volume_scalar(self, r: float) -> float:
        ra, rb = self.blend
        vol = self.omega * min(r, ra) ** self.k / self.k
        if r <= ra:
            return vol
        vol += integrate.quad(lambda s: float(self.surface_area(s)), ra, min(r, rb),
                              epsabs=0.0, epsrel=1e-12, limit=200)[0]
        if r <= rb:
            return vol
        # beyond the blend S(e^u) e^u is smooth in u = ln r
        f = lambda u: float(self.surface_area(math.exp(u))) * math.exp(u)  # noqa: E731
        lo, hi = math.log(rb), math.log(r)
        edges = np.linspace(lo, hi, max(2, int(math.ceil(hi - lo)) + 1))
        for u0, u1 in zip(edges[:-1], edges[1:]):
            vol += integrate.quad(f, u0, u1, epsabs=0.0, epsrel=1e-12, limit=200)[0]
        return vol


def surface_area(m: ModelManifold, r):
    return m.surface_area(r)


def ball_volume(m: ModelManifold, r):
    return m.ball_volume(r)


_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """
    Nodes ``r_0 = 0 < r_1 < ... < r_M = R_max`` on a model manifold.

    Nodes ``0..M-1`` carry unknowns, node ``M`` is a homogeneous Dirichlet
    wall. Node ``j`` owns the cell ``[r_{j-1/2}, r_{j+1/2}]`` with
    ``r_{-1/2} = 0`` and ``r_{M+1/2} = R_max``.
    """

    manifold: ModelManifold
    nodes: np.ndarray = field(repr=False)

    def __post_init__(self):
        r = np.asarray(self.nodes, dtype=float)
        if r.ndim != 1 or r.size < 3:
            raise ValueError("grid needs at least three nodes")
        if r[0] != 0.0 or np.any(np.diff(r) <= 0):
            raise ValueError("grid nodes must start at 0 and increase strictly")
        r.setflags(write=False)
        object.__setattr__(self, "nodes", r)
        if self.manifold.profile == "logpoly":
            ra, rb = self.manifold.blend
            inside = np.count_nonzero((r >= ra) & (r <= rb))
            if inside < 8 and r[-1] > ra:
                raise GridResolutionError(
                    f"blend interval [{ra}, {rb}] holds only {inside} nodes; need >= 8")

    @classmethod
    def uniform(cls, manifold: ModelManifold, r_max: float, m: int) -> "RadialGrid":
        return cls(manifold, np.linspace(0.0, r_max, int(m) + 1))

    @classmethod
    def stretched(cls, manifold: ModelManifold, r_max: float, dr_core: float,
                  ratio: float = 1.02, dr_max: float = np.inf) -> "RadialGrid":
        """Uniform spacing on ``[0, 1]``, geometric growth by ``ratio`` beyond, capped at ``dr_max``."""
        if not (1.0 <= ratio <= 1.02 + 1e-12):
            raise ValueError("stretching ratio must lie in [1, 1.02]")
        n_core = max(1, int(math.ceil(min(1.0, r_max) / dr_core)))
        core = np.linspace(0.0, min(1.0, r_max), n_core + 1)
        pts = list(core)
        dr = core[1] - core[0]
        while pts[-1] < r_max:
            dr = min(dr * ratio, dr_max)
            pts.append(pts[-1] + dr)
        pts = np.array(pts)
        if pts[-1] > r_max:
            if r_max - pts[-2] < 0.5 * dr and pts.size > n_core + 2:
                # short remainder: share it with the previous cell
                pts = pts[:-1]
                pts[-1] = 0.5 * (pts[-2] + r_max)
                pts = np.append(pts, r_max)
            pts[-1] = r_max
        return cls(manifold, pts)

    @property
    def m(self) -> int:
        """Number of unknown nodes."""
        return self.nodes.size - 1

    @property
    def r(self) -> np.ndarray:
        """Radii of the unknown nodes."""
        return self.nodes[:-1]

    @property
    def r_max(self) -> float:
        return float(self.nodes[-1])

    @cached_property
    def interfaces(self) -> np.ndarray:
        """``r_{j+1/2}`` for ``j = 0..M-1``."""
        return 0.5 * (self.nodes[1:] + self.nodes[:-1])

    @cached_property
    def cell_edges(self) -> np.ndarray:
        return np.concatenate(([0.0], self.interfaces, [self.r_max]))

    @cached_property
    def all_cell_volumes(self) -> np.ndarray:
        """Volumes of all ``M + 1`` cells, including the wall half-cell."""
        e = self.cell_edges
        if self.manifold.profile == "euclidean":
            return np.diff(self.manifold.ball_volume(e))
        a, b = e[:-1], e[1:]
        half = 0.5 * (b - a)
        mid = 0.5 * (b + a)
        s = mid[:, None] + half[:, None] * _GL_X[None, :]
        return (self.manifold.surface_area(s) * _GL_W[None, :]).sum(axis=1) * half

    @property
    def cell_volumes(self) -> np.ndarray:
        """Volumes of the cells owned by unknown nodes."""
        return self.all_cell_volumes[:-1]

    @property
    def dr_min(self) -> float:
        return float(np.diff(self.nodes).min())


@dataclass(frozen=True, eq=False)
class TridiagonalOperator:
    """
    ``(L v)_j = lower_j v_{j-1} + diag_j v_j + upper_j v_{j+1}`` on the unknown
    nodes, self-adjoint for the inner product weighted by ``weights``.
    """

    grid: RadialGrid
    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray
    weights: np.ndarray

    def matvec(self, v):
        v = np.asarray(v, dtype=float)
        out = self.diag * v
        out[1:] += self.lower[1:] * v[:-1]
        out[:-1] += self.upper[:-1] * v[1:]
        return out

    __call__ = matvec

    def dense(self) -> np.ndarray:
        n = self.diag.size
        a = np.diag(self.diag)
        a[np.arange(1, n), np.arange(n - 1)] = self.lower[1:]
        a[np.arange(n - 1), np.arange(1, n)] = self.upper[:-1]
        return a

    def row_sums(self) -> np.ndarray:
        return self.lower + self.diag + self.upper

    def add_diagonal(self, d) -> "TridiagonalOperator":
        """Return ``L + diag(d)``; used for the ``-V`` term of the untransformed problem."""
        return TridiagonalOperator(self.grid, self.lower, self.diag + np.asarray(d, float),
                                   self.upper, self.weights)

    def inner(self, v, w) -> float:
        return float(np.sum(self.weights * v * w))

    def mass(self, v) -> float:
        return float(np.sum(self.weights * v))

    def solve_implicit(self, dt: float, rhs, check: bool = True):
        """Solve ``(I - dt L) x = rhs``."""
        a = -dt * self.lower
        b = 1.0 - dt * self.diag
        c = -dt * self.upper
        if check:
            check_m_matrix(a, b, c)
        return solve_tridiag(a, b, c, rhs)


def laplacian_operator(m: ModelManifold, g: RadialGrid, weight=None) -> TridiagonalOperator:
    """
    Finite-volume Laplacian on ``g``, optionally weighted by an h-profile.

    Fluxes are ``F_{j+1/2} = w_{j+1/2} S(r_{j+1/2}) (v_{j+1} - v_j) / (r_{j+1} - r_j)``
    with zero flux at the pole and ``v_M = 0`` at the wall. With a weight,
    ``w_{j+1/2} = h_j h_{j+1}`` and cell masses are ``h_j^2 V_j``; this makes
    the weighted operator exactly ``h^{-1} (A - V_h) h`` for the unweighted
    operator ``A`` and ``V_h = (A h) / h``.
    """
    if g.manifold != m:
        raise ValueError("grid was built on a different manifold")
    r = g.nodes
    dr = np.diff(r)
    coef = m.surface_area(g.interfaces) / dr  # length M, interface j+1/2
    vol = g.cell_volumes
    if weight is None:
        w_face = np.ones_like(coef)
        w_cell = np.ones_like(vol)
    else:
        h = np.asarray(getattr(weight, "values", weight), dtype=float)
        if h.size != r.size:
            raise ValueError("weight must be sampled on every grid node")
        if np.any(~np.isfinite(h)) or np.any(h <= 0):
            raise ValueError("weight h must be positive at every node")
        w_face = h[:-1] * h[1:]
        w_cell = h[:-1] ** 2
    c = coef * w_face
    big_w = vol * w_cell
    c_minus = np.concatenate(([0.0], c[:-1]))
    lower = c_minus / big_w
    upper = c / big_w
    upper[-1] = 0.0
    diag = -(c + c_minus) / big_w
    return TridiagonalOperator(g, lower, diag, upper, big_w)
