"""
Riesz potentials of radial functions on R^N.

For radial ``f`` the potential is a one-dimensional integral

    I_a f(r) = c(N, a) int_0^inf f(s) K(r, s) s^(N-1) ds,

where ``K(r, s)`` is the integral of ``|x - y|^(a - N)`` over the sphere
``|y| = s`` with ``|x| = r``. ``K`` is computed by Gauss-Legendre quadrature
in the polar angle; the radial integral uses panels graded toward the
diagonal ``s = r`` and a fitted power-law tail past the data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import beta, gammaln

from .geometry import sphere_area


class TailDivergenceError(ValueError):
    """The power-law tail of ``f`` is too heavy for the kernel."""


class KernelQuadratureError(RuntimeError):
    """The angular quadrature failed to converge."""


class EmptyDomainError(ValueError):
    """The potential vanishes identically, so the requested ratio is undefined."""


def riesz_constant(n: int, a: float) -> float:
    """``Gamma((N-a)/2) / (pi^(N/2) 2^a Gamma(a/2))``."""
    return math.exp(gammaln((n - a) / 2.0) - gammaln(a / 2.0) - (n / 2.0) * math.log(math.pi)
                    - a * math.log(2.0))


_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gl01(n: int):
    """Gauss-Legendre nodes and weights on [0, 1]."""
    if n not in _GL_CACHE:
        x, w = np.polynomial.legendre.leggauss(n)
        _GL_CACHE[n] = (0.5 * (x + 1.0), 0.5 * w)
    return _GL_CACHE[n]


def _kernel_rule(r, s, n, a, nodes):
    # split [0, pi] at theta_c; the near piece uses theta = w sinh(tau) so the
    # peak of width w ~ |r - s| / sqrt(rs) at theta = 0 is resolved
    x, wts = _gl01(nodes)
    rs = r * s
    d2 = (r - s) ** 2
    w = np.abs(r - s) / np.sqrt(np.maximum(rs, 1e-300))
    w = np.maximum(w, 1e-14)
    th_c = np.minimum(np.pi, np.maximum(4.0 * w, 0.5))
    ex = (a - n) / 2.0

    def f(theta):
        return (d2[:, None] + 4.0 * rs[:, None] * np.sin(theta / 2.0) ** 2) ** ex * np.sin(theta) ** (n - 2)

    tmax = np.arcsinh(th_c / w)
    tau = tmax[:, None] * x[None, :]
    theta = w[:, None] * np.sinh(tau)
    near = (f(theta) * w[:, None] * np.cosh(tau) * wts[None, :]).sum(axis=1) * tmax
    span = np.pi - th_c
    theta2 = th_c[:, None] + span[:, None] * x[None, :]
    far = (f(theta2) * wts[None, :]).sum(axis=1) * span
    return near + far


def angular_kernel(r, s, n: int, a: float, rtol: float = 1e-10, max_nodes: int = 2048):
    """
    ``K(r, s) = omega_{N-2} int_0^pi (r^2 + s^2 - 2 r s cos t)^((a-N)/2) sin^(N-2) t dt``.

    Starts from 64 nodes and doubles until two successive rules agree to
    ``rtol``. At ``r = 0`` or ``s = 0`` the closed form
    ``omega_{N-1} max(r, s)^(a-N)`` is returned.
    """
    r, s = np.broadcast_arrays(np.asarray(r, float), np.asarray(s, float))
    shape = r.shape
    r, s = r.ravel().copy(), s.ravel().copy()
    out = np.empty(r.size)
    pole = (r == 0) | (s == 0)
    out[pole] = sphere_area(n - 1) * np.maximum(r[pole], s[pole]) ** (a - n)
    idx = np.flatnonzero(~pole)
    inner = idx
    nodes = 64
    prev = _kernel_rule(r[idx], s[idx], n, a, nodes) if idx.size else np.empty(0)
    while idx.size:
        nodes *= 2
        cur = _kernel_rule(r[idx], s[idx], n, a, nodes)
        done = np.abs(cur - prev) <= rtol * np.abs(cur)
        out[idx[done]] = cur[done]
        idx, prev = idx[~done], cur[~done]
        if idx.size and nodes >= max_nodes:
            raise KernelQuadratureError(
                f"angular quadrature unresolved at r={r[idx[0]]:.6g}, s={s[idx[0]]:.6g}")
    out[inner] *= sphere_area(n - 2)
    return out.reshape(shape) if shape else float(out[0])


@dataclass(frozen=True, eq=False)
class RadialFunction:
    """
    Samples of a radial function on ``[r_min, r_max]`` (log-spaced, ``r_min > 0``).

    ``decay`` is an optional hint ``q`` with ``|f| <= C r^-q`` on the last decade;
    ``func`` optionally supplies exact values for the quadrature.
    Beyond ``r_max`` the function is extended by the power law fitted to its
    last decade, below ``r_min`` by its first value.
    """

    radii: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    decay: float | None = None
    func: object = field(default=None, repr=False)

    def __post_init__(self):
        r = np.asarray(self.radii, float)
        v = np.asarray(self.values, float)
        if r.ndim != 1 or r.shape != v.shape or r.size < 8:
            raise ValueError("need at least 8 matching radii and values")
        if r[0] <= 0 or np.any(np.diff(r) <= 0):
            raise ValueError("radii must be positive and increasing")
        if not np.all(np.isfinite(v)):
            raise ValueError("values must be finite")
        object.__setattr__(self, "radii", r)
        object.__setattr__(self, "values", v)
        if self.decay is not None and np.any(v != 0):
            sel = r >= r[-1] / 10.0
            env = np.abs(v[sel]) * r[sel] ** self.decay
            if env[0] == 0 or env.max() > 10.0 * env[0]:
                raise ValueError(f"values do not decay like r^-{self.decay} on the last decade")

    @classmethod
    def from_callable(cls, func, r_min: float = 1e-3, r_max: float = 1e4, n: int = 281,
                      decay: float | None = None) -> "RadialFunction":
        r = np.geomspace(r_min, r_max, n)
        return cls(r, np.asarray(func(r), float), decay, func)

    @property
    def is_zero(self) -> bool:
        return not np.any(self.values)

    def tail_law(self):
        """``(sign C, q)`` of the fitted ``f ~ C r^-q`` over the last decade."""
        r, v = self.radii, self.values
        sel = r >= r[-1] / 10.0
        if np.any(v[sel] == 0):
            return 0.0, np.inf
        sgn = np.sign(v[sel])
        if np.any(sgn != sgn[-1]):
            raise TailDivergenceError("tail changes sign; no power-law extension")
        slope, icpt = np.polyfit(np.log(r[sel]), np.log(np.abs(v[sel])), 1)
        return float(sgn[-1] * math.exp(icpt)), float(-slope)

    def _spline(self):
        r, v = self.radii, self.values
        if np.all(v > 0) or np.all(v < 0):
            sgn = np.sign(v[0])
            cs = CubicSpline(np.log(r), np.log(np.abs(v)))
            return lambda s: sgn * np.exp(cs(np.log(s)))
        cs = CubicSpline(np.log(r), v)
        return lambda s: cs(np.log(s))

    def __call__(self, s):
        s = np.asarray(s, float)
        if self.func is not None:
            return np.asarray(self.func(s), float)
        out = np.empty_like(s)
        lo, hi = self.radii[0], self.radii[-1]
        inner = s < lo
        outer = s > hi
        mid = ~(inner | outer)
        out[inner] = self.values[0]
        out[mid] = self._spline()(s[mid])
        if np.any(outer):
            c, q = self.tail_law()
            out[outer] = c * s[outer] ** (-q) if np.isfinite(q) else 0.0
        return out


def _panel_nodes(edges, order=16):
    x, w = _gl01(order)
    a, b = edges[:-1], edges[1:]
    s = (a[:, None] + (b - a)[:, None] * x[None, :]).ravel()
    wt = ((b - a)[:, None] * w[None, :]).ravel()
    return s, wt


_DEPTH = 45


def _radial_edges(r, lo, hi, ratio=1.5, grade=2.0, depth=_DEPTH):
    base = np.concatenate(([0.0], np.geomspace(lo, hi, max(2, int(math.ceil(math.log(hi / lo) / math.log(ratio)))) + 1)))
    if r > 0:
        # geometric grading toward the diagonal on both sides
        d = r * grade ** -np.arange(1, depth + 1)
        extra = np.concatenate((r - d, [r], r + d[d < hi - r]))
        base = np.concatenate((base[(base < r * (1 - 0.5)) | (base > r * 1.5)], extra))
        base = base[(base >= 0) & (base <= hi)]
    return np.unique(base)


def _one_point(f: RadialFunction, a, n, r, c_tail, q):
    lo = f.radii[0]
    hi = f.radii[-1]
    edges = _radial_edges(r, min(lo, r if r > 0 else lo) * 1e-3, hi)
    s, wt = _panel_nodes(edges)
    s = s[s > 0]
    wt = wt[-s.size:]
    val = np.sum(f(s) * angular_kernel(r, s, n, a) * s ** (n - 1) * wt)
    if r > 0 and a < 1:
        # the unresolved gap |s - r| < d around the diagonal, from the local power law
        d = r * 2.0**-_DEPTH
        val += 2.0 * small_r_kernel_constant(n, a) * float(f(np.array([r]))[0]) * d**a / a
    if c_tail != 0.0:
        # numerical tail to far past both r and r_max, analytic remainder beyond
        far = 100.0 * max(hi, r)
        te = _radial_edges(r if r > hi else 0.0, hi, far)
        te = te[te >= hi]
        ts, tw = _panel_nodes(te)
        tail_f = f.func if f.func is not None else (lambda x: c_tail * x ** (-q))
        val += np.sum(np.asarray(tail_f(ts)) * angular_kernel(r, ts, n, a) * ts ** (n - 1) * tw)
        val += c_tail * sphere_area(n - 1) * far ** (a - q) / (q - a)
    return val


def riesz_apply(f: RadialFunction, a: float, n: int, x):
    """
    ``I_a f`` at radii ``x``.

    Raises
    ------
    TailDivergenceError
        If the fitted (or hinted) decay exponent is ``<= a``.
    """
    if not (0 < a < n):
        raise ValueError("need 0 < alpha < N")
    if n < 3:
        raise ValueError("need N >= 3")
    x = np.asarray(x, float)
    if np.any(x < 0):
        raise ValueError("radius must be nonnegative")
    if f.is_zero:
        return np.zeros_like(x) if x.ndim else 0.0
    c_tail, q = f.tail_law()
    if f.decay is not None:
        q_check = min(q, f.decay)
    else:
        q_check = q
    if c_tail != 0.0 and q_check <= a:
        raise TailDivergenceError(f"tail decay r^-{q_check:.3g} is not integrable against r^{a - n:.3g}")
    out = np.array([_one_point(f, a, n, float(r), c_tail, q) for r in np.atleast_1d(x)])
    out *= riesz_constant(n, a)
    return out.reshape(x.shape) if x.ndim else float(out[0])


def _slope(x, y):
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


@dataclass(frozen=True)
class AsymptoticsReport:
    slope: float
    theory_slope: float
    log_factor: bool
    fit_residual: float
    near_origin_ratio: float
    radii: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)


class FitResidualError(RuntimeError):
    """A log-log fit is too poor to trust (likely a quadrature failure)."""


def inverse_power(omega: float, b: float, r_min=1e-3, r_max=1e4, n=281) -> RadialFunction:
    return RadialFunction.from_callable(lambda r: omega / (1.0 + r**b), r_min, r_max, n, decay=b)


def verify_I1_asymptotics(omega: float, b: float, n: int, fit_range=(10.0, 1e3), points: int = 25,
                          max_residual: float = 0.05) -> AsymptoticsReport:  # noqa: N802
    """
    Fit the log-log slope of ``I_1 V`` for ``V = omega / (1 + r^b)`` over
    ``fit_range`` and compare with ``1 - b`` (``N > b``), ``1 - N`` (``N < b``)
    or ``1 - b`` times a log (``N = b``).
    """
    if not b > 2:
        raise ValueError("need b > 2")
    v = inverse_power(omega, b, r_max=max(1e4, 10 * fit_range[1]))
    xs = np.geomspace(fit_range[0], fit_range[1], points)
    vals = np.abs(riesz_apply(v, 1.0, n, xs))
    slope, icpt = np.polyfit(np.log(xs), np.log(vals), 1)
    resid = float(np.abs(np.log(vals) - (slope * np.log(xs) + icpt)).max())
    theory = 1.0 - b if n >= b else 1.0 - n
    log_factor = bool(n == b)
    if resid > max_residual and not log_factor:
        raise FitResidualError(f"log-log fit residual {resid:.3g} exceeds {max_residual}")
    near = np.linspace(0.0, 1.0, 6)
    inner = np.abs(riesz_apply(v, 1.0, n, near))
    ratio = float(max(inner.max() / inner[0], inner[0] / inner.min()))
    return AsymptoticsReport(float(slope), theory, log_factor, resid, ratio, xs, vals)


def hmv_condition_ratio(v: RadialFunction, n: int, radii=None) -> float:
    """
    ``sup_x I_1[(I_1 |V|)^2](x) / I_1 |V|(x)`` over ``radii`` (default: the
    sample radii of ``V``).
    """
    if v.is_zero:
        raise EmptyDomainError("V vanishes identically; the ratio is undefined")
    absv = RadialFunction(v.radii, np.abs(v.values), v.decay,
                          None if v.func is None else (lambda s: np.abs(v.func(s))))
    xs = v.radii if radii is None else np.asarray(radii, float)
    i1 = riesz_apply(absv, 1.0, n, xs)
    if np.any(i1 <= 0):
        raise EmptyDomainError("I_1 V vanishes on the evaluation grid")
    sq = RadialFunction(xs, i1**2)
    i1sq = riesz_apply(sq, 1.0, n, xs)
    return float(np.max(i1sq / i1))


@dataclass(frozen=True)
class GreenBound:
    sup: float
    diverged: bool


def green_bounded_sup_I2(v: RadialFunction, n: int, radii=None) -> GreenBound:  # noqa: N802
    """
    ``sup I_2 V`` over ``radii`` (default: the origin plus the sample radii of ``V``),
    or a divergence flag when the tail of ``V`` decays no faster than ``r^-2``.
    """
    if n < 3:
        raise ValueError("need N >= 3")
    if v.is_zero:
        return GreenBound(0.0, False)
    xs = np.concatenate(([0.0], v.radii[::4])) if radii is None else np.asarray(radii, float)
    try:
        vals = riesz_apply(v, 2.0, n, xs)
    except TailDivergenceError:
        return GreenBound(math.inf, True)
    return GreenBound(float(np.max(vals)), False)


def small_r_kernel_constant(n: int, a: float) -> float:
    """
    Leading diagonal behaviour ``K(r, s) ~ k0 r^(1-N) |r-s|^(a-1)`` for ``a < 1``,
    where ``k0 = omega_{N-2} B((N-1)/2, (1-a)/2) / 2``.
    """
    if not a < 1:
        raise ValueError("diagonal power law only for a < 1")
    return sphere_area(n - 2) * 0.5 * beta((n - 1) / 2.0, (1.0 - a) / 2.0)
