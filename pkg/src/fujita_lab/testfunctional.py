"""
Dyadic test-function sums that bound the weighted gradient and time-derivative
integrals of the cutoffs ``phi_i``, evaluated for a given volume law.

All sums are formed in log space; the terms reach ``2^(hundreds)`` for the
ladder sizes used here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

LN2 = math.log(2.0)
DEFAULT_LADDER = (4, 8, 16, 32, 64)


def g_profile(t):
    """``1`` on ``[0, 1]``, ``0`` on ``[2, inf)``, quintic smoothstep in between."""
    s = np.clip(np.asarray(t, float) - 1.0, 0.0, 1.0)
    return 1.0 - s**3 * (10.0 - 15.0 * s + 6.0 * s * s)


def g_derivative(t):
    t = np.asarray(t, float)
    s = np.clip(t - 1.0, 0.0, 1.0)
    return np.where((t > 1.0) & (t < 2.0), -30.0 * s * s * (1.0 - s) ** 2, 0.0)


G_SLOPE_BOUND = 1.875  # max |g'| at the midpoint


@dataclass(frozen=True)
class CutoffFamily:
    """``eta_k(t) = g(t / 4^k)``, ``gamma_k(r) = g(r / 2^k)`` and ``phi_i = (1/i) sum_k eta_k gamma_k``, ``k = i+1..2i``."""

    i: int

    def __post_init__(self):
        if int(self.i) != self.i or self.i < 2:
            raise ValueError("scale index i must be an integer >= 2")

    @property
    def ks(self):
        return np.arange(self.i + 1, 2 * self.i + 1)

    @staticmethod
    def eta(k, t):
        return g_profile(np.asarray(t, float) / 4.0**k)

    @staticmethod
    def deta(k, t):
        return g_derivative(np.asarray(t, float) / 4.0**k) / 4.0**k

    @staticmethod
    def gamma(k, r):
        return g_profile(np.asarray(r, float) / 2.0**k)

    @staticmethod
    def dgamma(k, r):
        return g_derivative(np.asarray(r, float) / 2.0**k) / 2.0**k

    def phi(self, r, t):
        return sum(self.eta(k, t) * self.gamma(k, r) for k in self.ks) / self.i

    def grad_phi(self, r, t):
        return sum(self.eta(k, t) * self.dgamma(k, r) for k in self.ks) / self.i

    def dt_phi(self, r, t):
        return sum(self.deta(k, t) * self.gamma(k, r) for k in self.ks) / self.i

    def grad_phi_power(self, r, t, theta: float):
        """``i^-theta sum_k |eta_k grad gamma_k|^theta`` (valid because the supports are disjoint)."""
        return sum(np.abs(self.eta(k, t) * self.dgamma(k, r)) ** theta for k in self.ks) * self.i**-theta

    def dt_phi_power(self, r, t, theta: float):
        return sum(np.abs(self.deta(k, t) * self.gamma(k, r)) ** theta for k in self.ks) * self.i**-theta


@dataclass(frozen=True)
class VolumeLaw:
    """``nu(B_r) = c r^P ln^Q r``, or any callable giving ``ln nu`` from ``ln r``."""

    P: float  # noqa: N815
    Q: float  # noqa: N815
    c: float = 1.0
    log_func: object = field(default=None, repr=False, compare=False)

    def log_volume(self, log_r):
        log_r = np.asarray(log_r, float)
        if self.log_func is not None:
            return np.asarray(self.log_func(log_r), float)
        return math.log(self.c) + self.P * log_r + self.Q * np.log(log_r)

    @classmethod
    def sharp(cls, p: float, eps: float = 0.0) -> "VolumeLaw":
        """``r^P ln^(Q + eps) r`` for ``P = 2/(p-1)``, ``Q = 1/(p-1)``."""
        return cls(2.0 / (p - 1.0), 1.0 / (p - 1.0) + eps)


def _check(i, p):
    if int(i) != i or i < 2:
        raise ValueError("scale index i must be an integer >= 2")
    if not p > 1:
        raise ValueError("p must exceed 1")


def j_sum(i: int, p: float, law: VolumeLaw, delta2: float = 0.0) -> float:
    """
    ``i^-1 (sum_k 2^(2k+1) (2^(k+1))^(d2 p/i/e) 2^(-2pk/e) nu(B_{2^(k+1)}))^(e/p)``
    with ``e = p + 1/i - 1``.
    """
    _check(i, p)
    e = p + 1.0 / i - 1.0
    k = np.arange(i + 1, 2 * i + 1)
    lr = (k + 1) * LN2
    terms = (2 * k + 1) * LN2 + delta2 * p / i / e * lr - 2.0 * p * k / e * LN2 + law.log_volume(lr)
    return math.exp(-math.log(i) + e / p * logsumexp(terms))


def l_sum(i: int, p: float, law: VolumeLaw, delta2: float = 0.0, variant: str = "time") -> float:
    """
    Time-derivative sums.

    ``time``: ``(i^(-p/e) sum_k 2^(-2kp/e) 2^(2k) (2^(k+1))^(d2 p/i/e) nu(B_{2^(k+1)}))^(e/p)``;
    ``final``: ``(i^(-p/(p-1)) sum_k 2^(-2kp/(p-1)) 2^(2k) nu(B_{2^(k+1)}))^(e/p)``.
    """
    _check(i, p)
    e = p + 1.0 / i - 1.0
    k = np.arange(i + 1, 2 * i + 1)
    lr = (k + 1) * LN2
    if variant == "time":
        terms = -2.0 * k * p / e * LN2 + 2 * k * LN2 + delta2 * p / i / e * lr + law.log_volume(lr)
        pre = -p / e * math.log(i)
    elif variant == "final":
        terms = -2.0 * k * p / (p - 1.0) * LN2 + 2 * k * LN2 + law.log_volume(lr)
        pre = -p / (p - 1.0) * math.log(i)
    else:
        raise ValueError("variant must be 'time' or 'final'")
    return math.exp(e / p * (pre + logsumexp(terms)))


def j_sum_negative_weight(i: int, p: float, law: VolumeLaw, delta1: float = 0.0) -> float:
    """
    ``i^-1 (sum_k 2^(2k+1) 2^(-2pk/e) (2^k)^(d1 p/i/e) nu(B_{2^(k+1)}))^(e/p)``
    with ``e = p - 1/i - 1``, which must be positive.
    """
    _check(i, p)
    e = p - 1.0 / i - 1.0
    if not e > 0:
        raise ValueError(f"p - 1/i - 1 = {e:.4g} is not positive; increase i")
    k = np.arange(i + 1, 2 * i + 1)
    lr = (k + 1) * LN2
    terms = (2 * k + 1) * LN2 - 2.0 * p * k / e * LN2 + delta1 * p / i / e * k * LN2 + law.log_volume(lr)
    return math.exp(-math.log(i) + e / p * logsumexp(terms))


def ladder_slope(values, ladder=DEFAULT_LADDER) -> float:
    """Least-squares slope of ``ln value`` against ``ln i``."""
    return float(np.polyfit(np.log(np.asarray(ladder, float)), np.log(np.asarray(values, float)), 1)[0])


@dataclass(frozen=True)
class FunctionalReport:
    ladder: tuple
    j: tuple
    l_time: tuple
    l_final: tuple
    j_neg: tuple
    slopes: dict

    def rows(self):
        return list(zip(self.ladder, self.j, self.l_time, self.l_final, self.j_neg))


def functional_report(p: float, law: VolumeLaw, ladder=DEFAULT_LADDER, delta1: float = 0.0,
                      delta2: float = 0.0) -> FunctionalReport:
    """All four sums over the ladder with their fitted log-slopes; ``j_neg`` is NaN where undefined."""
    ladder = tuple(int(i) for i in ladder)
    j = tuple(j_sum(i, p, law, delta2) for i in ladder)
    lt = tuple(l_sum(i, p, law, delta2, "time") for i in ladder)
    lf = tuple(l_sum(i, p, law, delta2, "final") for i in ladder)
    jn = tuple(j_sum_negative_weight(i, p, law, delta1) if p - 1.0 / i - 1.0 > 0 else math.nan
               for i in ladder)
    slopes = {"j": ladder_slope(j, ladder), "l_time": ladder_slope(lt, ladder),
              "l_final": ladder_slope(lf, ladder)}
    ok = [n for n, v in enumerate(jn) if np.isfinite(v)]
    slopes["j_neg"] = ladder_slope([jn[n] for n in ok], [ladder[n] for n in ok]) if len(ok) >= 2 else math.nan
    return FunctionalReport(ladder, j, lt, lf, jn, slopes)
