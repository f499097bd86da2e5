"""Radial potential families and the exponent algebra around the Fujita exponent."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


def alpha_of_omega(n: int, omega: float) -> float:
    """
    Larger root of ``alpha (alpha + n - 2) = omega``.

    Raises
    ------
    ValueError
        If ``(n-2)^2 + 4 omega < 0`` (no real root).
    """
    disc = (n - 2) ** 2 + 4.0 * omega
    if disc < 0:
        raise ValueError(f"omega={omega} below the Hardy bound -(N-2)^2/4 for N={n}")
    # cancellation-free form of (-(n-2) + sqrt(disc)) / 2
    s = math.sqrt(disc)
    if n - 2 > 0 and omega > 0:
        return 2.0 * omega / ((n - 2) + s)
    return (-(n - 2) + s) / 2.0


def fujita_exponent_theory(n: int, omega: float = 0.0) -> float:
    """``1 + 2 / (N + alpha(omega))``."""
    return 1.0 + 2.0 / (n + alpha_of_omega(n, omega))


@dataclass(frozen=True)
class ExponentBundle:
    """``P = 2/(p-1)``, ``Q = 1/(p-1)`` and, when a dimension is given, ``alpha(omega)`` and ``p*(omega)``."""

    p: float
    n: int | None = None
    omega: float = 0.0

    def __post_init__(self):
        if not self.p > 1:
            raise ValueError("p must exceed 1")

    @property
    def P(self) -> float:  # noqa: N802
        return 2.0 / (self.p - 1.0)

    @property
    def Q(self) -> float:  # noqa: N802
        return 1.0 / (self.p - 1.0)

    @property
    def alpha(self) -> float | None:
        return None if self.n is None else alpha_of_omega(self.n, self.omega)

    @property
    def p_star(self) -> float | None:
        return None if self.n is None else fujita_exponent_theory(self.n, self.omega)


def volume_condition_holds(growth: float, p: float) -> bool:
    """
    Whether ``r^growth ln^(growth/2) r <= C r^P ln^Q r`` for large ``r``.

    Equivalent to ``p <= 1 + 2/growth``; both exponents compare at once
    because ``P = 2Q``.
    """
    b = ExponentBundle(p)
    return growth <= b.P and growth / 2.0 <= b.Q


FAMILIES = ("zero", "inverse_power", "regularized_inverse_square", "hardy", "tabulated")


@dataclass(frozen=True)
class PotentialSpec:
    """
    A radial potential ``V(r)``.

    Families and parameters:

    ``zero``
        ``V = 0``.
    ``inverse_power`` (omega, b)
        ``omega / (1 + r^b)``.
    ``regularized_inverse_square`` (omega, theta)
        ``(omega / r^2)(1 + r^-theta)`` for ``r >= 1``; below 1 a cubic
        ``omega r^2 ((10 + theta) - (8 + theta) r)`` matching value and slope
        at ``r = 1`` and vanishing to second order at the origin.
    ``hardy`` (omega, n)
        ``(alpha(omega) n + omega r^2) / (1 + r^2)^2``, for which
        ``(1 + r^2)^(alpha/2)`` is an exact positive solution of ``Delta h = V h``.
    ``tabulated`` (radii, values)
        Linear interpolation, constant beyond the table.
    """

    family: str = "zero"
    omega: float = 0.0
    b: float = 3.0
    theta: float = 1.0
    n: int = 3
    radii: tuple = field(default=(), repr=False)
    values: tuple = field(default=(), repr=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown potential family {self.family!r}")
        if self.family == "inverse_power" and not self.b > 0:
            raise ValueError("inverse_power needs b > 0")
        if self.family == "regularized_inverse_square":
            if self.omega < 0 or not self.theta > 0:
                raise ValueError("regularized_inverse_square needs omega >= 0, theta > 0")
        if self.family == "hardy":
            lo = -((self.n - 2) ** 2) / 4.0
            if not (lo <= self.omega < 0):
                raise ValueError(f"hardy example needs omega in [{lo}, 0)")
        if self.family == "tabulated":
            if len(self.radii) < 2 or len(self.radii) != len(self.values):
                raise ValueError("tabulated potential needs matching radii/values")
            if np.any(np.diff(self.radii) <= 0):
                raise ValueError("tabulated radii must increase")

    @classmethod
    def zero(cls):
        return cls("zero")

    @classmethod
    def inverse_power(cls, omega: float, b: float):
        return cls("inverse_power", omega=omega, b=b)

    @classmethod
    def regularized_inverse_square(cls, omega: float, theta: float):
        return cls("regularized_inverse_square", omega=omega, theta=theta)

    @classmethod
    def hardy(cls, n: int, omega: float):
        return cls("hardy", omega=omega, n=n)

    @classmethod
    def tabulated(cls, radii, values):
        return cls("tabulated", radii=tuple(map(float, radii)), values=tuple(map(float, values)))

    @property
    def hardy_alpha(self) -> float:
        return alpha_of_omega(self.n, self.omega)

    def __call__(self, r):
        return evaluate(self, r)


def evaluate(v: PotentialSpec, r):
    """Evaluate the potential at radii ``r >= 0``."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("radius must be nonnegative")
    fam = v.family
    if fam == "zero":
        out = np.zeros_like(r)
    elif fam == "inverse_power":
        out = v.omega / (1.0 + r**v.b)
    elif fam == "regularized_inverse_square":
        w, th = v.omega, v.theta
        rs = np.maximum(r, 1.0)
        outer = w / rs**2 * (1.0 + rs**-th)
        inner = w * r**2 * ((10.0 + th) - (8.0 + th) * r)
        out = np.where(r >= 1.0, outer, inner)
    elif fam == "hardy":
        a = v.hardy_alpha
        out = (a * v.n + v.omega * r**2) / (1.0 + r**2) ** 2
    else:
        out = np.interp(r, np.asarray(v.radii), np.asarray(v.values))
    return out if out.ndim else float(out)


def hardy_profile(v: PotentialSpec, r):
    """Closed-form ``h = (1 + r^2)^(alpha/2)`` for the ``hardy`` family."""
    if v.family != "hardy":
        raise ValueError("closed-form h exists only for the hardy family")
    return (1.0 + np.asarray(r, dtype=float) ** 2) ** (v.hardy_alpha / 2.0)
