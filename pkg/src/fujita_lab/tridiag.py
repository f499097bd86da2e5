"""Thomas algorithm for the implicit steps of the radial solvers."""

from __future__ import annotations

import numpy as np
from numba import njit


class NotAnMMatrixError(ValueError):
    """The implicit system lost the sign pattern that guarantees positivity."""


@njit(cache=True)
def _thomas(a, b, c, d):
    n = d.shape[0]
    cp = np.empty(n)
    dp = np.empty(n)
    cp[0] = c[0] / b[0]
    dp[0] = d[0] / b[0]
    for k in range(1, n):
        m = b[k] - a[k] * cp[k - 1]
        cp[k] = c[k] / m
        dp[k] = (d[k] - a[k] * dp[k - 1]) / m
    x = np.empty(n)
    x[n - 1] = dp[n - 1]
    for k in range(n - 2, -1, -1):
        x[k] = dp[k] - cp[k] * x[k + 1]
    return x


def solve_tridiag(a, b, c, d):
    """
    Solve a tridiagonal system with the Thomas algorithm.

    Parameters
    ----------
    a : ndarray
        Lower diagonal, length n, ``a[0]`` ignored.
    b : ndarray
        Main diagonal, length n.
    c : ndarray
        Upper diagonal, length n, ``c[-1]`` ignored.
    d : ndarray
        Right-hand side, length n.

    Returns
    -------
    ndarray
        Solution vector.

    No pivoting is done; callers must pass diagonally dominant systems.
    """
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    c = np.ascontiguousarray(c, dtype=np.float64)
    d = np.ascontiguousarray(d, dtype=np.float64)
    return _thomas(a, b, c, d)


def check_m_matrix(a, b, c):
    """Raise unless (a, b, c) is a row diagonally dominant M-matrix."""
    if np.any(a[1:] > 0.0) or np.any(c[:-1] > 0.0):
        raise NotAnMMatrixError("positive off-diagonal entry in implicit matrix")
    offsum = np.zeros_like(b)
    offsum[1:] += -a[1:]
    offsum[:-1] += -c[:-1]
    if np.any(b <= 0.0) or np.any(b < offsum * (1.0 - 1e-12)):
        raise NotAnMMatrixError("implicit matrix is not diagonally dominant")
