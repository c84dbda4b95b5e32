"""Modified Bessel functions of order 0 and 1 for real arguments.

The power series has only positive terms, so it is numerically stable; it is
summed for ``|z| < 30`` and the asymptotic expansion is used above.
"""
from __future__ import annotations

import numpy as np

_SERIES_MAX = 30.0
_TOL = 1e-17


def _series(z: np.ndarray, order: int) -> np.ndarray:
    # order 0: I0(z) - 1 ; order 1: I1(z) / z
    q = 0.25 * z * z
    if order == 0:
        term = q.copy()
        total = term.copy()
        k = 1
    else:
        term = np.full_like(z, 0.5)
        total = term.copy()
        k = 0
    while True:
        k += 1
        term = term * q / (k * (k + order)) if order else term * q / (k * k)
        total += term
        if np.all(term <= _TOL * np.maximum(total, 1.0)):
            return total


def _asymptotic_log(z: np.ndarray, order: int) -> np.ndarray:
    mu = 4.0 * order * order
    term = np.ones_like(z)
    total = np.ones_like(z)
    for k in range(1, 12):
        term = -term * (mu - (2 * k - 1) ** 2) / (k * 8.0 * z)
        total += term
    return z - 0.5 * np.log(2.0 * np.pi * z) + np.log(total)


def i0m1(z) -> np.ndarray:
    """``I0(z) - 1`` without cancellation for small ``z``."""
    z = np.abs(np.asarray(z, dtype=float))
    out = np.empty_like(z)
    small = z < _SERIES_MAX
    out[small] = _series(z[small], 0)
    out[~small] = np.expm1(_asymptotic_log(z[~small], 0))
    return out


def i0(z) -> np.ndarray:
    return 1.0 + i0m1(z)


def log_i0(z) -> np.ndarray:
    z = np.abs(np.asarray(z, dtype=float))
    out = np.empty_like(z)
    small = z < _SERIES_MAX
    out[small] = np.log1p(_series(z[small], 0))
    out[~small] = _asymptotic_log(z[~small], 0)
    return out


def i1_over_z(z) -> np.ndarray:
    """``I1(z) / z``; equals 1/2 at ``z = 0``."""
    z = np.abs(np.asarray(z, dtype=float))
    out = np.empty_like(z)
    small = z < _SERIES_MAX
    out[small] = _series(z[small], 1)
    out[~small] = np.exp(_asymptotic_log(z[~small], 1)) / z[~small]
    return out


def bessel_ratio(z) -> np.ndarray:
    """``I1(z) / I0(z)``."""
    z = np.asarray(z, dtype=float)
    return z * i1_over_z(z) / i0(z)
