"""Scaled solid harmonics.

Both families use the associated Legendre functions with the Condon-Shortley
phase, normalised so that the translation theorems reduce to plain discrete
convolutions over ``(n, m)``::

    R_n^m(r) = rho^n P_n^m(cos theta) e^{i m phi} / (n + m)!      (regular)
    I_n^m(r) = (n - m)! P_n^m(cos theta) e^{i m phi} / rho^(n+1)  (irregular)

with ``X_n^{-m} = (-1)^m conj(X_n^m)``. With these, for ``|a| < |r|``::

    1 / |r - a| = sum_{n,m} conj(R_n^m(a)) I_n^m(r)

Values are computed by Cartesian recurrences (no trigonometry), so the
regular harmonics are well defined at the origin.
"""

from __future__ import annotations

import math

from numba import njit


@njit(cache=True, error_model="numpy", inline="always")
def idx(n, m):
    return n * n + n + m


@njit(cache=True, error_model="numpy")
def fill_negative(a, p):
    """Set the ``m < 0`` entries from the ``m > 0`` ones by conjugate symmetry."""
    for n in range(1, p + 1):
        sign = -1.0
        for m in range(1, n + 1):
            a[idx(n, -m)] = sign * a[idx(n, m)].conjugate()
            sign = -sign


@njit(cache=True, error_model="numpy")
def regular(x, y, z, p, out):
    """Regular harmonics ``R_n^m(x, y, z)`` for ``n <= p`` into ``out``."""
    rho2 = x * x + y * y + z * z
    xy = complex(x, y)
    out[0] = 1.0
    for m in range(1, p + 1):
        out[idx(m, m)] = -xy * out[idx(m - 1, m - 1)] / (2.0 * m)
    for m in range(p):
        out[idx(m + 1, m)] = z * out[idx(m, m)]
        for n in range(m + 2, p + 1):
            out[idx(n, m)] = (
                (2 * n - 1) * z * out[idx(n - 1, m)] - rho2 * out[idx(n - 2, m)]
            ) / (n * n - m * m)
    fill_negative(out, p)


@njit(cache=True, error_model="numpy")
def irregular_half(x, y, z, p, out):
    """Like :func:`irregular` but only the ``m >= 0`` entries are written."""
    rho2 = x * x + y * y + z * z
    inv = 1.0 / rho2
    xy = complex(x, y)
    out[0] = math.sqrt(inv)
    for m in range(1, p + 1):
        out[idx(m, m)] = -(2 * m - 1) * inv * xy * out[idx(m - 1, m - 1)]
    for m in range(p):
        out[idx(m + 1, m)] = (2 * m + 1) * z * inv * out[idx(m, m)]
        for n in range(m + 2, p + 1):
            out[idx(n, m)] = (
                (2 * n - 1) * z * out[idx(n - 1, m)]
                - (n + m - 1) * (n - m - 1) * out[idx(n - 2, m)]
            ) * inv


@njit(cache=True, error_model="numpy")
def irregular(x, y, z, p, out):
    """Irregular harmonics ``I_n^m(x, y, z)`` for ``n <= p``; origin excluded."""
    irregular_half(x, y, z, p, out)
    fill_negative(out, p)
