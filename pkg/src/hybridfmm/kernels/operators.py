"""Compiled Laplace expansion operators on flat coefficient arrays.

Conventions (see :mod:`.harmonics`)::

    multipole  M_n^m = sum_j q_j conj(R_n^m(x_j - c))   phi(x) = sum M_n^m I_n^m(x - c)
    local      L_n^m = sum_j q_j conj(I_n^m(x_j - c))   phi(x) = sum L_n^m R_n^m(x - c)

Accumulating operators only write the ``m >= 0`` half of their output; call
:func:`~.harmonics.fill_negative` once all contributions are in. Inputs must
be complete (both halves). ``work`` buffers must hold ``(p + 2)**2`` values.
"""

from __future__ import annotations

from numba import njit

from .harmonics import idx, irregular, irregular_half, regular

# finite-math flags only: no operator here may produce NaN or Inf silently
_FAST = {"nsz", "arcp", "contract", "reassoc"}


@njit(cache=True, error_model="numpy")
def p2m_into(x, y, z, q, begin, end, cx, cy, cz, p, out, work):
    for j in range(begin, end):
        regular(x[j] - cx, y[j] - cy, z[j] - cz, p, work)
        qj = q[j]
        for n in range(p + 1):
            for m in range(n + 1):
                out[idx(n, m)] += qj * work[idx(n, m)].conjugate()


@njit(cache=True, error_model="numpy")
def m2m_into(child, dx, dy, dz, p, out, work):
    """Shift ``child`` by ``d = child_center - parent_center`` into ``out``."""
    regular(dx, dy, dz, p, work)
    for n in range(p + 1):
        for m in range(n + 1):
            s = 0j
            for k in range(n + 1):
                nk = n - k
                lo = max(-k, m - nk)
                hi = min(k, m + nk)
                for l in range(lo, hi + 1):
                    s += work[idx(k, l)].conjugate() * child[idx(nk, m - l)]
            out[idx(n, m)] += s


@njit(cache=True, error_model="numpy")
def m2l_into(mult, dx, dy, dz, p, out, work):
    """Multipole about ``c_s`` to local about ``c_t``; ``d = c_t - c_s``."""
    irregular(dx, dy, dz, p, work)
    for k in range(p + 1):
        for l in range(k + 1):
            s = 0j
            for n in range(p - k + 1):
                for m in range(-n, n + 1):
                    s += mult[idx(n, m)] * work[idx(n + k, m - l)]
            if (k + l) % 2 == 0:
                out[idx(k, l)] += s
            else:
                out[idx(k, l)] -= s


@njit(cache=True, error_model="numpy")
def l2l_into(local, dx, dy, dz, p, out, work):
    """Shift ``local`` by ``d = child_center - parent_center`` into ``out``."""
    regular(dx, dy, dz, p, work)
    for k in range(p + 1):
        for l in range(k + 1):
            s = 0j
            for n in range(k, p + 1):
                nk = n - k
                lo = max(-n, l - nk)
                hi = min(n, l + nk)
                for m in range(lo, hi + 1):
                    s += local[idx(n, m)] * work[idx(nk, m - l)]
            out[idx(k, l)] += s


@njit(cache=True, error_model="numpy", fastmath=_FAST)
def m2p_at(mult, dx, dy, dz, p, work):
    """Potential and force at offset ``d = x - c`` from a multipole."""
    irregular_half(dx, dy, dz, p + 1, work)
    phi = 0.0
    gx = 0.0
    gy = 0.0
    gz = 0.0
    for n in range(p + 1):
        # m = 0 uses I_{n+1}^{-1} = -conj(I_{n+1}^1)
        a = mult[idx(n, 0)]
        ip = work[idx(n + 1, 1)]
        im = -ip.conjugate()
        phi += (a * work[idx(n, 0)]).real
        gx += 0.5 * (a * (ip - im)).real
        gy += 0.5 * (a * (ip + im)).imag
        gz -= (a * work[idx(n + 1, 0)]).real
        for m in range(1, n + 1):
            a = mult[idx(n, m)]
            ip = work[idx(n + 1, m + 1)]
            im = work[idx(n + 1, m - 1)]
            phi += 2.0 * (a * work[idx(n, m)]).real
            gx += (a * (ip - im)).real
            gy += (a * (ip + im)).imag
            gz -= 2.0 * (a * work[idx(n + 1, m)]).real
    return phi, -gx, -gy, -gz


@njit(cache=True, error_model="numpy")
def l2p_at(local, dx, dy, dz, p, work):
    """Potential and force at offset ``d = x - c`` from a local expansion."""
    regular(dx, dy, dz, p, work)
    phi = local[0].real
    gx = 0.0
    gy = 0.0
    gz = 0.0
    for n in range(1, p + 1):
        for m in range(n + 1):
            w = 1.0 if m == 0 else 2.0
            a = local[idx(n, m)]
            phi += w * (a * work[idx(n, m)]).real
            rp = work[idx(n - 1, m + 1)] if m + 1 <= n - 1 else 0j
            rm = work[idx(n - 1, m - 1)] if m - 1 >= 1 - n else 0j
            gx += 0.5 * w * (a * (rp - rm)).real
            gy += 0.5 * w * (a * (rp + rm)).imag
            if m <= n - 1:
                gz += w * (a * work[idx(n - 1, m)]).real
    return phi, -gx, -gy, -gz


@njit(cache=True, error_model="numpy")
def p2l_into(x, y, z, q, begin, end, cx, cy, cz, p, out, work):
    for j in range(begin, end):
        irregular(x[j] - cx, y[j] - cy, z[j] - cz, p, work)
        qj = q[j]
        for n in range(p + 1):
            for m in range(n + 1):
                out[idx(n, m)] += qj * work[idx(n, m)].conjugate()
