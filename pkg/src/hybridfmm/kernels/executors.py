"""Compiled drivers that run whole task lists and the upward/downward passes.

Particle arrays are split per coordinate (``x, y, z``) and are in tree order.
Cell attributes are the column arrays of :class:`~hybridfmm.tree.Tree`.
Every ``exec_*`` has a serial form (tasks in emission order) and a ``*_groups``
form that runs independent target groups under ``prange``; a group is a run of
tasks sharing one target cell, and groups passed together must own disjoint
accumulators.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange

from .harmonics import fill_negative
from .operators import l2l_into, l2p_at, m2l_into, m2m_into, m2p_at, p2m_into

# reassociation lets the source loop vectorise; inf/nan semantics are kept so
# coincident particles still surface as non-finite sums
_FASTMATH = {"nsz", "arcp", "contract", "reassoc"}


@njit(cache=True, error_model="numpy", fastmath=_FASTMATH, inline="always")
def _p2p_row(xi, yi, zi, sx, sy, sz, sq, j0, j1):
    phi = 0.0
    ax = 0.0
    ay = 0.0
    az = 0.0
    for j in range(j0, j1):
        dx = xi - sx[j]
        dy = yi - sy[j]
        dz = zi - sz[j]
        inv = 1.0 / np.sqrt(dx * dx + dy * dy + dz * dz)
        qi = sq[j] * inv
        qi3 = qi * inv * inv
        phi += qi
        ax += qi3 * dx
        ay += qi3 * dy
        az += qi3 * dz
    return phi, ax, ay, az


@njit(cache=True, error_model="numpy", fastmath=_FASTMATH)
def p2p_block(t0, t1, s0, s1, exclude_self, tx, ty, tz, sx, sy, sz, sq, pot, fx, fy, fz):
    """Direct sum of sources ``s0:s1`` onto targets ``t0:t1``.

    With ``exclude_self`` the two ranges index the same storage and the
    ``i == j`` term is skipped.
    """
    for i in range(t0, t1):
        xi = tx[i]
        yi = ty[i]
        zi = tz[i]
        if exclude_self:
            a = _p2p_row(xi, yi, zi, sx, sy, sz, sq, s0, i)
            b = _p2p_row(xi, yi, zi, sx, sy, sz, sq, i + 1, s1)
            pot[i] += a[0] + b[0]
            fx[i] += a[1] + b[1]
            fy[i] += a[2] + b[2]
            fz[i] += a[3] + b[3]
        else:
            a = _p2p_row(xi, yi, zi, sx, sy, sz, sq, s0, s1)
            pot[i] += a[0]
            fx[i] += a[1]
            fy[i] += a[2]
            fz[i] += a[3]


@njit(cache=True, error_model="numpy")
def exec_p2p(task_t, task_s, same, t_begin, t_end, s_begin, s_end,
             tx, ty, tz, sx, sy, sz, sq, pot, fx, fy, fz):
    for k in range(task_t.shape[0]):
        t = task_t[k]
        s = task_s[k]
        p2p_block(t_begin[t], t_end[t], s_begin[s], s_end[s], same and t == s,
                  tx, ty, tz, sx, sy, sz, sq, pot, fx, fy, fz)


@njit(cache=True, error_model="numpy", parallel=True)
def exec_p2p_groups(task_t, task_s, group_ptr, same, t_begin, t_end, s_begin, s_end,
                    tx, ty, tz, sx, sy, sz, sq, pot, fx, fy, fz):
    for g in prange(group_ptr.shape[0] - 1):
        for k in range(group_ptr[g], group_ptr[g + 1]):
            t = task_t[k]
            s = task_s[k]
            p2p_block(t_begin[t], t_end[t], s_begin[s], s_end[s], same and t == s,
                      tx, ty, tz, sx, sy, sz, sq, pot, fx, fy, fz)


@njit(cache=True, error_model="numpy")
def _m2p_task(t, s, p, t_begin, t_end, tx, ty, tz, mult, s_center, pot, fx, fy, fz, work):
    cx = s_center[s, 0]
    cy = s_center[s, 1]
    cz = s_center[s, 2]
    for i in range(t_begin[t], t_end[t]):
        phi, gx, gy, gz = m2p_at(mult[s], tx[i] - cx, ty[i] - cy, tz[i] - cz, p, work)
        pot[i] += phi
        fx[i] += gx
        fy[i] += gy
        fz[i] += gz


@njit(cache=True, error_model="numpy")
def exec_m2p(task_t, task_s, p, t_begin, t_end, tx, ty, tz, mult, s_center, pot, fx, fy, fz):
    work = np.empty((p + 2) * (p + 2), dtype=np.complex128)
    for k in range(task_t.shape[0]):
        _m2p_task(task_t[k], task_s[k], p, t_begin, t_end, tx, ty, tz, mult, s_center,
                  pot, fx, fy, fz, work)


@njit(cache=True, error_model="numpy", parallel=True)
def exec_m2p_groups(task_t, task_s, group_ptr, p, t_begin, t_end, tx, ty, tz, mult,
                    s_center, pot, fx, fy, fz):
    for g in prange(group_ptr.shape[0] - 1):
        work = np.empty((p + 2) * (p + 2), dtype=np.complex128)
        for k in range(group_ptr[g], group_ptr[g + 1]):
            _m2p_task(task_t[k], task_s[k], p, t_begin, t_end, tx, ty, tz, mult, s_center,
                      pot, fx, fy, fz, work)


@njit(cache=True, error_model="numpy")
def exec_m2l(task_t, task_s, p, mult, s_center, t_center, local, has_local):
    work = np.empty((p + 2) * (p + 2), dtype=np.complex128)
    for k in range(task_t.shape[0]):
        t = task_t[k]
        s = task_s[k]
        m2l_into(mult[s], t_center[t, 0] - s_center[s, 0], t_center[t, 1] - s_center[s, 1],
                 t_center[t, 2] - s_center[s, 2], p, local[t], work)
        has_local[t] = True


@njit(cache=True, error_model="numpy", parallel=True)
def exec_m2l_groups(task_t, task_s, group_ptr, p, mult, s_center, t_center, local, has_local):
    for g in prange(group_ptr.shape[0] - 1):
        work = np.empty((p + 2) * (p + 2), dtype=np.complex128)
        for k in range(group_ptr[g], group_ptr[g + 1]):
            t = task_t[k]
            s = task_s[k]
            m2l_into(mult[s], t_center[t, 0] - s_center[s, 0],
                     t_center[t, 1] - s_center[s, 1], t_center[t, 2] - s_center[s, 2],
                     p, local[t], work)
            has_local[t] = True


@njit(cache=True, error_model="numpy")
def upward_pass(x, y, z, q, center, begin, end, child_begin, n_child, p, mult):
    """P2M at every leaf, then M2M into each parent, children first."""
    work = np.empty((p + 2) * (p + 2), dtype=np.complex128)
    for c in range(center.shape[0] - 1, -1, -1):
        if n_child[c] == 0:
            p2m_into(x, y, z, q, begin[c], end[c], center[c, 0], center[c, 1],
                     center[c, 2], p, mult[c], work)
        else:
            for ch in range(child_begin[c], child_begin[c] + n_child[c]):
                m2m_into(mult[ch], center[ch, 0] - center[c, 0], center[ch, 1] - center[c, 1],
                         center[ch, 2] - center[c, 2], p, mult[c], work)
        fill_negative(mult[c], p)


@njit(cache=True, error_model="numpy")
def downward_pass(center, begin, end, child_begin, n_child, p, local, has_local,
                  x, y, z, pot, fx, fy, fz):
    """L2L to children and L2P at leaves for every cell holding a local expansion.

    Returns ``(n_l2l, n_l2p, n_l2p_particles)``.
    """
    work = np.empty((p + 2) * (p + 2), dtype=np.complex128)
    n_l2l = 0
    n_l2p = 0
    n_l2p_particles = 0
    for c in range(center.shape[0]):
        if not has_local[c]:
            continue
        fill_negative(local[c], p)
        if n_child[c] == 0:
            cx = center[c, 0]
            cy = center[c, 1]
            cz = center[c, 2]
            for i in range(begin[c], end[c]):
                phi, gx, gy, gz = l2p_at(local[c], x[i] - cx, y[i] - cy, z[i] - cz, p, work)
                pot[i] += phi
                fx[i] += gx
                fy[i] += gy
                fz[i] += gz
            n_l2p += 1
            n_l2p_particles += end[c] - begin[c]
        else:
            for ch in range(child_begin[c], child_begin[c] + n_child[c]):
                l2l_into(local[c], center[ch, 0] - center[c, 0], center[ch, 1] - center[c, 1],
                         center[ch, 2] - center[c, 2], p, local[ch], work)
                has_local[ch] = True
                n_l2l += 1
    return n_l2l, n_l2p, n_l2p_particles


# --- counting surrogates -------------------------------------------------------


@njit(cache=True, error_model="numpy")
def count_particle_tasks(task_t, task_s, task_k, same, t_begin, t_end, s_begin, s_end,
                         counts, cell_counts):
    """Counting surrogate for every task kind.

    P2P and M2P add the source population to each target particle (P2P minus
    one for the self term); M2L adds it to the target cell for later delivery.
    """
    for k in range(task_t.shape[0]):
        t = task_t[k]
        s = task_s[k]
        ns = s_end[s] - s_begin[s]
        if task_k[k] == 2:
            cell_counts[t] += ns
            continue
        if task_k[k] == 0 and same and t == s:
            ns -= 1
        for i in range(t_begin[t], t_end[t]):
            counts[i] += ns


@njit(cache=True, error_model="numpy")
def count_downward(begin, end, child_begin, n_child, cell_counts, counts):
    """Counting surrogate for the downward pass; same counters as :func:`downward_pass`."""
    n_l2l = 0
    n_l2p = 0
    n_l2p_particles = 0
    for c in range(begin.shape[0]):
        if cell_counts[c] == 0:
            continue
        if n_child[c] == 0:
            for i in range(begin[c], end[c]):
                counts[i] += cell_counts[c]
            n_l2p += 1
            n_l2p_particles += end[c] - begin[c]
        else:
            for ch in range(child_begin[c], child_begin[c] + n_child[c]):
                cell_counts[ch] += cell_counts[c]
                n_l2l += 1
    return n_l2l, n_l2p, n_l2p_particles
