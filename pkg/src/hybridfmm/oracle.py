"""O(N^2) direct summation and error metrics."""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np
from numba import njit

from .model import FieldResult, Particles, SingularityError


@njit(cache=True)
def _direct(pos, q, targets, pot, force):
    n = pos.shape[0]
    for k in range(targets.shape[0]):
        i = targets[k]
        xi = pos[i, 0]
        yi = pos[i, 1]
        zi = pos[i, 2]
        phi = 0.0
        fx = 0.0
        fy = 0.0
        fz = 0.0
        for j in range(n):
            if j == i:
                continue
            dx = xi - pos[j, 0]
            dy = yi - pos[j, 1]
            dz = zi - pos[j, 2]
            r2 = dx * dx + dy * dy + dz * dz
            if r2 == 0.0:
                return i
            inv = 1.0 / math.sqrt(r2)
            qinv = q[j] * inv
            phi += qinv
            qinv3 = qinv * inv * inv
            fx += qinv3 * dx
            fy += qinv3 * dy
            fz += qinv3 * dz
        pot[k] = phi
        force[k, 0] = fx
        force[k, 1] = fy
        force[k, 2] = fz
    return -1


def direct_evaluate(particles: Particles, target_subset=None) -> FieldResult:
    """Exact field at ``target_subset`` (default: every particle), self excluded.

    Sources are summed in ascending index order, so a subset run reproduces
    the corresponding entries of the full run bit for bit.
    """
    n = len(particles)
    if target_subset is None:
        targets = np.arange(n, dtype=np.int64)
    else:
        targets = np.asarray(target_subset, dtype=np.int64).reshape(-1)
        if targets.size and (targets.min() < 0 or targets.max() >= n):
            raise IndexError("target index out of range")
    out = FieldResult.zeros(targets.size)
    bad = _direct(particles.positions, particles.charges, targets, out.potential, out.force)
    if bad >= 0:
        raise SingularityError(f"particle {bad} coincides with another particle")
    return out


class ErrorNorms(NamedTuple):
    potential_l2: float
    force_l2: float
    potential_max: float
    force_max: float


def rel_error(approx: FieldResult, exact: FieldResult) -> ErrorNorms:
    """Relative L2 errors over all entries and worst per-particle relative errors.

    The per-particle force error uses vector norms: ``|f_a - f_e| / |f_e|``.
    """
    if len(approx) != len(exact):
        raise ValueError(f"length mismatch: {len(approx)} vs {len(exact)}")
    if len(exact) == 0:
        raise ValueError("error norms need at least one entry")
    pe, fe = exact.potential, exact.force
    pn = np.linalg.norm(pe)
    fn = np.linalg.norm(fe)
    if pn == 0.0 or fn == 0.0:
        raise ValueError("relative error undefined for a zero reference field")
    dp = approx.potential - pe
    df = approx.force - fe
    with np.errstate(divide="ignore", invalid="ignore"):
        pmax = np.abs(dp) / np.abs(pe)
        fmax = np.linalg.norm(df, axis=1) / np.linalg.norm(fe, axis=1)
    return ErrorNorms(
        float(np.linalg.norm(dp) / pn),
        float(np.linalg.norm(df) / fn),
        float(np.max(pmax)),
        float(np.max(fmax)),
    )
