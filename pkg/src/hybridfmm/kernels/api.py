"""Python-level Laplace operators acting on :class:`~hybridfmm.model.Expansion`."""

from __future__ import annotations

import numpy as np

from ..model import (
    DomainError,
    Expansion,
    FieldResult,
    Particles,
    SingularityError,
    n_coefficients,
)
from . import executors as ex
from . import operators as op
from .harmonics import fill_negative


def _columns(pos: np.ndarray):
    pos = np.asarray(pos, dtype=np.float64).reshape(-1, 3)
    return (np.ascontiguousarray(pos[:, 0]), np.ascontiguousarray(pos[:, 1]),
            np.ascontiguousarray(pos[:, 2]))


def _positions(targets) -> np.ndarray:
    if isinstance(targets, Particles):
        return targets.positions
    return np.asarray(targets, dtype=np.float64).reshape(-1, 3)


def _work(p: int) -> np.ndarray:
    return np.empty((p + 2) ** 2, dtype=np.complex128)


def p2p(targets: Particles, sources: Particles, exclude_self: bool = False,
        out: FieldResult | None = None) -> FieldResult:
    """Accumulate the direct-sum field of ``sources`` on ``targets``.

    ``exclude_self`` skips ``i == j``; both sets must then be the same storage.
    """
    if exclude_self and len(targets) != len(sources):
        raise ValueError("exclude_self requires targets and sources to be the same set")
    res = FieldResult.zeros(len(targets)) if out is None else out
    tx, ty, tz = _columns(targets.positions)
    sx, sy, sz = _columns(sources.positions)
    fx = np.zeros(len(targets))
    fy = np.zeros(len(targets))
    fz = np.zeros(len(targets))
    pot = np.zeros(len(targets))
    ex.p2p_block(0, len(targets), 0, len(sources), exclude_self, tx, ty, tz, sx, sy, sz,
                 sources.charges, pot, fx, fy, fz)
    if not (np.all(np.isfinite(pot)) and np.all(np.isfinite(fx))
            and np.all(np.isfinite(fy)) and np.all(np.isfinite(fz))):
        raise SingularityError("coincident source and target particles")
    res.potential += pot
    res.force += np.stack([fx, fy, fz], axis=1)
    return res


def p2m(particles: Particles, center, p: int) -> Expansion:
    """Multipole expansion of ``particles`` about ``center``."""
    out = Expansion.zeros(p, center, "multipole")
    x, y, z = _columns(particles.positions)
    op.p2m_into(x, y, z, particles.charges, 0, len(particles), *out.center, p,
                out.coeffs, _work(p))
    fill_negative(out.coeffs, p)
    return out


def p2l(particles: Particles, center, p: int) -> Expansion:
    """Local expansion about ``center`` of distant ``particles``."""
    out = Expansion.zeros(p, center, "local")
    x, y, z = _columns(particles.positions)
    d = np.linalg.norm(particles.positions - out.center, axis=1)
    if np.any(d == 0.0):
        raise DomainError("a source particle sits on the local expansion center")
    op.p2l_into(x, y, z, particles.charges, 0, len(particles), *out.center, p,
                out.coeffs, _work(p))
    fill_negative(out.coeffs, p)
    return out


def m2m(child: Expansion, parent_center) -> Expansion:
    p = child.order
    out = Expansion.zeros(p, parent_center, "multipole")
    op.m2m_into(child.coeffs, *(child.center - out.center), p, out.coeffs, _work(p))
    fill_negative(out.coeffs, p)
    return out


def m2l(source: Expansion, target_center) -> Expansion:
    p = source.order
    out = Expansion.zeros(p, target_center, "local")
    d = out.center - source.center
    if not np.any(d):
        raise DomainError("M2L needs distinct source and target centers")
    op.m2l_into(source.coeffs, *d, p, out.coeffs, _work(p))
    fill_negative(out.coeffs, p)
    return out


def l2l(parent: Expansion, child_center) -> Expansion:
    p = parent.order
    out = Expansion.zeros(p, child_center, "local")
    op.l2l_into(parent.coeffs, *(out.center - parent.center), p, out.coeffs, _work(p))
    fill_negative(out.coeffs, p)
    return out


def m2p(source: Expansion, targets, out: FieldResult | None = None) -> FieldResult:
    """Accumulate the multipole field at target positions."""
    pos = _positions(targets)
    res = FieldResult.zeros(pos.shape[0]) if out is None else out
    d = pos - source.center
    if np.any(np.all(d == 0.0, axis=1)):
        raise DomainError("M2P target coincides with the expansion center")
    work = _work(source.order)
    for i in range(pos.shape[0]):
        phi, fx, fy, fz = op.m2p_at(source.coeffs, d[i, 0], d[i, 1], d[i, 2], source.order, work)
        res.potential[i] += phi
        res.force[i] += (fx, fy, fz)
    return res


def l2p(local: Expansion, targets, out: FieldResult | None = None) -> FieldResult:
    """Accumulate the local-expansion field at target positions."""
    pos = _positions(targets)
    res = FieldResult.zeros(pos.shape[0]) if out is None else out
    d = pos - local.center
    work = _work(local.order)
    for i in range(pos.shape[0]):
        phi, fx, fy, fz = op.l2p_at(local.coeffs, d[i, 0], d[i, 1], d[i, 2], local.order, work)
        res.potential[i] += phi
        res.force[i] += (fx, fy, fz)
    return res


def evaluate_expansion(expansion: Expansion, targets) -> FieldResult:
    """Field of ``expansion`` at ``targets`` (M2P or L2P by kind)."""
    if expansion.kind == "multipole":
        return m2p(expansion, targets)
    return l2p(expansion, targets)


def random_expansion(p: int, rng: np.random.Generator, center=(0.0, 0.0, 0.0),
                     kind: str = "multipole") -> Expansion:
    """Expansion with random coefficients obeying the real-source symmetry."""
    coeffs = rng.standard_normal(n_coefficients(p)) + 1j * rng.standard_normal(n_coefficients(p))
    for n in range(p + 1):
        coeffs[n * n + n] = coeffs[n * n + n].real
    fill_negative(coeffs, p)
    return Expansion(p, center, coeffs, kind)
