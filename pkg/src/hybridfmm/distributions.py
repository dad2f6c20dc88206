"""Seeded particle generators.

Both generators draw from ``numpy.random.Generator(PCG64(seed))``. ``cube``
makes a single ``uniform(-1, 1, size=(n, 3))`` call and ``shell`` a single
``standard_normal(size=(n, 3))`` call, row-major, so another implementation
of PCG64 with the same stream discipline reproduces identical inputs.
Charges are ``1/n`` so that total charge is one.
"""

from __future__ import annotations

import numpy as np

from .model import Distribution, InputError, Particles


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def _charges(n: int) -> np.ndarray:
    return np.full(n, 1.0 / n) if n else np.zeros(0)


def cube(n: int, seed: int = 42) -> Particles:
    """``n`` particles uniform in ``[-1, 1]^3``."""
    if n < 0:
        raise InputError(f"n must be >= 0, got {n}")
    pos = _rng(seed).uniform(-1.0, 1.0, size=(n, 3))
    return Particles(pos, _charges(n))


def shell(n: int, seed: int = 42) -> Particles:
    """``n`` particles uniform on the unit sphere (normalized Gaussian triples)."""
    if n < 0:
        raise InputError(f"n must be >= 0, got {n}")
    g = _rng(seed).standard_normal(size=(n, 3))
    pos = g / np.linalg.norm(g, axis=1, keepdims=True)
    return Particles(pos, _charges(n))


def generate(distribution: Distribution | str, n: int, seed: int = 42) -> Particles:
    dist = Distribution(distribution)
    return cube(n, seed) if dist is Distribution.CUBE else shell(n, seed)
