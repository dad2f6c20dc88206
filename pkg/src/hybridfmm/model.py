"""Shared data model: particles, field results, expansions, configuration."""

from __future__ import annotations

import enum
from dataclasses import dataclass, fields
from typing import Iterator

import numpy as np


class HybridFmmError(Exception):
    """Base class for all library errors."""


class InputError(HybridFmmError, ValueError):
    """Particle data is malformed (wrong shape, NaN/Inf, ...)."""


class ConfigError(HybridFmmError, ValueError):
    """An evaluation was requested with inconsistent parameters."""


class SingularityError(HybridFmmError, ZeroDivisionError):
    """Two distinct particles coincide; the unsoftened kernel is infinite."""


class DomainError(HybridFmmError, ValueError):
    """An expansion operator was asked to act at zero separation."""


class Method(str, enum.Enum):
    DIRECT = "direct"
    TREECODE = "treecode"
    FMM = "fmm"
    HYBRID = "hybrid"


class Distribution(str, enum.Enum):
    CUBE = "cube"
    SHELL = "shell"


class InteractionKind(enum.IntEnum):
    """Kind of work item emitted by the dual traversal.

    The integer values are used as codes inside the compiled traversal.
    """

    PARTICLE_PARTICLE = 0
    CELL_PARTICLE = 1
    CELL_CELL = 2


@dataclass(frozen=True)
class Particles:
    """Positions ``(N, 3)`` and charges ``(N,)``, validated on construction."""

    positions: np.ndarray
    charges: np.ndarray

    def __post_init__(self) -> None:
        pos = np.ascontiguousarray(self.positions, dtype=np.float64)
        q = np.ascontiguousarray(self.charges, dtype=np.float64)
        if pos.ndim == 1 and pos.size == 0:
            pos = pos.reshape(0, 3)
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise InputError(f"positions must have shape (N, 3), got {pos.shape}")
        if q.shape != (pos.shape[0],):
            raise InputError(
                f"charges must have shape ({pos.shape[0]},), got {q.shape}"
            )
        if not np.all(np.isfinite(pos)):
            raise InputError("particle positions must be finite")
        if not np.all(np.isfinite(q)):
            raise InputError("particle charges must be finite")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "charges", q)

    def __len__(self) -> int:
        return self.positions.shape[0]

    def take(self, index) -> Particles:
        return Particles(self.positions[index], self.charges[index])

    def translated(self, shift) -> Particles:
        return Particles(self.positions + np.asarray(shift, dtype=np.float64), self.charges)


@dataclass
class FieldResult:
    """Potential and force (field per unit target charge) at each target.

    ``force`` follows ``f = -grad(potential) = sum q_j (r_i - r_j) / |r_i - r_j|^3``.
    """

    potential: np.ndarray
    force: np.ndarray

    @classmethod
    def zeros(cls, n: int) -> FieldResult:
        return cls(np.zeros(n), np.zeros((n, 3)))

    def __len__(self) -> int:
        return self.potential.shape[0]

    def take(self, index) -> FieldResult:
        return FieldResult(self.potential[index], self.force[index])

    def __add__(self, other: FieldResult) -> FieldResult:
        return FieldResult(self.potential + other.potential, self.force + other.force)


def n_coefficients(p: int) -> int:
    return (p + 1) * (p + 1)


def coefficient_index(n: int, m: int) -> int:
    """Flat position of the ``(n, m)`` coefficient, ``-n <= m <= n``."""
    if not -n <= m <= n:
        raise IndexError(f"|m| must not exceed n, got n={n}, m={m}")
    return n * n + n + m


@dataclass
class Expansion:
    """Multipole or local expansion of order ``p`` about ``center``.

    ``coeffs`` holds ``(p + 1)**2`` complex values at ``n*n + n + m``. For
    real charges the coefficients satisfy ``c[n, -m] = (-1)**m conj(c[n, m])``.
    """

    order: int
    center: np.ndarray
    coeffs: np.ndarray
    kind: str = "multipole"

    def __post_init__(self) -> None:
        if self.order < 1:
            raise ConfigError(f"expansion order must be >= 1, got {self.order}")
        if self.kind not in ("multipole", "local"):
            raise ValueError(f"unknown expansion kind {self.kind!r}")
        self.center = np.asarray(self.center, dtype=np.float64).reshape(3)
        self.coeffs = np.ascontiguousarray(self.coeffs, dtype=np.complex128)
        if self.coeffs.shape != (n_coefficients(self.order),):
            raise ValueError(
                f"order {self.order} needs {n_coefficients(self.order)} coefficients, "
                f"got {self.coeffs.shape}"
            )

    @classmethod
    def zeros(cls, order: int, center, kind: str = "multipole") -> Expansion:
        return cls(order, center, np.zeros(n_coefficients(order), np.complex128), kind)

    def __getitem__(self, nm: tuple[int, int]) -> complex:
        return complex(self.coeffs[coefficient_index(*nm)])


@dataclass(frozen=True)
class Config:
    """Evaluation parameters.

    ``theta`` is the acceptance threshold for ``(r_t + r_s) / R``.
    """

    p: int = 8
    theta: float = 0.5
    n_crit: int = 200
    method: Method = Method.FMM
    seed: int = 42
    distribution: Distribution = Distribution.CUBE
    max_depth: int = 30

    def __post_init__(self) -> None:
        object.__setattr__(self, "method", Method(self.method))
        object.__setattr__(self, "distribution", Distribution(self.distribution))
        if not 1 <= self.p <= 30:
            raise ConfigError(f"p must be in [1, 30], got {self.p}")
        if not 0.0 < self.theta < 1.0:
            raise ConfigError(f"theta must be in (0, 1), got {self.theta}")
        if self.n_crit < 1:
            raise ConfigError(f"n_crit must be >= 1, got {self.n_crit}")
        if self.max_depth < 0:
            raise ConfigError(f"max_depth must be >= 0, got {self.max_depth}")


@dataclass(frozen=True)
class InteractionTask:
    """One work item: ``target`` and ``source`` are cell indices."""

    target: int
    source: int
    kind: InteractionKind


@dataclass
class TaskList:
    """Interaction tasks in emission order, stored column-wise."""

    target: np.ndarray
    source: np.ndarray
    kind: np.ndarray

    def __len__(self) -> int:
        return self.target.shape[0]

    def __iter__(self) -> Iterator[InteractionTask]:
        for t, s, k in zip(self.target.tolist(), self.source.tolist(), self.kind.tolist()):
            yield InteractionTask(t, s, InteractionKind(k))

    def of_kind(self, kind: InteractionKind) -> tuple[np.ndarray, np.ndarray]:
        sel = self.kind == int(kind)
        return self.target[sel], self.source[sel]

    def multiset(self) -> dict[tuple[int, int, int], int]:
        """Task multiset keyed by ``(target, source, kind)``."""
        keys = np.stack([self.target, self.source, self.kind.astype(np.int64)], axis=1)
        uniq, counts = np.unique(keys, axis=0, return_counts=True)
        return {tuple(int(v) for v in row): int(c) for row, c in zip(uniq, counts)}


@dataclass
class KernelCounters:
    """Work performed during one evaluation.

    ``n_m2p_calls`` counts cell-particle tasks and ``n_m2p_targets`` the
    target evaluations they performed; ``n_p2p_pairs`` counts particle pairs.
    """

    n_p2p_pairs: int = 0
    n_m2p_calls: int = 0
    n_m2l_calls: int = 0
    n_p2m_calls: int = 0
    n_m2m_calls: int = 0
    n_l2l_calls: int = 0
    n_l2p_calls: int = 0
    n_p2p_tasks: int = 0
    n_m2p_targets: int = 0
    n_p2m_particles: int = 0
    n_l2p_particles: int = 0

    def __add__(self, other: KernelCounters) -> KernelCounters:
        return KernelCounters(
            **{f.name: getattr(self, f.name) + getattr(other, f.name) for f in fields(self)}
        )

    def work_units(self, p: int) -> float:
        """Operation-count proxy: one unit per particle pair.

        Per-particle expansion work (P2M, M2P, L2P) costs ``(p+1)^2`` units and
        each translation (M2M, M2L, L2L) ``(p+1)^4``.
        """
        nc = float((p + 1) ** 2)
        return (
            float(self.n_p2p_pairs)
            + nc * (self.n_m2p_targets + self.n_p2m_particles + self.n_l2p_particles)
            + nc * nc * (self.n_m2l_calls + self.n_m2m_calls + self.n_l2l_calls)
        )


@dataclass
class TimingBreakdown:
    """Wall-clock seconds per pipeline phase.

    ``traverse`` covers task generation (``generate``) plus execution of every
    P2P, M2P and M2L task; ``p2p``/``m2p``/``m2l`` split that execution by kind.
    """

    build: float = 0.0
    tune: float = 0.0
    upward: float = 0.0
    traverse: float = 0.0
    downward: float = 0.0
    total: float = 0.0
    p2p: float = 0.0
    m2p: float = 0.0
    m2l: float = 0.0
    generate: float = 0.0
