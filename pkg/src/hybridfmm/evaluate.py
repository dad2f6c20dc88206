"""Full evaluation pipeline: tree, upward pass, traversal, downward pass.

Treecode, FMM and hybrid share one adaptive tree, one traversal and one MAC;
they differ only in the kind chosen at accepted pairs. Results always come
back in the caller's particle order.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .autotune import KernelTimings
from .kernels import executors as ex
from .kernels.backends import CountingKernels, LaplaceKernels
from .model import (
    Config,
    ConfigError,
    FieldResult,
    InteractionKind,
    KernelCounters,
    Method,
    Particles,
    SingularityError,
    TaskList,
    TimingBreakdown,
)
from .traversal import traverse
from .tree import Tree, build_tree


@dataclass
class Evaluation:
    """Output of :func:`evaluate`.

    ``field`` is a :class:`FieldResult` for the Laplace kernels or an integer
    array of per-target source counts for the counting kernels.
    """

    field: FieldResult | np.ndarray
    counters: KernelCounters
    timing: TimingBreakdown
    tree: Tree | None = None
    tasks: TaskList | None = None


def task_counters(tasks: TaskList, target: Tree, source: Tree, same: bool) -> KernelCounters:
    """Counters implied by a task list (before the downward pass)."""
    nt = target.count()[tasks.target]
    ns = source.count()[tasks.source]
    kind = tasks.kind
    pp = kind == InteractionKind.PARTICLE_PARTICLE
    cp = kind == InteractionKind.CELL_PARTICLE
    cc = kind == InteractionKind.CELL_CELL
    pairs = nt[pp] * ns[pp]
    if same:
        pairs = pairs - np.where(tasks.target[pp] == tasks.source[pp], nt[pp], 0)
    c = KernelCounters(
        n_p2p_pairs=int(pairs.sum()),
        n_m2p_calls=int(cp.sum()),
        n_m2l_calls=int(cc.sum()),
        n_p2p_tasks=int(pp.sum()),
        n_m2p_targets=int(nt[cp].sum()),
    )
    if cp.any() or cc.any():
        leaves = source.n_child == 0
        c.n_p2m_calls = int(leaves.sum())
        c.n_p2m_particles = source.n_particles
        c.n_m2m_calls = source.n_cells - 1
    return c


def _direct(particles: Particles, kernels, timing: TimingBreakdown):
    n = len(particles)
    counters = KernelCounters(n_p2p_pairs=n * (n - 1), n_p2p_tasks=1 if n else 0)
    t0 = time.perf_counter()
    if isinstance(kernels, CountingKernels):
        field = np.full(n, n - 1, dtype=np.int64)
    else:
        pos = particles.positions
        x, y, z = (np.ascontiguousarray(pos[:, i]) for i in range(3))
        pot = np.zeros(n)
        fx = np.zeros(n)
        fy = np.zeros(n)
        fz = np.zeros(n)
        ex.p2p_block(0, n, 0, n, True, x, y, z, x, y, z, particles.charges, pot, fx, fy, fz)
        if not np.all(np.isfinite(pot)):
            raise SingularityError("coincident distinct particles in a direct sum")
        field = FieldResult(pot, np.stack([fx, fy, fz], axis=1))
    timing.p2p = timing.traverse = time.perf_counter() - t0
    return field, counters


def evaluate(particles: Particles, config: Config, timings: KernelTimings | None = None,
             *, kernels=None, threads: int = 1, fault: bool = False,
             keep_tasks: bool = False) -> Evaluation:
    """Potential and force at every particle due to all others.

    ``timings`` is required for the hybrid method. ``kernels`` defaults to
    :class:`LaplaceKernels` of order ``config.p``; pass
    :func:`~hybridfmm.kernels.counting_kernels` to check coverage instead.
    """
    method = Method(config.method)
    if method is Method.HYBRID and timings is None:
        raise ConfigError("the hybrid method needs kernel timings")
    if kernels is None:
        kernels = LaplaceKernels(config.p, threads=threads)
    timing = TimingBreakdown()
    start = time.perf_counter()
    n = len(particles)

    if method is Method.DIRECT or n == 0:
        field, counters = _direct(particles, kernels, timing)
        timing.total = time.perf_counter() - start
        return Evaluation(field, counters, timing)

    t0 = time.perf_counter()
    tree = build_tree(particles, config.n_crit, config.max_depth)
    t1 = time.perf_counter()
    timing.build = t1 - t0
    tasks = traverse(tree, tree, config, timings, fault=fault)
    timing.generate = time.perf_counter() - t1
    timing.traverse += timing.generate

    counters = task_counters(tasks, tree, tree, same=True)
    res, (n_l2l, n_l2p, n_l2p_particles) = kernels.evaluate(tasks, tree, tree, True, timing)
    counters.n_l2l_calls = n_l2l
    counters.n_l2p_calls = n_l2p
    counters.n_l2p_particles = n_l2p_particles
    if isinstance(kernels, CountingKernels):
        field = np.empty_like(res)
        field[tree.order] = res
    else:
        field = FieldResult.zeros(n)
        field.potential[tree.order] = res.potential
        field.force[tree.order] = res.force
    timing.total = time.perf_counter() - start
    return Evaluation(field, counters, timing, tree, tasks if keep_tasks else None)
