"""Kernel sets consumed by the evaluation pipeline.

A kernel set takes an emitted task list plus the target and source trees and
returns per-target results in target-tree order. :class:`LaplaceKernels` runs
the real operators; :class:`CountingKernels` replaces every operator by an
integer surrogate so that coverage of the pair set can be checked exactly.
"""

from __future__ import annotations

import logging
import time

import numba
import numpy as np

from ..model import FieldResult, InteractionKind, SingularityError, TaskList, TimingBreakdown
from ..tree import Tree
from . import executors as ex

log = logging.getLogger(__name__)


def _columns(tree: Tree):
    pos = tree.particles.positions
    return (np.ascontiguousarray(pos[:, 0]), np.ascontiguousarray(pos[:, 1]),
            np.ascontiguousarray(pos[:, 2]))


def _group_ptr(keys: np.ndarray) -> np.ndarray:
    """Boundaries of runs of equal values in a sorted key array."""
    if keys.size == 0:
        return np.zeros(1, dtype=np.int64)
    cut = np.flatnonzero(np.diff(keys)) + 1
    return np.concatenate([[0], cut, [keys.size]]).astype(np.int64)


def target_waves(task_t: np.ndarray, task_s: np.ndarray, level: np.ndarray | None):
    """Split tasks into waves of target groups with disjoint accumulators.

    Particle-targeted tasks are waved by target level (cells of one level own
    disjoint particle ranges); pass ``level=None`` for cell-targeted tasks.
    Order inside a group is emission order.
    """
    if level is None:
        perm = np.argsort(task_t, kind="stable")
        t, s = task_t[perm], task_s[perm]
        yield t, s, _group_ptr(t)
        return
    lv = level[task_t]
    perm = np.lexsort((task_t, lv))
    t, s, lv = task_t[perm], task_s[perm], lv[perm]
    bounds = _group_ptr(lv)
    for a, b in zip(bounds[:-1], bounds[1:]):
        yield t[a:b], s[a:b], _group_ptr(t[a:b])


def _set_threads(threads: int) -> int:
    available = numba.config.NUMBA_NUM_THREADS
    if threads > available:
        log.warning("requested %d threads, only %d available", threads, available)
    k = max(1, min(threads, available))
    numba.set_num_threads(k)
    return k


class LaplaceKernels:
    """Spherical-harmonic Laplace kernels of order ``p``."""

    def __init__(self, p: int, threads: int = 1):
        self.p = p
        self.threads = threads

    def evaluate(self, tasks: TaskList, target: Tree, source: Tree, same: bool,
                 timing: TimingBreakdown) -> tuple[FieldResult, tuple[int, int, int]]:
        """Run upward pass, all tasks and downward pass.

        Returns the field in target-tree order and ``(n_l2l, n_l2p, n_l2p_particles)``.
        """
        p = self.p
        nc = (p + 1) ** 2
        parallel = self.threads > 1 and _set_threads(self.threads) > 1
        tx, ty, tz = _columns(target)
        sx, sy, sz = (tx, ty, tz) if same else _columns(source)
        sq = source.particles.charges
        n_t = target.n_particles
        pot = np.zeros(n_t)
        fx = np.zeros(n_t)
        fy = np.zeros(n_t)
        fz = np.zeros(n_t)

        p2p_t, p2p_s = tasks.of_kind(InteractionKind.PARTICLE_PARTICLE)
        m2p_t, m2p_s = tasks.of_kind(InteractionKind.CELL_PARTICLE)
        m2l_t, m2l_s = tasks.of_kind(InteractionKind.CELL_CELL)
        need_mult = m2p_t.size > 0 or m2l_t.size > 0

        t0 = time.perf_counter()
        mult = np.zeros((source.n_cells, nc), dtype=np.complex128)
        if need_mult:
            ex.upward_pass(sx, sy, sz, sq, source.center, source.begin, source.end,
                           source.child_begin, source.n_child, p, mult)
        t1 = time.perf_counter()
        timing.upward += t1 - t0

        if parallel:
            for wt, ws, ptr in target_waves(p2p_t, p2p_s, target.level):
                ex.exec_p2p_groups(wt, ws, ptr, same, target.begin, target.end,
                                   source.begin, source.end, tx, ty, tz, sx, sy, sz, sq,
                                   pot, fx, fy, fz)
        else:
            ex.exec_p2p(p2p_t, p2p_s, same, target.begin, target.end, source.begin,
                        source.end, tx, ty, tz, sx, sy, sz, sq, pot, fx, fy, fz)
        if not np.all(np.isfinite(pot)):
            raise SingularityError("coincident distinct particles in a direct sum")
        t2 = time.perf_counter()
        timing.p2p += t2 - t1

        if parallel:
            for wt, ws, ptr in target_waves(m2p_t, m2p_s, target.level):
                ex.exec_m2p_groups(wt, ws, ptr, p, target.begin, target.end, tx, ty, tz,
                                   mult, source.center, pot, fx, fy, fz)
        else:
            ex.exec_m2p(m2p_t, m2p_s, p, target.begin, target.end, tx, ty, tz, mult,
                        source.center, pot, fx, fy, fz)
        t3 = time.perf_counter()
        timing.m2p += t3 - t2

        local = np.zeros((target.n_cells, nc), dtype=np.complex128)
        has_local = np.zeros(target.n_cells, dtype=np.bool_)
        if parallel:
            for wt, ws, ptr in target_waves(m2l_t, m2l_s, None):
                ex.exec_m2l_groups(wt, ws, ptr, p, mult, source.center, target.center,
                                   local, has_local)
        else:
            ex.exec_m2l(m2l_t, m2l_s, p, mult, source.center, target.center, local, has_local)
        t4 = time.perf_counter()
        timing.m2l += t4 - t3
        timing.traverse += t4 - t1

        downward = ex.downward_pass(target.center, target.begin, target.end,
                                    target.child_begin, target.n_child, p, local, has_local,
                                    tx, ty, tz, pot, fx, fy, fz)
        timing.downward += time.perf_counter() - t4
        return FieldResult(pot, np.stack([fx, fy, fz], axis=1)), downward


class CountingKernels:
    """Integer surrogates: every target ends with the number of sources it saw."""

    def evaluate(self, tasks: TaskList, target: Tree, source: Tree, same: bool,
                 timing: TimingBreakdown) -> tuple[np.ndarray, tuple[int, int, int]]:
        """Per-target source counts in target-tree order, plus downward counters."""
        t0 = time.perf_counter()
        counts = np.zeros(target.n_particles, dtype=np.int64)
        cell_counts = np.zeros(target.n_cells, dtype=np.int64)
        ex.count_particle_tasks(tasks.target, tasks.source, tasks.kind, same, target.begin,
                                target.end, source.begin, source.end, counts, cell_counts)
        t1 = time.perf_counter()
        downward = ex.count_downward(target.begin, target.end, target.child_begin,
                                     target.n_child, cell_counts, counts)
        timing.traverse += t1 - t0
        timing.downward += time.perf_counter() - t1
        return counts, downward


def counting_kernels() -> CountingKernels:
    return CountingKernels()
