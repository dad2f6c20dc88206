"""Adaptive octree over a particle set.

Cells are stored column-wise (one array per attribute). Children of a cell
occupy the contiguous index block ``child_begin[c] : child_begin[c] + n_child[c]``
and always have larger indices than their parent, so a reverse sweep over
cell indices is a valid bottom-up order. Particles are reordered so each cell
owns the contiguous slice ``begin[c] : end[c]``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numba import njit

from .model import InputError, Particles

DEFAULT_MAX_DEPTH = 30


@njit(cache=True)
def _grow(a, size):
    out = np.empty((size,) + a.shape[1:], dtype=a.dtype)
    out[: a.shape[0]] = a
    return out


@njit(cache=True)
def _build_cells(pos, root_center, root_half, n_crit, max_depth):
    n = pos.shape[0]
    order = np.arange(n)
    scratch = np.empty(n, dtype=np.int64)
    octant = np.empty(n, dtype=np.int64)

    cap = 64
    center = np.empty((cap, 3))
    half = np.empty(cap)
    begin = np.empty(cap, dtype=np.int64)
    end = np.empty(cap, dtype=np.int64)
    child_begin = np.empty(cap, dtype=np.int64)
    n_child = np.empty(cap, dtype=np.int64)
    level = np.empty(cap, dtype=np.int64)
    parent = np.empty(cap, dtype=np.int64)

    center[0] = root_center
    half[0] = root_half
    begin[0] = 0
    end[0] = n
    child_begin[0] = 0
    n_child[0] = 0
    level[0] = 0
    parent[0] = -1
    n_cells = 1

    stack = np.empty(64, dtype=np.int64)
    stack[0] = 0
    sp = 1
    while sp > 0:
        sp -= 1
        c = stack[sp]
        b = begin[c]
        e = end[c]
        if e - b <= n_crit or level[c] >= max_depth:
            continue

        counts = np.zeros(8, dtype=np.int64)
        cx = center[c, 0]
        cy = center[c, 1]
        cz = center[c, 2]
        for k in range(b, e):
            i = order[k]
            o = 0
            if pos[i, 0] >= cx:
                o += 1
            if pos[i, 1] >= cy:
                o += 2
            if pos[i, 2] >= cz:
                o += 4
            octant[k] = o
            counts[o] += 1
        offsets = np.empty(8, dtype=np.int64)
        acc = b
        for o in range(8):
            offsets[o] = acc
            acc += counts[o]
        for k in range(b, e):
            o = octant[k]
            scratch[offsets[o]] = order[k]
            offsets[o] += 1
        order[b:e] = scratch[b:e]

        n_new = 0
        for o in range(8):
            if counts[o] > 0:
                n_new += 1
        if n_cells + n_new > center.shape[0]:
            cap = 2 * (n_cells + n_new)
            center = _grow(center, cap)
            half = _grow(half, cap)
            begin = _grow(begin, cap)
            end = _grow(end, cap)
            child_begin = _grow(child_begin, cap)
            n_child = _grow(n_child, cap)
            level = _grow(level, cap)
            parent = _grow(parent, cap)
        if sp + n_new > stack.shape[0]:
            stack = _grow(stack, 2 * (sp + n_new))

        child_begin[c] = n_cells
        n_child[c] = n_new
        h = 0.5 * half[c]
        acc = b
        for o in range(8):
            if counts[o] == 0:
                continue
            k = n_cells
            center[k, 0] = cx + (h if o & 1 else -h)
            center[k, 1] = cy + (h if o & 2 else -h)
            center[k, 2] = cz + (h if o & 4 else -h)
            half[k] = h
            begin[k] = acc
            end[k] = acc + counts[o]
            acc += counts[o]
            child_begin[k] = 0
            n_child[k] = 0
            level[k] = level[c] + 1
            parent[k] = c
            n_cells += 1
        # first child on top of the stack: depth-first processing order
        for k in range(n_cells - 1, n_cells - 1 - n_new, -1):
            stack[sp] = k
            sp += 1

    radius = np.zeros(n_cells)
    for c in range(n_cells):
        r2max = 0.0
        for k in range(begin[c], end[c]):
            i = order[k]
            dx = pos[i, 0] - center[c, 0]
            dy = pos[i, 1] - center[c, 1]
            dz = pos[i, 2] - center[c, 2]
            r2 = dx * dx + dy * dy + dz * dz
            if r2 > r2max:
                r2max = r2
        radius[c] = np.sqrt(r2max)

    return (
        order,
        center[:n_cells].copy(),
        half[:n_cells].copy(),
        radius,
        begin[:n_cells].copy(),
        end[:n_cells].copy(),
        child_begin[:n_cells].copy(),
        n_child[:n_cells].copy(),
        level[:n_cells].copy(),
        parent[:n_cells].copy(),
    )


@dataclass(frozen=True)
class Tree:
    """Immutable adaptive octree.

    ``order[k]`` is the original index of reordered particle ``k`` and
    ``permutation`` is its inverse (original -> reordered).
    """

    particles: Particles
    order: np.ndarray
    permutation: np.ndarray
    center: np.ndarray
    half_size: np.ndarray
    radius: np.ndarray
    begin: np.ndarray
    end: np.ndarray
    child_begin: np.ndarray
    n_child: np.ndarray
    level: np.ndarray
    parent: np.ndarray
    n_crit: int
    max_depth: int

    @property
    def n_particles(self) -> int:
        return len(self.particles)

    @property
    def n_cells(self) -> int:
        return self.center.shape[0]

    @property
    def root(self) -> Cell:
        return Cell(self, 0)

    def cell(self, index: int) -> Cell:
        return Cell(self, index)

    def count(self) -> np.ndarray:
        return self.end - self.begin

    def is_leaf(self) -> np.ndarray:
        return self.n_child == 0

    def leaves(self) -> np.ndarray:
        return np.flatnonzero(self.n_child == 0)

    def children(self, index: int) -> range:
        b = int(self.child_begin[index])
        return range(b, b + int(self.n_child[index]))


@dataclass(frozen=True)
class Cell:
    """Read-only view of one cell of a :class:`Tree`."""

    tree: Tree
    index: int

    @property
    def center(self) -> np.ndarray:
        return self.tree.center[self.index]

    @property
    def radius(self) -> float:
        return float(self.tree.radius[self.index])

    @property
    def half_size(self) -> float:
        return float(self.tree.half_size[self.index])

    @property
    def level(self) -> int:
        return int(self.tree.level[self.index])

    @property
    def particle_range(self) -> range:
        return range(int(self.tree.begin[self.index]), int(self.tree.end[self.index]))

    @property
    def count(self) -> int:
        return int(self.tree.end[self.index] - self.tree.begin[self.index])

    @property
    def is_leaf(self) -> bool:
        return bool(self.tree.n_child[self.index] == 0)

    @property
    def children(self) -> list[Cell]:
        return [Cell(self.tree, k) for k in self.tree.children(self.index)]


def bounding_cube(positions: np.ndarray) -> tuple[np.ndarray, float]:
    """Tight bounding box of ``positions`` expanded to a cube about its center."""
    lo = positions.min(axis=0)
    hi = positions.max(axis=0)
    return 0.5 * (lo + hi), 0.5 * float(np.max(hi - lo))


def build_tree(
    particles: Particles, n_crit: int, max_depth: int = DEFAULT_MAX_DEPTH
) -> Tree:
    """Build the adaptive octree, subdividing cells holding more than ``n_crit``.

    Subdivision is geometric (octants of the parent cube); empty octants are
    not created. A cell at ``max_depth`` is never split, so a leaf may hold
    more than ``n_crit`` particles when many of them (nearly) coincide.
    """
    if n_crit < 1:
        raise InputError(f"n_crit must be >= 1, got {n_crit}")
    if max_depth < 0:
        raise InputError(f"max_depth must be >= 0, got {max_depth}")
    pos = particles.positions
    if not np.all(np.isfinite(pos)):
        raise InputError("particle positions must be finite")
    n = len(particles)
    if n == 0:
        root_center, root_half = np.zeros(3), 0.0
    else:
        root_center, root_half = bounding_cube(pos)

    order, center, half, radius, begin, end, child_begin, n_child, level, parent = (
        _build_cells(pos, root_center, root_half, n_crit, max_depth)
    )
    permutation = np.empty(n, dtype=np.int64)
    permutation[order] = np.arange(n)
    return Tree(
        particles=particles.take(order),
        order=order,
        permutation=permutation,
        center=center,
        half_size=half,
        radius=radius,
        begin=begin,
        end=end,
        child_begin=child_begin,
        n_child=n_child,
        level=level,
        parent=parent,
        n_crit=n_crit,
        max_depth=max_depth,
    )


class TreeStatistics(NamedTuple):
    depth: int
    n_cells: int
    n_leaves: int
    min_leaf: int
    max_leaf: int
    mean_leaf: float


def cell_statistics(tree: Tree) -> TreeStatistics:
    """Depth, cell counts and leaf occupancy; an empty tree reports zeros."""
    if tree.n_particles == 0:
        return TreeStatistics(0, 0, 0, 0, 0, 0.0)
    occupancy = tree.count()[tree.leaves()]
    return TreeStatistics(
        depth=int(tree.level.max()),
        n_cells=tree.n_cells,
        n_leaves=int(occupancy.size),
        min_leaf=int(occupancy.min()),
        max_leaf=int(occupancy.max()),
        mean_leaf=float(occupancy.mean()),
    )
