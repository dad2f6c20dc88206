"""Stack-based dual tree traversal.

A LIFO stack holds (target cell, source cell) pairs, seeded with the two
roots. Each popped pair is either two leaves (direct sum) or is split: the
larger-radius cell is subdivided (the non-leaf one if the other is a leaf,
the source on ties) and its children are paired with the other cell. New
pairs accepted by the MAC are handed to the selector, which picks the
interaction kind; rejected pairs go back on the stack. A self pair
(identical cell of identical trees) is never MAC-tested: it is split, or
becomes a self-excluding direct sum once both sides are a leaf.

:func:`dual_tree_traversal` is the readable reference taking any Python
selector and sink. :func:`traverse` is the compiled equivalent used for
evaluation; it supports the four built-in selection policies.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np
from numba import njit

from .autotune import TIE_RTOL, KernelTimings, select_interaction
from .model import ConfigError, Config, DomainError, InteractionKind, InteractionTask, Method, TaskList
from .tree import Cell, Tree

Selector = Callable[[Cell, Cell], InteractionKind]
Sink = Callable[[InteractionTask], None]

# policy codes understood by the compiled traversal
POLICY_TREECODE = 1
POLICY_FMM = 2
POLICY_HYBRID = 3

_PP = 0
_CP = 1
_CC = 2


def mac_value(target: Cell, source: Cell) -> float:
    """``(r_t + r_s) / R`` with ``R`` the distance between cell centers."""
    if target.tree is source.tree and target.index == source.index:
        raise DomainError("the self pair is never tested against the MAC")
    dist = float(np.linalg.norm(target.center - source.center))
    if dist == 0.0:
        raise DomainError("MAC undefined for distinct cells sharing a center")
    return (target.radius + source.radius) / dist


def _accepted(target: Cell, source: Cell, theta: float, same: bool, fault: bool) -> bool:
    if same and target.index == source.index:
        ok = False
    else:
        try:
            ok = mac_value(target, source) < theta
        except DomainError:
            ok = False
    return ok != fault


def method_selector(method: Method, timings: KernelTimings | None = None) -> Selector:
    """The selector each method uses at MAC-accepted pairs."""
    method = Method(method)
    if method is Method.TREECODE:
        return lambda t, s: InteractionKind.CELL_PARTICLE
    if method is Method.FMM:
        return lambda t, s: InteractionKind.CELL_CELL
    if method is Method.HYBRID:
        if timings is None:
            raise ConfigError("the hybrid method needs kernel timings")
        return lambda t, s: select_interaction(t, s, timings)
    raise ConfigError(f"method {method.value!r} does not traverse a tree")


def dual_tree_traversal(target_root: Cell, source_root: Cell, config: Config,
                        selector: Selector, sink: Sink, *,
                        on_push: Callable[[Cell, Cell], None] | None = None,
                        fault: bool = False) -> None:
    """Reference traversal emitting every task through ``sink``.

    ``on_push`` observes each pair pushed after a split. ``fault`` inverts the
    acceptance test and exists only to check that the verification notices.
    """
    same = target_root.tree is source_root.tree
    theta = config.theta
    stack = [(target_root, source_root)]
    while stack:
        t, s = stack.pop()
        if t.is_leaf and s.is_leaf:
            sink(InteractionTask(t.index, s.index, InteractionKind.PARTICLE_PARTICLE))
            continue
        if t.is_leaf:
            split_source = True
        elif s.is_leaf:
            split_source = False
        else:
            split_source = s.radius >= t.radius
        pairs = [(t, c) for c in s.children] if split_source else [(c, s) for c in t.children]
        for nt, ns in pairs:
            if _accepted(nt, ns, theta, same, fault):
                sink(InteractionTask(nt.index, ns.index, selector(nt, ns)))
            else:
                if on_push is not None:
                    on_push(nt, ns)
                stack.append((nt, ns))


@njit(cache=True)
def _grow(a, size):
    out = np.empty(size, dtype=a.dtype)
    out[: a.shape[0]] = a
    return out


@njit(cache=True)
def _traverse(t_center, t_radius, t_child_begin, t_n_child, t_count,
              s_center, s_radius, s_child_begin, s_n_child, s_count,
              same, policy, theta, t_pp, t_cp, t_cc, fault):
    tie = 1.0 + TIE_RTOL
    cap = 1024
    out_t = np.empty(cap, dtype=np.int64)
    out_s = np.empty(cap, dtype=np.int64)
    out_k = np.empty(cap, dtype=np.int8)
    n_out = 0
    st_t = np.empty(256, dtype=np.int64)
    st_s = np.empty(256, dtype=np.int64)
    st_t[0] = 0
    st_s[0] = 0
    sp = 1
    while sp > 0:
        sp -= 1
        a = st_t[sp]
        b = st_s[sp]
        a_leaf = t_n_child[a] == 0
        b_leaf = s_n_child[b] == 0
        if a_leaf and b_leaf:
            if n_out == out_t.shape[0]:
                cap = 2 * cap
                out_t = _grow(out_t, cap)
                out_s = _grow(out_s, cap)
                out_k = _grow(out_k, cap)
            out_t[n_out] = a
            out_s[n_out] = b
            out_k[n_out] = _PP
            n_out += 1
            continue
        if a_leaf:
            split_source = True
        elif b_leaf:
            split_source = False
        else:
            split_source = s_radius[b] >= t_radius[a]
        if split_source:
            c0 = s_child_begin[b]
            nc = s_n_child[b]
        else:
            c0 = t_child_begin[a]
            nc = t_n_child[a]
        if sp + nc > st_t.shape[0]:
            st_t = _grow(st_t, 2 * (sp + nc))
            st_s = _grow(st_s, 2 * (sp + nc))
        if n_out + nc > out_t.shape[0]:
            cap = 2 * (n_out + nc)
            out_t = _grow(out_t, cap)
            out_s = _grow(out_s, cap)
            out_k = _grow(out_k, cap)
        for c in range(c0, c0 + nc):
            if split_source:
                ta = a
                sb = c
            else:
                ta = c
                sb = b
            if same and ta == sb:
                ok = False
            else:
                dx = t_center[ta, 0] - s_center[sb, 0]
                dy = t_center[ta, 1] - s_center[sb, 1]
                dz = t_center[ta, 2] - s_center[sb, 2]
                dist = math.sqrt(dx * dx + dy * dy + dz * dz)
                if dist == 0.0:
                    ok = False
                else:
                    ok = (t_radius[ta] + s_radius[sb]) / dist < theta
            if ok != fault:
                if policy == POLICY_TREECODE:
                    kind = _CP
                elif policy == POLICY_FMM:
                    kind = _CC
                else:
                    nt = t_count[ta]
                    pp = t_pp * nt * s_count[sb]
                    cp = t_cp * nt
                    if t_cc <= cp * tie and t_cc <= pp * tie:
                        kind = _CC
                    elif cp <= pp * tie:
                        kind = _CP
                    else:
                        kind = _PP
                out_t[n_out] = ta
                out_s[n_out] = sb
                out_k[n_out] = kind
                n_out += 1
            else:
                st_t[sp] = ta
                st_s[sp] = sb
                sp += 1
    return out_t[:n_out].copy(), out_s[:n_out].copy(), out_k[:n_out].copy()


def traverse(target: Tree, source: Tree, config: Config,
             timings: KernelTimings | None = None, *, fault: bool = False) -> TaskList:
    """Compiled dual traversal with the selector implied by ``config.method``."""
    method = Method(config.method)
    if method is Method.TREECODE:
        policy, costs = POLICY_TREECODE, (0.0, 0.0, 0.0)
    elif method is Method.FMM:
        policy, costs = POLICY_FMM, (0.0, 0.0, 0.0)
    elif method is Method.HYBRID:
        if timings is None:
            raise ConfigError("the hybrid method needs kernel timings")
        if timings.p != config.p:
            raise ConfigError(f"timings measured at p={timings.p}, evaluation uses p={config.p}")
        policy, costs = POLICY_HYBRID, tuple(timings.as_array())
    else:
        raise ConfigError(f"method {method.value!r} does not traverse a tree")
    t, s, k = _traverse(
        target.center, target.radius, target.child_begin, target.n_child, target.count(),
        source.center, source.radius, source.child_begin, source.n_child, source.count(),
        target is source, policy, float(config.theta), costs[0], costs[1], costs[2], fault,
    )
    return TaskList(t, s, k)


def collect_tasks(target: Tree, source: Tree, config: Config, selector: Selector,
                  **kwargs) -> TaskList:
    """Run :func:`dual_tree_traversal` and gather its output as a :class:`TaskList`."""
    out: list[InteractionTask] = []
    dual_tree_traversal(target.root, source.root, config, selector, out.append, **kwargs)
    return TaskList(
        np.array([x.target for x in out], dtype=np.int64),
        np.array([x.source for x in out], dtype=np.int64),
        np.array([int(x.kind) for x in out], dtype=np.int8),
    )
