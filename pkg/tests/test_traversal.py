import hashlib

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hybridfmm import (
    Config, ConfigError, DomainError, InteractionKind, KernelTimings, Particles,
    build_tree, cube, evaluate, mac_value, shell, traverse,
)
from hybridfmm.kernels import counting_kernels
from hybridfmm.traversal import collect_tasks, method_selector

EIGHT = Particles(np.array([[a, b, c] for a in (-.5, .5) for b in (-.5, .5) for c in (-.5, .5)]),
                  np.ones(8))

# FMM task list for cube(10_000, 42), p=8, theta=0.5, n_crit=200, recorded
# after the counting kernels confirmed exact coverage
FMM_1E4_TASKS = 4096
FMM_1E4_P2P = 2866
FMM_1E4_M2L = 1230
FMM_1E4_SHA256 = "3accbd85e9af01aaad82070fb0293a05f3f95fa5b2f0246db1cdbd5f3794b1f2"


def point_tree(points):
    return build_tree(Particles(np.asarray(points, float), np.ones(len(points))), 1)


class FakeCell:
    def __init__(self, center, radius, tree, index):
        self.center, self.radius, self.tree, self.index = np.asarray(center, float), radius, tree, index


@pytest.mark.parametrize("rt, rs, dist, want", [(0.2, 0.1, 1.0, 0.3), (0.5, 0.5, 1.0, 1.0),
                                                (0.0, 0.0, 2.0, 0.0)])
def test_mac_value(rt, rs, dist, want):
    a = FakeCell((0, 0, 0), rt, "t", 0)
    b = FakeCell((dist, 0, 0), rs, "s", 0)
    assert mac_value(a, b) == pytest.approx(want)


def test_mac_domain_errors():
    t = build_tree(EIGHT, 1)
    with pytest.raises(DomainError):
        mac_value(t.root, t.root)
    with pytest.raises(DomainError):
        mac_value(FakeCell((0, 0, 0), 0.1, "a", 0), FakeCell((0, 0, 0), 0.1, "b", 1))


def test_two_single_leaf_trees():
    a = point_tree([[0, 0, 0]])
    b = point_tree([[5, 0, 0]])
    tasks = traverse(a, b, Config())
    assert len(tasks) == 1 and tasks.kind[0] == InteractionKind.PARTICLE_PARTICLE


@pytest.mark.parametrize("method", ["treecode", "fmm"])
def test_reference_and_compiled_agree(method):
    tree = build_tree(shell(3000, 4), 20)
    cfg = Config(method=method)
    ref = collect_tasks(tree, tree, cfg, method_selector(cfg.method))
    fast = traverse(tree, tree, cfg)
    for name in ("target", "source", "kind"):
        assert np.array_equal(getattr(ref, name), getattr(fast, name))


def test_reference_and_compiled_agree_hybrid():
    tree = build_tree(cube(3000, 4), 20)
    cfg = Config(method="hybrid", p=8)
    tm = KernelTimings(8, 4e-9, 5e-7, 2e-6)
    ref = collect_tasks(tree, tree, cfg, method_selector(cfg.method, tm))
    fast = traverse(tree, tree, cfg, tm)
    assert ref.multiset() == fast.multiset()
    assert np.array_equal(ref.kind, fast.kind)


def test_eight_leaf_self_traversal_covers_each_pair_once():
    tree = build_tree(EIGHT, 1)
    tasks = traverse(tree, tree, Config(method="fmm"))
    seen = {}
    for t in tasks:
        for a in range(tree.begin[t.target], tree.end[t.target]):
            for b in range(tree.begin[t.source], tree.end[t.source]):
                seen[a, b] = seen.get((a, b), 0) + 1
    assert seen == {(a, b): 1 for a in range(8) for b in range(8)}
    c = evaluate(EIGHT, Config(method="fmm", n_crit=1), kernels=counting_kernels()).field
    assert np.all(c == 7)


def test_fmm_task_regression():
    tree = build_tree(cube(10_000, 42), 200)
    tasks = traverse(tree, tree, Config(p=8, method="fmm"))
    k = np.stack([tasks.target, tasks.source, tasks.kind.astype(np.int64)], 1)
    k = k[np.lexsort(k.T[::-1])]
    assert len(tasks) == FMM_1E4_TASKS
    assert int((tasks.kind == 0).sum()) == FMM_1E4_P2P
    assert int((tasks.kind == 2).sum()) == FMM_1E4_M2L
    assert hashlib.sha256(k.tobytes()).hexdigest() == FMM_1E4_SHA256


def test_kind_per_method():
    tree = build_tree(cube(2000, 1), 20)
    tc = traverse(tree, tree, Config(method="treecode"))
    fmm = traverse(tree, tree, Config(method="fmm"))
    assert set(tc.kind.tolist()) == {0, 1}
    assert set(fmm.kind.tolist()) == {0, 2}
    # same accepted pairs, different kinds
    assert np.array_equal(tc.target, fmm.target) and np.array_equal(tc.source, fmm.source)


def test_p2p_tasks_between_leaves_or_hybrid_choice():
    tree = build_tree(cube(2000, 2), 20)
    for method in ("fmm", "treecode"):
        t = traverse(tree, tree, Config(method=method))
        pp = t.kind == 0
        assert np.all(tree.n_child[t.target[pp]] == 0) and np.all(tree.n_child[t.source[pp]] == 0)


def test_hybrid_needs_matching_timings():
    tree = build_tree(cube(100, 1), 10)
    with pytest.raises(ConfigError):
        traverse(tree, tree, Config(method="hybrid"))
    with pytest.raises(ConfigError):
        traverse(tree, tree, Config(method="hybrid", p=8), KernelTimings(5, 1.0, 1.0, 1.0))
    with pytest.raises(ConfigError):
        traverse(tree, tree, Config(method="direct"))


def test_distinct_target_and_source_sets():
    tgt = build_tree(cube(700, 1), 16)
    src = build_tree(shell(900, 2), 16)
    for method in ("treecode", "fmm"):
        tasks = traverse(tgt, src, Config(method=method))
        cover = np.zeros(700, int)
        nt, ns = tgt.count(), src.count()
        for t, s in zip(tasks.target, tasks.source):
            cover[tgt.begin[t]:tgt.end[t]] += ns[s]
        assert np.all(cover == 900)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 800), st.sampled_from([1, 3, 20, 50, 200]), st.integers(0, 10_000),
       st.sampled_from(["treecode", "fmm", "hybrid"]), st.booleans(), st.floats(0.1, 0.9))
def test_exact_coverage_property(n, n_crit, seed, method, on_shell, theta):
    p = shell(n, seed) if on_shell else cube(n, seed)
    rng = np.random.default_rng(seed)
    t = 10.0 ** rng.uniform(-9, -5, 3)
    tm = KernelTimings(4, *t)
    c = evaluate(p, Config(p=4, n_crit=n_crit, method=method, theta=theta), tm,
                 kernels=counting_kernels()).field
    assert np.all(c == n - 1)


def test_fault_mode_breaks_coverage():
    p = cube(500, 1)
    c = evaluate(p, Config(method="treecode", n_crit=10), kernels=counting_kernels(),
                 fault=True).field
    assert not np.all(c == 499)


def test_split_larger_on_pushes():
    tree = build_tree(shell(2000, 3), 8)
    pushes = []
    from hybridfmm.traversal import dual_tree_traversal
    dual_tree_traversal(tree.root, tree.root, Config(), method_selector("fmm"),
                        lambda task: None, on_push=lambda t, s: pushes.append((t, s)))
    r_c, r_p = tree.radius[1:], tree.radius[tree.parent[1:]]
    ok = (r_c > 0) & (r_p > 0)
    bound = max((r_p[ok] / r_c[ok]).max(), (r_c[ok] / r_p[ok]).max())
    for t, s in pushes:
        if not (t.is_leaf or s.is_leaf) and t.radius > 0 and s.radius > 0:
            assert max(t.radius / s.radius, s.radius / t.radius) <= bound * (1 + 1e-12)


def test_theta_monotone_on_medians():
    from hybridfmm import direct_evaluate, rel_error

    errs = {th: [] for th in (0.3, 0.5, 0.7)}
    for seed in range(5):
        p = cube(1500, seed)
        exact = direct_evaluate(p)
        for th in errs:
            r = evaluate(p, Config(p=4, theta=th, n_crit=16, method="fmm"))
            errs[th].append(rel_error(r.field, exact).potential_l2)
    med = [np.median(errs[th]) for th in (0.3, 0.5, 0.7)]
    assert med[0] <= med[1] <= med[2]
