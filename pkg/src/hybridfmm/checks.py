"""Invariant suite behind ``hybridfmm check``.

Each check runs on small inputs and returns a :class:`CheckResult`; the suite
as a whole is meant to finish well within a minute.
"""

from __future__ import annotations

import time
from typing import Callable, NamedTuple

import numpy as np

from .autotune import KernelTimings
from .distributions import generate
from .evaluate import evaluate
from .kernels import counting_kernels, random_expansion
from .kernels.api import m2p
from .model import Config, Distribution, Method, Particles
from .oracle import direct_evaluate, rel_error
from .traversal import dual_tree_traversal, method_selector
from .tree import build_tree


class CheckResult(NamedTuple):
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


def _random_timings(p: int, rng: np.random.Generator) -> KernelTimings:
    t = 10.0 ** rng.uniform(-9.0, -5.0, 3)
    return KernelTimings(p, float(t[0]), float(t[1]), float(t[2]))


def check_coverage(n: int, seed: int, fault: bool = False) -> CheckResult:
    """Counting kernels: every target must see exactly ``n - 1`` sources."""
    rng = np.random.default_rng(seed)
    bad = []
    runs = 0
    for dist in Distribution:
        particles = generate(dist, n, seed)
        for method in (Method.TREECODE, Method.FMM, Method.HYBRID):
            for n_crit in (1, 20, 50, 200):
                cfg = Config(p=4, n_crit=n_crit, method=method)
                timings = _random_timings(cfg.p, rng) if method is Method.HYBRID else None
                counts = evaluate(particles, cfg, timings, kernels=counting_kernels(),
                                  fault=fault).field
                runs += 1
                if not np.all(counts == n - 1):
                    bad.append(f"{method.value}/{dist.value}/ncrit={n_crit}")
    detail = f"{runs} runs exact" if not bad else "miscounted: " + ", ".join(bad[:4])
    return CheckResult("counting coverage", not bad, detail)


def check_convergence(n: int, seed: int) -> CheckResult:
    """FMM error against the oracle must not grow with ``p``."""
    particles = generate(Distribution.CUBE, n, seed)
    exact = direct_evaluate(particles)
    errs = []
    for p in (2, 4, 6, 8, 10, 12):
        field = evaluate(particles, Config(p=p, n_crit=20, method=Method.FMM)).field
        errs.append(rel_error(field, exact))
    pot = [e.potential_l2 for e in errs]
    force = [e.force_l2 for e in errs]
    ok = all(b <= a * (1 + 1e-6) or b < 1e-13 for seq in (pot, force)
             for a, b in zip(seq, seq[1:]))
    return CheckResult("convergence ladder", ok,
                       "pot " + " ".join(f"{e:.1e}" for e in pot))


def check_translation(n: int, seed: int) -> CheckResult:
    particles = generate(Distribution.CUBE, n, seed)
    shift = np.array([0.3, -0.7, 1.1])
    worst = 0.0
    for method in (Method.TREECODE, Method.FMM):
        cfg = Config(p=8, n_crit=32, method=method)
        a = evaluate(particles, cfg).field
        b = evaluate(particles.translated(shift), cfg).field
        e = rel_error(b, a)
        worst = max(worst, e.potential_l2, e.force_l2)
    return CheckResult("translation invariance", worst <= 1e-10, f"max rel {worst:.1e}")


def check_selector_forcing(n: int, seed: int) -> CheckResult:
    particles = generate(Distribution.CUBE, n, seed)
    cfg = Config(p=6, n_crit=32, method=Method.HYBRID)
    direct = evaluate(particles, Config(method=Method.DIRECT)).field
    forced_pp = evaluate(particles, cfg, KernelTimings(cfg.p, 0.0, 1.0, 1.0)).field
    e = rel_error(forced_pp, direct)
    pp_ok = max(e.potential_l2, e.force_l2) <= 1e-12
    hyb = evaluate(particles, cfg, KernelTimings(cfg.p, 1.0, 1.0, 0.0), keep_tasks=True)
    fmm = evaluate(particles, Config(p=6, n_crit=32, method=Method.FMM), keep_tasks=True)
    cc_ok = hyb.tasks.multiset() == fmm.tasks.multiset()
    return CheckResult("selector forcing", pp_ok and cc_ok,
                       f"P2P-forced rel {e.potential_l2:.1e}; M2L-forced multiset "
                       f"{'equal' if cc_ok else 'differs'}")


def check_momentum(n: int, seed: int) -> CheckResult:
    rng = np.random.default_rng(seed)
    particles = Particles(rng.uniform(-1, 1, (n, 3)), rng.uniform(-1, 1, n))
    f = direct_evaluate(particles).force
    qf = particles.charges[:, None] * f
    scale = np.abs(qf).sum()
    total = float(np.abs(qf.sum(axis=0)).max()) / scale
    return CheckResult("momentum identity", bool(total <= 1e-12), f"|sum q f| / scale {total:.1e}")


def check_gradient(seed: int) -> CheckResult:
    """Analytic M2P force against central differences of its potential."""
    rng = np.random.default_rng(seed)
    p = 10
    mult = random_expansion(p, rng)
    pts = rng.normal(size=(20, 3))
    pts *= (3.0 / np.linalg.norm(pts, axis=1))[:, None]
    h = 1e-5
    analytic = m2p(mult, Particles(pts, np.ones(len(pts)))).force
    fd = np.empty_like(analytic)
    for k in range(3):
        step = np.zeros(3)
        step[k] = h
        up = m2p(mult, Particles(pts + step, np.ones(len(pts)))).potential
        down = m2p(mult, Particles(pts - step, np.ones(len(pts)))).potential
        fd[:, k] = -(up - down) / (2 * h)
    err = float(np.linalg.norm(fd - analytic) / np.linalg.norm(analytic))
    return CheckResult("finite-difference gradient", err <= 1e-5, f"rel {err:.1e}")


def check_split_larger(n: int, seed: int) -> CheckResult:
    """Pushed non-leaf pairs stay within the tree's parent/child radius ratio."""
    particles = generate(Distribution.SHELL, n, seed)
    tree = build_tree(particles, 8)
    r_child = tree.radius[1:]
    r_parent = tree.radius[tree.parent[1:]]
    keep = (r_child > 0) & (r_parent > 0)
    ratios = np.concatenate([r_parent[keep] / r_child[keep], r_child[keep] / r_parent[keep]])
    bound = float(ratios.max()) if ratios.size else 1.0
    worst = 1.0

    def on_push(t, s):
        nonlocal worst
        if t.is_leaf or s.is_leaf or t.radius == 0.0 or s.radius == 0.0:
            return
        worst = max(worst, t.radius / s.radius, s.radius / t.radius)

    dual_tree_traversal(tree.root, tree.root, Config(method=Method.FMM),
                        method_selector(Method.FMM), lambda task: None, on_push=on_push)
    return CheckResult("split-larger rule", worst <= bound * (1 + 1e-12),
                       f"worst pushed ratio {worst:.2f}, bound {bound:.2f}")


def run_checks(seed: int = 0, n: int = 1000, fault: bool = False,
               progress: Callable[[CheckResult], None] | None = None) -> list[CheckResult]:
    suite = [
        lambda: check_coverage(n, seed, fault),
        lambda: check_convergence(n, seed),
        lambda: check_translation(n, seed),
        lambda: check_selector_forcing(n, seed),
        lambda: check_momentum(n, seed),
        lambda: check_gradient(seed),
        lambda: check_split_larger(n, seed),
    ]
    results = []
    for run in suite:
        t0 = time.perf_counter()
        r = run()
        r = r._replace(seconds=time.perf_counter() - t0)
        results.append(r)
        if progress is not None:
            progress(r)
    return results
