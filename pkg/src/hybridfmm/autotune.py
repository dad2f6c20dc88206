"""Kernel pre-calculation and the hybrid selector's cost model.

Costs are linear in the work each task does: a particle-particle task costs
``t_p2p_pair * n_targets * n_sources``, a cell-particle task
``t_m2p_target * n_targets`` and a cell-cell task ``t_m2l_call``. The
per-unit times are measured by running the production executors on synthetic
cells, so the model prices exactly the code that the evaluation runs.
"""

from __future__ import annotations

import json
import logging
import math
import os
import platform
import statistics
import time
from dataclasses import dataclass
from pathlib import Path

import numba
import numpy as np

from .kernels import executors as ex
from .kernels.api import random_expansion
from .model import ConfigError, HybridFmmError, InteractionKind
from .tree import Cell

log = logging.getLogger(__name__)

MIN_REPETITIONS = 3
CACHE_FORMAT = "hybridfmm.kernel-timings"
CACHE_VERSION = 1

# costs this close count as a tie (three-way ties are rarely exact in floats)
TIE_RTOL = 1e-9

# one timed sample should last at least this long
_TARGET_SAMPLE_SECONDS = 4e-3
_MAX_LOOPS = 1 << 26


class TuningError(HybridFmmError, RuntimeError):
    """Kernel timings could not be measured reliably."""


@dataclass(frozen=True)
class KernelTimings:
    """Measured per-unit kernel costs in seconds.

    Zero costs are accepted so that a selection can be forced by hand;
    measured timings are always strictly positive.
    """

    p: int
    t_p2p_pair: float
    t_m2p_target: float
    t_m2l_call: float
    batch: int = 0
    repetitions: int = MIN_REPETITIONS
    host: str | None = None

    def __post_init__(self) -> None:
        for name in ("t_p2p_pair", "t_m2p_target", "t_m2l_call"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0.0):
                raise ConfigError(f"{name} must be finite and >= 0, got {v}")
        if self.repetitions < MIN_REPETITIONS:
            raise ConfigError(
                f"repetitions must be >= {MIN_REPETITIONS}, got {self.repetitions}"
            )

    def scaled(self, c: float) -> KernelTimings:
        return KernelTimings(self.p, c * self.t_p2p_pair, c * self.t_m2p_target,
                             c * self.t_m2l_call, self.batch, self.repetitions, self.host)

    def as_array(self) -> np.ndarray:
        return np.array([self.t_p2p_pair, self.t_m2p_target, self.t_m2l_call])


def estimate_cost(kind: InteractionKind, n_targets: int, n_sources: int,
                  timings: KernelTimings) -> float:
    if kind == InteractionKind.PARTICLE_PARTICLE:
        return timings.t_p2p_pair * n_targets * n_sources
    if kind == InteractionKind.CELL_PARTICLE:
        return timings.t_m2p_target * n_targets
    return timings.t_m2l_call


def select_by_counts(n_targets: int, n_sources: int, timings: KernelTimings) -> InteractionKind:
    """Cheapest kind; ties prefer cell-cell, then cell-particle."""
    pp = estimate_cost(InteractionKind.PARTICLE_PARTICLE, n_targets, n_sources, timings)
    cp = estimate_cost(InteractionKind.CELL_PARTICLE, n_targets, n_sources, timings)
    cc = estimate_cost(InteractionKind.CELL_CELL, n_targets, n_sources, timings)
    tie = 1.0 + TIE_RTOL
    if cc <= cp * tie and cc <= pp * tie:
        return InteractionKind.CELL_CELL
    if cp <= pp * tie:
        return InteractionKind.CELL_PARTICLE
    return InteractionKind.PARTICLE_PARTICLE


def select_interaction(target: Cell, source: Cell, timings: KernelTimings) -> InteractionKind:
    """Kind for an already MAC-accepted pair."""
    return select_by_counts(target.count, source.count, timings)


# --- measurement ---------------------------------------------------------------


class _Bench:
    """Two well-separated synthetic cells and the buffers the executors need."""

    def __init__(self, p: int, batch: int, seed: int):
        rng = np.random.default_rng(seed)
        self.p = p
        pos = np.concatenate([
            rng.uniform(-0.5, 0.5, (batch, 3)),
            rng.uniform(-0.5, 0.5, (batch, 3)) + (4.0, 0.0, 0.0),
        ])
        self.x, self.y, self.z = (np.ascontiguousarray(pos[:, i]) for i in range(3))
        self.q = rng.uniform(0.5, 1.5, 2 * batch) / batch
        self.begin = np.array([0, batch], dtype=np.int64)
        self.end = np.array([batch, 2 * batch], dtype=np.int64)
        self.center = np.array([[0.0, 0.0, 0.0], [4.0, 0.0, 0.0]])
        nc = (p + 1) ** 2
        self.mult = np.stack([random_expansion(p, rng).coeffs * 1e-3 for _ in range(2)])
        self.local = np.zeros((2, nc), dtype=np.complex128)
        self.has_local = np.zeros(2, dtype=np.bool_)
        n = 2 * batch
        self.pot = np.zeros(n)
        self.fx = np.zeros(n)
        self.fy = np.zeros(n)
        self.fz = np.zeros(n)

    @staticmethod
    def tasks(loops: int):
        return np.zeros(loops, dtype=np.int64), np.ones(loops, dtype=np.int64)

    def p2p(self, loops: int) -> float:
        t, s = self.tasks(loops)
        t0 = time.perf_counter()
        ex.exec_p2p(t, s, True, self.begin, self.end, self.begin, self.end, self.x, self.y,
                    self.z, self.x, self.y, self.z, self.q, self.pot, self.fx, self.fy, self.fz)
        return time.perf_counter() - t0

    def m2p(self, loops: int) -> float:
        t, s = self.tasks(loops)
        t0 = time.perf_counter()
        ex.exec_m2p(t, s, self.p, self.begin, self.end, self.x, self.y, self.z, self.mult,
                    self.center, self.pot, self.fx, self.fy, self.fz)
        return time.perf_counter() - t0

    def m2l(self, loops: int) -> float:
        t, s = self.tasks(loops)
        t0 = time.perf_counter()
        ex.exec_m2l(t, s, self.p, self.mult, self.center, self.center, self.local,
                    self.has_local)
        return time.perf_counter() - t0


def _median_per_loop(run, repetitions: int) -> float:
    """Median seconds per loop iteration of ``run(loops)``, after one warm-up."""
    resolution = time.get_clock_info("perf_counter").resolution
    run(1)  # compile / load from cache
    pilot = max(run(1), resolution)
    loops = max(1, min(_MAX_LOOPS, int(math.ceil(_TARGET_SAMPLE_SECONDS / pilot))))
    for _ in range(4):
        run(loops)  # warm-up at the measured size
        samples = [run(loops) for _ in range(repetitions)]
        med = statistics.median(samples)
        if med >= 10.0 * resolution and med > 0.0:
            return med / loops
        if loops >= _MAX_LOOPS:
            break
        loops = min(_MAX_LOOPS, loops * 10)
    raise TuningError("kernel too fast to time with the available clock")


def tune_kernels(p: int, batch: int, repetitions: int = 5, rng_seed: int = 0) -> KernelTimings:
    """Measure per-unit P2P, M2P and M2L costs on synthetic cells of ``batch`` particles."""
    if not 1 <= p <= 30:
        raise ConfigError(f"p must be in [1, 30], got {p}")
    if batch < 1:
        raise ConfigError(f"batch must be >= 1, got {batch}")
    if repetitions < MIN_REPETITIONS:
        raise ConfigError(f"repetitions must be >= {MIN_REPETITIONS}, got {repetitions}")
    prev_threads = numba.get_num_threads()
    numba.set_num_threads(1)
    try:
        bench = _Bench(p, batch, rng_seed)
        t_p2p = _median_per_loop(bench.p2p, repetitions) / (batch * batch)
        t_m2p = _median_per_loop(bench.m2p, repetitions) / batch
        t_m2l = _median_per_loop(bench.m2l, repetitions)
    finally:
        numba.set_num_threads(prev_threads)
    timings = KernelTimings(p, t_p2p, t_m2p, t_m2l, batch, repetitions, host_fingerprint())
    log.info("kernel timings p=%d batch=%d: p2p %.3g ns/pair, m2p %.3g ns/target, "
             "m2l %.3g ns/call", p, batch, t_p2p * 1e9, t_m2p * 1e9, t_m2l * 1e9)
    return timings


# --- cache file ------------------------------------------------------------------


def host_fingerprint() -> str:
    cpu = platform.processor() or ""
    try:
        with open("/proc/cpuinfo") as f:
            for line in f:
                if line.startswith("model name"):
                    cpu = line.split(":", 1)[1].strip()
                    break
    except OSError:
        pass
    return "|".join([platform.node(), platform.machine(), cpu, f"cpus={os.cpu_count()}",
                     f"numba={numba.__version__}", f"numpy={np.__version__}"])


def default_cache_path(p: int) -> Path:
    root = os.environ.get("HYBRIDFMM_CACHE_DIR") or os.path.join(
        os.environ.get("XDG_CACHE_HOME", os.path.expanduser("~/.cache")), "hybridfmm")
    return Path(root) / f"timings-p{p}.json"


def save_timings(path: str | os.PathLike, timings: KernelTimings) -> None:
    doc = {
        "format": CACHE_FORMAT,
        "version": CACHE_VERSION,
        "p": timings.p,
        "t_p2p_pair_ns": timings.t_p2p_pair * 1e9,
        "t_m2p_target_ns": timings.t_m2p_target * 1e9,
        "t_m2l_call_ns": timings.t_m2l_call * 1e9,
        "batch": timings.batch,
        "repetitions": timings.repetitions,
        "host": timings.host if timings.host is not None else host_fingerprint(),
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2) + "\n")


def load_timings(path: str | os.PathLike, p: int, host: str | None = None) -> KernelTimings | None:
    """Read a timings file; ``None`` when missing, unreadable or mismatched.

    A file with no ``host`` entry is a hand-written override and is accepted
    on any machine.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except FileNotFoundError:
        return None
    except (OSError, ValueError) as err:
        log.warning("ignoring unreadable timings file %s: %s", path, err)
        return None
    if doc.get("p") != p:
        log.info("ignoring timings file %s: measured at p=%s, need p=%d", path, doc.get("p"), p)
        return None
    host = host_fingerprint() if host is None else host
    if "host" in doc and doc["host"] != host:
        log.info("ignoring timings file %s: measured on a different host", path)
        return None
    try:
        return KernelTimings(
            p=p,
            t_p2p_pair=float(doc["t_p2p_pair_ns"]) / 1e9,
            t_m2p_target=float(doc["t_m2p_target_ns"]) / 1e9,
            t_m2l_call=float(doc["t_m2l_call_ns"]) / 1e9,
            batch=int(doc.get("batch", 0)),
            repetitions=int(doc.get("repetitions", MIN_REPETITIONS)),
            host=doc.get("host"),
        )
    except (KeyError, TypeError, ValueError, ConfigError) as err:
        log.warning("ignoring malformed timings file %s: %s", path, err)
        return None


def get_timings(p: int, batch: int, path: str | os.PathLike | None = None,
                retune: bool = False, repetitions: int = 5,
                seed: int = 0) -> tuple[KernelTimings, bool]:
    """Cached timings for ``p`` on this host, measuring them if needed.

    Returns ``(timings, measured)``.
    """
    path = default_cache_path(p) if path is None else Path(path)
    if not retune:
        cached = load_timings(path, p)
        if cached is not None:
            log.info("loaded kernel timings from %s (no re-measurement)", path)
            return cached, False
    log.info("measuring kernel timings for p=%d, batch=%d", p, batch)
    timings = tune_kernels(p, batch, repetitions, seed)
    save_timings(path, timings)
    return timings, True
