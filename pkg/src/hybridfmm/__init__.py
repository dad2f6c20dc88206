"""Hybrid treecode/FMM for the Laplace kernel with auto-tuned kernel selection."""

import os

# the bundled TBB is too old for numba; skip straight to the other layers
os.environ.setdefault("NUMBA_THREADING_LAYER_PRIORITY", "omp workqueue tbb")

from .autotune import (
    KernelTimings,
    TuningError,
    estimate_cost,
    get_timings,
    load_timings,
    save_timings,
    select_by_counts,
    select_interaction,
    tune_kernels,
)
from .distributions import cube, generate, shell
from .evaluate import Evaluation, evaluate
from .model import (
    Config,
    ConfigError,
    Distribution,
    DomainError,
    Expansion,
    FieldResult,
    HybridFmmError,
    InputError,
    InteractionKind,
    InteractionTask,
    KernelCounters,
    Method,
    Particles,
    SingularityError,
    TaskList,
    TimingBreakdown,
)
from .oracle import ErrorNorms, direct_evaluate, rel_error
from .traversal import dual_tree_traversal, mac_value, method_selector, traverse
from .tree import Cell, Tree, build_tree, cell_statistics

__version__ = "0.1.0"

__all__ = [
    "Cell", "Config", "ConfigError", "Distribution", "DomainError", "ErrorNorms",
    "Evaluation", "Expansion", "FieldResult", "HybridFmmError", "InputError",
    "InteractionKind", "InteractionTask", "KernelCounters", "KernelTimings", "Method",
    "Particles", "SingularityError", "TaskList", "TimingBreakdown", "Tree", "TuningError",
    "build_tree", "cell_statistics", "cube", "direct_evaluate", "dual_tree_traversal",
    "estimate_cost", "evaluate", "generate", "get_timings", "load_timings", "mac_value",
    "method_selector", "rel_error", "save_timings", "select_by_counts",
    "select_interaction", "shell", "traverse", "tune_kernels",
]
