"""Laplace kernels: P2P, P2M, M2M, M2L, M2P, L2L, L2P and counting surrogates."""

from .api import (
    evaluate_expansion,
    l2l,
    l2p,
    m2l,
    m2m,
    m2p,
    p2l,
    p2m,
    p2p,
    random_expansion,
)
from .backends import CountingKernels, LaplaceKernels, counting_kernels

__all__ = [
    "CountingKernels",
    "LaplaceKernels",
    "counting_kernels",
    "evaluate_expansion",
    "l2l",
    "l2p",
    "m2l",
    "m2m",
    "m2p",
    "p2l",
    "p2m",
    "p2p",
    "random_expansion",
]
