"""Adversary-tolerant distributed randomized Kaczmarz.

Mode aggregation over redundant worker answers, a frequency-based
block-list, and exact combinatorics for how often each worker category
wins the mode.
"""

from .adversary import ErrorSpec, WorkerPool, build_pool, build_pool_from_counts
from .analysis import CategoryCounts, mode_probabilities
from .blocklist import BlockPolicy, precision_recall
from .kaczmarz import Problem, generate_problem
from .solver import SolveConfig, SolveTrace, run

__all__ = [
    "BlockPolicy", "CategoryCounts", "ErrorSpec", "Problem", "SolveConfig", "SolveTrace",
    "WorkerPool", "build_pool", "build_pool_from_counts", "generate_problem",
    "mode_probabilities", "precision_recall", "run",
]
__version__ = "0.1.0"
