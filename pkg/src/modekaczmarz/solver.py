"""Distributed randomized Kaczmarz with mode aggregation and a block-list."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._rng import rng_streams
from .adversary import WorkerPool
from .aggregation import DEFAULT_GROUP_TOL, mode_threshold, split_points
from .blocklist import BlockListState, BlockPolicy, apply_policy
from .kaczmarz import Problem, RowSampler, row_sampling_distribution

SKIPPED = -1
MIXED = -2


@dataclass(frozen=True)
class SolveConfig:
    n: int
    p_threshold: float
    max_iter: int = 50_000
    tol: float = 0.0
    stop_on_tol: bool = False
    blocklist: bool = False
    policy: BlockPolicy = field(default_factory=BlockPolicy)
    period: int = 100
    min_active: int | None = None
    count_skips: bool = False
    group_tol: float = DEFAULT_GROUP_TOL
    selection: str = "any"
    short_active: str = "halt"
    keep_samples: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.tol < 0:
            raise ValueError("tol must be nonnegative")
        if not 0.0 <= self.p_threshold <= 1.0:
            raise ValueError("p_threshold must lie in [0, 1]")
        if self.period < 1:
            raise ValueError("period must be at least 1")
        if self.short_active not in ("halt", "shrink"):
            raise ValueError("short_active must be 'halt' or 'shrink'")
        if self.selection not in ("any", "largest", "strict"):
            raise ValueError("selection must be 'any', 'largest' or 'strict'")

    @property
    def threshold(self) -> int:
        return mode_threshold(self.n, self.p_threshold)

    @property
    def effective_min_active(self) -> int:
        return self.n if self.min_active is None else self.min_active


@dataclass
class SolveTrace:
    """Per-iteration record of one solve.

    ``chosen_category`` holds the category of the applied group, ``-1`` for a
    skipped iteration and ``-2`` when the group mixes categories.
    ``applied_coeff`` is NaN on skipped iterations.
    """

    rows: np.ndarray
    chosen_category: np.ndarray
    applied_coeff: np.ndarray
    corrupted: np.ndarray
    error_norm: np.ndarray
    x: np.ndarray
    blocklist: BlockListState
    initial_error: float
    status: str = "max_iter"
    tol_reached_at: int | None = None
    samples: list | None = None
    # update index -> error after that update, for bound comparisons
    error_by_update: np.ndarray | None = None

    @property
    def iterations(self) -> int:
        return len(self.rows)

    @property
    def skipped(self) -> np.ndarray:
        return self.chosen_category == SKIPPED

    @property
    def updates(self) -> int:
        return int(np.count_nonzero(~self.skipped))

    @property
    def skips(self) -> int:
        return int(np.count_nonzero(self.skipped))

    @property
    def corrupted_updates(self) -> int:
        return int(np.count_nonzero(self.corrupted))

    @property
    def final_error(self) -> float:
        return float(self.error_norm[-1]) if len(self.error_norm) else self.initial_error


def residual_stopping_check(last_applied_c: float, tol: float) -> bool:
    """True while the loop should continue, i.e. ``|c| > tol``."""
    return abs(last_applied_c) > tol


def run(problem: Problem, pool: WorkerPool, config: SolveConfig,
        x0: np.ndarray | None = None) -> SolveTrace:
    """Run the mode-aggregated Kaczmarz loop until ``max_iter`` or the tolerance exit.

    Each iteration samples one row, broadcasts it to ``n`` workers drawn
    from the active set, groups their answers and applies the chosen group's
    coefficient. Every ``period`` iterations the block-list policy runs when
    enabled.
    """
    A, b, x_star = problem.A, problem.b, problem.x_star
    streams = rng_streams(config.seed)
    rows_it = RowSampler(row_sampling_distribution(A), streams["rows"])
    wrng, trng, nrng = streams["workers"], streams["ties"], streams["noise"]
    row_sq = np.array([float(r @ r) for r in A])  # same rounding as true_coefficient

    n, T, gtol = config.n, config.threshold, config.group_tol
    rule = config.selection
    state = BlockListState.fresh(pool.N, config.period)
    active = state.active_array()
    if n > len(active):
        raise ValueError(f"n={n} exceeds pool size {len(active)}")
    min_active = config.effective_min_active
    assignment = pool.assignment

    x = np.zeros(A.shape[1]) if x0 is None else np.array(x0, dtype=float)
    max_iter = config.max_iter
    rows = np.empty(max_iter, dtype=np.int64)
    chosen = np.empty(max_iter, dtype=np.int64)
    applied = np.full(max_iter, np.nan)
    corrupted = np.zeros(max_iter, dtype=bool)
    errs = np.empty(max_iter)
    samples = [] if config.keep_samples else None

    tol = config.tol
    last_c = 2 * tol if tol > 0 else math.inf
    status, tol_hit = "max_iter", None
    j = 0
    while j < max_iter:
        if config.stop_on_tol and not residual_stopping_check(last_c, tol):
            status = "tol"
            break
        i = next(rows_it)
        a = A[i]
        c_true = (b[i] - a @ x) / row_sq[i]

        n_now = n if len(active) >= n else len(active)
        S = wrng.choice(active, size=n_now, replace=False)
        if samples is not None:
            samples.append(S)
        values = pool.responses(S, i, c_true, nrng)

        order, starts = split_points(values, gtol)
        sizes = np.diff(np.append(starts, n_now))
        qual = np.flatnonzero(sizes >= T)
        if rule != "any" and qual.size:
            qual = qual[sizes[qual] == sizes[qual].max()]
            if rule == "strict" and qual.size > 1:
                qual = qual[:0]

        state.participation[S] += 1
        rows[j] = i
        if qual.size == 0:
            chosen[j] = SKIPPED
            if config.count_skips:
                state.counter[S] += 1
        else:
            g = qual[0] if qual.size == 1 else qual[trng.integers(qual.size)]
            s0 = starts[g]
            members = S[order[s0 : s0 + sizes[g]]]
            c = values[order[s0]]
            x = x + c * a
            last_c = c
            applied[j] = c
            cats = assignment[members]
            chosen[j] = cats[0] if np.all(cats == cats[0]) else MIXED
            corrupted[j] = abs(c - c_true) > gtol
            state.counter[S] += 1
            state.counter[members] -= 1
            if tol_hit is None and abs(c) <= tol:
                tol_hit = j
        errs[j] = np.linalg.norm(x - x_star)
        j += 1

        if config.blocklist and j % config.period == 0:
            apply_policy(state, config.policy, min(min_active, len(active)))
            active = state.active_array()
            if len(active) < n and config.short_active == "halt":
                status = "insufficient_workers"
                break

    done = slice(0, j)
    ok = chosen[done] != SKIPPED
    return SolveTrace(
        rows=rows[done].copy(),
        chosen_category=chosen[done].copy(),
        applied_coeff=applied[done].copy(),
        corrupted=corrupted[done].copy(),
        error_norm=errs[done].copy(),
        x=x,
        blocklist=state,
        initial_error=float(np.linalg.norm((np.zeros_like(x) if x0 is None else x0) - x_star)),
        status=status,
        tol_reached_at=tol_hit,
        samples=samples,
        error_by_update=errs[done][ok].copy(),
    )
