"""Non-mode frequency counters and the block-list built from them."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .aggregation import ModeDecision


class BlockListError(RuntimeError):
    pass


@dataclass(frozen=True)
class BlockPolicy:
    """Rule for turning counters into blocked workers.

    kind:
        ``"fraction"``: block when counter / participation > value
        ``"top"``: block the ``int(value)`` workers with the largest counters
        ``"absolute"``: block when counter > value
    """

    kind: str = "fraction"
    value: float = 0.5

    def __post_init__(self):
        if self.kind not in ("fraction", "top", "absolute"):
            raise ValueError(f"unknown block policy {self.kind!r}")


@dataclass
class BlockListState:
    counter: np.ndarray
    participation: np.ndarray
    blocked: set = field(default_factory=set)
    period: int = 100

    @classmethod
    def fresh(cls, N: int, period: int = 100) -> "BlockListState":
        return cls(np.zeros(N, dtype=np.int64), np.zeros(N, dtype=np.int64), set(), period)

    @property
    def N(self) -> int:
        return len(self.counter)

    @property
    def active(self) -> set:
        return set(range(self.N)) - self.blocked

    def active_array(self) -> np.ndarray:
        mask = np.ones(self.N, dtype=bool)
        if self.blocked:
            mask[list(self.blocked)] = False
        return np.flatnonzero(mask)

    def snapshot(self) -> "BlockListState":
        return BlockListState(self.counter.copy(), self.participation.copy(),
                              set(self.blocked), self.period)


def record_iteration(state: BlockListState, sampled: Iterable[int], decision: ModeDecision,
                     count_skips: bool = False) -> BlockListState:
    """Update counters after one aggregation round (in place; returns ``state``).

    Every sampled worker gains one participation. When a group was chosen,
    sampled workers outside it gain one non-mode count. Skipped rounds leave
    counters alone unless ``count_skips`` is set, in which case every
    responder is counted.
    """
    sampled = np.asarray(list(sampled) if not isinstance(sampled, np.ndarray) else sampled,
                         dtype=np.int64)
    if state.blocked and not state.blocked.isdisjoint(sampled.tolist()):
        raise BlockListError("a blocked worker was sampled")
    state.participation[sampled] += 1
    if decision.chosen:
        members = np.fromiter(decision.group.members, dtype=np.int64)
        losers = sampled[~np.isin(sampled, members)]
        state.counter[losers] += 1
    elif count_skips:
        state.counter[sampled] += 1
    return state


def apply_policy(state: BlockListState, policy: BlockPolicy, min_active: int) -> BlockListState:
    """Block workers flagged by ``policy`` (in place; returns ``state``).

    Candidates are blocked in order of decreasing suspicion (lower id first
    on ties) and blocking stops before the active set would shrink below
    ``min_active``.
    """
    active = state.active_array()
    if min_active > len(active):
        raise BlockListError(f"min_active={min_active} exceeds {len(active)} active workers")
    cnt = state.counter[active]
    if policy.kind == "fraction":
        score = cnt / np.maximum(state.participation[active], 1)
        flagged = score > policy.value
    elif policy.kind == "absolute":
        score = cnt.astype(float)
        flagged = score > policy.value
    else:
        score = cnt.astype(float)
        flagged = np.zeros(len(active), dtype=bool)
        j = min(int(policy.value), int(np.count_nonzero(score > 0)))
        if j > 0:
            # lexsort: last key is primary -> highest score, then lowest id
            top = np.lexsort((active, -score))[:j]
            flagged[top] = True
    if not flagged.any():
        return state
    cand = np.flatnonzero(flagged)
    cand = cand[np.lexsort((active[cand], -score[cand]))]
    room = len(active) - min_active
    for w in active[cand[:room]].tolist():
        state.blocked.add(w)
    return state


def precision_recall(blocked: Iterable[int], true_adversaries: Iterable[int]) -> tuple[float, float]:
    blocked, adv = set(blocked), set(true_adversaries)
    hit = len(blocked & adv)
    precision = hit / len(blocked) if blocked else 1.0
    recall = hit / len(adv) if adv else 1.0
    return precision, recall
