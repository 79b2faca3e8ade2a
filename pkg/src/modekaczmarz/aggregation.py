"""Mode-based aggregation of worker responses."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .adversary import Response

DEFAULT_GROUP_TOL = 1e-9


class ResponseDataError(ValueError):
    pass


@dataclass(frozen=True)
class ResponseGroup:
    representative: float
    members: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.members)


@dataclass(frozen=True)
class ModeDecision:
    group: ResponseGroup | None
    qualifying_count: int

    @property
    def skipped(self) -> bool:
        return self.group is None

    @property
    def chosen(self) -> bool:
        return self.group is not None


def split_points(values: np.ndarray, tol: float) -> tuple[np.ndarray, np.ndarray]:
    """Sort ``values`` and cut wherever the gap to the next value exceeds ``tol``.

    Returns ``(order, starts)``: the sorting permutation and the start offset
    of each cluster in sorted order.
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ResponseDataError("no responses to group")
    if not np.all(np.isfinite(values)):
        raise ResponseDataError("non-finite response value")
    order = np.argsort(values, kind="stable")
    gaps = np.diff(values[order])
    starts = np.concatenate(([0], np.flatnonzero(gaps > tol) + 1))
    return order, starts


def group_responses(responses: Sequence[Response], tol: float = DEFAULT_GROUP_TOL) -> list[ResponseGroup]:
    """Partition responses into clusters of (near-)equal values.

    Clusters are single-linkage on the sorted values with gap ``tol``, so the
    result does not depend on the input order. The representative of a
    cluster is its smallest value; groups come back sorted by it.
    """
    if not responses:
        raise ResponseDataError("no responses to group")
    values = np.array([r.value for r in responses], dtype=float)
    workers = np.array([r.worker for r in responses])
    order, starts = split_points(values, tol)
    ends = np.append(starts[1:], len(values))
    groups = []
    for s, e in zip(starts, ends):
        idx = order[s:e]
        groups.append(ResponseGroup(float(values[idx[0]]), tuple(sorted(workers[idx].tolist()))))
    return groups


def mode_threshold(n: int, p_threshold: float) -> int:
    """Smallest admissible group size, ``ceil(n * (1 - p))``."""
    # guard against 5 * (1 - 0.8) = 1.0000000000000002 style float noise
    t = n * (1.0 - p_threshold)
    return max(int(math.ceil(round(t, 9))), 0)


def select_mode(groups: Sequence[ResponseGroup], n: int, p_threshold: float,
                rng: np.random.Generator, rule: str = "any") -> ModeDecision:
    """Pick the group whose coefficient is applied, or skip.

    ``rule="any"`` chooses uniformly among all groups reaching the
    threshold. ``rule="largest"`` only considers groups of maximal size
    (still subject to the threshold) and breaks ties uniformly.
    ``rule="strict"`` accepts only a unique largest group and skips on ties.
    """
    T = mode_threshold(n, p_threshold)
    sizes = np.array([len(g) for g in groups])
    qualifying = np.flatnonzero(sizes >= T)
    n_qual = int(qualifying.size)
    if rule not in ("any", "largest", "strict"):
        raise ValueError(f"unknown selection rule {rule!r}")
    if rule != "any" and qualifying.size:
        top = sizes[qualifying].max()
        qualifying = qualifying[sizes[qualifying] == top]
        if rule == "strict" and qualifying.size > 1:
            qualifying = qualifying[:0]
    if qualifying.size == 0:
        return ModeDecision(None, n_qual)
    pick = qualifying[0] if qualifying.size == 1 else qualifying[rng.integers(qualifying.size)]
    return ModeDecision(groups[int(pick)], n_qual)
