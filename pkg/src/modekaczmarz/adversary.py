"""Simulated worker population with honest and adversarial categories."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .kaczmarz import true_coefficient


class ConfigurationError(ValueError):
    """Worker pool parameters that cannot be realized."""


class InsufficientWorkersError(RuntimeError):
    """Fewer active workers than requested."""


@dataclass(frozen=True)
class ErrorSpec:
    """How a category corrupts the step coefficient.

    kind is one of ``"none"``, ``"constant"`` (add ``value``), ``"per_row"``
    (add ``vector[row]``) or ``"random"`` (add a fresh normal draw scaled by
    ``value`` on every response).
    """

    kind: str = "none"
    value: float = 0.0
    vector: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in ("none", "constant", "per_row", "random"):
            raise ConfigurationError(f"unknown error kind {self.kind!r}")
        if self.kind == "per_row" and self.vector is None:
            raise ConfigurationError("per_row error needs a vector")

    @classmethod
    def constant(cls, value: float) -> "ErrorSpec":
        return cls("constant", float(value))

    @classmethod
    def per_row(cls, vector) -> "ErrorSpec":
        return cls("per_row", 0.0, np.asarray(vector, dtype=float))

    @classmethod
    def random(cls, scale: float) -> "ErrorSpec":
        return cls("random", float(scale))

    def norm_sq(self, m: int) -> float:
        """Squared norm of the equivalent length-``m`` error vector."""
        if self.kind == "none":
            return 0.0
        if self.kind == "constant":
            return m * self.value**2
        if self.kind == "per_row":
            return float(self.vector @ self.vector)
        # expected squared norm of a fresh N(0, value^2) vector
        return m * self.value**2


HONEST = ErrorSpec()


@dataclass(frozen=True)
class CategorySpec:
    index: int
    count: int
    error: ErrorSpec


@dataclass(frozen=True)
class Response:
    worker: int
    value: float


class WorkerPool:
    """N workers split into category 0 (honest) and adversarial categories 1..k.

    Immutable after construction. ``assignment[w]`` is the category of worker
    ``w``.
    """

    def __init__(self, categories: Sequence[CategorySpec], assignment: np.ndarray):
        self.categories = tuple(categories)
        self.assignment = np.asarray(assignment, dtype=np.int64)
        self.assignment.setflags(write=False)
        self.N = len(self.assignment)
        self._validate()

        k1 = len(self.categories)
        self._const = np.zeros(k1)
        self._random_scale = np.zeros(k1)
        self._per_row = {}
        for cat in self.categories:
            e = cat.error
            if e.kind == "constant":
                self._const[cat.index] = e.value
            elif e.kind == "random":
                self._random_scale[cat.index] = e.value
            elif e.kind == "per_row":
                self._per_row[cat.index] = e.vector
        self._has_random = bool(np.any(self._random_scale))
        self._worker_scale = self._random_scale[self.assignment]

    def _validate(self):
        if not self.categories or self.categories[0].error.kind != "none":
            raise ConfigurationError("category 0 must exist and be honest")
        for i, cat in enumerate(self.categories):
            if cat.index != i:
                raise ConfigurationError("categories must be indexed 0..k in order")
            if cat.count < 0:
                raise ConfigurationError(f"category {i} has negative count")
            if i > 0 and cat.error.kind == "none":
                raise ConfigurationError(f"adversarial category {i} has no error")
        counts = np.bincount(self.assignment, minlength=len(self.categories))
        if len(counts) != len(self.categories) or any(
            counts[c.index] != c.count for c in self.categories
        ):
            raise ConfigurationError("assignment does not match category counts")

    @property
    def k(self) -> int:
        return len(self.categories) - 1

    @property
    def counts(self) -> list[int]:
        return [c.count for c in self.categories]

    @property
    def adversaries(self) -> set[int]:
        return set(np.flatnonzero(self.assignment != 0).tolist())

    def category_of(self, w: int) -> int:
        if not 0 <= w < self.N:
            raise KeyError(f"unknown worker {w}")
        return int(self.assignment[w])

    def category_offsets(self, row_index: int) -> np.ndarray:
        """Deterministic offset of every category at ``row_index``."""
        off = self._const.copy()
        for idx, vec in self._per_row.items():
            off[idx] = vec[row_index]
        return off

    def responses(self, workers: np.ndarray, row_index: int, coeff: float,
                  rng: np.random.Generator | None = None) -> np.ndarray:
        """Values returned by ``workers`` for one broadcast row.

        Vectorized equivalent of calling :func:`worker_compute` per worker.
        """
        cats = self.assignment[workers]
        values = coeff + self.category_offsets(row_index)[cats]
        if self._has_random:
            scale = self._worker_scale[workers]
            noisy = scale > 0
            if np.any(noisy):
                values[noisy] += scale[noisy] * rng.standard_normal(int(noisy.sum()))
        return values


def _check_realizable(N, fractions):
    raw = [N * p for p in fractions]
    counts = [int(round(r)) for r in raw]
    if sum(counts) != int(round(N * sum(fractions))) or sum(counts) > N:
        raise ConfigurationError(
            f"fractions {list(fractions)} do not give integer counts summing to N={N}"
        )
    return counts


def build_pool(N: int, category_fractions: Sequence[tuple[float, ErrorSpec]],
               seed: int = 0) -> WorkerPool:
    """Build a pool from adversarial ``(fraction, error)`` pairs.

    Each adversarial category gets ``round(N * fraction)`` workers and the
    honest category takes the rest. The worker-to-category map is a seeded
    random permutation.
    """
    if N < 1:
        raise ConfigurationError("N must be positive")
    fractions = [float(p) for p, _ in category_fractions]
    if any(p < 0 or p > 1 for p in fractions):
        raise ConfigurationError("fractions must lie in [0, 1]")
    if sum(fractions) > 1 + 1e-12:
        raise ConfigurationError("adversarial fractions sum above 1")
    counts = _check_realizable(N, fractions)
    return build_pool_from_counts([N - sum(counts), *counts],
                                  [e for _, e in category_fractions], seed)


def build_pool_from_counts(counts: Sequence[int], errors: Sequence[ErrorSpec],
                           seed: int = 0) -> WorkerPool:
    """Build a pool from integer counts ``(N_0, N_1, ..., N_k)``."""
    counts = [int(c) for c in counts]
    if len(errors) != len(counts) - 1:
        raise ConfigurationError("need one error spec per adversarial category")
    if any(c < 0 for c in counts):
        raise ConfigurationError("counts must be nonnegative")
    cats = [CategorySpec(0, counts[0], HONEST)]
    cats += [CategorySpec(i + 1, c, e) for i, (c, e) in enumerate(zip(counts[1:], errors))]
    labels = np.repeat(np.arange(len(counts)), counts)
    rng = np.random.default_rng(seed)
    return WorkerPool(cats, rng.permutation(labels))


def sample_workers(pool: WorkerPool, active: Iterable[int], n: int,
                   rng: np.random.Generator) -> np.ndarray:
    """Uniform sample of ``n`` distinct ids from ``active``."""
    act = np.asarray(active if isinstance(active, np.ndarray) else sorted(active),
                     dtype=np.int64)
    if n > len(act):
        raise InsufficientWorkersError(f"asked for {n} workers, only {len(act)} active")
    return rng.choice(act, size=n, replace=False)


def worker_compute(pool: WorkerPool, w: int, row_index: int, A_i: np.ndarray,
                   b_i: float, x: np.ndarray, rng: np.random.Generator | None = None) -> Response:
    cat = pool.category_of(w)
    c = true_coefficient(x, A_i, b_i)
    if cat == 0:
        return Response(w, c)
    spec = pool.categories[cat].error
    if spec.kind == "constant":
        return Response(w, c + spec.value)
    if spec.kind == "per_row":
        return Response(w, c + float(spec.vector[row_index]))
    return Response(w, c + spec.value * float(rng.standard_normal()))
