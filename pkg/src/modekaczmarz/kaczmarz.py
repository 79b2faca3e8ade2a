"""Dense Kaczmarz primitives: test problems, row sampling, the projection step."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DimensionError(ValueError):
    """Raised when array shapes or problem sizes are inconsistent."""


class DegenerateDistributionError(ValueError):
    """Raised when a matrix has no mass to sample rows from."""


@dataclass(frozen=True)
class Problem:
    """A linear system ``A x = b`` with known ground truth.

    ``b`` is built as ``A @ x_star + noise``; ``noise`` is all zero for a
    consistent system.
    """

    A: np.ndarray
    b: np.ndarray
    x_star: np.ndarray
    noise: np.ndarray

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def d(self) -> int:
        return self.A.shape[1]

    @property
    def consistent(self) -> bool:
        return not np.any(self.noise)


@dataclass(frozen=True)
class RowDistribution:
    probabilities: np.ndarray

    def __len__(self) -> int:
        return len(self.probabilities)


def generate_problem(m: int, d: int, noise_magnitude: float = 0.0, seed: int = 0) -> Problem:
    """Draw a row-normalized Gaussian system.

    Rows of ``A`` are standard normal then scaled to unit length, ``x_star``
    is standard normal and each noise entry is uniform on
    ``[0, noise_magnitude]``.
    """
    if d < 1 or m < d:
        raise DimensionError(f"need m >= d >= 1, got m={m}, d={d}")
    if noise_magnitude < 0:
        raise ValueError("noise_magnitude must be nonnegative")
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, d))
    A /= np.linalg.norm(A, axis=1, keepdims=True)
    x_star = rng.standard_normal(d)
    if noise_magnitude > 0:
        noise = rng.uniform(0.0, noise_magnitude, size=m)
    else:
        noise = np.zeros(m)
    b = A @ x_star + noise
    return Problem(A=A, b=b, x_star=x_star, noise=noise)


def row_sampling_distribution(A: np.ndarray) -> RowDistribution:
    """Probabilities proportional to squared row norms."""
    A = np.asarray(A, dtype=float)
    sq = np.einsum("ij,ij->i", A, A)
    total = sq.sum()
    if total <= 0 or not np.isfinite(total):
        raise DegenerateDistributionError("matrix has zero Frobenius norm")
    return RowDistribution(sq / total)


def true_coefficient(x: np.ndarray, A_i: np.ndarray, b_i: float) -> float:
    """Step length an honest worker returns: ``(b_i - <A_i, x>) / ||A_i||^2``."""
    nrm = float(A_i @ A_i)
    if nrm == 0.0:
        raise ZeroDivisionError("row has zero norm")
    return (b_i - float(A_i @ x)) / nrm


def kaczmarz_step(x: np.ndarray, A_i: np.ndarray, c: float) -> np.ndarray:
    if x.shape != A_i.shape:
        raise DimensionError(f"iterate shape {x.shape} != row shape {A_i.shape}")
    return x + c * A_i


def error_norm(x: np.ndarray, x_star: np.ndarray) -> float:
    if np.shape(x) != np.shape(x_star):
        raise DimensionError(f"shape mismatch {np.shape(x)} vs {np.shape(x_star)}")
    return float(np.linalg.norm(x - x_star))


class RowSampler:
    """Seeded stream of row indices drawn from a :class:`RowDistribution`.

    Indices are drawn in blocks so that per-iteration overhead stays small;
    two samplers built from the same seed emit the same sequence.
    """

    def __init__(self, dist: RowDistribution, rng: np.random.Generator, block: int = 4096):
        self._p = dist.probabilities
        self._m = len(self._p)
        self._uniform = bool(np.all(self._p == self._p[0]))
        self._rng = rng
        self._block = block
        self._buf = np.empty(0, dtype=np.int64)
        self._pos = 0

    def __iter__(self):
        return self

    def __next__(self) -> int:
        if self._pos >= len(self._buf):
            if self._uniform:
                self._buf = self._rng.integers(0, self._m, size=self._block)
            else:
                self._buf = self._rng.choice(self._m, size=self._block, p=self._p)
            self._pos = 0
        i = int(self._buf[self._pos])
        self._pos += 1
        return i


# -- plain-text problem format -------------------------------------------------

def _fmt_row(values) -> str:
    return " ".join(f"{v:.17g}" for v in values)


def save_problem(problem: Problem, path) -> None:
    """Write ``m d``, the rows of A, then b, then x_star (one line each)."""
    lines = [f"{problem.m} {problem.d}"]
    lines.extend(_fmt_row(row) for row in problem.A)
    lines.append(_fmt_row(problem.b))
    lines.append(_fmt_row(problem.x_star))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_problem(path) -> Problem:
    with open(path) as fh:
        rows = [ln.split() for ln in fh if ln.strip()]
    try:
        m, d = int(rows[0][0]), int(rows[0][1])
    except (IndexError, ValueError) as exc:
        raise DimensionError(f"{path}: bad header") from exc
    if len(rows) != m + 3:
        raise DimensionError(f"{path}: expected {m + 3} lines, found {len(rows)}")
    A = np.array([[float(v) for v in r] for r in rows[1 : m + 1]])
    b = np.array([float(v) for v in rows[m + 1]])
    x_star = np.array([float(v) for v in rows[m + 2]])
    if A.shape != (m, d) or b.shape != (m,) or x_star.shape != (d,):
        raise DimensionError(f"{path}: shapes do not match header {m}x{d}")
    return Problem(A=A, b=b, x_star=x_star, noise=b - A @ x_star)
