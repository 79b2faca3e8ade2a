"""Exact mode distributions and the convergence bound.

All combinatorial quantities are computed with Python integers and
:class:`fractions.Fraction`, so results are exact rationals. Floats appear
only in the Monte Carlo oracle, the non-mode count pmf and the bound.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np


class InstanceTooLargeError(ValueError):
    pass


class RankDeficiencyError(ValueError):
    pass


@dataclass(frozen=True)
class CategoryCounts:
    """Worker counts ``(N_0, N_1, ..., N_k)`` with ``N_0`` honest, plus the sample size ``n``."""

    counts: tuple[int, ...]
    n: int

    def __init__(self, counts: Sequence[int], n: int):
        counts = tuple(int(c) for c in counts)
        if not counts or any(c < 0 for c in counts):
            raise ValueError(f"counts must be nonnegative, got {counts}")
        if not 1 <= n <= sum(counts):
            raise ValueError(f"need 1 <= n <= N, got n={n}, N={sum(counts)}")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "n", int(n))

    @property
    def N(self) -> int:
        return sum(self.counts)

    @property
    def k(self) -> int:
        return len(self.counts) - 1

    @property
    def p(self) -> Fraction:
        return Fraction(self.N - self.counts[0], self.N)

    @property
    def i0(self) -> int:
        """Minimum group size for a category to count as the mode."""
        by_categories = -(-self.n // (self.k + 1))
        by_threshold = math.ceil(self.n * (1 - self.p))
        return max(by_categories, by_threshold)


def equal_split_counts(N: int, p: float, k: int) -> list[int]:
    """Counts for ``k`` adversarial categories sharing ``round(N p)`` workers as evenly as possible.

    When ``N p / k`` is not an integer the first ``N p mod k`` categories get
    one extra worker.
    """
    if k < 1:
        return [N]
    adv = int(round(N * p))
    base, extra = divmod(adv, k)
    return [N - adv] + [base + 1] * extra + [base] * (k - extra)


def binomial(a: int, i: int) -> int:
    """Exact ``C(a, i)``, zero when ``a < i``."""
    if i < 0:
        raise ValueError("binomial lower index must be nonnegative")
    if a < i:
        return 0
    return math.comb(a, i)


def truncation_polynomial(N_r: int, i: int) -> list[int]:
    """Coefficients ``[C(N_r, 0), ..., C(N_r, i-1)]``, lowest degree first."""
    if i < 1:
        raise ValueError("truncation degree bound must be at least 1")
    return [binomial(N_r, j) for j in range(i)]


def poly_mul(p: Sequence[int], q: Sequence[int], max_degree: int | None = None) -> list[int]:
    """Integer polynomial product, optionally truncated above ``max_degree``."""
    top = len(p) + len(q) - 2
    if max_degree is not None:
        top = min(top, max_degree)
    out = [0] * (top + 1)
    for a, pa in enumerate(p):
        if pa == 0 or a > top:
            continue
        for b in range(min(len(q), top - a + 1)):
            out[a + b] += pa * q[b]
    return out


def coefficient_a(i: int, ell: int, cc: CategoryCounts) -> int:
    """Coefficient of ``x^(n-i)`` in the product of truncation polynomials over categories ``r != ell``.

    Counts the ways to fill the remaining ``n - i`` slots so that every other
    category contributes at most ``i - 1`` workers.
    """
    if not 0 <= ell <= cc.k:
        raise ValueError(f"category {ell} out of range 0..{cc.k}")
    if i < 1:
        raise ValueError("i must be at least 1")
    target = cc.n - i
    if target < 0:
        return 0
    prod = [1]
    for r, N_r in enumerate(cc.counts):
        if r != ell:
            prod = poly_mul(prod, truncation_polynomial(N_r, i), max_degree=target)
    return prod[target] if target < len(prod) else 0


def mode_category_probability(cc: CategoryCounts, ell: int) -> Fraction:
    """Probability that category ``ell`` is the strict mode with at least ``i0`` workers."""
    total = sum(binomial(cc.counts[ell], i) * coefficient_a(i, ell, cc)
                for i in range(cc.i0, cc.n + 1))
    return Fraction(total, math.comb(cc.N, cc.n))


@dataclass(frozen=True)
class ModeProbabilities:
    per_category: tuple[Fraction, ...]
    q: Fraction
    q_conditional: tuple[Fraction, ...]
    i0: int

    @property
    def q0(self) -> Fraction:
        return self.q_conditional[0]

    def to_dict(self) -> dict:
        def fr(x: Fraction) -> dict:
            return {"exact": f"{x.numerator}/{x.denominator}", "decimal": float(x)}

        return {
            "i0": self.i0,
            "q": fr(self.q),
            "per_category": [fr(x) for x in self.per_category],
            "q_conditional": [fr(x) for x in self.q_conditional],
        }


def mode_probabilities(cc: CategoryCounts) -> ModeProbabilities:
    per = tuple(mode_category_probability(cc, ell) for ell in range(cc.k + 1))
    q = sum(per, Fraction(0))
    cond = tuple(x / q for x in per) if q else tuple(Fraction(0) for _ in per)
    return ModeProbabilities(per, q, cond, cc.i0)


def mode_exists_probability(cc: CategoryCounts) -> Fraction:
    return sum((mode_category_probability(cc, ell) for ell in range(cc.k + 1)), Fraction(0))


def worker_mode_probability(cc: CategoryCounts, ell: int) -> tuple[Fraction, Fraction, Fraction]:
    """``(P(w sampled), P(w in mode | w sampled), joint)`` for a worker of category ``ell``.

    Given ``w`` is sampled, its category needs ``i`` further members among
    the other ``n - 1`` slots while every other category stays below
    ``i + 1``, which is the coefficient ``a_{i+1, ell}``.
    """
    N_l = cc.counts[ell]
    if N_l < 1:
        raise ValueError(f"category {ell} is empty")
    N, n = cc.N, cc.n
    p_w = Fraction(math.comb(N - 1, n - 1), math.comb(N, n))
    total = sum(binomial(N_l - 1, i) * coefficient_a(i + 1, ell, cc)
                for i in range(max(cc.i0 - 1, 0), n))
    given = Fraction(total, math.comb(N - 1, n - 1))
    return p_w, given, p_w * given


def non_mode_count_pmf(S: int, s: int, P_joint, N: int, *, normalized: bool = False,
                       n: int | None = None) -> float:
    """Probability that a worker is outside the mode ``s`` times in ``S`` iterations.

    The default evaluates ``C(S,s) (1-P)^s (1 - 1/N + P)^(S-s)`` as written,
    which is not a distribution over ``s``. With ``normalized=True`` the
    per-iteration non-mode probability is ``n/N - P`` and the result is a
    binomial pmf (``n`` is then required).
    """
    if not 0 <= s <= S:
        raise ValueError("need 0 <= s <= S")
    P = float(P_joint)
    if normalized:
        if n is None:
            raise ValueError("normalized variant needs n")
        hit, miss = n / N - P, 1 - n / N + P
    else:
        hit, miss = 1 - P, 1 - 1 / N + P
    if (hit == 0 and s > 0) or (miss == 0 and S - s > 0):
        return 0.0
    log_val = math.lgamma(S + 1) - math.lgamma(s + 1) - math.lgamma(S - s + 1)
    if s:
        log_val += s * math.log(hit)
    if S - s:
        log_val += (S - s) * math.log(miss)
    return math.exp(log_val)


@dataclass(frozen=True)
class ConvergenceBoundInputs:
    sigma_min_sq: float
    frob_sq: float
    error_norms_sq: tuple[float, ...]
    q_conditional: tuple[float, ...]
    x0_error_sq: float

    @property
    def alpha(self) -> float:
        return 1.0 - self.sigma_min_sq / self.frob_sq

    @classmethod
    def from_matrix(cls, A: np.ndarray, error_norms_sq: Sequence[float],
                    q_conditional: Sequence, x0_error_sq: float) -> "ConvergenceBoundInputs":
        sv = np.linalg.svd(np.asarray(A, dtype=float), compute_uv=False)
        sigma_min_sq = float(sv[-1] ** 2) if A.shape[0] >= A.shape[1] else 0.0
        return cls(sigma_min_sq, float(np.sum(sv**2)), tuple(float(e) for e in error_norms_sq),
                   tuple(float(q) for q in q_conditional), float(x0_error_sq))


def _check_alpha(alpha: float) -> None:
    if not alpha < 1.0:
        raise RankDeficiencyError("alpha >= 1: A lacks full column rank")


def convergence_bound(inp: ConvergenceBoundInputs, iteration):
    """Upper bound on the expected squared error after ``iteration + 1`` updates.

    Accepts a scalar or an array of iteration indices.
    """
    alpha = inp.alpha
    _check_alpha(alpha)
    ks = np.asarray(iteration, dtype=float)
    decay = alpha ** (ks + 1)
    corr = sum(q * e for q, e in zip(inp.q_conditional[1:], inp.error_norms_sq))
    out = decay * inp.x0_error_sq + (1 - decay) / (1 - alpha) * corr / inp.frob_sq
    return float(out) if np.ndim(out) == 0 else out


def convergence_bound_uniform(alpha: float, frob_sq: float, C: float, q0: float,
                              x0_error_sq: float, iteration):
    """Bound variant with a uniform error constant ``C`` in the ``C * q0`` form.

    The general bound with ``||e_l|| <= C`` implies ``C**2 * (1 - q0)`` instead;
    this form is kept as stated and is not used elsewhere.
    """
    _check_alpha(alpha)
    decay = alpha ** (np.asarray(iteration, dtype=float) + 1)
    out = decay * x0_error_sq + (1 - decay) / (1 - alpha) * C * float(q0) / frob_sq
    return float(out) if np.ndim(out) == 0 else out


# -- oracles -------------------------------------------------------------------

def strict_mode_winner(mult: Sequence[int], i0: int) -> int | None:
    """Category holding a unique maximal count of at least ``i0``, else None."""
    top = max(mult)
    if top < i0 or list(mult).count(top) != 1:
        return None
    return list(mult).index(top)


def brute_force_mode_probability(cc: CategoryCounts, limit: int = 10**6) -> tuple[Fraction, ...]:
    """Enumerate every ``n``-subset of workers and tally the strict-mode category."""
    total = math.comb(cc.N, cc.n)
    if total > limit:
        raise InstanceTooLargeError(f"C({cc.N},{cc.n}) = {total} subsets exceeds {limit}")
    labels = [ell for ell, c in enumerate(cc.counts) for _ in range(c)]
    tally = [0] * (cc.k + 1)
    i0 = cc.i0
    for subset in itertools.combinations(range(cc.N), cc.n):
        mult = [0] * (cc.k + 1)
        for w in subset:
            mult[labels[w]] += 1
        win = strict_mode_winner(mult, i0)
        if win is not None:
            tally[win] += 1
    return tuple(Fraction(t, total) for t in tally)


def brute_force_worker_mode_probability(cc: CategoryCounts, ell: int) -> Fraction:
    """P(w in mode | w sampled) by enumerating subsets that contain one fixed worker of ``ell``."""
    labels = [c for c, cnt in enumerate(cc.counts) for _ in range(cnt)]
    w = labels.index(ell)
    others = [v for v in range(cc.N) if v != w]
    hits = total = 0
    for rest in itertools.combinations(others, cc.n - 1):
        mult = [0] * (cc.k + 1)
        mult[ell] += 1
        for v in rest:
            mult[labels[v]] += 1
        total += 1
        hits += strict_mode_winner(mult, cc.i0) == ell
    return Fraction(hits, total)


@dataclass(frozen=True)
class MonteCarloEstimate:
    per_category: np.ndarray
    std_error: np.ndarray
    q: float
    q_std_error: float
    trials: int


def mc_mode_probability(cc: CategoryCounts, trials: int, seed: int = 0,
                        batch: int = 50_000) -> MonteCarloEstimate:
    """Monte Carlo frequency of each category being the strict mode."""
    if trials < 1:
        raise ValueError("trials must be positive")
    rng = np.random.default_rng(seed)
    labels = np.repeat(np.arange(cc.k + 1), cc.counts)
    cats = np.arange(cc.k + 1)
    tally = np.zeros(cc.k + 1, dtype=np.int64)
    done = 0
    while done < trials:
        B = min(batch, trials - done)
        keys = rng.random((B, cc.N))
        idx = np.argpartition(keys, cc.n - 1, axis=1)[:, : cc.n]
        mult = (labels[idx][:, :, None] == cats).sum(axis=1)
        top = mult.max(axis=1)
        unique = (mult == top[:, None]).sum(axis=1) == 1
        ok = unique & (top >= cc.i0)
        tally += np.bincount(mult[ok].argmax(axis=1), minlength=cc.k + 1)
        done += B
    est = tally / trials
    q = est.sum()
    return MonteCarloEstimate(est, np.sqrt(est * (1 - est) / trials), float(q),
                              float(np.sqrt(q * (1 - q) / trials)), trials)
