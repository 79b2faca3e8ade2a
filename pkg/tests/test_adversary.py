import numpy as np
import pytest
from scipy import stats

from modekaczmarz.adversary import (ConfigurationError, ErrorSpec, InsufficientWorkersError,
                                    build_pool, build_pool_from_counts, sample_workers,
                                    worker_compute)
from modekaczmarz.kaczmarz import true_coefficient


def test_paper_pool_counts():
    pool = build_pool(100, [(0.08, ErrorSpec.constant(float(i))) for i in range(1, 11)], seed=0)
    assert pool.counts == [20] + [8] * 10
    assert pool.k == 10
    assert len(pool.adversaries) == 80


def test_all_honest_pool():
    pool = build_pool(100, [], seed=1)
    assert pool.counts == [100]
    assert not pool.adversaries


def test_small_exact_pool():
    pool = build_pool(6, [(1 / 3, ErrorSpec.constant(2.0))], seed=0)
    assert pool.counts == [4, 2]


@pytest.mark.parametrize("fractions", [
    [(-0.1, ErrorSpec.constant(1.0))],
    [(0.8 / 15, ErrorSpec.constant(1.0))] * 15,   # 5.33 workers each
    [(0.7, ErrorSpec.constant(1.0)), (0.7, ErrorSpec.constant(2.0))],
])
def test_unrealizable_pools_rejected(fractions):
    with pytest.raises(ConfigurationError):
        build_pool(100, fractions)


def test_pool_partition_and_seeded_assignment():
    a = build_pool_from_counts([5, 3, 2], [ErrorSpec.constant(1), ErrorSpec.constant(2)], seed=4)
    b = build_pool_from_counts([5, 3, 2], [ErrorSpec.constant(1), ErrorSpec.constant(2)], seed=4)
    np.testing.assert_array_equal(a.assignment, b.assignment)
    assert sorted(np.bincount(a.assignment).tolist()) == [2, 3, 5]
    assert a.N == 10


def test_sampling_examples():
    pool = build_pool(100, [], seed=0)
    rng = np.random.default_rng(0)
    assert sorted(sample_workers(pool, range(100), 100, rng).tolist()) == list(range(100))
    assert sample_workers(pool, {3}, 1, rng).tolist() == [3]
    with pytest.raises(InsufficientWorkersError):
        sample_workers(pool, {1, 2}, 3, rng)


def test_sampling_uniform_chi_squared():
    N, draws = 20, 100_000
    pool = build_pool(N, [], seed=0)
    rng = np.random.default_rng(123)
    hits = np.zeros(N)
    for _ in range(draws):
        hits[sample_workers(pool, np.arange(N), 1, rng)[0]] += 1
    # per-id frequency within 3 sigma
    sigma = np.sqrt(draws * (1 / N) * (1 - 1 / N))
    assert np.all(np.abs(hits - draws / N) < 3 * sigma + 1)
    assert stats.chisquare(hits).pvalue > 0.01


def test_worker_compute_examples(small_problem):
    pool = build_pool_from_counts([3, 2, 1], [ErrorSpec.constant(5.0), ErrorSpec.per_row(np.arange(100.0))],
                                  seed=2)
    A, b, xs = small_problem.A, small_problem.b, small_problem.x_star
    honest = [w for w in range(6) if pool.category_of(w) == 0]
    cat1 = [w for w in range(6) if pool.category_of(w) == 1]
    cat2 = [w for w in range(6) if pool.category_of(w) == 2]
    assert abs(worker_compute(pool, honest[0], 0, A[0], b[0], xs).value) < 1e-14
    x = np.zeros(10)
    c = true_coefficient(x, A[7], b[7])
    assert worker_compute(pool, honest[0], 7, A[7], b[7], x).value == c
    r1 = worker_compute(pool, cat1[0], 7, A[7], b[7], x)
    assert r1.value == c + 5.0
    assert r1.value == worker_compute(pool, cat1[1], 7, A[7], b[7], x).value
    assert worker_compute(pool, cat2[0], 7, A[7], b[7], x).value == c + 7.0
    with pytest.raises(KeyError):
        worker_compute(pool, 99, 0, A[0], b[0], x)


def test_constant_offset_example():
    pool = build_pool_from_counts([1, 1], [ErrorSpec.constant(5.0)], seed=0)
    w = int(np.flatnonzero(pool.assignment == 1)[0])
    r = worker_compute(pool, w, 0, np.array([1.0, 0.0]), 1.0, np.zeros(2))
    assert r.value == 6.0


def test_vectorized_responses_match_worker_compute(small_problem):
    errors = [ErrorSpec.constant(0.5), ErrorSpec.per_row(np.linspace(-1, 1, 100)), ErrorSpec.random(2.0)]
    pool = build_pool_from_counts([6, 2, 2, 2], errors, seed=9)
    x = np.random.default_rng(1).standard_normal(10)
    A, b = small_problem.A, small_problem.b
    workers = np.arange(12)
    c = true_coefficient(x, A[3], b[3])
    vec = pool.responses(workers, 3, c, np.random.default_rng(5))
    rng = np.random.default_rng(5)
    one = [worker_compute(pool, int(w), 3, A[3], b[3], x, rng).value for w in workers]
    np.testing.assert_array_equal(vec, one)
    honest = pool.assignment[workers] == 0
    assert np.all(vec[honest] == c)


def test_random_errors_never_agree():
    pool = build_pool_from_counts([2, 8], [ErrorSpec.random(1.0)], seed=0)
    vals = pool.responses(np.arange(10), 0, 0.25, np.random.default_rng(0))
    adv = vals[pool.assignment == 1]
    assert len(np.unique(adv)) == len(adv)


def test_error_norms():
    assert ErrorSpec.constant(2.0).norm_sq(10) == 40.0
    assert ErrorSpec.per_row([3.0, 4.0]).norm_sq(2) == 25.0
    assert ErrorSpec().norm_sq(5) == 0.0
    with pytest.raises(ConfigurationError):
        ErrorSpec("bogus")
