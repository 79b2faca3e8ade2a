import numpy as np
import pytest

from modekaczmarz._rng import rng_streams
from modekaczmarz.adversary import ErrorSpec, build_pool, build_pool_from_counts, sample_workers
from modekaczmarz.aggregation import group_responses, select_mode
from modekaczmarz.adversary import Response
from modekaczmarz.analysis import CategoryCounts, mode_probabilities
from modekaczmarz.blocklist import BlockListState, BlockPolicy, apply_policy, record_iteration
from modekaczmarz.kaczmarz import RowSampler, kaczmarz_step, row_sampling_distribution, true_coefficient
from modekaczmarz.solver import SKIPPED, SolveConfig, residual_stopping_check, run

from conftest import constant_pool


def reference_run(problem, pool, cfg):
    """Slow loop built only from the public per-step functions."""
    A, b = problem.A, problem.b
    s = rng_streams(cfg.seed)
    rows = RowSampler(row_sampling_distribution(A), s["rows"])
    state = BlockListState.fresh(pool.N, cfg.period)
    x = np.zeros(problem.d)
    errs, chosen = [], []
    for j in range(1, cfg.max_iter + 1):
        i = next(rows)
        c_true = true_coefficient(x, A[i], b[i])
        S = sample_workers(pool, state.active, cfg.n, s["workers"])
        vals = pool.responses(S, i, c_true, s["noise"])
        groups = group_responses([Response(int(w), v) for w, v in zip(S, vals)], cfg.group_tol)
        dec = select_mode(groups, cfg.n, cfg.p_threshold, s["ties"], rule=cfg.selection)
        if dec.chosen:
            x = kaczmarz_step(x, A[i], dec.group.representative)
        chosen.append(dec.chosen)
        record_iteration(state, S, dec)
        errs.append(np.linalg.norm(x - problem.x_star))
        if cfg.blocklist and j % cfg.period == 0:
            apply_policy(state, cfg.policy, cfg.effective_min_active)
    return x, np.array(errs), np.array(chosen), state


@pytest.mark.parametrize("selection", ["any", "largest", "strict"])
@pytest.mark.parametrize("blocklist", [False, True])
def test_fast_path_matches_reference(small_problem, selection, blocklist):
    pool = constant_pool(40, 0.6, 3, seed=1)
    cfg = SolveConfig(n=12, p_threshold=0.6, max_iter=600, blocklist=blocklist, period=50,
                      selection=selection, seed=4)
    tr = run(small_problem, pool, cfg)
    x, errs, chosen, state = reference_run(small_problem, pool, cfg)
    np.testing.assert_array_equal(tr.x, x)
    np.testing.assert_array_equal(tr.error_norm, errs)
    np.testing.assert_array_equal(~tr.skipped, chosen)
    np.testing.assert_array_equal(tr.blocklist.counter, state.counter)
    assert tr.blocklist.blocked == state.blocked


def test_all_honest_is_plain_rk(small_problem):
    pool = build_pool(100, [], seed=0)
    cfg = SolveConfig(n=5, p_threshold=0.0, max_iter=3000, seed=11)
    tr = run(small_problem, pool, cfg)
    A, b = small_problem.A, small_problem.b
    rows = RowSampler(row_sampling_distribution(A), rng_streams(11)["rows"])
    x = np.zeros(10)
    for j in range(3000):
        i = next(rows)
        x = kaczmarz_step(x, A[i], true_coefficient(x, A[i], b[i]))
        assert tr.rows[j] == i
    np.testing.assert_array_equal(tr.x, x)
    assert tr.skips == 0
    assert tr.final_error < 1e-10


def test_honest_example_with_tol(small_problem):
    pool = build_pool(100, [], seed=0)
    tr = run(small_problem, pool, SolveConfig(n=5, p_threshold=0.0, tol=1e-12, max_iter=5000))
    assert tr.final_error < 1e-10
    assert tr.skips == 0
    assert np.all(np.diff(tr.error_norm) <= 1e-12)
    assert tr.tol_reached_at is not None


def test_tol_exit_fires_on_repeated_row(small_problem):
    # drawing the same row twice gives |c| ~ 0, so the literal tol rule exits early
    pool = build_pool(100, [], seed=0)
    tr = run(small_problem, pool, SolveConfig(n=5, p_threshold=0.0, tol=1e-12, stop_on_tol=True))
    assert tr.status == "tol"
    assert abs(tr.applied_coeff[-1]) <= 1e-12
    assert tr.tol_reached_at == tr.iterations - 1
    assert tr.rows[-1] == tr.rows[-2]


def test_determinism_and_accounting(small_problem):
    pool = constant_pool(100, 0.8, 10, seed=0)
    cfg = SolveConfig(n=20, p_threshold=0.8, max_iter=2000, blocklist=True, min_active=20, seed=3)
    t1, t2 = run(small_problem, pool, cfg), run(small_problem, pool, cfg)
    for name in ("rows", "chosen_category", "applied_coeff", "corrupted", "error_norm", "x"):
        np.testing.assert_array_equal(getattr(t1, name), getattr(t2, name))
    assert t1.blocklist.blocked == t2.blocklist.blocked
    assert t1.updates + t1.skips == t1.iterations <= cfg.max_iter
    assert len(t1.error_by_update) == t1.updates
    assert np.all(np.isnan(t1.applied_coeff[t1.skipped]))
    assert not t1.corrupted[t1.skipped].any()


def test_streams_independent_of_blocklist(small_problem):
    pool = constant_pool(100, 0.2, 10, seed=0)
    a = run(small_problem, pool, SolveConfig(n=10, p_threshold=0.2, max_iter=500))
    b = run(small_problem, pool, SolveConfig(n=10, p_threshold=0.2, max_iter=500, blocklist=True))
    np.testing.assert_array_equal(a.rows, b.rows)


def test_corrupted_fraction_matches_theory(small_problem):
    counts = [20] + [16] * 5
    cc = CategoryCounts(counts, 10)
    mp = mode_probabilities(cc)
    pool = build_pool_from_counts(counts, [ErrorSpec.constant(v) for v in (1, 2, 3, 4, 5)], seed=0)
    tr = run(small_problem, pool, SolveConfig(n=10, p_threshold=0.8, max_iter=20_000,
                                              selection="strict", seed=2))
    u = tr.updates
    frac = tr.corrupted_updates / u
    expect = 1 - float(mp.q0)
    assert abs(frac - expect) < 3 * np.sqrt(expect * (1 - expect) / u)
    q = float(mp.q)
    assert abs(u / tr.iterations - q) < 3 * np.sqrt(q * (1 - q) / tr.iterations)
    # chosen category id lines up with corruption
    applied = ~tr.skipped
    np.testing.assert_array_equal(tr.corrupted[applied], tr.chosen_category[applied] != 0)


def test_halt_when_blocking_starves_pool(small_problem):
    pool = constant_pool(20, 0.5, 2, seed=0)
    cfg = SolveConfig(n=15, p_threshold=0.5, max_iter=5000, blocklist=True, period=10,
                      min_active=1, policy=BlockPolicy("fraction", 0.1))
    tr = run(small_problem, pool, cfg)
    assert tr.status == "insufficient_workers"
    assert tr.iterations < 5000
    assert len(tr.error_norm) == tr.iterations


def test_shrink_keeps_running(small_problem):
    pool = constant_pool(20, 0.5, 2, seed=0)
    cfg = SolveConfig(n=15, p_threshold=0.5, max_iter=800, blocklist=True, period=10,
                      min_active=1, short_active="shrink", policy=BlockPolicy("fraction", 0.1))
    tr = run(small_problem, pool, cfg)
    assert tr.status == "max_iter" and tr.iterations == 800


def test_n_larger_than_pool(small_problem):
    with pytest.raises(ValueError):
        run(small_problem, build_pool(4, [], seed=0), SolveConfig(n=5, p_threshold=0.0))


@pytest.mark.parametrize("kw", [{"n": 0}, {"max_iter": 0}, {"tol": -1.0}, {"selection": "x"}])
def test_config_validation(kw):
    base = {"n": 5, "p_threshold": 0.2}
    with pytest.raises(ValueError):
        SolveConfig(**{**base, **kw})


def test_residual_stopping_check():
    tol = 1e-6
    assert residual_stopping_check(2 * tol, tol)
    assert not residual_stopping_check(0.0, tol)
    assert not residual_stopping_check(-0.5 * tol, tol)
    assert residual_stopping_check(-3 * tol, tol)
