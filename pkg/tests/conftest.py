import numpy as np
import pytest

from modekaczmarz.adversary import ErrorSpec, build_pool_from_counts
from modekaczmarz.analysis import equal_split_counts
from modekaczmarz.kaczmarz import generate_problem


@pytest.fixture(scope="session")
def small_problem():
    return generate_problem(100, 10, 0.0, seed=3)


@pytest.fixture(scope="session")
def paper_problem():
    return generate_problem(1000, 100, 0.0, seed=0)


def constant_pool(N, p, k, seed=0, scale=1.0):
    counts = equal_split_counts(N, p, k) if k else [N]
    rng = np.random.default_rng([seed, 7])
    errors = [ErrorSpec.constant(scale * v) for v in rng.standard_normal(len(counts) - 1)]
    return build_pool_from_counts(counts, errors, seed)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
