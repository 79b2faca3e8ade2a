"""
Quickstart: solving a system with untrustworthy workers
=======================================================

Build a consistent 1000 x 100 system, hire 100 workers of whom 20% lie in
ten different ways, and let the mode of their answers drive a randomized
Kaczmarz solve.
"""

# %%
import numpy as np

from modekaczmarz import ErrorSpec, SolveConfig, build_pool_from_counts, generate_problem, run
from modekaczmarz.analysis import equal_split_counts

problem = generate_problem(1000, 100, seed=0)
print(problem.A.shape, "rows normalized:", np.allclose(np.linalg.norm(problem.A, axis=1), 1))

# %%
# Category 0 is honest; each other category adds its own constant to the step.
counts = equal_split_counts(100, 0.2, 10)
offsets = np.random.default_rng(1).standard_normal(10)
pool = build_pool_from_counts(counts, [ErrorSpec.constant(v) for v in offsets], seed=0)
print("counts per category:", pool.counts)

# %%
# Ten workers answer each row; a group needs ceil(10 * 0.8) = 8 matching answers.
cfg = SolveConfig(n=10, p_threshold=0.2, max_iter=20_000, seed=0)
trace = run(problem, pool, cfg)
print(f"iterations {trace.iterations}, updates {trace.updates}, skips {trace.skips}")
print(f"corrupted updates {trace.corrupted_updates}")
for j in (0, 99, 999, 4999, 19_999):
    print(f"  after {j + 1:6d} iterations: error {trace.error_norm[j]:.3e}")

# %%
# Same problem, honest pool: the solver reduces to plain randomized Kaczmarz.
honest = build_pool_from_counts([100], [], seed=0)
plain = run(problem, honest, SolveConfig(n=10, p_threshold=0.0, max_iter=20_000, seed=0))
print(f"honest pool final error {plain.final_error:.3e}, skips {plain.skips}")
