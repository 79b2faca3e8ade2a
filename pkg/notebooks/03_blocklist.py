"""
Learning who to stop asking
===========================

When 80% of workers lie, liar categories with enough members can win the
vote and drag the iterate away. Counting how often each worker disagrees
with the applied answer identifies them.
"""

# %%
import numpy as np

from modekaczmarz import BlockPolicy, SolveConfig, generate_problem, precision_recall, run
from modekaczmarz.adversary import ErrorSpec, build_pool_from_counts
from modekaczmarz.analysis import equal_split_counts

problem = generate_problem(1000, 100, seed=0)
counts = equal_split_counts(100, 0.8, 10)
offsets = np.random.default_rng(2).standard_normal(10)
pool = build_pool_from_counts(counts, [ErrorSpec.constant(v) for v in offsets], seed=0)

# %%
# Without a block-list, n = 30 gives liar categories a real chance to win.
off = run(problem, pool, SolveConfig(n=30, p_threshold=0.8, max_iter=5000, seed=0))
print(f"block-list off: final error {off.final_error:.3e}, corrupted updates {off.corrupted_updates}")

# %%
cfg = SolveConfig(n=30, p_threshold=0.8, max_iter=5000, blocklist=True,
                  policy=BlockPolicy("fraction", 0.5), period=100,
                  min_active=1, short_active="shrink", seed=0)
on = run(problem, pool, cfg)
prec, rec = precision_recall(on.blocklist.blocked, pool.adversaries)
print(f"block-list on : final error {on.final_error:.3e}, blocked {len(on.blocklist.blocked)}")
print(f"precision {prec:.3f}, recall {rec:.3f}")

# %%
# Non-mode rate per category after the run
st = on.blocklist
rate = st.counter / np.maximum(st.participation, 1)
for ell in range(pool.k + 1):
    members = pool.assignment == ell
    print(f"category {ell:2d}: mean non-mode rate {rate[members].mean():.2f}")
