"""
How often does the honest answer win?
=====================================

Exact rational probabilities that each category forms the mode of a random
sample, checked against enumeration and Monte Carlo.
"""

# %%
from modekaczmarz import analysis as an

cc = an.CategoryCounts(an.equal_split_counts(100, 0.8, 5), n=5)
mp = an.mode_probabilities(cc)
print("counts", cc.counts, "i0", cc.i0)
print("P(mode is honest)     ", float(mp.per_category[0]))
print("P(mode is category 1) ", float(mp.per_category[1]))
print("P(any mode)           ", float(mp.q))
print("P(honest | some mode) ", float(mp.q0))
print("exact q =", mp.q)

# %%
# Small instances can be enumerated subset by subset.
small = an.CategoryCounts([5, 3, 2], n=4)
print(an.mode_probabilities(small).per_category)
print(an.brute_force_mode_probability(small))

# %%
est = an.mc_mode_probability(cc, 200_000, seed=0)
for ell, (e, s) in enumerate(zip(est.per_category, est.std_error)):
    print(f"category {ell}: MC {e:.4f} +- {s:.4f}   exact {float(mp.per_category[ell]):.4f}")

# %%
# More categories split the liars, so each is less likely to outvote the truth.
print(" k     q      q0")
for k in (5, 10, 20, 40):
    m = an.mode_probabilities(an.CategoryCounts(an.equal_split_counts(100, 0.8, k), n=5))
    print(f"{k:2d}  {float(m.q):.3f}  {float(m.q0):.3f}")

# %%
# With 20% liars in five categories of 4, a liar category can only reach the
# 80% threshold when n = 5; from n = 10 on only the honest category can be the mode.
print(" n     q       1-q0")
for n in (5, 10, 15, 20):
    m = an.mode_probabilities(an.CategoryCounts(an.equal_split_counts(100, 0.2, 5), n=n))
    print(f"{n:2d}  {float(m.q):.4f}  {float(1 - m.q0):.1e}")
