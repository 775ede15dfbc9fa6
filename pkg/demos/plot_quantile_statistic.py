"""
Comparing sorted local statistics with expected quantiles
=========================================================

A global statistic for many streams should react both when one stream
drifts a lot and when many drift a little. Here we build the quantile
statistic from a pool of steady-state CUSUM values and watch how it
responds to each situation.
"""

import numpy as np

from hdmonitor import CusumFamily, CusumParams, PoolConfig, expected_quantiles, generate_pool, gl_soft, gt

###############################################################################
# A pool of in-control CUSUM values
# ---------------------------------
# Each pool entry is the state of one CUSUM after 2000 in-control steps.
# A third of them sit exactly at zero, which is why a closed-form CDF is
# awkward and an empirical one is used instead.

family = CusumFamily(CusumParams(mu=0.5))
pool = generate_pool(PoolConfig(family, pool_size=20_000, burn_in=2000, seed=1))
print(f"pool mean {pool.sorted_values.mean():.3f}, share at zero {np.mean(pool.sorted_values == 0):.3f}")

###############################################################################
# Expected quantiles for m = 100 streams
# --------------------------------------
# Sorted local statistics are compared with the pool quantiles at the
# continuity-corrected positions (i - 3/4) / (m - 1/2).

m = 100
table = expected_quantiles(pool, m)
print("first positions:", np.round(table.positions[:3], 5))
print("top expected quantiles:", np.round(table.expected_q[-3:], 3))

###############################################################################
# Two kinds of departure
# ----------------------
# Draw 100 in-control values from the pool, then either push one of them far
# up or nudge twenty of them a little.

rng = np.random.default_rng(4)
base = rng.choice(pool.sorted_values, size=m)
one_big = base.copy()
one_big[0] += 8.0
many_small = base.copy()
many_small[:20] += 1.5

for name, w in [("in control", base), ("one large", one_big), ("many small", many_small)]:
    print(f"{name:>11}: quantile G = {gt(w, table):8.2f}   soft-threshold(b=0.5) = {gl_soft(w, 0.5):8.2f}")

###############################################################################
# The quantile statistic only counts the part of each order statistic that
# exceeds its own expected value, so in-control noise contributes little,
# while a soft threshold adds up every value above b.
