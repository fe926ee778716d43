"""Monte Carlo check of the t(m-1) reference used by the finite-population rule.

Draws m estimates and a target from the same normal distribution and reports how
often the simplified interval covers the target, for a range of m.
"""

import numpy as np

from mipool.data import RepeatedEstimates
from mipool.pooling import pool_simplified

TRIALS = 20_000

gen = np.random.default_rng(1)
for m in (2, 3, 5, 10, 20):
    q = gen.standard_normal((TRIALS, m))
    truth = gen.standard_normal(TRIALS)
    zeros = np.zeros(m)
    hits = sum(pool_simplified(RepeatedEstimates(row, zeros)).covers(t) for row, t in zip(q, truth))
    print(f"m={m:>2}  coverage={hits / TRIALS:.4f}")
