"""
The random field and its scales
===============================

Sample one realisation of X_3 on a dyadic grid, split it into scale
increments, and compare the exact per-scale covariances with the
cosine-integral approximation.
"""
import numpy as np

from randzeta import analytic
from randzeta.model import dyadic_grid, eval_field_grid, eval_increments_grid, sample_phases
from randzeta.primes import table_for_depth

# primes up to exp(2^3), i.e. scales 0..3
table = table_for_depth(3)
print(f"{len(table)} primes, largest {table.primes[-1]}")

phases = sample_phases(table, seed=1, replicate=0)
grid = dyadic_grid(8)
x = eval_field_grid(phases, table, grid, -1, 3)
y = eval_increments_grid(phases, table, grid, 3)
print(f"max X_3 on 256 points: {x.max():.3f} at h = {grid[x.argmax()]:.4f}")
print("scale sums match the field:", np.allclose(y.sum(axis=0), x))

# the coarse scales move slowly in h, the fine ones quickly
for k in range(4):
    rough = np.abs(np.diff(y[k])).mean()
    print(f"  scale {k}: sd over grid {y[k].std():.3f}, mean step {rough:.4f}")

# covariance at lag 1/4: flat up to the branching point 2, then decaying
dh = 0.25
print(f"\nbranching point of dh={dh}: {analytic.branching_point(dh)}")
print(" k   sigma_k^2   rho_k(exact)   rho_k(integral)")
for k in range(5):
    ex = analytic.ScaleStatistics(k)
    it = analytic.ScaleStatistics(k, "integral")
    print(f" {k}   {ex.sigma_sq_k:.5f}     {ex.rho_k(dh):+.5f}       {it.rho_k(dh):+.5f}")

tot = analytic.covariance_total(2.0**-3, 4)
print(f"\nE[X_4(0) X_4(1/8)] = {tot.value:.4f}, log-predictor {tot.log_predictor:.4f}")
