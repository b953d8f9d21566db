"""
Tilting and the ballot estimate
===============================

Under the tilt exp(lam Y_k) each phase follows a von Mises law, and the
scale increment picks up a drift close to lam sigma_k^2. The ballot
probability of a walk staying below a ceiling decays like n^{-3/2}.
"""
import numpy as np

from randzeta import analytic
from randzeta.model import eval_increments, sample_phases_tilted_one
from randzeta.primes import table_for_depth
from randzeta.walks import BallotQuery, ballot_dp, ballot_mc

table = table_for_depth(3)
lam = 1.0
ph = sample_phases_tilted_one(table, lam, 0.0, 3, seed=5, replicate=range(20000))
y = eval_increments(ph, table, 0.0, 3)
mean, var = analytic.tilted_moments_one(3, lam)
print(f"tilted Y_3: sample mean {y[:, 3].mean():.4f}, exact {mean:.4f}, lam sigma_3^2 {lam * analytic.variance_scale(3):.4f}")
print(f"            sample var  {y[:, 3].var():.4f}, exact {var:.4f}")

# scale 0 is never tilted and keeps mean zero
print(f"Y_0 mean under the tilt: {y[:, 0].mean():+.4f}")

print("\n  n    P(stay <= 1, end in (0,1))   n^1.5 P")
for n in (16, 64, 256, 1024):
    est = ballot_dp(BallotQuery(n, 1.0, 0.0, 1.0))
    print(f"{n:5d}   {est.value:.6e} (err {est.error:.0e})   {est.value * n**1.5:.3f}")

mc = ballot_mc(BallotQuery(64, 1.0, 0.0, 1.0), paths=2 * 10**5, seed=1)
print(f"\nMonte Carlo at n=64: {mc.value:.6e} +- {mc.error:.1e}")
