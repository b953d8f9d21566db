"""
Maxima: branching random walk versus independent points
=======================================================

The maximum of a branching random walk of depth n sits at
n log 2 - (3/4) log n + O(1) for this variance, while 2^n independent
Gaussians with the same variance reach n log 2 - (1/4) log n. Fit both
laws on a depth sweep.
"""
import time

import numpy as np

from randzeta.analytic import m_n
from randzeta.walks import brw_max_law, brw_sweep, iid_sweep

depths = [12, 14, 16, 18, 20]

# exact medians from the distributional recursion, for reference
exact = [brw_max_law(n).median() for n in depths]

t0 = time.perf_counter()
brw = brw_sweep(depths, 20000, seed=3, top_levels=8, bootstrap=50)
iid = iid_sweep(depths, 20000, seed=3, bootstrap=50)
print(f"sweeps took {time.perf_counter() - t0:.1f}s")

print(" n   m_n(0)   BRW median (exact)   i.i.d. median")
for n, a, b, c in zip(depths, brw.medians, exact, iid.medians):
    print(f"{n:2d}   {m_n(n):6.3f}   {a:6.3f} ({b:6.3f})      {c:6.3f}")

for name, res in (("BRW", brw), ("i.i.d.", iid)):
    f, se = res.fit, res.fit_se
    print(f"{name:7s} alpha = {f.alpha:.4f} +- {se.alpha:.4f}, beta = {f.beta:.3f} +- {se.beta:.3f}")
print(f"log 2 = {np.log(2):.4f}; targets beta = 0.75 (BRW), 0.25 (i.i.d.)")
