# %% Eight-point versus the certified global estimate on a noisy synthetic pair
import time

import numpy as np

from fundmat import eight_point, global_f, synthesize
from fundmat.epipolar import standardized_cost

mm = synthesize(motion_k=1, n_points=15, sigma=1.0, seed=3)
print(len(mm), "matches")

t0 = time.perf_counter()
F8 = eight_point(mm)
t8 = time.perf_counter() - t0
t0 = time.perf_counter()
FG = global_f(mm)
tg = time.perf_counter() - t0

for name, F, dt in (("eight-point", F8, t8), ("global", FG, tg)):
    print(f"{name:12s} cost {standardized_cost(F.m, mm):.6e}  |det| {abs(F.det):.1e}  {dt:.3f} s")

c = FG.global_certificate
print("certificate:", c.certified, "rank", c.rank, "order", c.order, "relaxation value", c.optimum, c.solver_status.value)

# %% the same F, up to sign
print(np.round(F8.m, 6))
print(np.round(FG.m, 6))
