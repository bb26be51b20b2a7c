# %% From F to a projective reconstruction, then bundle adjustment
import numpy as np

from fundmat import canonical_cameras, eight_point, synthesize
from fundmat.multiview import bundle_adjust, rms_reprojection, triangulate_all

mm = synthesize(motion_k=2, n_points=40, sigma=1.5, seed=1)
F = eight_point(mm)
cams = canonical_cameras(F)
print("P' =\n", np.round(cams.P2, 4))

Q = triangulate_all(cams, mm, F)
e0 = rms_reprojection(cams.P, cams.P2, Q, mm)
print("initial rms reprojection error:", e0)

ba = bundle_adjust(cams.P2, Q, mm)
print(f"after {ba.iterations} LM iterations: {ba.e_final}")
print("cost trace (first few):", np.round(ba.cost_trace[:6], 4))
