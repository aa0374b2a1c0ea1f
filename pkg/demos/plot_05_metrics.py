"""
Scoring saliency maps
=====================

MAE, the F-measure at an adaptive threshold, and a 256-level
precision-recall curve, on a hand-sized example and a noisy one.
"""

import numpy as np

from noisy_saliency import metrics as M

###############################################################################
# Two salient pixels out of four.

s = np.array([[1.0, 0.6], [0.4, 0.0]])
gt = np.array([[1, 1], [0, 0]])
curve = M.pr_curve(s, gt)
for t in (0, 128, 160, 255):
    print(f"threshold {t:3d}: precision {curve[t].precision:.2f} recall {curve[t].recall:.2f}")
print("MAE", M.mae(s, gt), " mean F", round(M.mean_f_measure(s, gt), 4))

###############################################################################
# A blurred disc against its mask: the curve trades recall for precision.

rr, cc = np.mgrid[:32, :32]
mask = ((rr - 16) ** 2 + (cc - 16) ** 2 <= 64).astype(float)
soft = np.clip(mask + 0.25 * np.random.default_rng(0).standard_normal(mask.shape), 0, 1)
curve = M.pr_curve(soft, mask)
print("\nthreshold  precision  recall  F")
for t in range(0, 256, 32):
    p, r = curve[t].precision, curve[t].recall
    print(f"{t:9d}  {p:9.3f}  {r:6.3f}  {M.f_measure(p, r):.3f}")
print(f"adaptive threshold {M.adaptive_threshold(soft):.3f}, "
      f"mean F {M.mean_f_measure(soft, mask):.3f}, MAE {M.mae(soft, mask):.3f}")
