"""
The per-pixel noise model
=========================

Each training image owns a variance map. Noise drawn from it perturbs the
prediction before the loss compares it with each labeller; between rounds
the map moves a small step toward the labels' empirical spread.
"""

import numpy as np

from noisy_saliency.noise import (empirical_variance, kl_gaussian, sample_noise,
                                  update_variance)

###############################################################################
# KL between two zero-mean Gaussians is cheap in closed form.

print("KL(N(0,1) || N(0,4)) =", round(kl_gaussian(0, 1, 0, 2), 5))
print("KL(N(0,4) || N(0,1)) =", round(kl_gaussian(0, 2, 0, 1), 5))

###############################################################################
# Draws are keyed by (seed, image, labeller, round, epoch), so any order of
# sampling gives the same maps.

v = np.full((64, 64), 0.04)
n = sample_noise(v, "img0007", labeller=2, round_=3, epoch=1, seed=0)
print(f"sample mean {n.mean():+.4f}, variance {n.var():.4f} (target 0.04)")

###############################################################################
# Empirical variance around a prediction, divided by the number of labellers.

pred = np.full((1, 1), 0.5)
labels = (0.5 + np.array([0.1, -0.1, 0.2, -0.2])).reshape(4, 1, 1)
print("empirical variance:", empirical_variance(pred, labels).item())

###############################################################################
# With step 0.01 the gap to the target shrinks by exactly 1% per update.

var, target = np.zeros(1), np.ones(1)
for t in range(1, 301):
    var = update_variance(var, target, 0.01)
    if t in (1, 10, 100, 300):
        print(f"after {t:3d} steps: variance {var[0]:.4f}, gap {1 - var[0]:.4f} "
              f"(0.99^t = {0.99 ** t:.4f})")
