"""
Handcrafted saliency priors
===========================

Four grid-cell priors and a center prior act as the noisy labellers. This
script renders each of them for one synthetic image and writes the maps to
``demo_out/labellers``.
"""

from pathlib import Path

import numpy as np

from noisy_saliency import io, labellers as L
from noisy_saliency.metrics import mae
from noisy_saliency.synthetic import CorpusSpec, make_corpus

out = Path("demo_out/labellers")

###############################################################################
# A 32x32 corpus image with its binary ground truth.

ds, _ = make_corpus(CorpusSpec(count=1, size=32, seed=4))
image, gt = ds.images[0], ds.gt[0]
io.write_image(out / "image.png", image)
io.write_image(out / "gt.png", gt)

###############################################################################
# Boundary connectivity needs two numbers per region: how much of it lies on
# the image border, and how large it is.

print("BndCon(10 border cells, area 25) =", L.bnd_con(10, 25))
print("background weight at delta 1     =", round(float(L.background_weight(2.0)), 5))

###############################################################################
# Every prior, scored against the ground truth it never saw.

maps = L.prior_maps(image, cell_size=4, with_center=True)
for name, m in maps.items():
    io.write_image(out / f"{name}.png", m)
    print(f"{name:22s} MAE vs gt {mae(m, gt):.3f}")

###############################################################################
# The controlled labeller: ground truth plus bias plus Gaussian noise.

noisy = L.synthetic_labeller(gt, 0.1, bias=np.full(gt.shape, 0.1), seed=1)
io.write_image(out / "synthetic.png", noisy)
print(f"synthetic labeller     MAE vs gt {mae(noisy, gt):.3f}")
