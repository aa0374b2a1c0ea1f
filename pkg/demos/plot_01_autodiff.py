"""
Reverse-mode gradients and finite-difference checks
===================================================

The predictor is trained with a tiny autodiff engine. This walk-through
builds a few graphs by hand and compares their gradients with central
differences.
"""

import numpy as np

from noisy_saliency import tensor as T
from noisy_saliency.tensor import Tensor, backward, conv2d, grad_check

###############################################################################
# A dilated 3x3 window over a 5x5 field of ones touches 9 pixels.

out = conv2d(Tensor(np.ones((1, 5, 5))), Tensor(np.ones((1, 1, 3, 3))), dilation=2)
print("dilated window sum:", out.data.ravel())

###############################################################################
# Gradients accumulate into ``.grad`` of every leaf that asked for one.

x = Tensor(np.array([1.0, -2.0, 3.0]), requires_grad=True)
backward(T.tsum(T.square(x)))
print("d/dx sum(x^2) at [1, -2, 3]:", x.grad)

###############################################################################
# A two-layer conv net with cross-entropy on an 8x8 input. ``grad_check``
# perturbs every weight by +-eps and reports the worst relative disagreement.

rng = np.random.default_rng(0)
img = Tensor(rng.random((1, 8, 8)))
k1 = Tensor(0.5 * rng.standard_normal((4, 1, 3, 3)), requires_grad=True)
k2 = Tensor(0.5 * rng.standard_normal((1, 4, 3, 3)), requires_grad=True)
y = (rng.random((8, 8)) > 0.5).astype(float)


def loss():
    h = T.relu(conv2d(img, k1, padding=1))
    p = T.reshape(T.sigmoid(conv2d(h, k2, padding=2, dilation=2)), (8, 8))
    ce = T.mul(T.log(p), y) + T.mul(T.log(1.0 - p), 1.0 - y)
    return T.neg(T.tsum(ce))


stats = {}
err = grad_check(loss, [k1, k2], eps=1e-4, skip_kinks=True, stats=stats)
print(f"max relative error {err:.2e} ({stats['checked']} coordinates, "
      f"{stats['skipped']} probes straddled a relu kink)")
