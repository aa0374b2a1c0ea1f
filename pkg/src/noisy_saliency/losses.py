"""Pixel cross-entropy, the summed prediction loss, and the combined objective."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .tensor import Tensor

CE_EPS = 1e-7


@dataclass(frozen=True)
class LossBreakdown:
    prediction_loss: float
    noise_loss: float
    total: float
    lam: float


def cross_entropy(y: float, y_hat: float, eps: float = CE_EPS) -> float:
    if not 0.0 <= y <= 1.0:
        raise ValueError(f"target must lie in [0, 1], got {y}")
    p = min(max(y_hat, 0.0), 1.0)
    p = min(max(p, eps), 1.0 - eps)
    return -(y * math.log(p) + (1.0 - y) * math.log(1.0 - p))


def noisy_cross_entropy(pred: Tensor, noise: np.ndarray, labels: np.ndarray,
                        eps: float = CE_EPS) -> Tensor:
    """Differentiable sum of CE(label_j, clip(pred + noise_j)) over labellers and pixels.

    ``pred`` is H x W; ``noise`` and ``labels`` are M x H x W.  The noise is
    a constant here: no gradient flows into it.
    """
    labels = np.asarray(labels, dtype=np.float64)
    noise = np.asarray(noise, dtype=np.float64)
    if labels.ndim == 2:
        labels = labels[None]
    if noise.ndim == 2:
        noise = noise[None]
    if labels.shape != noise.shape or labels.shape[1:] != pred.shape:
        raise ValueError(
            f"inconsistent shapes: prediction {pred.shape}, noise {noise.shape}, labels {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() > 1):
        raise ValueError("labels must lie in [0, 1]")
    y_hat = T.clip(T.add(T.reshape(pred, (1,) + pred.shape), noise), 0.0, 1.0)
    y_hat = T.clip(y_hat, eps, 1.0 - eps)
    pos = T.mul(T.log(y_hat), labels)
    neg = T.mul(T.log(T.add(T.neg(y_hat), 1.0)), 1.0 - labels)
    return T.neg(T.tsum(T.add(pos, neg)))


def prediction_loss(predictions: dict[str, np.ndarray], noise: dict[str, np.ndarray],
                    labels: dict[str, np.ndarray], eps: float = CE_EPS) -> float:
    """Value of the summed prediction loss over images, labellers and pixels.

    Each dict maps image id to an array; noise and labels are M x H x W.
    """
    if set(predictions) != set(labels) or set(noise) != set(labels):
        raise ValueError("predictions, noise and labels must cover the same image ids")
    total = 0.0
    for i in predictions:
        n, y = np.asarray(noise[i], dtype=np.float64), np.asarray(labels[i], dtype=np.float64)
        if n.shape != y.shape:
            raise ValueError(f"noise/label labeller sets differ for {i!r}: {n.shape} vs {y.shape}")
        total += float(noisy_cross_entropy(Tensor(predictions[i]), n, y, eps).data)
    return total


def total_loss(pred: float, noise: float, lam: float) -> LossBreakdown:
    if lam < 0:
        raise ValueError(f"lambda must be nonnegative, got {lam}")
    return LossBreakdown(pred, noise, pred + lam * noise, lam)
