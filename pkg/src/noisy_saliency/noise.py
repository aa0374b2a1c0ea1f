"""Per-pixel zero-mean Gaussian noise model for the handcrafted labels.

The model distribution ``q`` has one variance per image pixel (the noise
bank).  The empirical distribution ``p`` has the mean squared residual of
the labels around the current prediction.  Both are zero-mean.
"""
from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field

import numpy as np

VARIANCE_FLOOR = 1e-6


def image_key(image_id: str) -> int:
    """Stable 32-bit integer key for an image id (used for seeding)."""
    return zlib.crc32(image_id.encode("utf-8"))


def noise_rng(seed: int, image_id: str, labeller: int, round_: int, epoch: int) -> np.random.Generator:
    """Counter-based stream: one independent generator per draw coordinate."""
    ss = np.random.SeedSequence([int(seed), image_key(image_id), int(labeller),
                                 int(round_), int(epoch)])
    return np.random.Generator(np.random.Philox(ss))


@dataclass
class NoiseBank:
    """One variance map per training image, plus the round counter."""
    variances: dict[str, np.ndarray] = field(default_factory=dict)
    round: int = 1

    @classmethod
    def zeros(cls, ids, shape) -> "NoiseBank":
        return cls({i: np.zeros(shape) for i in ids}, 1)

    def copy(self) -> "NoiseBank":
        return NoiseBank({k: v.copy() for k, v in self.variances.items()}, self.round)

    def ids(self) -> list[str]:
        return list(self.variances)


def sample_noise(variance: np.ndarray, image_id: str, labeller: int, round_: int,
                 epoch: int, seed: int) -> np.ndarray:
    """Independent N(0, variance) draw per pixel. Zero variance gives exact zeros."""
    variance = np.asarray(variance, dtype=np.float64)
    if not np.any(variance > 0):
        return np.zeros_like(variance)
    rng = noise_rng(seed, image_id, labeller, round_, epoch)
    return rng.standard_normal(variance.shape) * np.sqrt(variance)


def empirical_variance(prediction: np.ndarray, labels) -> np.ndarray:
    """Zero-mean ML variance estimate: mean over labellers of squared residuals."""
    labels = np.asarray(labels, dtype=np.float64)
    if labels.ndim == 2:
        labels = labels[None]
    if labels.shape[0] == 0:
        raise ValueError("empirical_variance needs at least one label map")
    if labels.shape[1:] != np.shape(prediction):
        raise ValueError(f"label shape {labels.shape[1:]} != prediction shape {np.shape(prediction)}")
    r = labels - np.asarray(prediction, dtype=np.float64)[None]
    return np.mean(r * r, axis=0)


def kl_gaussian(mu_q: float, sigma_q: float, mu_p: float, sigma_p: float) -> float:
    """KL(q || p) for univariate Gaussians given by mean and standard deviation."""
    if not (sigma_q > 0 and sigma_p > 0):
        raise ValueError(f"standard deviations must be positive, got {sigma_q} and {sigma_p}")
    return (math.log(sigma_p / sigma_q)
            + (sigma_q ** 2 + (mu_q - mu_p) ** 2) / (2.0 * sigma_p ** 2) - 0.5)


def kl_zero_mean_map(var_q: np.ndarray, var_p: np.ndarray, floor: float = VARIANCE_FLOOR) -> np.ndarray:
    """Per-pixel KL(N(0, var_q) || N(0, var_p)) with both variances floored.

    Pixels where both variances sit below ``floor`` contribute exactly 0.
    """
    vq = np.maximum(var_q, floor)
    vp = np.maximum(var_p, floor)
    kl = 0.5 * np.log(vp / vq) + vq / (2.0 * vp) - 0.5
    both_low = (np.asarray(var_q) < floor) & (np.asarray(var_p) < floor)
    return np.where(both_low, 0.0, kl)


def noise_loss(bank: NoiseBank, empirical: dict[str, np.ndarray],
               floor: float = VARIANCE_FLOOR) -> float:
    """Sum over images and pixels of KL(q(bank) || p(empirical))."""
    if set(bank.variances) != set(empirical):
        missing = set(bank.variances) ^ set(empirical)
        raise ValueError(f"noise bank and empirical variances cover different ids: {sorted(missing)}")
    total = 0.0
    for i in bank.variances:
        vq, vp = bank.variances[i], empirical[i]
        if vq.shape != vp.shape:
            raise ValueError(f"shape mismatch for {i!r}: {vq.shape} vs {vp.shape}")
        total += float(np.sum(kl_zero_mean_map(vq, vp, floor)))
    return total


def update_variance(current: np.ndarray, empirical: np.ndarray, alpha: float = 0.01) -> np.ndarray:
    """One step ``var <- var + alpha * (empirical - var)``."""
    if not 0 < alpha <= 1:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    current = np.asarray(current, dtype=np.float64)
    empirical = np.asarray(empirical, dtype=np.float64)
    if current.shape != empirical.shape:
        raise ValueError(f"shape mismatch: {current.shape} vs {empirical.shape}")
    return current + alpha * (empirical - current)


def variance_to_image(variance: np.ndarray) -> np.ndarray:
    """Min-max scale a variance map to uint8 for inspection."""
    v = np.asarray(variance, dtype=np.float64)
    lo, hi = float(v.min()), float(v.max())
    if hi <= lo:
        return np.zeros(v.shape, dtype=np.uint8)
    return np.floor((v - lo) / (hi - lo) * 255.0 + 0.5).astype(np.uint8)
