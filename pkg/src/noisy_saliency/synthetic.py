"""Synthetic corpora with known ground truth and known label noise.

Ground truth is one random rectangle or disc per image.  Images paint the
shape in a bright color over a dark background with mild texture.  Each
label map comes from ``synthetic_labeller``: ground truth plus an optional
per-labeller bias field plus Gaussian noise whose level is fixed per image.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .labellers import synthetic_labeller
from .trainer import Dataset

BIAS_KINDS = ("center", "ramp", "border", "blob")


@dataclass
class CorpusSpec:
    count: int = 32
    size: int = 16
    labellers: int = 4
    sigmas: list[float] = field(default_factory=lambda: [0.05, 0.1, 0.2])
    bias: str = "none"            # "none" or "fields"
    bias_strength: float = 0.3
    shapes: list[str] = field(default_factory=lambda: ["rect", "disc"])
    texture: float = 0.03
    seed: int = 0

    def __post_init__(self):
        if self.size < 8:
            raise ValueError("corpus image size must be >= 8")
        if self.count < 1 or self.labellers < 1:
            raise ValueError("count and labellers must be >= 1")
        if self.bias not in ("none", "fields"):
            raise ValueError(f"unknown bias mode {self.bias!r}")


def random_shape(rng: np.random.Generator, size: int, kinds) -> np.ndarray:
    kind = kinds[rng.integers(len(kinds))]
    rr, cc = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    if kind == "rect":
        h = rng.integers(size // 4, size // 2 + 1)
        w = rng.integers(size // 4, size // 2 + 1)
        r0 = rng.integers(1, size - h)
        c0 = rng.integers(1, size - w)
        return ((rr >= r0) & (rr < r0 + h) & (cc >= c0) & (cc < c0 + w)).astype(np.float64)
    if kind == "disc":
        rad = rng.uniform(size / 6, size / 3)
        cr = rng.uniform(rad + 1, size - rad - 1)
        cc0 = rng.uniform(rad + 1, size - rad - 1)
        return (((rr - cr) ** 2 + (cc - cc0) ** 2) <= rad ** 2).astype(np.float64)
    raise ValueError(f"unknown shape kind {kind!r}")


def render_image(rng: np.random.Generator, gt: np.ndarray, texture: float) -> np.ndarray:
    bg = rng.uniform(0.05, 0.45, size=3)
    fg = rng.uniform(0.55, 0.95, size=3)
    img = bg + (fg - bg) * gt[:, :, None]
    img = img + texture * rng.standard_normal(img.shape)
    return np.clip(img, 0.0, 1.0)


def bias_field(kind: str, size: int, strength: float) -> np.ndarray:
    """A fixed spatial bias pattern, one per labeller."""
    rr, cc = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    c = (size - 1) / 2.0
    if kind == "center":
        return strength * np.exp(-((rr - c) ** 2 + (cc - c) ** 2) / (2 * (0.25 * size) ** 2))
    if kind == "ramp":
        return strength * (cc / (size - 1) - 0.5)
    if kind == "border":
        edge = np.minimum(np.minimum(rr, size - 1 - rr), np.minimum(cc, size - 1 - cc))
        return strength * (edge < 2)
    if kind == "blob":
        q = size / 4.0
        return strength * np.exp(-((rr - q) ** 2 + (cc - 3 * q) ** 2) / (2 * (0.15 * size) ** 2))
    raise ValueError(f"unknown bias kind {kind!r}")


def make_corpus(spec: CorpusSpec) -> tuple[Dataset, dict]:
    """Build the corpus in memory; returns the dataset and per-image metadata."""
    rng = np.random.default_rng([spec.seed, 1])
    n, s, m = spec.count, spec.size, spec.labellers
    ids = [f"img{i:04d}" for i in range(n)]
    gts = np.stack([random_shape(rng, s, spec.shapes) for _ in range(n)])
    images = np.stack([render_image(rng, g, spec.texture) for g in gts])
    sigma = [float(spec.sigmas[i % len(spec.sigmas)]) for i in range(n)]
    biases = [bias_field(BIAS_KINDS[j % len(BIAS_KINDS)], s, spec.bias_strength)
              if spec.bias == "fields" else None for j in range(m)]
    labels = np.empty((n, m, s, s))
    for i in range(n):
        for j in range(m):
            labels[i, j] = synthetic_labeller(gts[i], sigma[i], biases[j],
                                              seed=int(np.random.SeedSequence(
                                                  [spec.seed, 2, i, j]).generate_state(1)[0]))
    names = [f"synth{j}" for j in range(m)]
    meta = {"sigma_true": dict(zip(ids, sigma)),
            "bias_kinds": [BIAS_KINDS[j % len(BIAS_KINDS)] if spec.bias == "fields" else "none"
                           for j in range(m)]}
    return Dataset(ids, images, labels, gts, names), meta
