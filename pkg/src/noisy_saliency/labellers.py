"""Handcrafted "noisy labellers": contrast, compactness and background priors.

The priors work on a regular grid over-segmentation. Every labeller emits a
map in [0, 1]; raw scores are min-max normalized, and a constant raw map
becomes all 0.5.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

CONSTANT_TOL = 1e-12


@dataclass
class GridSegmentation:
    cell_size: int
    labels: np.ndarray       # H x W cell id per pixel
    colors: np.ndarray       # K x C mean color per cell
    centroids: np.ndarray    # K x 2 (row, col) in pixels
    grid_shape: tuple        # (cell rows, cell cols)
    image_shape: tuple       # (H, W)

    @property
    def n_cells(self) -> int:
        return len(self.colors)

    @property
    def diagonal(self) -> float:
        h, w = self.image_shape
        return float(np.hypot(h, w))

    def on_boundary(self) -> np.ndarray:
        """Boolean per cell: does the cell touch one of the four image borders."""
        gr, gc = self.grid_shape
        r, c = np.divmod(np.arange(self.n_cells), gc)
        return (r == 0) | (r == gr - 1) | (c == 0) | (c == gc - 1)

    def broadcast(self, cell_values: np.ndarray) -> np.ndarray:
        return np.asarray(cell_values)[self.labels]


def _as_hwc(image: np.ndarray) -> np.ndarray:
    img = np.asarray(image, dtype=np.float64)
    return img[:, :, None] if img.ndim == 2 else img


def minmax_normalize(raw: np.ndarray) -> np.ndarray:
    raw = np.asarray(raw, dtype=np.float64)
    lo, hi = float(raw.min()), float(raw.max())
    if hi - lo <= CONSTANT_TOL:
        return np.full(raw.shape, 0.5)
    return (raw - lo) / (hi - lo)


def segment_grid(image: np.ndarray, cell_size: int = 4) -> GridSegmentation:
    if cell_size < 1:
        raise ValueError(f"cell_size must be >= 1, got {cell_size}")
    img = _as_hwc(image)
    h, w, _ = img.shape
    gr = -(-h // cell_size)
    gc = -(-w // cell_size)
    rows = np.arange(h) // cell_size
    cols = np.arange(w) // cell_size
    labels = rows[:, None] * gc + cols[None, :]
    k = gr * gc
    counts = np.bincount(labels.ravel(), minlength=k).astype(np.float64)
    flat = img.reshape(-1, img.shape[2])
    colors = np.stack([np.bincount(labels.ravel(), weights=flat[:, ch], minlength=k)
                       for ch in range(img.shape[2])], axis=1) / counts[:, None]
    rr, cc = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    centroids = np.stack([np.bincount(labels.ravel(), weights=rr.ravel(), minlength=k),
                          np.bincount(labels.ravel(), weights=cc.ravel(), minlength=k)],
                         axis=1) / counts[:, None]
    return GridSegmentation(cell_size, labels, colors, centroids, (gr, gc), (h, w))


def color_distances(seg: GridSegmentation) -> np.ndarray:
    """Pairwise Euclidean color distance, scaled by sqrt(C) into [0, 1]."""
    diff = seg.colors[:, None, :] - seg.colors[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=2)) / np.sqrt(seg.colors.shape[1])


def spatial_sq_distances(seg: GridSegmentation) -> np.ndarray:
    diff = seg.centroids[:, None, :] - seg.centroids[None, :, :]
    return np.sum(diff * diff, axis=2)


def spatial_weights(seg: GridSegmentation, delta_p: float) -> np.ndarray:
    """Row-normalized Gaussian weights exp(-|p_i - p_j|^2 / (2 delta_p^2)) / Z_i."""
    if delta_p <= 0:
        raise ValueError(f"delta_p must be positive, got {delta_p}")
    w = np.exp(-spatial_sq_distances(seg) / (2.0 * delta_p ** 2))
    return w / w.sum(axis=1, keepdims=True)


def default_delta_p(seg: GridSegmentation) -> float:
    return 0.25 * seg.diagonal


def global_contrast(seg: GridSegmentation) -> np.ndarray:
    if seg.n_cells < 2:
        return np.full(seg.image_shape, 0.5)
    raw = color_distances(seg).sum(axis=1)
    return seg.broadcast(minmax_normalize(raw))


def local_contrast(seg: GridSegmentation, delta_p: float | None = None) -> np.ndarray:
    delta_p = default_delta_p(seg) if delta_p is None else delta_p
    raw = np.sum(spatial_weights(seg, delta_p) * color_distances(seg), axis=1)
    return seg.broadcast(minmax_normalize(raw))


def compactness_scores(seg: GridSegmentation, c: float = 3.0) -> np.ndarray:
    if c < 0:
        raise ValueError(f"compactness weight c must be >= 0, got {c}")
    dpos = np.sqrt(spatial_sq_distances(seg)) / seg.diagonal
    return np.sum(color_distances(seg) / (1.0 + c * dpos), axis=1)


def compactness(seg: GridSegmentation, c: float = 3.0) -> np.ndarray:
    """Low color-weighted spread scores high (compact means salient)."""
    return seg.broadcast(1.0 - minmax_normalize(compactness_scores(seg, c)))


def kmeans(points: np.ndarray, k: int, seed: int = 0, iters: int = 20) -> np.ndarray:
    """Lloyd's algorithm with k-means++ seeding; returns a label per point."""
    rng = np.random.default_rng(seed)
    n = len(points)
    k = min(k, n)
    centers = [points[rng.integers(n)]]
    for _ in range(1, k):
        d2 = np.min([np.sum((points - c) ** 2, axis=1) for c in centers], axis=0)
        total = d2.sum()
        idx = rng.choice(n, p=d2 / total) if total > 0 else rng.integers(n)
        centers.append(points[idx])
    centers = np.array(centers)
    labels = np.zeros(n, dtype=int)
    for _ in range(iters):
        d2 = np.sum((points[:, None, :] - centers[None]) ** 2, axis=2)
        labels = np.argmin(d2, axis=1)
        for j in range(k):
            members = points[labels == j]
            if len(members):
                centers[j] = members.mean(axis=0)
    return labels


def bnd_con(len_bnd: float, area: float) -> float:
    return len_bnd / np.sqrt(area)


def background_weight(bndcon, delta_bnd: float = 1.0):
    return 1.0 - np.exp(-np.square(bndcon) / (2.0 * delta_bnd ** 2))


def region_background_weights(seg: GridSegmentation, regions: np.ndarray,
                              delta_bnd: float = 1.0) -> np.ndarray:
    """Per-cell background probability from its region's boundary connectivity."""
    on_bnd = seg.on_boundary()
    w = np.empty(seg.n_cells)
    for r in np.unique(regions):
        members = regions == r
        area = members.sum()
        w[members] = background_weight(bnd_con(on_bnd[members].sum(), area), delta_bnd)
    return w


def boundary_connectivity(seg: GridSegmentation, delta_bnd: float = 1.0,
                          delta_p: float | None = None, n_regions: int = 8,
                          seed: int = 0) -> np.ndarray:
    """Background-weighted contrast: cells far in color from boundary-connected regions score high."""
    if delta_bnd <= 0:
        raise ValueError(f"delta_bnd must be positive, got {delta_bnd}")
    delta_p = default_delta_p(seg) if delta_p is None else delta_p
    regions = kmeans(seg.colors, n_regions, seed=seed)
    w_bg = region_background_weights(seg, regions, delta_bnd)
    raw = np.sum(color_distances(seg) * spatial_weights(seg, delta_p) * w_bg[None, :], axis=1)
    return seg.broadcast(minmax_normalize(raw))


def center_prior(image: np.ndarray, sigma_c: float = 0.3) -> np.ndarray:
    if sigma_c <= 0:
        raise ValueError(f"sigma_c must be positive, got {sigma_c}")
    h, w = np.shape(image)[:2]
    diag2 = float(h * h + w * w)
    rr, cc = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    d2 = (rr - (h - 1) / 2.0) ** 2 + (cc - (w - 1) / 2.0) ** 2
    return minmax_normalize(np.exp(-d2 / (2.0 * sigma_c ** 2 * diag2)))


def synthetic_labeller(gt: np.ndarray, sigma_true: float, bias: np.ndarray | None = None,
                       seed: int = 0) -> np.ndarray:
    """clip(gt + bias + N(0, sigma_true^2), 0, 1)."""
    if sigma_true < 0:
        raise ValueError(f"sigma_true must be >= 0, got {sigma_true}")
    out = np.asarray(gt, dtype=np.float64).copy()
    if bias is not None:
        out = out + bias
    if sigma_true > 0:
        out = out + sigma_true * np.random.default_rng(seed).standard_normal(out.shape)
    return np.clip(out, 0.0, 1.0)


PRIORS = ("global_contrast", "local_contrast", "compactness", "boundary_connectivity")


def prior_maps(image: np.ndarray, cell_size: int = 4,
               names=PRIORS, with_center: bool = False) -> dict[str, np.ndarray]:
    """Run the prior labellers over one image."""
    seg = segment_grid(image, cell_size)
    fns = {
        "global_contrast": lambda: global_contrast(seg),
        "local_contrast": lambda: local_contrast(seg),
        "compactness": lambda: compactness(seg),
        "boundary_connectivity": lambda: boundary_connectivity(seg),
    }
    out = {}
    for name in names:
        if name not in fns:
            raise ValueError(f"unknown labeller {name!r}")
        out[name] = fns[name]()
    if with_center:
        out["center_prior"] = center_prior(image)
    return out
