"""MAE, F-measure and precision-recall curves for saliency maps."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

BETA_SQUARED = 0.3


@dataclass(frozen=True)
class PRPoint:
    threshold: int
    precision: float
    recall: float


def _check_binary(gt: np.ndarray) -> np.ndarray:
    gt = np.asarray(gt, dtype=np.float64)
    if not np.all((gt == 0) | (gt == 1)):
        raise ValueError("ground truth must be binary (0/1)")
    return gt.astype(bool)


def quantize(s: np.ndarray) -> np.ndarray:
    """[0, 1] -> integer levels 0..255, rounding half up."""
    q = np.floor(np.asarray(s, dtype=np.float64) * 255.0 + 0.5)
    return np.clip(q, 0, 255).astype(np.int64)


def mae(s: np.ndarray, gt: np.ndarray) -> float:
    s, gt = np.asarray(s, dtype=np.float64), np.asarray(gt, dtype=np.float64)
    if s.shape != gt.shape:
        raise ValueError(f"shape mismatch: {s.shape} vs {gt.shape}")
    return float(np.mean(np.abs(s - gt)))


def f_measure(precision: float, recall: float, beta_squared: float = BETA_SQUARED) -> float:
    den = beta_squared * precision + recall
    if den == 0:
        return 0.0
    return (1.0 + beta_squared) * precision * recall / den


def _precision_recall(pred: np.ndarray, gt: np.ndarray) -> tuple[float, float]:
    tp = int(np.count_nonzero(pred & gt))
    npred = int(np.count_nonzero(pred))
    npos = int(np.count_nonzero(gt))
    precision = tp / npred if npred else 1.0
    recall = tp / npos if npos else 1.0
    return precision, recall


def pr_curve(s: np.ndarray, gt: np.ndarray) -> list[PRPoint]:
    """Precision/recall of ``quantize(s) >= t`` for t = 0..255."""
    gt = _check_binary(gt)
    q = quantize(s)
    if q.shape != gt.shape:
        raise ValueError(f"shape mismatch: {q.shape} vs {gt.shape}")
    # counts of predictions / true positives at each level, then suffix sums
    hist_all = np.bincount(q.ravel(), minlength=256)[:256]
    hist_tp = np.bincount(q[gt].ravel(), minlength=256)[:256]
    npred = np.cumsum(hist_all[::-1])[::-1]
    tp = np.cumsum(hist_tp[::-1])[::-1]
    npos = int(gt.sum())
    points = []
    for t in range(256):
        p = tp[t] / npred[t] if npred[t] else 1.0
        r = tp[t] / npos if npos else 1.0
        points.append(PRPoint(t, float(p), float(r)))
    return points


def adaptive_threshold(s: np.ndarray) -> float:
    return min(2.0 * float(np.mean(s)), 1.0 - 1e-9)


def mean_f_measure(s: np.ndarray, gt: np.ndarray, beta_squared: float = BETA_SQUARED) -> float:
    """F-measure of ``s`` binarized at twice its mean value."""
    gt = _check_binary(gt)
    s = np.asarray(s, dtype=np.float64)
    if s.shape != gt.shape:
        raise ValueError(f"shape mismatch: {s.shape} vs {gt.shape}")
    p, r = _precision_recall(s >= adaptive_threshold(s), gt)
    return f_measure(p, r, beta_squared)


def evaluate_maps(preds: dict[str, np.ndarray], gts: dict[str, np.ndarray],
                  beta_squared: float = BETA_SQUARED) -> dict:
    """Per-image and dataset-level metrics; the dataset PR curve averages images."""
    ids = sorted(preds)
    if set(ids) != set(gts):
        raise ValueError("predictions and ground truth cover different ids")
    per_image = []
    prec = np.zeros(256)
    rec = np.zeros(256)
    for i in ids:
        gt = gts[i]
        per_image.append({"id": i, "mae": mae(preds[i], gt),
                          "f_beta": mean_f_measure(preds[i], gt, beta_squared)})
        curve = pr_curve(preds[i], gt)
        prec += [pt.precision for pt in curve]
        rec += [pt.recall for pt in curve]
    n = max(len(ids), 1)
    return {
        "per_image": per_image,
        "mean_mae": float(np.mean([r["mae"] for r in per_image])) if ids else 0.0,
        "mean_f": float(np.mean([r["f_beta"] for r in per_image])) if ids else 0.0,
        "pr_curve": [[float(p), float(r)] for p, r in zip(prec / n, rec / n)],
    }
