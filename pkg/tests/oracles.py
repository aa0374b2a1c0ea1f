"""Slow loop-based reference implementations of the prior-labeller formulas."""
import math

import numpy as np


def cells(image, cell_size):
    """Per-cell (pixel list, mean color, centroid) from a plain pixel scan."""
    img = np.asarray(image, dtype=float)
    if img.ndim == 2:
        img = img[:, :, None]
    h, w, ch = img.shape
    gc = -(-w // cell_size)
    members = {}
    for r in range(h):
        for c in range(w):
            members.setdefault((r // cell_size) * gc + c // cell_size, []).append((r, c))
    out = []
    for k in sorted(members):
        px = members[k]
        color = [sum(img[r, c, q] for r, c in px) / len(px) for q in range(ch)]
        cent = (sum(r for r, _ in px) / len(px), sum(c for _, c in px) / len(px))
        out.append((px, color, cent))
    return out, (h, w)


def dcolor(a, b):
    return math.sqrt(sum((x - y) ** 2 for x, y in zip(a, b)) / len(a))


def dpos(a, b):
    return math.hypot(a[0] - b[0], a[1] - b[1])


def normalize(vals):
    lo, hi = min(vals), max(vals)
    if hi - lo <= 1e-12:
        return [0.5] * len(vals)
    return [(v - lo) / (hi - lo) for v in vals]


def paint(cs, shape, scores):
    out = np.zeros(shape)
    for (px, _, _), s in zip(cs, scores):
        for r, c in px:
            out[r, c] = s
    return out


def global_contrast(image, cell_size=4):
    cs, shape = cells(image, cell_size)
    if len(cs) < 2:
        return np.full(shape, 0.5)
    raw = [sum(dcolor(ci[1], cj[1]) for cj in cs) for ci in cs]
    return paint(cs, shape, normalize(raw))


def _wspa(cs, i, delta_p):
    ws = [math.exp(-dpos(cs[i][2], cj[2]) ** 2 / (2 * delta_p ** 2)) for cj in cs]
    z = sum(ws)
    return [x / z for x in ws]


def local_contrast(image, cell_size=4, delta_p=None):
    cs, shape = cells(image, cell_size)
    delta_p = 0.25 * math.hypot(*shape) if delta_p is None else delta_p
    raw = []
    for i, ci in enumerate(cs):
        w = _wspa(cs, i, delta_p)
        raw.append(sum(w[j] * dcolor(ci[1], cj[1]) for j, cj in enumerate(cs)))
    return paint(cs, shape, normalize(raw))


def compactness(image, cell_size=4, c=3.0):
    cs, shape = cells(image, cell_size)
    diag = math.hypot(*shape)
    raw = [sum(dcolor(ci[1], cj[1]) / (1 + c * dpos(ci[2], cj[2]) / diag) for cj in cs)
           for ci in cs]
    return paint(cs, shape, [1 - v for v in normalize(raw)])


def boundary_connectivity(image, regions, cell_size=4, delta_bnd=1.0, delta_p=None):
    """``regions`` gives the color-cluster label of each cell, in cell order."""
    cs, shape = cells(image, cell_size)
    h, w = shape
    delta_p = 0.25 * math.hypot(h, w) if delta_p is None else delta_p
    touches = [any(r in (0, h - 1) or c in (0, w - 1) for r, c in px) for px, _, _ in cs]
    wbg = []
    for i in range(len(cs)):
        same = [j for j in range(len(cs)) if regions[j] == regions[i]]
        length = sum(1 for j in same if touches[j])
        bnd = length / math.sqrt(len(same))
        wbg.append(1 - math.exp(-bnd ** 2 / (2 * delta_bnd ** 2)))
    raw = []
    for i, ci in enumerate(cs):
        ws = _wspa(cs, i, delta_p)
        raw.append(sum(dcolor(ci[1], cj[1]) * ws[j] * wbg[j] for j, cj in enumerate(cs)))
    return paint(cs, shape, normalize(raw))


def center_prior(shape, sigma_c=0.3):
    h, w = shape
    cr, cc = (h - 1) / 2, (w - 1) / 2
    d2 = h * h + w * w
    vals = [math.exp(-((r - cr) ** 2 + (c - cc) ** 2) / (2 * sigma_c ** 2 * d2))
            for r in range(h) for c in range(w)]
    return np.array(normalize(vals)).reshape(h, w)
