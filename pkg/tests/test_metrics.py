import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from noisy_saliency import metrics as M


def count_oracle(s, gt, t):
    """Precision and recall of level-t binarization by explicit pixel counting."""
    tp = fp = fn = 0
    for v, g in zip(np.ravel(s), np.ravel(gt)):
        level = math.floor(v * 255 + 0.5)
        pred = level >= t
        tp += pred and g == 1
        fp += pred and g == 0
        fn += (not pred) and g == 1
    p = tp / (tp + fp) if tp + fp else 1.0
    r = tp / (tp + fn) if tp + fn else 1.0
    return p, r


def mean_f_oracle(s, gt, b2=0.3):
    thr = min(2 * sum(np.ravel(s)) / np.size(s), 1 - 1e-9)
    tp = fp = fn = 0
    for v, g in zip(np.ravel(s), np.ravel(gt)):
        pred = v >= thr
        tp += pred and g == 1
        fp += pred and g == 0
        fn += (not pred) and g == 1
    p = tp / (tp + fp) if tp + fp else 1.0
    r = tp / (tp + fn) if tp + fn else 1.0
    den = b2 * p + r
    return 0.0 if den == 0 else (1 + b2) * p * r / den


def test_mae_examples():
    s = np.random.default_rng(0).random((4, 4))
    assert M.mae(s, s) == 0.0
    assert M.mae(np.ones((3, 3)), np.zeros((3, 3))) == 1.0
    assert M.mae(np.array([[0, 0.5], [1, 0.5]]), np.zeros((2, 2))) == 0.5


def test_mae_shape_mismatch():
    with pytest.raises(ValueError):
        M.mae(np.zeros((2, 2)), np.zeros((2, 3)))


@given(st.integers(0, 2 ** 16))
def test_mae_symmetric_and_bounded(seed):
    rng = np.random.default_rng(seed)
    a, b = rng.random((5, 5)), rng.random((5, 5))
    assert M.mae(a, b) == M.mae(b, a)
    assert 0 <= M.mae(a, b) <= 1


def test_f_measure_examples():
    assert M.f_measure(0.8, 0.8) == pytest.approx(0.8, abs=1e-15)
    assert M.f_measure(1.0, 0.0) == 0.0
    assert M.f_measure(0.0, 0.0) == 0.0
    assert M.f_measure(0.9, 0.6, 0.3) == pytest.approx(0.702 / 0.87, rel=1e-14)
    assert round(M.f_measure(0.9, 0.6, 0.3), 5) == 0.80690


@given(st.floats(0, 1), st.floats(0.01, 10))
def test_f_of_equal_pr(p, b2):
    assert M.f_measure(p, p, b2) == pytest.approx(p, abs=1e-12)


def test_quantize_half_up_and_clamped():
    assert M.quantize(np.array([0.5, 1.0, 0.0, 1.2, -0.1])).tolist() == [128, 255, 0, 255, 0]


def test_pr_examples():
    s = np.array([[1.0, 0.6], [0.4, 0.0]])
    gt = np.array([[1, 1], [0, 0]])
    curve = M.pr_curve(s, gt)
    assert len(curve) == 256 and [p.threshold for p in curve] == list(range(256))
    assert curve[0].recall == 1.0
    assert (curve[128].precision, curve[128].recall) == (1.0, 1.0)
    assert (curve[160].precision, curve[160].recall) == (1.0, 0.5)


def test_pr_perfect_map():
    gt = (np.random.default_rng(1).random((6, 6)) > 0.5).astype(float)
    for pt in M.pr_curve(gt, gt)[1:]:
        assert pt.precision == pt.recall == 1.0


def test_pr_rejects_soft_gt():
    with pytest.raises(ValueError):
        M.pr_curve(np.zeros((2, 2)), np.full((2, 2), 0.5))
    with pytest.raises(ValueError):
        M.mean_f_measure(np.zeros((2, 2)), np.full((2, 2), 0.5))


@given(st.integers(0, 2 ** 16))
def test_pr_recall_monotone_and_base_precision(seed):
    rng = np.random.default_rng(seed)
    s, gt = rng.random((8, 8)), (rng.random((8, 8)) > 0.6).astype(float)
    curve = M.pr_curve(s, gt)
    rec = [p.recall for p in curve]
    assert all(a >= b for a, b in zip(rec, rec[1:]))
    assert curve[0].precision == gt.sum() / gt.size or gt.sum() == 0


def test_pr_and_mean_f_match_counting_oracle():
    rng = np.random.default_rng(2)
    for k in range(50):
        s = rng.random((8, 8))
        if k % 5 == 0:
            s = np.round(s * 4) / 4          # ties on exact levels
        gt = (rng.random((8, 8)) > rng.uniform(0.2, 0.9)).astype(float)
        if k == 7:
            gt[:] = 0                        # empty ground truth
        curve = M.pr_curve(s, gt)
        for t in range(256):
            assert (curve[t].precision, curve[t].recall) == count_oracle(s, gt, t)
        assert M.mean_f_measure(s, gt) == mean_f_oracle(s, gt)


def test_mean_f_examples():
    gt = np.zeros((4, 4))
    gt[0, :2] = 1
    assert M.mean_f_measure(gt, gt) == 1.0
    assert M.adaptive_threshold(np.full((2, 2), 0.4)) == pytest.approx(0.8)
    assert M.mean_f_measure(np.full((2, 2), 0.4), np.array([[1, 0], [0, 0]])) == 0.0
    s = np.array([[0.9, 0.1], [0.1, 0.1]])
    assert M.adaptive_threshold(s) == pytest.approx(0.6)
    assert M.mean_f_measure(s, np.array([[1, 0], [0, 0]])) == 1.0


def test_adaptive_threshold_cap():
    assert M.adaptive_threshold(np.full((2, 2), 0.9)) == 1 - 1e-9


def test_evaluate_maps():
    rng = np.random.default_rng(3)
    preds = {f"i{k}": rng.random((6, 6)) for k in range(3)}
    gts = {k: (rng.random((6, 6)) > 0.5).astype(float) for k in preds}
    res = M.evaluate_maps(preds, gts)
    assert [r["id"] for r in res["per_image"]] == sorted(preds)
    assert res["mean_mae"] == pytest.approx(np.mean([M.mae(preds[k], gts[k]) for k in preds]))
    assert res["mean_f"] == pytest.approx(np.mean([M.mean_f_measure(preds[k], gts[k])
                                                   for k in preds]))
    assert len(res["pr_curve"]) == 256
    want = np.mean([M.pr_curve(preds[k], gts[k])[100].recall for k in preds])
    assert res["pr_curve"][100][1] == pytest.approx(want)
    with pytest.raises(ValueError):
        M.evaluate_maps(preds, {"other": gts["i0"]})
