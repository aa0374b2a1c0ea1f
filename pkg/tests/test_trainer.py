import numpy as np
import pytest

from noisy_saliency.noise import NoiseBank
from noisy_saliency.predictor import PredictorConfig, init_params
from noisy_saliency.synthetic import CorpusSpec, make_corpus
from noisy_saliency.trainer import (Dataset, TrainConfig, _targets, run, run_baseline,
                                    train_round)

SMALL = PredictorConfig(channels=[6, 6, 1], dilations=[1, 2, 1], input_size=(16, 16))


@pytest.fixture(scope="module")
def corpus():
    ds, meta = make_corpus(CorpusSpec(count=8, seed=4))
    return ds


def quick(**kw):
    base = dict(max_epochs_per_round=3, rounds=2)
    base.update(kw)
    return TrainConfig(**base)


def same_params(a, b):
    return all(np.array_equal(x, y) for x, y in zip(a.arrays(), b.arrays()))


# config and dataset validation

@pytest.mark.parametrize("kw", [dict(alpha=0.0), dict(alpha=1.5), dict(rounds=0),
                                dict(max_epochs_per_round=0), dict(lam=-1.0),
                                dict(accumulation_steps=0)])
def test_config_invariants(kw):
    with pytest.raises(ValueError):
        TrainConfig(**kw)


def test_config_defaults_and_round_trip():
    c = TrainConfig()
    assert (c.alpha, c.rounds, c.max_epochs_per_round, c.base_lr, c.momentum,
            c.lr_drop_factor) == (0.01, 4, 20, 1e-3, 0.9, 0.1)
    assert TrainConfig.from_dict({k: str(v) for k, v in c.to_dict().items()}) == c
    with pytest.raises(KeyError):
        TrainConfig.from_dict({"learning_rate": 1})


def test_dataset_validation():
    imgs = np.zeros((2, 4, 4, 3))
    with pytest.raises(ValueError):
        Dataset(["a", "b"], imgs, np.zeros((2, 0, 4, 4)))
    with pytest.raises(ValueError):
        Dataset(["a", "b"], imgs, np.zeros((2, 1, 5, 4)))
    with pytest.raises(ValueError):
        Dataset(["a"], imgs, np.zeros((2, 1, 4, 4)))
    ds = Dataset(["a", "b"], imgs, np.zeros((2, 3, 4, 4)))
    assert (ds.n, ds.m, ds.map_shape) == (2, 3, (4, 4))


def test_targets(corpus):
    assert _targets(corpus, "BL2").shape == (corpus.n, 1, 16, 16)
    np.testing.assert_array_equal(_targets(corpus, "BL2")[:, 0], corpus.labels.mean(axis=1))
    assert np.array_equal(_targets(corpus, "BL3")[:, 0], corpus.gt)
    no_gt = Dataset(corpus.ids, corpus.images, corpus.labels)
    with pytest.raises(ValueError):
        run_baseline(no_gt, "BL3", quick())
    with pytest.raises(ValueError):
        run_baseline(corpus, "BL4", quick())


# train_round

def test_round_deterministic(corpus):
    bank = NoiseBank({i: np.full((16, 16), 0.01) for i in corpus.ids}, 2)
    p0 = init_params(SMALL, 0)
    a, rows_a, _ = train_round(corpus, bank, p0, quick(), 2)
    b, rows_b, _ = train_round(corpus, bank, p0, quick(), 2)
    assert same_params(a, b) and rows_a == rows_b


def test_round_leaves_inputs_alone(corpus):
    bank = NoiseBank({i: np.full((16, 16), 0.01) for i in corpus.ids}, 2)
    snap = bank.copy()
    p0 = init_params(SMALL, 0)
    before = [x.copy() for x in p0.arrays()]
    p1, _, _ = train_round(corpus, bank, p0, quick(), 2)
    assert all(np.array_equal(bank.variances[i], snap.variances[i]) for i in corpus.ids)
    assert all(np.array_equal(x, y) for x, y in zip(before, p0.arrays()))
    assert not same_params(p0, p1)


def test_zero_bank_round_is_bl1(corpus):
    cfg = quick(max_epochs_per_round=1)
    p0 = init_params(SMALL, 1)
    joint, _, _ = train_round(corpus, NoiseBank.zeros(corpus.ids, (16, 16)), p0, cfg, 1)
    bl1, _ = run_baseline(corpus, "BL1", cfg, SMALL, params=p0)
    assert same_params(joint, bl1)


def test_bank_must_cover_ids(corpus):
    with pytest.raises(ValueError):
        train_round(corpus, NoiseBank.zeros(corpus.ids[:-1], (16, 16)), init_params(SMALL, 0),
                    quick(), 1)


def test_clean_labels_loss_decreases():
    ds, _ = make_corpus(CorpusSpec(count=8, sigmas=[0.0], seed=6))
    assert np.array_equal(ds.labels[:, 0], ds.gt)
    _, rows, _ = train_round(ds, NoiseBank.zeros(ds.ids, (16, 16)),
                             init_params(PredictorConfig(), 0), TrainConfig(), 1)
    losses = [r["pred_loss"] for r in rows[:6]]
    assert all(a > b for a, b in zip(losses, losses[1:]))


def test_lr_drops_on_plateau(corpus):
    # a huge learning rate overshoots, the loss rises, and the scale must drop
    _, rows, _ = train_round(corpus, NoiseBank.zeros(corpus.ids, (16, 16)),
                             init_params(SMALL, 0), quick(max_epochs_per_round=8, base_lr=0.5),
                             1)
    lrs = [r["lr"] for r in rows]
    assert lrs[0] == 0.5 and min(lrs) < 0.5
    assert all(a >= b for a, b in zip(lrs, lrs[1:]))


def test_round_stops_when_lr_vanishes(corpus):
    _, rows, _ = train_round(corpus, NoiseBank.zeros(corpus.ids, (16, 16)),
                             init_params(SMALL, 0),
                             quick(max_epochs_per_round=20, base_lr=0.5, lr_drop_factor=1e-4), 1)
    assert len(rows) < 20


def test_accumulation_changes_step_count(corpus):
    bank = NoiseBank.zeros(corpus.ids, (16, 16))
    _, _, s1 = train_round(corpus, bank, init_params(SMALL, 0), quick(max_epochs_per_round=1), 1)
    _, _, s4 = train_round(corpus, bank, init_params(SMALL, 0),
                           quick(max_epochs_per_round=1, accumulation_steps=4), 1)
    assert (s1.iteration, s4.iteration) == (8, 2)


# run and baselines

def test_history_bookkeeping(corpus):
    _, bank, hist = run(corpus, quick(rounds=3), SMALL)
    assert len(hist.rounds) == 3
    assert len(hist.losses) == sum(r["epochs"] for r in hist.rounds)
    keys = [(r["round"], r["epoch"]) for r in hist.losses]
    assert keys == sorted(keys) and len(set(keys)) == len(keys)
    assert set(hist.losses[0]) == {"round", "epoch", "pred_loss", "noise_loss", "total", "lr"}
    assert {"mae", "mean_f", "noise_loss", "mean_sigma"} <= set(hist.rounds[0])
    assert hist.rounds[0]["mean_sigma"] == 0.0 and hist.rounds[1]["mean_sigma"] > 0
    assert bank.round == 3


def test_single_round_is_bl1(corpus):
    cfg = quick(rounds=1, lam=7.0)
    p_run, bank, _ = run(corpus, cfg, SMALL)
    p_bl1, _ = run_baseline(corpus, "BL1", cfg, SMALL)
    assert same_params(p_run, p_bl1)
    assert all(np.all(v == 0) for v in bank.variances.values())


def test_run_deterministic(corpus):
    a = run(corpus, quick(), SMALL)
    b = run(corpus, quick(), SMALL)
    assert same_params(a[0], b[0]) and a[2].rounds == b[2].rounds and a[2].losses == b[2].losses
    assert all(np.array_equal(a[1].variances[i], b[1].variances[i]) for i in corpus.ids)


def test_lambda_only_weights_the_report(corpus):
    a = run(corpus, quick(lam=0.1), SMALL)
    b = run(corpus, quick(lam=10.0), SMALL)
    assert same_params(a[0], b[0])
    r_a, r_b = a[2].losses[-1], b[2].losses[-1]
    assert r_a["total"] == pytest.approx(r_a["pred_loss"] + 0.1 * r_a["noise_loss"])
    assert r_b["total"] == pytest.approx(r_b["pred_loss"] + 10.0 * r_b["noise_loss"])


def test_round_callback_sees_every_round(corpus):
    seen = []
    run(corpus, quick(rounds=3), SMALL, on_round=lambda r, p, bank, st, h: seen.append(
        (r, bank.round, len(h.rounds))))
    assert seen == [(1, 1, 1), (2, 2, 2), (3, 3, 3)]


def test_bl2_matches_scaled_bl1():
    base, _ = make_corpus(CorpusSpec(count=4, seed=8))
    one = base.labels[:, :1]
    dup = Dataset(base.ids, base.images, np.repeat(one, 4, axis=1), base.gt)
    cfg = dict(max_epochs_per_round=3, grad_clip=0.0)
    p_bl2, _ = run_baseline(dup, "BL2", TrainConfig(**cfg), SMALL)
    p_bl1, _ = run_baseline(dup, "BL1", TrainConfig(base_lr=1e-3 / 4, **cfg), SMALL)
    for x, y in zip(p_bl2.arrays(), p_bl1.arrays()):
        np.testing.assert_allclose(x, y, rtol=1e-9, atol=1e-12)


def test_bl3_upper_bound_smoke():
    ds, _ = make_corpus(CorpusSpec(count=16, seed=5))
    _, hist = run_baseline(ds, "BL3", TrainConfig())
    assert hist.rounds[0]["mae"] < 0.05
