"""Alternating optimization of the predictor and the per-pixel noise bank.

Each round trains the predictor with the noise bank held fixed, then
re-estimates the residual variance of the labels around the new
predictions and moves the bank toward it.  With rounds=1 the bank is never
touched and training is plain supervision by the raw labels (BL1).
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field, fields
from typing import Callable

import numpy as np

from . import metrics
from .losses import noisy_cross_entropy, total_loss
from .noise import (VARIANCE_FLOOR, NoiseBank, empirical_variance, kl_zero_mean_map,
                    noise_loss, sample_noise, update_variance)
from .optim import OptimizerState, poly_decay, sgd_momentum_step
from .predictor import PredictorConfig, PredictorParams, forward, init_params, predict
from .tensor import backward, zero_grad

log = logging.getLogger(__name__)

BASELINES = ("BL1", "BL2", "BL3")


@dataclass
class TrainConfig:
    lam: float = 1.0
    alpha: float = 0.01
    rounds: int = 4
    max_epochs_per_round: int = 20
    base_lr: float = 1e-3
    momentum: float = 0.9
    lr_drop_factor: float = 0.1
    poly_power: float = 0.9
    accumulation_steps: int = 1
    seed: int = 0
    variance_floor: float = VARIANCE_FLOOR
    # variance-update steps applied between rounds, each of size alpha
    variance_steps: int = 1
    # cap on the global L2 norm of each step's gradient; 0 disables
    grad_clip: float = 100.0

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.rounds < 1 or self.max_epochs_per_round < 1:
            raise ValueError("rounds and max_epochs_per_round must be >= 1")
        if self.accumulation_steps < 1 or self.variance_steps < 1:
            raise ValueError("accumulation_steps and variance_steps must be >= 1")
        if self.lam < 0:
            raise ValueError("lambda must be nonnegative")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        names = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for k, v in d.items():
            if k not in names:
                raise KeyError(f"unknown training option {k!r}")
            kwargs[k] = int(v) if names[k] == "int" else float(v)
        return cls(**kwargs)


@dataclass
class Dataset:
    ids: list[str]
    images: np.ndarray            # N x H x W x C, values in [0, 1]
    labels: np.ndarray            # N x M x H x W
    gt: np.ndarray | None = None  # N x H x W binary
    labeller_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=np.float64)
        if self.images.ndim == 3:
            self.images = self.images[..., None]
        self.labels = np.asarray(self.labels, dtype=np.float64)
        if self.labels.ndim != 4 or self.labels.shape[1] < 1:
            raise ValueError("labels must be N x M x H x W with M >= 1")
        n = len(self.ids)
        if self.images.shape[0] != n or self.labels.shape[0] != n:
            raise ValueError("ids, images and labels disagree on N")
        if self.labels.shape[2:] != self.images.shape[1:3]:
            raise ValueError(
                f"label size {self.labels.shape[2:]} != image size {self.images.shape[1:3]}")
        if self.gt is not None:
            self.gt = np.asarray(self.gt, dtype=np.float64)
            if self.gt.shape != (n,) + self.images.shape[1:3]:
                raise ValueError("ground truth shape does not match images")
        if not self.labeller_names:
            self.labeller_names = [f"labeller{j}" for j in range(self.labels.shape[1])]

    @property
    def n(self) -> int:
        return len(self.ids)

    @property
    def m(self) -> int:
        return self.labels.shape[1]

    @property
    def map_shape(self) -> tuple:
        return self.images.shape[1:3]

    def subset(self, idx) -> "Dataset":
        idx = list(idx)
        return Dataset([self.ids[i] for i in idx], self.images[idx], self.labels[idx],
                       None if self.gt is None else self.gt[idx], list(self.labeller_names))


@dataclass
class TrainHistory:
    losses: list[dict] = field(default_factory=list)   # one row per (round, epoch)
    rounds: list[dict] = field(default_factory=list)   # one row per round


def _targets(dataset: Dataset, mode: str) -> np.ndarray:
    if mode in ("joint", "BL1"):
        return dataset.labels
    if mode == "BL2":
        return dataset.labels.mean(axis=1, keepdims=True)
    if mode == "BL3":
        if dataset.gt is None:
            raise ValueError("BL3 needs ground-truth maps")
        return dataset.gt[:, None]
    raise ValueError(f"unknown mode {mode!r}")


def train_round(dataset: Dataset, bank: NoiseBank, params: PredictorParams,
                config: TrainConfig, round_: int, mode: str = "joint"
                ) -> tuple[PredictorParams, list[dict], OptimizerState]:
    """Train the predictor with the bank fixed; returns new params, epoch rows, optimizer state."""
    missing = [i for i in dataset.ids if i not in bank.variances]
    if missing:
        raise ValueError(f"noise bank lacks ids {missing[:5]}")
    targets = _targets(dataset, mode)
    params = params.copy()
    tensors = params.tensors
    state = OptimizerState.for_params(tensors)
    order = np.random.default_rng([config.seed, round_, 7]).permutation(dataset.n)
    steps_per_epoch = math.ceil(dataset.n / config.accumulation_steps)
    max_iter = config.max_epochs_per_round * steps_per_epoch
    lr_scale = 1.0
    prev = math.inf
    rows = []
    for epoch in range(1, config.max_epochs_per_round + 1):
        if lr_scale < 1e-6:
            break
        pred_sum = 0.0
        kl_sum = 0.0
        pending = 0
        zero_grad(tensors)
        for k, idx in enumerate(order):
            iid = dataset.ids[idx]
            var = bank.variances[iid]
            noise = np.stack([sample_noise(var, iid, j, round_, epoch, config.seed)
                              for j in range(targets.shape[1])])
            pred = forward(dataset.images[idx], params)
            loss = noisy_cross_entropy(pred, noise, targets[idx])
            backward(loss)
            pred_sum += float(loss.data)
            emp = empirical_variance(pred.data, dataset.labels[idx])
            kl_sum += float(np.sum(kl_zero_mean_map(var, emp, config.variance_floor)))
            pending += 1
            if pending == config.accumulation_steps or k == dataset.n - 1:
                lr = poly_decay(config.base_lr * lr_scale, state.iteration, max_iter,
                                config.poly_power)
                grads = [np.zeros(t.shape) if t.grad is None else t.grad for t in tensors]
                if config.grad_clip > 0:
                    norm = math.sqrt(sum(float(np.sum(g * g)) for g in grads))
                    if norm > config.grad_clip:
                        grads = [g * (config.grad_clip / norm) for g in grads]
                sgd_momentum_step(tensors, grads, state, lr, config.momentum)
                zero_grad(tensors)
                pending = 0
        breakdown = total_loss(pred_sum, kl_sum, config.lam)
        rows.append({"round": round_, "epoch": epoch,
                     "pred_loss": breakdown.prediction_loss,
                     "noise_loss": breakdown.noise_loss,
                     "total": breakdown.total,
                     "lr": config.base_lr * lr_scale})
        mean_pred = pred_sum / dataset.n
        log.debug("round %d epoch %d pred/pixel %.5f", round_, epoch,
                  mean_pred / (targets.shape[1] * np.prod(dataset.map_shape)))
        if mean_pred >= prev:
            lr_scale *= config.lr_drop_factor
        prev = mean_pred
    return params, rows, state


def predict_all(dataset: Dataset, params: PredictorParams) -> dict[str, np.ndarray]:
    return {iid: predict(dataset.images[k], params) for k, iid in enumerate(dataset.ids)}


def evaluate(dataset: Dataset | None, params: PredictorParams) -> dict:
    if dataset is None or dataset.gt is None:
        return {}
    preds = predict_all(dataset, params)
    maes = [metrics.mae(preds[i], dataset.gt[k]) for k, i in enumerate(dataset.ids)]
    fs = [metrics.mean_f_measure(preds[i], dataset.gt[k]) for k, i in enumerate(dataset.ids)]
    return {"mae": float(np.mean(maes)), "mean_f": float(np.mean(fs))}


def empirical_bank(dataset: Dataset, params: PredictorParams) -> dict[str, np.ndarray]:
    preds = predict_all(dataset, params)
    return {iid: empirical_variance(preds[iid], dataset.labels[k])
            for k, iid in enumerate(dataset.ids)}


RoundCallback = Callable[[int, PredictorParams, NoiseBank, OptimizerState, TrainHistory], None]


def run(dataset: Dataset, config: TrainConfig, predictor_config: PredictorConfig | None = None,
        eval_set: Dataset | None = None, params: PredictorParams | None = None,
        on_round: RoundCallback | None = None
        ) -> tuple[PredictorParams, NoiseBank, TrainHistory]:
    """Full alternating schedule. Evaluation defaults to the training set's ground truth."""
    if predictor_config is None:
        predictor_config = PredictorConfig(input_size=dataset.map_shape,
                                           in_channels=max(3, dataset.images.shape[3]))
    if params is None:
        params = init_params(predictor_config, config.seed)
    if eval_set is None:
        eval_set = dataset
    bank = NoiseBank.zeros(dataset.ids, dataset.map_shape)
    history = TrainHistory()
    for r in range(1, config.rounds + 1):
        bank.round = r
        params, rows, state = train_round(dataset, bank, params, config, r)
        history.losses.extend(rows)
        emp = empirical_bank(dataset, params)
        row = {"round": r, "noise_loss": noise_loss(bank, emp, config.variance_floor),
               "pred_loss": rows[-1]["pred_loss"], "epochs": len(rows)}
        row.update(evaluate(eval_set, params))
        row["mean_sigma"] = float(np.mean([np.sqrt(v).mean() for v in bank.variances.values()]))
        history.rounds.append(row)
        log.info("round %d: %s", r, row)
        if on_round is not None:
            on_round(r, params, bank, state, history)
        if r < config.rounds:
            for iid in dataset.ids:
                v = bank.variances[iid]
                for _ in range(config.variance_steps):
                    v = update_variance(v, emp[iid], config.alpha)
                bank.variances[iid] = v
    return params, bank, history


def run_baseline(dataset: Dataset, mode: str, config: TrainConfig,
                 predictor_config: PredictorConfig | None = None,
                 eval_set: Dataset | None = None, params: PredictorParams | None = None,
                 on_round: RoundCallback | None = None
                 ) -> tuple[PredictorParams, TrainHistory]:
    """BL1: raw labels; BL2: per-pixel label mean; BL3: ground truth. No noise model."""
    mode = mode.upper()
    if mode not in BASELINES:
        raise ValueError(f"unknown baseline {mode!r}; expected one of {BASELINES}")
    _targets(dataset, mode)
    if predictor_config is None:
        predictor_config = PredictorConfig(input_size=dataset.map_shape,
                                           in_channels=max(3, dataset.images.shape[3]))
    if params is None:
        params = init_params(predictor_config, config.seed)
    if eval_set is None:
        eval_set = dataset
    bank = NoiseBank.zeros(dataset.ids, dataset.map_shape)
    params, rows, state = train_round(dataset, bank, params, config, 1, mode=mode)
    history = TrainHistory(losses=rows)
    emp = empirical_bank(dataset, params)
    row = {"round": 1, "noise_loss": noise_loss(bank, emp, config.variance_floor),
           "pred_loss": rows[-1]["pred_loss"], "epochs": len(rows)}
    row.update(evaluate(eval_set, params))
    row["mean_sigma"] = 0.0
    history.rounds.append(row)
    if on_round is not None:
        on_round(1, params, bank, state, history)
    return params, history
