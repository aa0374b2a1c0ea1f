"""SGD with heavy-ball momentum and the poly learning-rate schedule."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import Tensor


@dataclass
class OptimizerState:
    velocity: list[np.ndarray] = field(default_factory=list)
    iteration: int = 0

    @classmethod
    def for_params(cls, params: list[Tensor]) -> "OptimizerState":
        return cls([np.zeros(p.shape) for p in params], 0)


def sgd_momentum_step(params: list[Tensor], grads: list[np.ndarray],
                      state: OptimizerState, lr: float, momentum: float) -> None:
    """In-place update ``v <- m*v + lr*g``, ``theta <- theta - v``."""
    if lr <= 0:
        raise ValueError(f"lr must be positive, got {lr}")
    if not 0 <= momentum < 1:
        raise ValueError(f"momentum must lie in [0, 1), got {momentum}")
    if len(params) != len(grads) or len(params) != len(state.velocity):
        raise ValueError(
            f"got {len(params)} params, {len(grads)} grads, "
            f"{len(state.velocity)} velocity buffers")
    for p, g, v in zip(params, grads, state.velocity):
        if g.shape != p.shape or v.shape != p.shape:
            raise ValueError(
                f"shape mismatch: param {p.shape}, grad {g.shape}, velocity {v.shape}")
    for p, g, v in zip(params, grads, state.velocity):
        v *= momentum
        v += lr * g
        p.data -= v
    state.iteration += 1


def poly_decay(base_lr: float, it: int, max_iter: int, power: float = 0.9) -> float:
    if max_iter <= 0 or power <= 0:
        raise ValueError(f"need max_iter > 0 and power > 0, got {max_iter}, {power}")
    if not 0 <= it <= max_iter:
        raise ValueError(f"iteration {it} outside [0, {max_iter}]")
    return base_lr * (1.0 - it / max_iter) ** power
