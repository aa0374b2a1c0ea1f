"""The latent saliency predictor: a small dilated fully-convolutional net."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from . import tensor as T
from .tensor import Tensor


@dataclass
class PredictorConfig:
    channels: list[int] = field(default_factory=lambda: [16, 16, 16, 1])
    kernel_size: int = 3
    dilations: list[int] = field(default_factory=lambda: [1, 2, 2, 1])
    input_size: tuple[int, int] = (16, 16)
    in_channels: int = 3

    def __post_init__(self):
        self.channels = [int(c) for c in self.channels]
        self.dilations = [int(d) for d in self.dilations]
        self.input_size = (int(self.input_size[0]), int(self.input_size[1]))
        if not self.channels:
            raise ValueError("predictor needs at least one stage")
        if len(self.dilations) != len(self.channels):
            raise ValueError(
                f"{len(self.channels)} stages but {len(self.dilations)} dilations")
        if self.channels[-1] != 1:
            raise ValueError("last stage must have a single output channel")
        if self.kernel_size % 2 != 1:
            raise ValueError("kernel_size must be odd for same padding")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["input_size"] = list(self.input_size)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PredictorConfig":
        return cls(**d)

    def param_shapes(self) -> list[tuple]:
        shapes = []
        c_in = self.in_channels
        k = self.kernel_size
        for c_out in self.channels:
            shapes.append((c_out, c_in, k, k))
            shapes.append((c_out,))
            c_in = c_out
        return shapes


@dataclass
class PredictorParams:
    """Kernels and biases, ordered ``[W1, b1, W2, b2, ...]``."""
    config: PredictorConfig
    tensors: list[Tensor]

    def arrays(self) -> list[np.ndarray]:
        return [t.data for t in self.tensors]

    def count(self) -> int:
        return sum(t.size for t in self.tensors)

    def copy(self) -> "PredictorParams":
        return PredictorParams(self.config,
                               [Tensor(t.data.copy(), requires_grad=True) for t in self.tensors])


def init_params(config: PredictorConfig, seed: int) -> PredictorParams:
    """Glorot-uniform kernels, zero biases; a pure function of (config, seed)."""
    rng = np.random.default_rng(seed)
    tensors = []
    for shape in config.param_shapes():
        if len(shape) == 4:
            c_out, c_in, kh, kw = shape
            s = np.sqrt(6.0 / (c_in * kh * kw + c_out * kh * kw))
            arr = rng.uniform(-s, s, size=shape)
        else:
            arr = np.zeros(shape)
        tensors.append(Tensor(arr, requires_grad=True))
    return PredictorParams(config, tensors)


def as_network_input(image: np.ndarray, in_channels: int = 3) -> np.ndarray:
    """H x W (x C) image -> [C, H, W]; grayscale is replicated to ``in_channels``."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 2:
        img = img[:, :, None]
    if img.shape[2] == 1 and in_channels != 1:
        img = np.repeat(img, in_channels, axis=2)
    if img.shape[2] != in_channels:
        raise ValueError(f"image has {img.shape[2]} channels, predictor expects {in_channels}")
    return np.ascontiguousarray(img.transpose(2, 0, 1))


def forward(image: np.ndarray, params: PredictorParams) -> Tensor:
    """Differentiable forward pass; returns an H x W tensor in (0, 1)."""
    cfg = params.config
    x = as_network_input(image, cfg.in_channels)
    if x.shape[1:] != tuple(cfg.input_size):
        raise ValueError(
            f"image size {x.shape[1:]} does not match predictor input size {tuple(cfg.input_size)}")
    h = Tensor(x)
    n = len(cfg.channels)
    for s in range(n):
        w, b = params.tensors[2 * s], params.tensors[2 * s + 1]
        d = cfg.dilations[s]
        pad = d * (cfg.kernel_size - 1) // 2
        h = T.conv2d(h, w, stride=1, dilation=d, padding=pad)
        h = h + T.reshape(b, (b.shape[0], 1, 1))
        h = T.activation(h, "sigmoid" if s == n - 1 else "relu")
    return T.reshape(h, h.shape[1:])


def predict(image: np.ndarray, params: PredictorParams) -> np.ndarray:
    return forward(image, params).data


__all__ = ["PredictorConfig", "PredictorParams", "init_params", "forward", "predict",
           "as_network_input"]
