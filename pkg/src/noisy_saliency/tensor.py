"""A small reverse-mode differentiable tensor built on numpy.

Every operation records its inputs and a closure that pushes the output
gradient back to them. ``backward`` walks the recorded graph in reverse
topological order. All data is float64.
"""
from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "op", "_mask")

    def __init__(self, data, requires_grad: bool = False,
                 _parents: tuple = (), op: str = "leaf"):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward: Callable[[np.ndarray], None] | None = None
        self.op = op
        self._mask: np.ndarray | None = None   # active region of a piecewise op

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, op={self.op}, requires_grad={self.requires_grad})"

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    # arithmetic sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(_lift(other)))

    def __rsub__(self, other):
        return add(_lift(other), neg(self))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def sum(self) -> "Tensor":
        return tsum(self)

    def backward(self) -> None:
        backward(self)


def _lift(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, parents: Sequence[Tensor], op: str,
          fn: Callable[[np.ndarray], None]) -> Tensor:
    needs = any(p.requires_grad for p in parents)
    out = Tensor(data, requires_grad=needs, _parents=tuple(parents), op=op)
    if needs:
        out._backward = fn
    return out


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.array(g, dtype=np.float64, copy=True)
    else:
        t.grad += g


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``g`` down to ``shape`` after numpy broadcasting."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# elementwise ops

def add(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)

    def fn(g):
        _accumulate(a, _unbroadcast(g, a.shape))
        _accumulate(b, _unbroadcast(g, b.shape))

    return _make(a.data + b.data, (a, b), "add", fn)


def neg(a: Tensor) -> Tensor:
    def fn(g):
        _accumulate(a, -g)

    return _make(-a.data, (a,), "neg", fn)


def mul(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)

    def fn(g):
        _accumulate(a, _unbroadcast(g * b.data, a.shape))
        _accumulate(b, _unbroadcast(g * a.data, b.shape))

    return _make(a.data * b.data, (a, b), "mul", fn)


def square(a: Tensor) -> Tensor:
    def fn(g):
        _accumulate(a, 2.0 * a.data * g)

    return _make(a.data * a.data, (a,), "square", fn)


def log(a: Tensor) -> Tensor:
    def fn(g):
        _accumulate(a, g / a.data)

    return _make(np.log(a.data), (a,), "log", fn)


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0

    def fn(g):
        _accumulate(a, g * mask)

    out = _make(np.where(mask, a.data, 0.0), (a,), "relu", fn)
    out._mask = mask
    return out


def sigmoid(a: Tensor) -> Tensor:
    x = a.data
    # split by sign so neither branch overflows
    ex = np.exp(-np.abs(x))
    s = np.where(x >= 0, 1.0 / (1.0 + ex), ex / (1.0 + ex))

    def fn(g):
        _accumulate(a, g * s * (1.0 - s))

    return _make(s, (a,), "sigmoid", fn)


def activation(a: Tensor, kind: str) -> Tensor:
    if kind == "relu":
        return relu(a)
    if kind == "sigmoid":
        return sigmoid(a)
    raise ValueError(f"unknown activation {kind!r}; expected 'relu' or 'sigmoid'")


def clip(a: Tensor, lo: float, hi: float) -> Tensor:
    """Hard clamp. The gradient is identity inside [lo, hi] and zero outside."""
    inside = (a.data >= lo) & (a.data <= hi)

    def fn(g):
        _accumulate(a, g * inside)

    out = _make(np.clip(a.data, lo, hi), (a,), "clip", fn)
    out._mask = inside
    return out


def tsum(a: Tensor) -> Tensor:
    shape = a.shape

    def fn(g):
        _accumulate(a, np.broadcast_to(g, shape))

    return _make(np.sum(a.data), (a,), "sum", fn)


def reshape(a: Tensor, shape: tuple) -> Tensor:
    old = a.shape

    def fn(g):
        _accumulate(a, g.reshape(old))

    return _make(a.data.reshape(shape), (a,), "reshape", fn)


# convolution

def conv_output_size(n: int, k: int, stride: int, dilation: int, padding: int) -> int:
    span = n + 2 * padding - dilation * (k - 1) - 1
    if span < 0:
        return 0
    return span // stride + 1


def conv2d(x: Tensor, kernel: Tensor, stride: int = 1, dilation: int = 1,
           padding: int = 0) -> Tensor:
    """Cross-correlation of a [C_in, H, W] input with a [C_out, C_in, kH, kW] kernel.

    Zero padding. No kernel flip.
    """
    if stride < 1 or dilation < 1 or padding < 0:
        raise ValueError(
            f"need stride >= 1, dilation >= 1, padding >= 0; got "
            f"stride={stride}, dilation={dilation}, padding={padding}")
    if x.data.ndim != 3 or kernel.data.ndim != 4:
        raise ValueError(
            f"conv2d expects input [C,H,W] and kernel [O,C,kH,kW]; got "
            f"{x.shape} and {kernel.shape}")
    c_in, h, w = x.shape
    c_out, kc, kh, kw = kernel.shape
    if kc != c_in:
        raise ValueError(
            f"kernel input channels {kc} do not match input channels {c_in} "
            f"(input shape {x.shape}, kernel shape {kernel.shape})")
    ho = conv_output_size(h, kh, stride, dilation, padding)
    wo = conv_output_size(w, kw, stride, dilation, padding)
    if ho < 1 or wo < 1:
        raise ValueError(
            f"conv2d output would be empty: input {x.shape}, kernel {kernel.shape}, "
            f"stride={stride}, dilation={dilation}, padding={padding}")

    xp = np.pad(x.data, ((0, 0), (padding, padding), (padding, padding))) if padding else x.data
    hs = stride * (ho - 1) + 1
    ws = stride * (wo - 1) + 1
    cols = np.empty((c_in, kh, kw, ho, wo))
    for i in range(kh):
        for j in range(kw):
            r, c = i * dilation, j * dilation
            cols[:, i, j] = xp[:, r:r + hs:stride, c:c + ws:stride]
    cols2 = cols.reshape(c_in * kh * kw, ho * wo)
    kflat = kernel.data.reshape(c_out, -1)
    out = (kflat @ cols2).reshape(c_out, ho, wo)

    def fn(g):
        g2 = g.reshape(c_out, ho * wo)
        if kernel.requires_grad:
            _accumulate(kernel, (g2 @ cols2.T).reshape(kernel.shape))
        if x.requires_grad:
            dcols = (kflat.T @ g2).reshape(c_in, kh, kw, ho, wo)
            dxp = np.zeros_like(xp)
            for i in range(kh):
                for j in range(kw):
                    r, c = i * dilation, j * dilation
                    dxp[:, r:r + hs:stride, c:c + ws:stride] += dcols[:, i, j]
            if padding:
                dxp = dxp[:, padding:padding + h, padding:padding + w]
            _accumulate(x, dxp)

    return _make(out, (x, kernel), "conv2d", fn)


# graph traversal

def topological_order(root: Tensor) -> list[Tensor]:
    """Nodes reachable from ``root``, each after all of its inputs."""
    order: list[Tensor] = []
    seen: set[int] = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in reversed(node._parents):
            if id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss: Tensor) -> None:
    """Reverse-mode sweep from a scalar ``loss``.

    Gradients accumulate into ``.grad`` of every tensor with
    ``requires_grad``; intermediate buffers are freed afterwards so only
    leaves keep theirs.
    """
    if loss.size != 1:
        raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
    order = topological_order(loss)
    loss.grad = np.ones_like(loss.data)
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)
    for node in order:
        if node._parents:
            node.grad = None


def kink_signature(root: Tensor) -> bytes:
    """Active masks of every relu/clip node under ``root``, packed into bytes.

    Two evaluations with equal signatures lie in the same smooth piece of a
    piecewise-linear graph.
    """
    masks = [n._mask for n in topological_order(root) if n._mask is not None]
    return b"".join(np.packbits(m.ravel()).tobytes() + b"|" for m in masks)


def zero_grad(params: Iterable[Tensor]) -> None:
    for p in params:
        p.grad = None


def grad_check(build_loss: Callable[[], Tensor], params: Sequence[Tensor],
               eps: float = 1e-4, skip_kinks: bool = False, stats: dict | None = None) -> float:
    """Max relative error between backward gradients and central differences.

    ``build_loss`` must rebuild the graph from the current values of
    ``params`` on every call. Each coordinate's error is
    ``|a - n| / max(1e-8, |a| + |n|)``.

    With ``skip_kinks`` a coordinate is left out when either probe
    ``theta +- eps`` changes the active set of some relu or clip, since the
    central difference then straddles a kink. ``stats`` (if given) receives
    the counts of ``checked`` and ``skipped`` coordinates.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    zero_grad(params)
    loss = build_loss()
    base = kink_signature(loss) if skip_kinks else b""
    backward(loss)
    analytic = [np.zeros(p.shape) if p.grad is None else p.grad.copy() for p in params]
    worst = 0.0
    checked = skipped = 0
    for p, a in zip(params, analytic):
        flat = p.data.reshape(-1)
        af = a.reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + eps
            lp = build_loss()
            flat[k] = orig - eps
            lm = build_loss()
            flat[k] = orig
            if skip_kinks and (kink_signature(lp) != base or kink_signature(lm) != base):
                skipped += 1
                continue
            num = (float(lp.data) - float(lm.data)) / (2.0 * eps)
            err = abs(af[k] - num) / max(1e-8, abs(af[k]) + abs(num))
            worst = max(worst, err)
            checked += 1
    zero_grad(params)
    if stats is not None:
        stats.update(checked=checked, skipped=skipped)
    return worst
