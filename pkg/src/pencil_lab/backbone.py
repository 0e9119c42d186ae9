"""Multilayer perceptron classifier with hand-written backprop and momentum SGD.

Hidden layers use ReLU; the last layer is affine and produces logits.
Weights are stored as ``(fan_out, fan_in)`` matrices and initialised from
``N(0, 2 / fan_in)`` (He init); biases start at zero.

Inputs pass through a fixed standardisation ``(x - input_shift) / input_scale``
before the first layer. It is not trained; `standardize_inputs` fits it to a
feature matrix and it travels with the parameter snapshot.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import seeded_rng, softmax

_SNAPSHOT_MAGIC = "pencil-lab-mlp 1"


class StaleCacheError(RuntimeError):
    """A forward cache was used after the parameters changed."""


@dataclass(eq=False)
class MlpParams:
    weights: list
    biases: list
    input_shift: Optional[np.ndarray] = None
    input_scale: Optional[np.ndarray] = None
    # bumped by every in-place update; lets backward() detect stale caches
    version: int = field(default=0, compare=False)

    @property
    def layer_sizes(self) -> tuple:
        return (self.weights[0].shape[1],) + tuple(w.shape[0] for w in self.weights)

    def arrays(self):
        for w, b in zip(self.weights, self.biases):
            yield w
            yield b

    def copy(self) -> "MlpParams":
        return MlpParams([w.copy() for w in self.weights], [b.copy() for b in self.biases],
                         self.input_shift, self.input_scale)

    def standardize(self, x):
        if self.input_shift is not None:
            x = x - self.input_shift
        if self.input_scale is not None:
            x = x / self.input_scale
        return x

    def __eq__(self, other):
        if not isinstance(other, MlpParams):
            return NotImplemented
        a, b = list(self.arrays()), list(other.arrays())
        a += [self.input_shift, self.input_scale]
        b += [other.input_shift, other.input_scale]
        return len(a) == len(b) and all(
            (x is None and y is None)
            or (x is not None and y is not None and x.shape == y.shape and np.array_equal(x, y))
            for x, y in zip(a, b)
        )


@dataclass
class SgdState:
    velocity: list
    momentum: float = 0.9
    weight_decay: float = 1e-4

    @classmethod
    def zeros_like(cls, params: MlpParams, momentum=0.9, weight_decay=1e-4) -> "SgdState":
        return cls([np.zeros_like(a) for a in params.arrays()], momentum, weight_decay)


@dataclass
class ForwardCache:
    inputs: list  # input to each affine layer
    pre: list  # pre-activation of each hidden layer
    batched: bool
    params_id: int
    version: int


def mlp_init(layer_sizes, seed=0) -> MlpParams:
    sizes = tuple(int(s) for s in layer_sizes)
    if len(sizes) < 2 or min(sizes) < 1:
        raise ValueError(f"layer_sizes needs >= 2 positive entries, got {layer_sizes!r}")
    rng = seeded_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        weights.append(rng.standard_normal((fan_out, fan_in)) * np.sqrt(2.0 / fan_in))
        biases.append(np.zeros(fan_out))
    return MlpParams(weights, biases)


def standardize_inputs(params: MlpParams, features) -> MlpParams:
    """Fit the input standardisation to `features` (column mean and std)."""
    x = np.asarray(features, dtype=np.float64)
    std = x.std(axis=0)
    params.input_shift = x.mean(axis=0)
    params.input_scale = np.where(std > 0, std, 1.0)
    return params


def forward(params: MlpParams, x):
    """Logits for one sample ``(d,)`` or a batch ``(b, d)``, plus a cache for `backward`."""
    x = np.asarray(x, dtype=np.float64)
    batched = x.ndim == 2
    h = np.atleast_2d(x)
    if x.ndim not in (1, 2) or h.shape[1] != params.layer_sizes[0]:
        raise ValueError(f"input must have {params.layer_sizes[0]} features, got shape {x.shape}")
    h = params.standardize(h)
    inputs, pre = [], []
    last = len(params.weights) - 1
    for k, (w, b) in enumerate(zip(params.weights, params.biases)):
        inputs.append(h)
        z = h @ w.T + b
        if k < last:
            pre.append(z)
            h = np.maximum(z, 0.0)
        else:
            h = z
    logits = h if batched else h[0]
    return logits, ForwardCache(inputs, pre, batched, id(params), params.version)


def backward(params: MlpParams, cache: ForwardCache, grad_logits):
    """Parameter gradients of a loss whose logit gradient is `grad_logits`.

    For a batch the result is the mean of the per-sample gradients. Returns a
    list ordered like ``params.arrays()`` (w0, b0, w1, b1, ...).
    """
    if cache.params_id != id(params) or cache.version != params.version:
        raise StaleCacheError("forward cache does not belong to these parameters")
    g = np.asarray(grad_logits, dtype=np.float64)
    g = g if cache.batched else g[None, :]
    b = cache.inputs[0].shape[0]
    if g.shape != (b, params.layer_sizes[-1]):
        raise ValueError(f"grad_logits shape {g.shape} does not match forward output")
    g = g / b
    grads = [None] * (2 * len(params.weights))
    for k in range(len(params.weights) - 1, -1, -1):
        grads[2 * k] = g.T @ cache.inputs[k]
        grads[2 * k + 1] = g.sum(axis=0)
        if k:
            g = (g @ params.weights[k]) * (cache.pre[k - 1] > 0)
    return grads


def sgd_step(params: MlpParams, grads, lr: float, state: SgdState) -> None:
    """In-place momentum SGD with coupled weight decay.

    ``v <- momentum * v + (grad + weight_decay * param)``;
    ``param <- param - lr * v``.
    """
    if not lr > 0:
        raise ValueError(f"learning rate must be positive, got {lr!r}")
    arrays = list(params.arrays())
    if len(grads) != len(arrays) or len(state.velocity) != len(arrays):
        raise ValueError("gradient/state count does not match parameters")
    for p, g, v in zip(arrays, grads, state.velocity):
        if g.shape != p.shape or v.shape != p.shape:
            raise ValueError(f"shape mismatch: param {p.shape}, grad {g.shape}, velocity {v.shape}")
        v *= state.momentum
        v += g + state.weight_decay * p
        p -= lr * v
    params.version += 1


def predict(params: MlpParams, x):
    return softmax(forward(params, x)[0])


def save_params(params: MlpParams, path) -> None:
    """Decimal text dump: magic line, layer sizes, input shift and scale rows
    (``-`` when unset), then per layer the weight rows followed by the bias
    row. Values use 17 significant digits, so a reload predicts bit-identically."""
    lines = [_SNAPSHOT_MAGIC, " ".join(str(s) for s in params.layer_sizes)]
    for v in (params.input_shift, params.input_scale):
        lines.append("-" if v is None else " ".join(format(e, ".17g") for e in v))
    for w, b in zip(params.weights, params.biases):
        lines.extend(" ".join(format(v, ".17g") for v in row) for row in w)
        lines.append(" ".join(format(v, ".17g") for v in b))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_params(path) -> MlpParams:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != _SNAPSHOT_MAGIC:
        raise ValueError(f"{path}: not a parameter snapshot")
    try:
        sizes = [int(s) for s in lines[1].split()]
        shift, scale = (None if lines[k] == "-" else np.array([float(v) for v in lines[k].split()])
                        for k in (2, 3))
        for v in (shift, scale):
            if v is not None and v.shape != (sizes[0],):
                raise ValueError("input standardisation has the wrong length")
        pos = 4
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            w = np.array([[float(v) for v in lines[pos + r].split()] for r in range(fan_out)])
            pos += fan_out
            b = np.array([float(v) for v in lines[pos].split()])
            pos += 1
            if w.shape != (fan_out, fan_in) or b.shape != (fan_out,):
                raise ValueError("layer shape mismatch")
            weights.append(w)
            biases.append(b)
    except (IndexError, ValueError) as exc:
        raise ValueError(f"{path}: malformed parameter snapshot ({exc})") from None
    if pos != len(lines):
        raise ValueError(f"{path}: trailing data in parameter snapshot")
    return MlpParams(weights, biases, shift, scale)
