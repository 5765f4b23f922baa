# smotecls/models/nn.py
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from smotecls.core.errors import ConfigError, DataError, TrainingDivergedError
from smotecls.core.rng import RngLike, as_generator

logger = logging.getLogger("smotecls.nn")

ACTIVATIONS = ("relu", "linear", "softmax")


@dataclass(frozen=True, eq=False)
class Layer:
    weight: np.ndarray  # (fan_in, fan_out)
    bias: np.ndarray  # (fan_out,)
    activation: str = "relu"


@dataclass(frozen=True, eq=False)
class DenseNet:
    layers: Tuple[Layer, ...]

    @property
    def in_dim(self) -> int:
        return int(self.layers[0].weight.shape[0])

    @property
    def out_dim(self) -> int:
        return int(self.layers[-1].weight.shape[1])

    def params(self) -> List[np.ndarray]:
        """Layer-major order: W0, b0, W1, b1, ..."""
        out: List[np.ndarray] = []
        for layer in self.layers:
            out.extend((layer.weight, layer.bias))
        return out

    def with_params(self, params: Sequence[np.ndarray]) -> "DenseNet":
        if len(params) != 2 * len(self.layers):
            raise DataError("parameter list does not match network layout")
        return DenseNet(
            tuple(
                Layer(params[2 * i], params[2 * i + 1], layer.activation)
                for i, layer in enumerate(self.layers)
            )
        )

    def n_params(self) -> int:
        return int(sum(p.size for p in self.params()))


@dataclass(eq=False)
class ForwardCache:
    inputs: List[np.ndarray]  # input to each layer
    outputs: List[np.ndarray]  # post-activation output of each layer

    @property
    def output(self) -> np.ndarray:
        return self.outputs[-1]


def init_dense(
    widths: Sequence[int],
    activations: Sequence[str],
    rng: RngLike,
) -> DenseNet:
    """Fan-in/fan-out scaled uniform weights, zero biases."""
    if len(activations) != len(widths) - 1:
        raise ConfigError("need one activation per layer")
    gen = as_generator(rng)
    layers = []
    for fan_in, fan_out, act in zip(widths[:-1], widths[1:], activations):
        if act not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {act!r}")
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        w = gen.uniform(-limit, limit, size=(fan_in, fan_out))
        layers.append(Layer(w, np.zeros(fan_out), act))
    return DenseNet(tuple(layers))


def _activate(a: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return np.maximum(a, 0.0)
    if kind == "softmax":
        e = np.exp(a - a.max(axis=1, keepdims=True))
        return e / e.sum(axis=1, keepdims=True)
    return a


def forward(net: DenseNet, batch: np.ndarray) -> ForwardCache:
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != net.in_dim:
        raise DataError(f"expected input width {net.in_dim}, got {x.shape}")
    inputs, outputs = [], []
    h = x
    for layer in net.layers:
        inputs.append(h)
        h = _activate(h @ layer.weight + layer.bias, layer.activation)
        outputs.append(h)
    return ForwardCache(inputs, outputs)


def backward(
    net: DenseNet, cache: Optional[ForwardCache], upstream: np.ndarray
) -> Tuple[List[np.ndarray], np.ndarray]:
    """
    Gradients of a scalar loss w.r.t. every parameter (layer-major order) and
    w.r.t. the network input, given dLoss/dOutput.
    """
    if cache is None or len(cache.outputs) != len(net.layers):
        raise DataError("backward needs the forward cache of the same network")
    g = np.asarray(upstream, dtype=np.float64)
    grads: List[np.ndarray] = [None] * (2 * len(net.layers))  # type: ignore[list-item]
    for i in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[i]
        out = cache.outputs[i]
        if layer.activation == "relu":
            g = g * (out > 0.0)
        elif layer.activation == "softmax":
            g = out * (g - (g * out).sum(axis=1, keepdims=True))
        grads[2 * i] = cache.inputs[i].T @ g
        grads[2 * i + 1] = g.sum(axis=0)
        g = g @ layer.weight.T
    return grads, g


@dataclass(eq=False)
class OptimizerState:
    method: str = "adam"
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: List[np.ndarray] = field(default_factory=list)
    v: List[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        if self.method not in ("adam", "sgd"):
            raise ConfigError(f"unknown optimizer {self.method!r}")
        if self.lr <= 0:
            raise ConfigError("learning rate must be > 0")


def step(state: OptimizerState, net: DenseNet, grads: Sequence[np.ndarray]) -> DenseNet:
    params = net.params()
    if len(grads) != len(params) or any(g.shape != p.shape for g, p in zip(grads, params)):
        raise DataError("gradient shapes do not match parameters")
    for i, g in enumerate(grads):
        if not np.all(np.isfinite(g)):
            raise TrainingDivergedError(
                "non-finite gradient",
                diagnostics={"param_index": i, "layer": i // 2, "step": state.t},
            )
    state.t += 1
    if state.method == "sgd":
        return net.with_params([p - state.lr * g for p, g in zip(params, grads)])

    if not state.m:
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.t
    c2 = 1.0 - b2**state.t
    new = []
    for j, (p, g) in enumerate(zip(params, grads)):
        state.m[j] = b1 * state.m[j] + (1.0 - b1) * g
        state.v[j] = b2 * state.v[j] + (1.0 - b2) * g * g
        m_hat = state.m[j] / c1
        v_hat = state.v[j] / c2
        new.append(p - state.lr * m_hat / (np.sqrt(v_hat) + state.eps))
    return net.with_params(new)


# --------------------------------------------------------------
# Softmax MLP classifier (alternative pseudo-label classifier)
# --------------------------------------------------------------
@dataclass(eq=False)
class MlpClassifier:
    net: DenseNet
    classes: Tuple[int, ...]

    def predict_proba(self, rows: np.ndarray) -> np.ndarray:
        return forward(self.net, rows).output


def fit_mlp_classifier(
    x: np.ndarray,
    y: np.ndarray,
    hidden: Sequence[int] = (16, 16),
    epochs: int = 200,
    batch: int = 64,
    lr: float = 1e-2,
    rng: RngLike = 0,
) -> MlpClassifier:
    """Cross-entropy training of a relu MLP with a softmax head over the classes present in y."""
    x = np.asarray(x, dtype=np.float64)
    classes, codes = np.unique(np.asarray(y).astype(np.int64), return_inverse=True)
    gen = as_generator(rng)
    widths = [x.shape[1], *hidden, len(classes)]
    acts = ["relu"] * len(hidden) + ["softmax"]
    net = init_dense(widths, acts, gen)
    state = OptimizerState("adam", lr)
    onehot = np.eye(len(classes))[codes]
    n = x.shape[0]
    for epoch in range(epochs):
        order = gen.permutation(n)
        for start in range(0, n, batch):
            b = order[start : start + batch]
            cache = forward(net, x[b])
            p = np.clip(cache.output, 1e-12, 1.0)
            grads, _ = backward(net, cache, -onehot[b] / p / len(b))
            net = step(state, net, grads)
    loss = -np.mean(np.log(np.clip(forward(net, x).output, 1e-12, 1.0))[onehot.astype(bool)])
    logger.info("MLP f_eta epochs=%d train_ce=%.4f", epochs, loss)
    return MlpClassifier(net=net, classes=tuple(int(c) for c in classes))
