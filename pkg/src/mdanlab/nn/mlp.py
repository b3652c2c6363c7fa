from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.special import expit, log_softmax, softmax

from mdanlab.errors import InputError, ShapeError

ACTIVATIONS = ("relu", "identity")
ROLES = ("extractor", "task", "discriminator")
LOSS_KINDS = ("softmax_xent", "logistic")


@dataclass(frozen=True)
class Layer:
    weight: np.ndarray
    bias: np.ndarray
    activation: str = "relu"

    @property
    def in_dim(self) -> int:
        return int(self.weight.shape[1])

    @property
    def out_dim(self) -> int:
        return int(self.weight.shape[0])


@dataclass(frozen=True)
class MlpParams:
    """全连接网络参数：layers[i].weight 形状为 (out, in)。梯度也用同一结构表示。"""

    layers: tuple[Layer, ...]
    role: str = "extractor"

    def __post_init__(self) -> None:
        if not self.layers:
            raise ShapeError("MlpParams needs at least one layer")
        if self.role not in ROLES:
            raise InputError(f"unknown role {self.role!r}, expected one of {ROLES}")
        for idx, layer in enumerate(self.layers):
            if layer.activation not in ACTIVATIONS:
                raise InputError(f"layer {idx}: unknown activation {layer.activation!r}")
            if layer.weight.ndim != 2 or layer.bias.shape != (layer.out_dim,):
                raise ShapeError(f"layer {idx}: weight {layer.weight.shape} / bias {layer.bias.shape} mismatch")
            if idx > 0 and self.layers[idx - 1].out_dim != layer.in_dim:
                raise ShapeError(f"layer {idx}: in_dim {layer.in_dim} != previous out_dim {self.layers[idx - 1].out_dim}")

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim

    @property
    def shapes(self) -> list[tuple[tuple[int, ...], tuple[int, ...]]]:
        return [(layer.weight.shape, layer.bias.shape) for layer in self.layers]

    def map(self, fn: Callable[[np.ndarray], np.ndarray]) -> MlpParams:
        return MlpParams(
            layers=tuple(Layer(weight=fn(l.weight), bias=fn(l.bias), activation=l.activation) for l in self.layers),
            role=self.role,
        )

    def zip_map(self, other: MlpParams, fn: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> MlpParams:
        check_same_shape(self, other)
        return MlpParams(
            layers=tuple(
                Layer(weight=fn(a.weight, b.weight), bias=fn(a.bias, b.bias), activation=a.activation)
                for a, b in zip(self.layers, other.layers)
            ),
            role=self.role,
        )

    def zeros_like(self) -> MlpParams:
        return self.map(np.zeros_like)

    def flat(self) -> np.ndarray:
        return np.concatenate([np.concatenate([l.weight.ravel(), l.bias.ravel()]) for l in self.layers])

    def with_flat(self, values: np.ndarray) -> MlpParams:
        values = np.asarray(values, dtype=np.float64)
        layers: list[Layer] = []
        offset = 0
        for l in self.layers:
            n_w = l.weight.size
            w = values[offset : offset + n_w].reshape(l.weight.shape)
            offset += n_w
            b = values[offset : offset + l.bias.size].copy()
            offset += l.bias.size
            layers.append(Layer(weight=w.copy(), bias=b, activation=l.activation))
        if offset != values.size:
            raise ShapeError(f"flat vector has {values.size} entries, params need {offset}")
        return MlpParams(layers=tuple(layers), role=self.role)

    def is_finite(self) -> bool:
        return all(np.isfinite(l.weight).all() and np.isfinite(l.bias).all() for l in self.layers)


Gradients = MlpParams


def check_same_shape(a: MlpParams, b: MlpParams) -> None:
    if a.shapes != b.shapes:
        raise ShapeError(f"parameter shapes differ: {a.shapes} vs {b.shapes}")


def params_add(a: MlpParams, b: MlpParams) -> MlpParams:
    return a.zip_map(b, np.add)


def params_scale(a: MlpParams, factor: float) -> MlpParams:
    factor = float(factor)
    return a.map(lambda x: factor * x)


def init_mlp(
    sizes: Sequence[int],
    *,
    seed: int,
    role: str = "extractor",
    hidden_activation: str = "relu",
    output_activation: str = "identity",
) -> MlpParams:
    """Glorot 均匀初始化：U(±sqrt(6/(fan_in+fan_out)))，偏置为 0。"""
    sizes = [int(s) for s in sizes]
    if len(sizes) < 2 or min(sizes) < 1:
        raise ShapeError(f"invalid layer sizes {sizes}")
    rng = np.random.default_rng(seed)
    layers: list[Layer] = []
    for idx, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weight = rng.uniform(-limit, limit, size=(fan_out, fan_in))
        activation = output_activation if idx == len(sizes) - 2 else hidden_activation
        layers.append(Layer(weight=weight, bias=np.zeros(fan_out), activation=activation))
    return MlpParams(layers=tuple(layers), role=role)


@dataclass(frozen=True)
class Batch:
    features: np.ndarray
    labels: np.ndarray | None = None
    domain: int = 0
    n_classes: int | None = None
    indices: np.ndarray | None = None

    def __post_init__(self) -> None:
        x = np.asarray(self.features, dtype=np.float64)
        if x.ndim != 2 or x.shape[0] < 1:
            raise ShapeError(f"batch features must be a non-empty 2-D array, got {x.shape}")
        object.__setattr__(self, "features", x)
        if self.labels is not None:
            y = np.asarray(self.labels)
            if y.shape != (x.shape[0],):
                raise ShapeError(f"batch labels shape {y.shape} != ({x.shape[0]},)")
            if self.n_classes is not None and y.size and (y.min() < 0 or y.max() >= self.n_classes):
                raise InputError(f"batch label out of range [0, {self.n_classes})")
            object.__setattr__(self, "labels", y)

    @property
    def m(self) -> int:
        return int(self.features.shape[0])


@dataclass(frozen=True)
class Activations:
    inputs: tuple[np.ndarray, ...]
    pre: tuple[np.ndarray, ...]
    masks: tuple[np.ndarray | None, ...]
    output: np.ndarray


def forward(params: MlpParams, features: np.ndarray | Batch, *, dropout_rate: float = 0.0, rng_seed: int = 0) -> Activations:
    x = features.features if isinstance(features, Batch) else np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1:
        raise ShapeError(f"features must be a non-empty 2-D array, got shape {x.shape}")
    if x.shape[1] != params.in_dim:
        raise ShapeError(f"feature dim {x.shape[1]} != first layer in_dim {params.in_dim}")
    if not 0.0 <= dropout_rate < 1.0:
        raise InputError(f"dropout_rate must lie in [0, 1), got {dropout_rate}")

    rng = np.random.default_rng(rng_seed) if dropout_rate > 0 else None
    inputs: list[np.ndarray] = []
    pre: list[np.ndarray] = []
    masks: list[np.ndarray | None] = []
    h = x
    for layer in params.layers:
        inputs.append(h)
        z = h @ layer.weight.T + layer.bias
        pre.append(z)
        a = np.maximum(z, 0.0) if layer.activation == "relu" else z
        mask = None
        # inverted dropout，仅作用于 relu 隐层输出
        if rng is not None and layer.activation == "relu":
            keep = rng.random(a.shape) >= dropout_rate
            mask = keep / (1.0 - dropout_rate)
            a = a * mask
        masks.append(mask)
        h = a
    return Activations(inputs=tuple(inputs), pre=tuple(pre), masks=tuple(masks), output=h)


def backward(params: MlpParams, acts: Activations, grad_output: np.ndarray | None) -> tuple[Gradients, np.ndarray]:
    """反向传播，返回 (参数梯度, 对输入的梯度)。grad_output 为 None 时贡献为零。"""
    if len(acts.pre) != len(params.layers):
        raise ShapeError(f"activations for {len(acts.pre)} layers, params have {len(params.layers)}")
    for idx, (layer, z) in enumerate(zip(params.layers, acts.pre)):
        if z.shape[1] != layer.out_dim or acts.inputs[idx].shape[1] != layer.in_dim:
            raise ShapeError(f"layer {idx}: activation shapes do not match parameters")

    if grad_output is None:
        return params.zeros_like(), np.zeros_like(acts.inputs[0])
    delta = np.asarray(grad_output, dtype=np.float64)
    if delta.shape != acts.output.shape:
        raise ShapeError(f"grad_output shape {delta.shape} != output shape {acts.output.shape}")

    grads: list[Layer] = []
    for idx in range(len(params.layers) - 1, -1, -1):
        layer = params.layers[idx]
        g = delta
        if acts.masks[idx] is not None:
            g = g * acts.masks[idx]
        if layer.activation == "relu":
            g = g * (acts.pre[idx] > 0)
        grads.append(Layer(weight=g.T @ acts.inputs[idx], bias=g.sum(axis=0), activation=layer.activation))
        delta = g @ layer.weight
    grads.reverse()
    return MlpParams(layers=tuple(grads), role=params.role), delta


def grad_reverse(g, mu: float):
    """梯度反转：前向恒等，反向乘以 -mu。接受 ndarray 或 MlpParams。"""
    mu = float(mu)
    if mu < 0:
        raise InputError(f"mu must be >= 0, got {mu}")
    if isinstance(g, MlpParams):
        return g.map(lambda a: -mu * a)
    return -mu * np.asarray(g, dtype=np.float64)


def _check_labels(labels: np.ndarray, m: int, n_classes: int) -> np.ndarray:
    y = np.asarray(labels)
    if y.shape != (m,):
        raise ShapeError(f"labels shape {y.shape} != ({m},)")
    if y.size and not np.all(np.equal(np.mod(y, 1), 0)):
        raise InputError("labels must be integers")
    y = y.astype(np.int64)
    if y.size and (y.min() < 0 or y.max() >= n_classes):
        raise InputError(f"label out of range [0, {n_classes})")
    return y


def loss(logits: np.ndarray, labels: np.ndarray, kind: str = "softmax_xent") -> tuple[float, np.ndarray]:
    """均值约简的交叉熵 / logistic 损失及其对 logits 的梯度。"""
    z = np.asarray(logits, dtype=np.float64)
    if z.ndim != 2 or z.shape[0] < 1:
        raise ShapeError(f"logits must be a non-empty 2-D array, got {z.shape}")
    m, c = z.shape

    if kind == "softmax_xent":
        y = _check_labels(labels, m, max(c, 1))
        logp = log_softmax(z, axis=1)
        value = -float(np.mean(logp[np.arange(m), y]))
        grad = softmax(z, axis=1)
        grad[np.arange(m), y] -= 1.0
        return max(value, 0.0), grad / m

    if kind == "logistic":
        if c not in (1, 2):
            raise InputError(f"logistic loss needs 1 or 2 logits per row, got {c}")
        y = _check_labels(labels, m, 2).astype(np.float64)
        margin = z[:, 0] if c == 1 else z[:, 1] - z[:, 0]
        value = float(np.mean(np.logaddexp(0.0, margin) - y * margin))
        g = (expit(margin) - y) / m
        grad = g[:, None] if c == 1 else np.stack([-g, g], axis=1)
        return max(value, 0.0), grad

    raise InputError(f"unknown loss kind {kind!r}, expected one of {LOSS_KINDS}")


def predict_logits(params: MlpParams, features: np.ndarray) -> np.ndarray:
    return forward(params, features).output
