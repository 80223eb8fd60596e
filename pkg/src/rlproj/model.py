"""Small fully connected networks with exact reverse-mode gradients.

Three architectures cover every experiment: a one-hidden-layer regression
net, a one-bottleneck autoencoder with sigmoid outputs, and a two-hidden-
layer classifier for the moons task (optionally sigmoid-terminated so its
outputs live in [0, 1]).

``forward`` caches layer inputs and pre-activations; ``backward`` is then a
pure function of (params, cache, output sensitivity).
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError, ShapeError
from .rng import stream

ACTIVATIONS = ("relu", "sigmoid", "tanh", "none")
_ACT_CODE = {a: i for i, a in enumerate(ACTIVATIONS)}
_CKPT_MAGIC = b"RLPCK001"


@dataclass
class Layer:
    weight: np.ndarray  # (out, in)
    bias: np.ndarray    # (out,)
    activation: str

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")


@dataclass
class ModelParams:
    layers: list

    def copy(self) -> "ModelParams":
        return ModelParams(
            [Layer(l.weight.copy(), l.bias.copy(), l.activation) for l in self.layers]
        )

    @property
    def in_dim(self) -> int:
        return self.layers[0].weight.shape[1]

    @property
    def out_dim(self) -> int:
        return self.layers[-1].weight.shape[0]


@dataclass
class GradientBundle:
    """Gradients shape-congruent with a ModelParams, plus the loss value."""

    weight_grads: list
    bias_grads: list
    loss_value: float = 0.0


def _act(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "sigmoid":
        return 1.0 / (1.0 + np.exp(-z))
    if kind == "tanh":
        return np.tanh(z)
    return z


def _act_grad(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return (z > 0.0).astype(np.float64)
    if kind == "sigmoid":
        s = 1.0 / (1.0 + np.exp(-z))
        return s * (1.0 - s)
    if kind == "tanh":
        t = np.tanh(z)
        return 1.0 - t * t
    return np.ones_like(z)


def _init_layer(rng: np.random.Generator, n_out: int, n_in: int, activation: str) -> Layer:
    bound = 1.0 / np.sqrt(n_in)
    w = rng.uniform(-bound, bound, size=(n_out, n_in))
    b = rng.uniform(-bound, bound, size=n_out)
    return Layer(w, b, activation)


def build_regression_net(d: int, hidden: int = 32, seed: int = 0) -> ModelParams:
    """d -> hidden relu -> 1 linear."""
    rng = stream("init", seed)
    return ModelParams([
        _init_layer(rng, hidden, d, "relu"),
        _init_layer(rng, 1, hidden, "none"),
    ])


def build_autoencoder(d: int, latent: int = 32, seed: int = 0) -> ModelParams:
    """d -> latent relu -> d sigmoid, outputs in (0, 1) like normalized pixels."""
    rng = stream("init", seed)
    return ModelParams([
        _init_layer(rng, latent, d, "relu"),
        _init_layer(rng, d, latent, "sigmoid"),
    ])


def build_moons_classifier(seed: int = 0, sigmoid_output: bool = False) -> ModelParams:
    """2 -> 50 relu -> 50 relu -> 2, sigmoid-terminated for projection training."""
    rng = stream("init", seed)
    return ModelParams([
        _init_layer(rng, 50, 2, "relu"),
        _init_layer(rng, 50, 50, "relu"),
        _init_layer(rng, 2, 50, "sigmoid" if sigmoid_output else "none"),
    ])


@dataclass
class ForwardCache:
    inputs: list = field(default_factory=list)      # a_{k-1} per layer
    preacts: list = field(default_factory=list)     # z_k per layer


def forward(params: ModelParams, X: np.ndarray) -> tuple[np.ndarray, ForwardCache]:
    """Row-wise evaluation of the layered map; returns outputs and cache."""
    a = np.ascontiguousarray(X, dtype=np.float64)
    if a.ndim != 2:
        raise ShapeError(f"input must be 2-d, got shape {a.shape}")
    if a.shape[1] != params.in_dim:
        raise ShapeError(f"input has {a.shape[1]} columns, model expects {params.in_dim}")
    cache = ForwardCache()
    for layer in params.layers:
        z = a @ layer.weight.T + layer.bias
        cache.inputs.append(a)
        cache.preacts.append(z)
        a = _act(z, layer.activation)
    return a, cache


def backward(
    params: ModelParams, cache: ForwardCache, dL_dH: np.ndarray, loss_value: float = 0.0
) -> GradientBundle:
    """Exact gradients of the scalar loss whose output sensitivity is dL_dH."""
    g = np.ascontiguousarray(dL_dH, dtype=np.float64)
    if g.shape != cache.preacts[-1].shape:
        raise ShapeError(
            f"sensitivity shape {g.shape} does not match outputs {cache.preacts[-1].shape}"
        )
    weight_grads = [None] * len(params.layers)
    bias_grads = [None] * len(params.layers)
    for k in range(len(params.layers) - 1, -1, -1):
        layer = params.layers[k]
        delta = g * _act_grad(cache.preacts[k], layer.activation)
        weight_grads[k] = delta.T @ cache.inputs[k]
        bias_grads[k] = delta.sum(axis=0)
        if k > 0:
            g = delta @ layer.weight
    return GradientBundle(weight_grads, bias_grads, loss_value)


def zero_bundle(params: ModelParams) -> GradientBundle:
    return GradientBundle(
        [np.zeros_like(l.weight) for l in params.layers],
        [np.zeros_like(l.bias) for l in params.layers],
        0.0,
    )


def bundle_add_(acc: GradientBundle, other: GradientBundle) -> GradientBundle:
    for a, b in zip(acc.weight_grads, other.weight_grads):
        a += b
    for a, b in zip(acc.bias_grads, other.bias_grads):
        a += b
    acc.loss_value += other.loss_value
    return acc


def bundle_scale_(acc: GradientBundle, s: float) -> GradientBundle:
    for a in acc.weight_grads:
        a *= s
    for a in acc.bias_grads:
        a *= s
    acc.loss_value *= s
    return acc


def param_count(params: ModelParams) -> int:
    return sum(l.weight.size + l.bias.size for l in params.layers)


def flatten_params(params: ModelParams) -> np.ndarray:
    return np.concatenate(
        [np.concatenate([l.weight.ravel(), l.bias]) for l in params.layers]
    )


def set_flat_params(params: ModelParams, vec: np.ndarray) -> ModelParams:
    vec = np.asarray(vec, dtype=np.float64)
    if vec.size != param_count(params):
        raise ShapeError(f"expected {param_count(params)} values, got {vec.size}")
    pos = 0
    for l in params.layers:
        w = l.weight.size
        l.weight[...] = vec[pos : pos + w].reshape(l.weight.shape)
        pos += w
        b = l.bias.size
        l.bias[...] = vec[pos : pos + b]
        pos += b
    return params


def flatten_bundle(g: GradientBundle) -> np.ndarray:
    return np.concatenate(
        [np.concatenate([w.ravel(), b]) for w, b in zip(g.weight_grads, g.bias_grads)]
    )


def save_checkpoint(path, params: ModelParams) -> None:
    """Flat little-endian float64 values after a shape header, plus a sidecar manifest."""
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(_CKPT_MAGIC)
        fh.write(struct.pack("<I", len(params.layers)))
        for l in params.layers:
            out, inp = l.weight.shape
            fh.write(struct.pack("<III", out, inp, _ACT_CODE[l.activation]))
        for l in params.layers:
            fh.write(l.weight.astype("<f8").tobytes())
            fh.write(l.bias.astype("<f8").tobytes())
    manifest = {
        "format": _CKPT_MAGIC.decode(),
        "layers": [
            {"out": l.weight.shape[0], "in": l.weight.shape[1], "activation": l.activation}
            for l in params.layers
        ],
        "param_count": param_count(params),
        "dtype": "float64-le",
    }
    Path(str(path) + ".json").write_text(json.dumps(manifest, indent=2) + "\n")


def load_checkpoint(path) -> ModelParams:
    raw = Path(path).read_bytes()
    if raw[:8] != _CKPT_MAGIC:
        raise FormatError(f"{path}: not a checkpoint file")
    (n_layers,) = struct.unpack_from("<I", raw, 8)
    shapes = []
    pos = 12
    for _ in range(n_layers):
        out, inp, code = struct.unpack_from("<III", raw, pos)
        pos += 12
        if code >= len(ACTIVATIONS):
            raise FormatError(f"{path}: unknown activation code {code}")
        shapes.append((out, inp, ACTIVATIONS[code]))
    layers = []
    for out, inp, act in shapes:
        w = np.frombuffer(raw, dtype="<f8", count=out * inp, offset=pos).reshape(out, inp)
        pos += 8 * out * inp
        b = np.frombuffer(raw, dtype="<f8", count=out, offset=pos)
        pos += 8 * out
        layers.append(Layer(w.astype(np.float64), b.astype(np.float64), act))
    if pos != len(raw):
        raise FormatError(f"{path}: trailing bytes after parameters")
    return ModelParams(layers)
