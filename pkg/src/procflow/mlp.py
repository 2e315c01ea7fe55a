"""Multilayer perceptron with batch normalisation, trained with Nesterov-Adam.

Layout: input -> 3 x [affine -> batchnorm -> ReLU] -> affine -> softmax, with
hidden widths interpolated geometrically between the input and output sizes.
Everything is float64 numpy.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from ._seeds import child_seed
from .dataset import BinningModel, LabelSpace
from .errors import ContractError, EmptyDatasetError, ShapeError, ValidationError

MLP_FORMAT = "procflow.mlp"
MLP_VERSION = 1
N_HIDDEN = 3
PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class MLPArchitecture:
    layer_sizes: tuple[int, ...]

    def __post_init__(self):
        if len(self.layer_sizes) != N_HIDDEN + 2:
            raise ValidationError(f"need exactly {N_HIDDEN} hidden layers")
        if min(self.layer_sizes) < 1:
            raise ValidationError("layer sizes must be positive")

    @property
    def input_dim(self):
        return self.layer_sizes[0]

    @property
    def n_classes(self):
        return self.layer_sizes[-1]


def make_architecture(input_dim: int, n_classes: int) -> MLPArchitecture:
    """Hidden sizes ``round(exp(ln d + i (ln K - ln d) / 4))`` for i = 1..3.

    Rounding is half away from zero and sizes are floored at 1.
    """
    if input_dim < 1 or n_classes < 2:
        raise ValidationError("need input_dim >= 1 and n_classes >= 2")
    lo, hi = math.log(input_dim), math.log(n_classes)
    step = (hi - lo) / (N_HIDDEN + 1)
    hidden = [max(1, math.floor(math.exp(lo + i * step) + 0.5)) for i in range(1, N_HIDDEN + 1)]
    return MLPArchitecture((input_dim, *hidden, n_classes))


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 256
    epochs: int = 20
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    bn_momentum: float = 0.9
    bn_epsilon: float = 1e-5
    seed: int = 0

    def validate(self):
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValidationError("beta1 and beta2 must lie in (0, 1)")
        if self.learning_rate <= 0:
            raise ValidationError("learning_rate must be positive")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValidationError("batch_size must be >= 1 and epochs >= 0")
        if not 0 <= self.bn_momentum < 1 or self.bn_epsilon <= 0:
            raise ValidationError("bn_momentum must lie in [0, 1) and bn_epsilon be positive")


@dataclass
class MLPParams:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    gamma: list[np.ndarray]
    beta: list[np.ndarray]
    running_mean: list[np.ndarray]
    running_var: list[np.ndarray]
    version: int = field(default=0, compare=False)

    @property
    def architecture(self) -> MLPArchitecture:
        return MLPArchitecture(
            (self.weights[0].shape[0], *(w.shape[1] for w in self.weights))
        )

    def trainable(self) -> dict[str, np.ndarray]:
        """Trainable arrays by name, in a fixed order."""
        out = {}
        for layer, (w, b) in enumerate(zip(self.weights, self.biases)):
            out[f"W{layer}"] = w
            out[f"b{layer}"] = b
            if layer < N_HIDDEN:
                out[f"gamma{layer}"] = self.gamma[layer]
                out[f"beta{layer}"] = self.beta[layer]
        return out

    def arrays(self) -> dict[str, np.ndarray]:
        out = self.trainable()
        for layer in range(N_HIDDEN):
            out[f"running_mean{layer}"] = self.running_mean[layer]
            out[f"running_var{layer}"] = self.running_var[layer]
        return out

    def copy(self) -> "MLPParams":
        c = lambda xs: [x.copy() for x in xs]  # noqa: E731
        return MLPParams(c(self.weights), c(self.biases), c(self.gamma), c(self.beta),
                         c(self.running_mean), c(self.running_var), self.version)


def init_params(arch: MLPArchitecture, rng) -> MLPParams:
    """He-normal weights, zero biases, unit batch-norm scale."""
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    sizes = arch.layer_sizes
    weights = [rng.standard_normal((a, b)) * math.sqrt(2.0 / a) for a, b in zip(sizes[:-1], sizes[1:])]
    hidden = sizes[1:-1]
    return MLPParams(
        weights=weights,
        biases=[np.zeros(b) for b in sizes[1:]],
        gamma=[np.ones(h) for h in hidden],
        beta=[np.zeros(h) for h in hidden],
        running_mean=[np.zeros(h) for h in hidden],
        running_var=[np.ones(h) for h in hidden],
    )


@dataclass
class ForwardCache:
    params: MLPParams
    version: int
    mode: str
    inputs: list[np.ndarray]   # input to each affine layer
    xhat: list[np.ndarray]
    inv_std: list[np.ndarray]
    pre_relu: list[np.ndarray]
    probs: np.ndarray


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def forward(params: MLPParams, batch, mode: str = "eval",
            config: TrainConfig | None = None) -> tuple[np.ndarray, ForwardCache]:
    """Class probabilities for ``batch``.

    ``train`` normalises with batch statistics and updates the running
    statistics in place; ``eval`` uses the running statistics.
    """
    if mode not in ("train", "eval"):
        raise ValidationError(f"mode must be 'train' or 'eval', got {mode!r}")
    config = config or TrainConfig()
    h = np.asarray(batch, dtype=np.float64)
    if h.ndim != 2 or h.shape[1] != params.weights[0].shape[0]:
        raise ShapeError(f"network expects {params.weights[0].shape[0]} inputs, got shape {h.shape}")
    if not np.isfinite(h).all():
        raise ValidationError("inputs must be finite")

    m = config.bn_momentum
    inputs, xhats, invs, pre = [], [], [], []
    for layer in range(N_HIDDEN):
        inputs.append(h)
        z = h @ params.weights[layer] + params.biases[layer]
        if mode == "train":
            mu = z.mean(axis=0)
            var = z.var(axis=0)
            params.running_mean[layer] *= m
            params.running_mean[layer] += (1 - m) * mu
            params.running_var[layer] *= m
            params.running_var[layer] += (1 - m) * var
        else:
            mu = params.running_mean[layer]
            var = params.running_var[layer]
        inv = 1.0 / np.sqrt(var + config.bn_epsilon)
        xhat = (z - mu) * inv
        a = params.gamma[layer] * xhat + params.beta[layer]
        xhats.append(xhat)
        invs.append(inv)
        pre.append(a)
        h = np.maximum(a, 0.0)
    inputs.append(h)
    probs = softmax(h @ params.weights[-1] + params.biases[-1])
    cache = ForwardCache(params, params.version, mode, inputs, xhats, invs, pre, probs)
    return probs, cache


def loss(probabilities, labels) -> float:
    """Mean cross-entropy, with probabilities clamped to at least 1e-12."""
    p = np.asarray(probabilities, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    picked = p[np.arange(labels.shape[0]), labels]
    return float(np.mean(-np.log(np.maximum(picked, PROB_FLOOR))))


def backward(cache: ForwardCache, labels) -> dict[str, np.ndarray]:
    """Gradients of the mean cross-entropy for every trainable array."""
    if cache.mode != "train":
        raise ContractError("backward needs the cache of a train-mode forward pass")
    if cache.version != cache.params.version:
        raise ContractError("stale cache: parameters changed since the forward pass")
    params = cache.params
    labels = np.asarray(labels, dtype=np.int64)
    n = cache.probs.shape[0]
    if labels.shape != (n,):
        raise ShapeError("labels do not match the cached batch")

    grads: dict[str, np.ndarray] = {}
    d = cache.probs.copy()
    d[np.arange(n), labels] -= 1.0
    d /= n
    out = N_HIDDEN
    grads[f"W{out}"] = cache.inputs[out].T @ d
    grads[f"b{out}"] = d.sum(axis=0)
    dh = d @ params.weights[out].T
    for layer in reversed(range(N_HIDDEN)):
        da = dh * (cache.pre_relu[layer] > 0)
        xhat = cache.xhat[layer]
        grads[f"gamma{layer}"] = (da * xhat).sum(axis=0)
        grads[f"beta{layer}"] = da.sum(axis=0)
        dxhat = da * params.gamma[layer]
        dz = (cache.inv_std[layer] / n) * (
            n * dxhat - dxhat.sum(axis=0) - xhat * (dxhat * xhat).sum(axis=0)
        )
        grads[f"W{layer}"] = cache.inputs[layer].T @ dz
        grads[f"b{layer}"] = dz.sum(axis=0)
        dh = dz @ params.weights[layer].T
    return {k: grads[k] for k in params.trainable()}


@dataclass
class NadamState:
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def nadam_step(params: MLPParams, gradients: dict[str, np.ndarray], state: NadamState,
               config: TrainConfig) -> tuple[MLPParams, NadamState]:
    """One Nesterov-Adam update, in place.

    step = lr * (b1 * m_hat + (1 - b1) * g / (1 - b1^t)) / (sqrt(v_hat) + eps)
    """
    b1, b2 = config.beta1, config.beta2
    state.t += 1
    t = state.t
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    for name, p in params.trainable().items():
        g = gradients[name]
        m = state.m.setdefault(name, np.zeros_like(p))
        v = state.v.setdefault(name, np.zeros_like(p))
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        m_hat = m / c1
        v_hat = v / c2
        p -= config.learning_rate * (b1 * m_hat + (1 - b1) * g / c1) / (np.sqrt(v_hat) + config.epsilon)
    params.version += 1
    return params, state


def train_mlp(X, y, arch: MLPArchitecture, config: TrainConfig | None = None,
              callback: Callable[[int, float], None] | None = None) -> MLPParams:
    """Train on inputs scaled to [0, 1] and class indices ``y``.

    ``callback(epoch, mean_batch_loss)`` runs after every epoch.
    """
    config = config or TrainConfig()
    config.validate()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyDatasetError("cannot train on an empty training set")
    if X.shape[1] != arch.input_dim or y.shape[0] != X.shape[0]:
        raise ShapeError("training data does not match the architecture")
    if y.min() < 0 or y.max() >= arch.n_classes:
        raise ValidationError("class index out of range")

    params = init_params(arch, child_seed(config.seed, "mlp-init"))
    shuffle_rng = np.random.default_rng(child_seed(config.seed, "mlp-shuffle"))
    state = NadamState()
    n = X.shape[0]
    for epoch in range(config.epochs):
        order = shuffle_rng.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            probs, cache = forward(params, X[idx], "train", config)
            batch_loss = loss(probs, y[idx])
            if not math.isfinite(batch_loss):
                raise ContractError(f"non-finite loss in epoch {epoch + 1}")
            total += batch_loss * idx.shape[0]
            nadam_step(params, backward(cache, y[idx]), state, config)
        if callback is not None:
            callback(epoch + 1, total / n)
    return params


# -- classifier wrapper and serialization -------------------------------------

@dataclass
class MLPModel:
    """Trained network plus what it needs to classify raw feature rows."""

    params: MLPParams
    class_names: LabelSpace
    binning: BinningModel
    config: TrainConfig = field(default_factory=TrainConfig)

    @property
    def architecture(self):
        return self.params.architecture

    def predict_proba(self, X) -> np.ndarray:
        probs, _ = forward(self.params, self.binning.scaled(np.atleast_2d(X)), "eval", self.config)
        return probs

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=1)

    def to_dict(self) -> dict:
        return {
            "format": MLP_FORMAT,
            "version": MLP_VERSION,
            "layer_sizes": list(self.architecture.layer_sizes),
            "train_config": dataclasses.asdict(self.config),
            "label_space": self.class_names.to_dict(),
            "arrays": {
                name: {"shape": list(a.shape), "data": a.ravel().tolist()}
                for name, a in self.params.arrays().items()
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict, binning: BinningModel) -> "MLPModel":
        if d.get("format") != MLP_FORMAT or d.get("version") != MLP_VERSION:
            raise ValidationError("not a version-1 procflow MLP")
        arrays = {
            k: np.array(v["data"], dtype=np.float64).reshape(v["shape"])
            for k, v in d["arrays"].items()
        }
        get = lambda prefix, n: [arrays[f"{prefix}{i}"] for i in range(n)]  # noqa: E731
        params = MLPParams(
            weights=get("W", N_HIDDEN + 1),
            biases=get("b", N_HIDDEN + 1),
            gamma=get("gamma", N_HIDDEN),
            beta=get("beta", N_HIDDEN),
            running_mean=get("running_mean", N_HIDDEN),
            running_var=get("running_var", N_HIDDEN),
        )
        if list(params.architecture.layer_sizes) != list(d["layer_sizes"]):
            raise ShapeError("serialized arrays disagree with layer_sizes")
        return cls(params, LabelSpace.from_dict(d["label_space"]), binning,
                   TrainConfig(**d["train_config"]))

    def save(self, path):
        Path(path).write_text(self.to_json())
