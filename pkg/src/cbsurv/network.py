"""Minimal feed-forward network trained on person-moment batches.

Dense layers with ReLU or linear hidden activations, inverted dropout on
hidden layers, a single linear output unit plus a constant (never learned)
offset, numerically stable binary cross-entropy on the logits, hand-written
reverse-mode gradients, and Adam. Everything is float64 numpy and
deterministic per seed.
"""

from __future__ import annotations

import dataclasses
from typing import Sequence

import numpy as np

from ._seeds import subseed
from .errors import ConfigurationError, DataError, NumericError

ACTIVATIONS = ("relu", "linear")

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-7


@dataclasses.dataclass(frozen=True)
class NetworkConfig:
    """Architecture and optimizer settings.

    ``layer_sizes`` lists the hidden layers; an empty tuple degenerates to
    logistic regression on the inputs. ``num_batches`` is the number of
    mini-batches per epoch (batch size = ceil(n / num_batches)).
    """

    layer_sizes: tuple[int, ...] = ()
    activation: str = "relu"
    dropout_rate: float = 0.0
    learning_rate: float = 0.01
    num_batches: int = 100
    epochs: int = 200
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "layer_sizes", tuple(int(s) for s in self.layer_sizes))
        for size in self.layer_sizes:
            if size < 1:
                raise ConfigurationError(f"hidden layer sizes must be positive, got {size}")
        if self.activation not in ACTIVATIONS:
            raise ConfigurationError(
                f"unknown activation '{self.activation}', expected one of {ACTIVATIONS}"
            )
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigurationError(f"dropout_rate must lie in [0, 1), got {self.dropout_rate}")
        if self.learning_rate <= 0:
            raise ConfigurationError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.num_batches < 1:
            raise ConfigurationError(f"num_batches must be at least 1, got {self.num_batches}")
        if self.epochs < 1:
            raise ConfigurationError(f"epochs must be at least 1, got {self.epochs}")

    def to_dict(self) -> dict:
        return {
            "layer_sizes": list(self.layer_sizes),
            "activation": self.activation,
            "dropout_rate": self.dropout_rate,
            "learning_rate": self.learning_rate,
            "num_batches": self.num_batches,
            "epochs": self.epochs,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkConfig":
        return cls(
            layer_sizes=tuple(d.get("layer_sizes", ())),
            activation=d.get("activation", "relu"),
            dropout_rate=float(d.get("dropout_rate", 0.0)),
            learning_rate=float(d.get("learning_rate", 0.01)),
            num_batches=int(d.get("num_batches", 100)),
            epochs=int(d.get("epochs", 200)),
            seed=int(d.get("seed", 0)),
        )


@dataclasses.dataclass
class TrainingBatch:
    """Feature rows (covariates then time), binary labels, constant offset."""

    features: np.ndarray
    labels: np.ndarray
    offset: float

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.labels = np.asarray(self.labels, dtype=float)
        if self.features.ndim != 2:
            raise DataError(f"features must be 2-dimensional, got shape {self.features.shape}")
        if self.labels.shape != (self.features.shape[0],):
            raise DataError("features and labels must have matching row counts")
        if self.labels.size and not np.all(np.isin(self.labels, (0.0, 1.0))):
            raise DataError("labels must be 0 or 1")

    def __len__(self) -> int:
        return self.labels.size


class NetworkParameters:
    """Per-layer weights/biases plus Adam first/second moments and step count."""

    def __init__(self, config: NetworkConfig, input_dim: int,
                 weights: list[np.ndarray], biases: list[np.ndarray]):
        self.config = config
        self.input_dim = int(input_dim)
        self.weights = weights
        self.biases = biases
        self.moment1 = [np.zeros_like(w) for w in weights] + [np.zeros_like(b) for b in biases]
        self.moment2 = [np.zeros_like(w) for w in weights] + [np.zeros_like(b) for b in biases]
        self.step = 0

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def parameter_count(self) -> int:
        return int(sum(w.size for w in self.weights) + sum(b.size for b in self.biases))

    def arrays(self) -> list[np.ndarray]:
        return self.weights + self.biases

    def copy(self) -> "NetworkParameters":
        dup = NetworkParameters(
            self.config, self.input_dim,
            [w.copy() for w in self.weights], [b.copy() for b in self.biases],
        )
        dup.moment1 = [m.copy() for m in self.moment1]
        dup.moment2 = [v.copy() for v in self.moment2]
        dup.step = self.step
        return dup

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "input_dim": self.input_dim,
            "layers": [
                {"shape": list(w.shape), "weights": w.ravel().tolist(), "bias": b.tolist()}
                for w, b in zip(self.weights, self.biases)
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkParameters":
        config = NetworkConfig.from_dict(d["config"])
        weights, biases = [], []
        for layer in d["layers"]:
            shape = tuple(layer["shape"])
            weights.append(np.asarray(layer["weights"], dtype=float).reshape(shape))
            biases.append(np.asarray(layer["bias"], dtype=float))
        return cls(config, d["input_dim"], weights, biases)


@dataclasses.dataclass
class Gradients:
    """Loss gradients, congruent to the parameter arrays."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def arrays(self) -> list[np.ndarray]:
        return self.weights + self.biases

    def max_abs(self) -> float:
        return max((float(np.max(np.abs(a))) if a.size else 0.0) for a in self.arrays())


@dataclasses.dataclass
class TrainingHistory:
    """Full-sample evaluation losses per epoch; entry 0 is pre-training."""

    losses: list[float]
    best_epoch: int
    best_loss: float
    final_grad_max: float

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def init_network(config: NetworkConfig, input_dim: int) -> NetworkParameters:
    """Symmetric fan-in-scaled uniform weights (bound sqrt(6/(fan_in+fan_out))),
    zero biases; deterministic per ``config.seed``."""
    if input_dim < 0:
        raise ConfigurationError(f"input_dim must be nonnegative, got {input_dim}")
    rng = np.random.default_rng(config.seed)
    dims = [int(input_dim), *config.layer_sizes, 1]
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return NetworkParameters(config, input_dim, weights, biases)


def _check_input_width(params: NetworkParameters, features: np.ndarray) -> None:
    if features.shape[1] != params.input_dim:
        raise DataError(
            f"feature width {features.shape[1]} does not match network input "
            f"dimension {params.input_dim}"
        )


def _forward_pass(params, features, offset, train_mode, rng, keep_cache=False):
    """Logits (pre-sigmoid, offset included); optionally the backprop cache."""
    config = params.config
    h = features
    pre_acts, post_acts, masks = [], [features], []
    n_layers = params.n_layers
    for i in range(n_layers - 1):
        z = h @ params.weights[i] + params.biases[i]
        if not np.all(np.isfinite(z)):
            raise NumericError(f"non-finite values in hidden layer {i}")
        a = np.maximum(z, 0.0) if config.activation == "relu" else z
        if train_mode and config.dropout_rate > 0.0:
            keep = 1.0 - config.dropout_rate
            mask = (rng.random(a.shape) < keep) / keep
            a = a * mask
        else:
            mask = None
        if keep_cache:
            pre_acts.append(z)
            post_acts.append(a)
            masks.append(mask)
        h = a
    out = h @ params.weights[-1] + params.biases[-1]
    if not np.all(np.isfinite(out)):
        raise NumericError(f"non-finite values in output layer {n_layers - 1}")
    logits = out[:, 0] + offset
    if keep_cache:
        return logits, (pre_acts, post_acts, masks)
    return logits


def forward(params: NetworkParameters, batch: TrainingBatch,
            mode: str = "eval", seed: int = 0) -> np.ndarray:
    """Per-row pre-sigmoid outputs f(x_i, t_i) + offset.

    In ``train`` mode hidden units are dropped with the configured rate and
    survivors rescaled by 1/(1-rate); ``eval`` mode applies no mask and is
    independent of the seed.
    """
    _check_mode(mode)
    _check_input_width(params, batch.features)
    rng = np.random.default_rng(seed) if mode == "train" else None
    return _forward_pass(params, batch.features, batch.offset, mode == "train", rng)


def _check_mode(mode: str) -> None:
    if mode not in ("train", "eval"):
        raise ConfigurationError(f"mode must be 'train' or 'eval', got '{mode}'")


def sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def bce_loss(logits: np.ndarray, labels: np.ndarray) -> float:
    """Mean binary cross-entropy in logits form.

    max(z, 0) - z*y + log(1 + exp(-|z|)) equals -[y log s(z) + (1-y) log(1-s(z))]
    but stays finite for large |z|.
    """
    logits = np.asarray(logits, dtype=float)
    labels = np.asarray(labels, dtype=float)
    if logits.size == 0:
        raise DataError("cannot compute loss on empty input")
    if logits.shape != labels.shape:
        raise DataError("logits and labels must have the same shape")
    per_row = np.maximum(logits, 0.0) - logits * labels + np.log1p(np.exp(-np.abs(logits)))
    return float(per_row.mean())


def _backward_pass(params, features, labels, offset, train_mode, rng) -> Gradients:
    logits, (pre_acts, post_acts, masks) = _forward_pass(
        params, features, offset, train_mode, rng, keep_cache=True
    )
    n = features.shape[0]
    config = params.config
    delta = ((sigmoid(logits) - labels) / n)[:, None]
    d_weights = [None] * params.n_layers
    d_biases = [None] * params.n_layers
    for i in range(params.n_layers - 1, -1, -1):
        h_prev = post_acts[i]
        d_weights[i] = h_prev.T @ delta
        d_biases[i] = delta.sum(axis=0)
        if i > 0:
            delta = delta @ params.weights[i].T
            if masks[i - 1] is not None:
                delta = delta * masks[i - 1]
            if config.activation == "relu":
                delta = delta * (pre_acts[i - 1] > 0.0)
    return Gradients(d_weights, d_biases)


def gradient(params: NetworkParameters, batch: TrainingBatch,
             mode: str = "train", seed: int = 0) -> Gradients:
    """Exact reverse-mode gradient of ``bce_loss(forward(...))``.

    The constant offset contributes no parameter gradient. In train mode the
    dropout mask is drawn from ``seed`` and shared between the internal
    forward and backward passes.
    """
    _check_mode(mode)
    _check_input_width(params, batch.features)
    rng = np.random.default_rng(seed) if mode == "train" else None
    return _backward_pass(params, batch.features, batch.labels, batch.offset,
                          mode == "train", rng)


def adam_step(params: NetworkParameters, grads: Gradients,
              learning_rate: float) -> NetworkParameters:
    """One Adam update (beta1=0.9, beta2=0.999, eps=1e-7), in place."""
    arrays = params.arrays()
    grad_arrays = grads.arrays()
    if len(arrays) != len(grad_arrays) or any(
        a.shape != g.shape for a, g in zip(arrays, grad_arrays)
    ):
        raise ConfigurationError("gradient structure does not match parameters")
    for g in grad_arrays:
        if g.size and not np.all(np.isfinite(g)):
            raise NumericError("non-finite gradient")
    params.step += 1
    t = params.step
    bias1 = 1.0 - ADAM_BETA1 ** t
    bias2 = 1.0 - ADAM_BETA2 ** t
    for theta, g, m, v in zip(arrays, grad_arrays, params.moment1, params.moment2):
        m *= ADAM_BETA1
        m += (1.0 - ADAM_BETA1) * g
        v *= ADAM_BETA2
        v += (1.0 - ADAM_BETA2) * np.square(g)
        theta -= learning_rate * (m / bias1) / (np.sqrt(v / bias2) + ADAM_EPS)
    return params


def train_network(batch: TrainingBatch, config: NetworkConfig,
                  init_params: NetworkParameters | None = None
                  ) -> tuple[NetworkParameters, TrainingHistory]:
    """Adam training with per-epoch shuffling and best-epoch checkpointing.

    Each epoch permutes the rows (seeded) and splits them into
    ``config.num_batches`` near-equal batches. After every epoch the loss is
    evaluated on the full sample without dropout; the parameters with the
    lowest such loss are returned. ``history.losses[0]`` is the pre-training
    loss of the initial parameters.
    """
    n = len(batch)
    if n == 0:
        raise DataError("cannot train on an empty sample")
    if config.num_batches > n:
        raise ConfigurationError(
            f"num_batches={config.num_batches} exceeds the sample size {n}"
        )
    params = init_params.copy() if init_params is not None else init_network(
        config, batch.features.shape[1]
    )
    _check_input_width(params, batch.features)

    rng = np.random.default_rng(subseed(config.seed, "train"))
    eval_logits = _forward_pass(params, batch.features, batch.offset, False, None)
    losses = [bce_loss(eval_logits, batch.labels)]
    best = params.copy()
    best_epoch, best_loss = 0, losses[0]

    for epoch in range(1, config.epochs + 1):
        perm = rng.permutation(n)
        for rows in np.array_split(perm, config.num_batches):
            grads = _backward_pass(
                params, batch.features[rows], batch.labels[rows], batch.offset,
                config.dropout_rate > 0.0, rng,
            )
            adam_step(params, grads, config.learning_rate)
        eval_logits = _forward_pass(params, batch.features, batch.offset, False, None)
        loss = bce_loss(eval_logits, batch.labels)
        losses.append(loss)
        if loss < best_loss:
            best, best_epoch, best_loss = params.copy(), epoch, loss

    final_grads = _backward_pass(best, batch.features, batch.labels, batch.offset, False, None)
    history = TrainingHistory(
        losses=losses, best_epoch=best_epoch, best_loss=best_loss,
        final_grad_max=final_grads.max_abs(),
    )
    return best, history


def train_on_sample(sample, config: NetworkConfig,
                    init_params: NetworkParameters | None = None
                    ) -> tuple[NetworkParameters, TrainingHistory]:
    """Train directly on a :class:`~cbsurv.sampling.CaseBaseSample`."""
    batch = TrainingBatch(sample.features, sample.labels, sample.offset)
    return train_network(batch, config, init_params)
