"""Multi-layer perceptron regression from sentence vectors onto visual
feature vectors.

Every layer, including the output, applies an affine transform followed
by an element-wise ReLU. Training minimizes mean squared error with
RMSprop over shuffled mini-batches, applies inverted dropout to hidden
activations, and early-stops on validation loss. All randomness flows
from seeded ``numpy.random.Generator`` streams, so a (seed, data,
config) triple fully determines parameters, masks, shuffles and the
loss history.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .textvec import SentenceVector

#: ordered (weight matrix, bias vector) pairs; W_i has shape (n_i, n_{i-1})
NetworkParams = list[tuple[np.ndarray, np.ndarray]]

#: per-parameter decayed mean of squared gradients, same shapes as the params
OptimizerState = list[tuple[np.ndarray, np.ndarray]]


@dataclass(frozen=True)
class NetworkConfig:
    """Layer widths from input to output, plus the hidden dropout rate."""

    layer_sizes: tuple[int, ...]
    dropout_rate: float = 0.2

    def __post_init__(self):
        object.__setattr__(self, "layer_sizes", tuple(self.layer_sizes))
        if len(self.layer_sizes) < 2:
            raise ValueError("network needs at least an input and an output size")
        if any(n < 1 for n in self.layer_sizes):
            raise ValueError("layer sizes must be positive")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout rate must lie in [0, 1)")


@dataclass(frozen=True)
class OptimizerConfig:
    learning_rate: float = 0.001
    gamma: float = 0.9
    epsilon: float = 1e-6
    batch_size: int = 64
    max_epochs: int = 500
    patience: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be > 0")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must lie in (0, 1)")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")
        if self.batch_size < 1 or self.max_epochs < 1 or self.patience < 1:
            raise ValueError("batch size, max epochs and patience must be >= 1")


@dataclass(frozen=True)
class TrainingPair:
    """One (sentence vector, target visual feature) regression example."""

    sentence_vector: SentenceVector
    target: np.ndarray


@dataclass
class ForwardCache:
    """Everything a matching backward pass needs."""

    inputs: np.ndarray
    preacts: list[np.ndarray]
    acts: list[np.ndarray]
    masks: Optional[list[np.ndarray]]  # scaled {0, 1/(1-p)} per hidden layer

    @property
    def output(self) -> np.ndarray:
        return self.acts[-1]


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_loss: float


@dataclass
class TrainResult:
    params: NetworkParams
    history: list[EpochStats]
    best_epoch: int
    best_val_loss: float


def init_network(config: NetworkConfig, seed: int) -> NetworkParams:
    """Symmetric uniform fan-based weight init, zero biases, seeded."""
    rng = np.random.default_rng(seed)
    params: NetworkParams = []
    sizes = config.layer_sizes
    for n_in, n_out in zip(sizes, sizes[1:]):
        limit = math.sqrt(6.0 / (n_in + n_out))
        weight = rng.uniform(-limit, limit, size=(n_out, n_in))
        bias = np.zeros(n_out, dtype=np.float64)
        params.append((weight, bias))
    return params


def copy_params(params: NetworkParams) -> NetworkParams:
    return [(w.copy(), b.copy()) for w, b in params]


def zero_state(params: NetworkParams) -> OptimizerState:
    return [(np.zeros_like(w), np.zeros_like(b)) for w, b in params]


def forward(
    params: NetworkParams,
    inputs: np.ndarray,
    *,
    train: bool = False,
    dropout_rate: float = 0.0,
    masks: Optional[Sequence[np.ndarray]] = None,
    rng: Optional[np.random.Generator] = None,
) -> ForwardCache:
    """Run the network over a batch, ReLU at every layer including the output.

    ``inputs`` is a (batch, n_0) matrix. In train mode, inverted dropout
    is applied to each hidden activation: either the supplied boolean
    keep-masks are used, or fresh ones are drawn from ``rng``. Inference
    applies no dropout and no rescaling.
    """
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim != 2:
        raise ValueError("forward expects a 2-D (batch, dim) input")
    if inputs.shape[1] != params[0][0].shape[1]:
        raise ValueError(
            f"input dim {inputs.shape[1]} does not match first layer width {params[0][0].shape[1]}"
        )

    use_dropout = train and dropout_rate > 0.0
    if use_dropout and masks is None and rng is None:
        raise ValueError("train-mode dropout needs either masks or an rng")
    keep = 1.0 - dropout_rate

    preacts: list[np.ndarray] = []
    acts: list[np.ndarray] = []
    scaled_masks: Optional[list[np.ndarray]] = [] if use_dropout else None

    h = inputs
    last = len(params) - 1
    for i, (w, b) in enumerate(params):
        z = h @ w.T + b
        h = np.maximum(z, 0.0)
        if use_dropout and i < last:
            if masks is not None:
                mask = np.asarray(masks[i], dtype=bool)
                if mask.shape != h.shape:
                    raise ValueError(f"dropout mask {i} has shape {mask.shape}, expected {h.shape}")
            else:
                mask = rng.random(h.shape) >= dropout_rate
            scaled = mask.astype(np.float64) / keep
            scaled_masks.append(scaled)
            h = h * scaled
        preacts.append(z)
        acts.append(h)
    return ForwardCache(inputs=inputs, preacts=preacts, acts=acts, masks=scaled_masks)


def mse_loss(prediction: np.ndarray, target: np.ndarray) -> float:
    """Mean over dimensions (and batch rows, if any) of squared differences."""
    prediction = np.asarray(prediction, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if prediction.shape != target.shape:
        raise ValueError(f"shape mismatch: prediction {prediction.shape} vs target {target.shape}")
    diff = prediction - target
    return float(np.mean(diff * diff))


def backward(
    params: NetworkParams, cache: ForwardCache, targets: np.ndarray
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Exact gradient of the batch MSE loss for a matching forward pass.

    The ReLU subgradient at exactly zero is taken as zero.
    """
    targets = np.asarray(targets, dtype=np.float64)
    output = cache.output
    if targets.shape != output.shape:
        raise ValueError(f"target shape {targets.shape} does not match output {output.shape}")

    n, d = output.shape
    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(params)

    # dL/dz at the output layer; the output has no dropout
    delta = (2.0 / (n * d)) * (output - targets) * (cache.preacts[-1] > 0.0)
    for i in range(len(params) - 1, -1, -1):
        below = cache.inputs if i == 0 else cache.acts[i - 1]
        grads[i] = (delta.T @ below, delta.sum(axis=0))
        if i > 0:
            upstream = delta @ params[i][0]
            if cache.masks is not None:
                upstream = upstream * cache.masks[i - 1]
            delta = upstream * (cache.preacts[i - 1] > 0.0)
    return grads


def rmsprop_step(
    params: NetworkParams,
    grads: Sequence[tuple[np.ndarray, np.ndarray]],
    state: OptimizerState,
    config: OptimizerConfig,
) -> tuple[NetworkParams, OptimizerState]:
    """One update: E' = g*E + (1-g)*grad^2, p' = p - lr*grad/sqrt(E'+eps)."""
    new_params: NetworkParams = []
    new_state: OptimizerState = []
    for (w, b), (gw, gb), (ew, eb) in zip(params, grads, state):
        ew2 = config.gamma * ew + (1.0 - config.gamma) * gw * gw
        eb2 = config.gamma * eb + (1.0 - config.gamma) * gb * gb
        new_params.append(
            (
                w - config.learning_rate * gw / np.sqrt(ew2 + config.epsilon),
                b - config.learning_rate * gb / np.sqrt(eb2 + config.epsilon),
            )
        )
        new_state.append((ew2, eb2))
    return new_params, new_state


class EarlyStopping:
    """Stop after ``patience`` consecutive epochs without a strictly lower loss.

    Keeps a deep copy of the best epoch's parameters so training can
    restore them afterwards.
    """

    def __init__(self, patience: int):
        if patience < 1:
            raise ValueError("patience must be >= 1")
        self.patience = patience
        self.best_loss = math.inf
        self.best_epoch = 0
        self.best_params: Optional[NetworkParams] = None
        self.epochs_without_improvement = 0

    def update(self, epoch: int, loss: float, params: NetworkParams) -> bool:
        """Record one epoch; returns True when training should stop."""
        if loss < self.best_loss:
            self.best_loss = loss
            self.best_epoch = epoch
            self.best_params = copy_params(params)
            self.epochs_without_improvement = 0
        else:
            self.epochs_without_improvement += 1
        return self.epochs_without_improvement >= self.patience


def _stack_pairs(pairs: Sequence[TrainingPair]) -> tuple[np.ndarray, np.ndarray]:
    inputs = np.stack([p.sentence_vector.values for p in pairs]).astype(np.float64)
    targets = np.stack([np.asarray(p.target, dtype=np.float64) for p in pairs])
    return inputs, targets


def train(
    train_set: Sequence[TrainingPair],
    val_set: Sequence[TrainingPair],
    net_cfg: NetworkConfig,
    opt_cfg: OptimizerConfig,
    val_metric_fn: Optional[Callable[[NetworkParams], float]] = None,
) -> TrainResult:
    """Mini-batch RMSprop training with early stopping.

    Each epoch shuffles the training pairs with the run's seeded
    generator, steps once per mini-batch (the last batch may be smaller),
    then scores the validation set in inference mode. The parameters of
    the best validation epoch are returned together with the full
    per-epoch (train loss, validation loss) history.

    ``val_metric_fn`` may replace the monitored quantity (lower is
    better); the recorded ``val_loss`` column then holds that metric.
    """
    if not train_set or not val_set:
        raise ValueError("training and validation sets must be non-empty")

    x_train, t_train = _stack_pairs(train_set)
    x_val, t_val = _stack_pairs(val_set)
    if x_train.shape[1] != net_cfg.layer_sizes[0]:
        raise ValueError(
            f"sentence vector dim {x_train.shape[1]} does not match input width {net_cfg.layer_sizes[0]}"
        )
    if t_train.shape[1] != net_cfg.layer_sizes[-1]:
        raise ValueError(
            f"target dim {t_train.shape[1]} does not match output width {net_cfg.layer_sizes[-1]}"
        )
    if x_val.shape[1] != x_train.shape[1] or t_val.shape[1] != t_train.shape[1]:
        raise ValueError("validation dims do not match training dims")

    params = init_network(net_cfg, opt_cfg.seed)
    state = zero_state(params)
    rng = np.random.default_rng(opt_cfg.seed)
    stopper = EarlyStopping(opt_cfg.patience)
    history: list[EpochStats] = []
    n = x_train.shape[0]

    def validation_loss(p: NetworkParams) -> float:
        if val_metric_fn is not None:
            return float(val_metric_fn(p))
        return mse_loss(forward(p, x_val).output, t_val)

    for epoch in range(1, opt_cfg.max_epochs + 1):
        order = rng.permutation(n)
        loss_sum = 0.0
        for start in range(0, n, opt_cfg.batch_size):
            batch = order[start : start + opt_cfg.batch_size]
            cache = forward(
                params,
                x_train[batch],
                train=True,
                dropout_rate=net_cfg.dropout_rate,
                rng=rng,
            )
            loss_sum += mse_loss(cache.output, t_train[batch]) * batch.size
            grads = backward(params, cache, t_train[batch])
            params, state = rmsprop_step(params, grads, state, opt_cfg)

        val_loss = validation_loss(params)
        history.append(EpochStats(epoch, loss_sum / n, val_loss))
        if stopper.update(epoch, val_loss, params):
            break

    best = stopper.best_params if stopper.best_params is not None else copy_params(params)
    return TrainResult(
        params=best,
        history=history,
        best_epoch=stopper.best_epoch,
        best_val_loss=stopper.best_loss,
    )


def encode(params: NetworkParams, sv: SentenceVector) -> np.ndarray:
    """Predicted visual feature vector for one sentence (inference mode)."""
    return forward(params, sv.values[None, :]).output[0]
