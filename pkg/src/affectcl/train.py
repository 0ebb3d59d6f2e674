"""Trainers: contrastive encoder pretraining, frozen-encoder probe training,
and the jointly trained end-to-end classifier.

All three share the same loop: seeded shuffle into minibatches (the last
partial batch is kept), Adam updates, an epoch loss equal to the mean of the
per-batch losses, and patience-based early stopping on the training loss.
The returned model is the parameter snapshot taken at the best epoch loss.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .contrastive import ContrastiveBatch, supcon_loss_grad_stats
from .errors import ConfigurationError, TrainingError
from .nn import (
    AdamState,
    DenseLayer,
    adam_step,
    backward,
    init_dense,
    layer_forward,
    network_forward_batch,
    network_params,
    set_network_params,
)

logger = logging.getLogger(__name__)

ENCODER_UNITS = 30
N_CLASSES = 2


@dataclass
class TrainConfig:
    """Optimization settings shared by all trainers."""

    lr: float = 0.001
    batch_size: int = 256
    temperature: float = 0.1
    patience_epochs: int = 10
    max_epochs: int = 500
    seed: int = 0
    encoder_units: int = ENCODER_UNITS

    def __post_init__(self) -> None:
        if min(self.lr, self.batch_size, self.temperature, self.patience_epochs, self.max_epochs) <= 0:
            raise ConfigurationError("all training settings must be positive")
        if self.patience_epochs > self.max_epochs:
            raise ConfigurationError("patience must not exceed max_epochs")
        if self.encoder_units <= 0:
            raise ConfigurationError("encoder_units must be positive")


def early_stop(loss_history: list[float], patience: int) -> bool:
    """Stop once the running-best loss has not improved for `patience` epochs."""
    if not loss_history:
        raise ConfigurationError("loss history must be non-empty")
    best_idx = int(np.argmin(loss_history))
    return (len(loss_history) - 1 - best_idx) >= patience


def _iter_batches(n: int, batch_size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start : start + batch_size]


def init_encoder(in_dim: int, rng: np.random.Generator, units: int = ENCODER_UNITS) -> DenseLayer:
    return init_dense(in_dim, units, "sigmoid", rng)


def init_probe(in_dim: int, rng: np.random.Generator) -> DenseLayer:
    return init_dense(in_dim, N_CLASSES, "softmax", rng)


def cross_entropy(probs: np.ndarray, labels: np.ndarray) -> float:
    """Mean categorical cross-entropy of softmax outputs against int labels."""
    picked = probs[np.arange(labels.size), labels]
    return float(-np.mean(np.log(picked)))


def cross_entropy_output_grad(probs: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """d(mean CE)/d(probs): -1/(n * p_true) at the true class, 0 elsewhere."""
    grad = np.zeros_like(probs)
    idx = np.arange(labels.size)
    grad[idx, labels] = -1.0 / (labels.size * probs[idx, labels])
    return grad


def _check_inputs(features: np.ndarray, labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels)
    if x.ndim != 2 or y.shape != (x.shape[0],):
        raise ConfigurationError("features must be (n, dim) with one label per row")
    if x.shape[0] < 2:
        raise ConfigurationError("need at least 2 training samples")
    return x, y


def _fit(
    layers: list[DenseLayer],
    n_samples: int,
    batch_loss_and_grads,
    cfg: TrainConfig,
    rng: np.random.Generator,
    what: str,
) -> list[DenseLayer]:
    """Shared optimization loop; returns the best-epoch parameter snapshot.

    batch_loss_and_grads(idx) must return (loss, per-layer GradientBundle-style
    flat list) for the minibatch rows idx.
    """
    params = network_params(layers)
    state = AdamState.init_like(params, lr=cfg.lr)
    best_loss = np.inf
    best_snapshot = [layer.copy() for layer in layers]
    history: list[float] = []
    for epoch in range(cfg.max_epochs):
        batch_losses = []
        for idx in _iter_batches(n_samples, cfg.batch_size, rng):
            loss, flat_grads = batch_loss_and_grads(idx)
            if not np.isfinite(loss):
                raise TrainingError(f"{what}: non-finite loss at epoch {epoch}")
            batch_losses.append(loss)
            new_params = adam_step(network_params(layers), flat_grads, state)
            set_network_params(layers, new_params)
        epoch_loss = float(np.mean(batch_losses))
        history.append(epoch_loss)
        if epoch_loss < best_loss:
            best_loss = epoch_loss
            best_snapshot = [layer.copy() for layer in layers]
        logger.debug("%s epoch %d loss %.6f (best %.6f)", what, epoch, epoch_loss, best_loss)
        if early_stop(history, cfg.patience_epochs):
            logger.debug("%s stopped after %d epochs", what, epoch + 1)
            break
    return best_snapshot


def train_encoder_scl(
    features: np.ndarray,
    contrastive_labels: np.ndarray,
    cfg: TrainConfig,
    encoder: DenseLayer | None = None,
) -> DenseLayer:
    """Pretrain the encoder with the contrastive objective on binary labels.

    Minibatches with no contributing anchor (or a lone sample in the last
    partial batch) contribute zero loss and zero gradient.
    """
    x, y = _check_inputs(features, contrastive_labels)
    rng = np.random.default_rng(cfg.seed)
    if encoder is None:
        encoder = init_encoder(x.shape[1], rng, cfg.encoder_units)
    elif encoder.in_dim != x.shape[1]:
        raise ConfigurationError("encoder input dim does not match features")
    layers = [encoder.copy()]  # never mutate the caller's model

    def batch_loss_and_grads(idx: np.ndarray):
        xb, yb = x[idx], y[idx]
        reps, cache = network_forward_batch(xb, layers)
        # skip degenerate batches: a lone sample, every positive set empty,
        # or a single category (no negatives; the objective would only
        # collapse representations)
        if idx.size < 2 or np.unique(yb).size < 2:
            logger.debug("contrastive batch skipped: no usable contrast")
            zero = [np.zeros_like(p) for p in network_params(layers)]
            return 0.0, zero
        batch = ContrastiveBatch(reps, yb, cfg.temperature)
        # optimize the sum-form loss; monitor the per-anchor mean so the
        # stopping signal is comparable across (partial) batch sizes
        _, loss_mean, n_active, rep_grad = supcon_loss_grad_stats(batch)
        if n_active == 0:
            logger.debug("contrastive batch skipped: every anchor without positives")
            zero = [np.zeros_like(p) for p in network_params(layers)]
            return 0.0, zero
        bundle = backward(rep_grad, cache)
        return loss_mean, bundle.arrays()

    best = _fit(layers, x.shape[0], batch_loss_and_grads, cfg, rng, "encoder")
    return best[0]


def train_probe(
    encoder: DenseLayer,
    features: np.ndarray,
    labels: np.ndarray,
    cfg: TrainConfig,
    probe: DenseLayer | None = None,
) -> DenseLayer:
    """Train the softmax probe on frozen-encoder outputs with cross-entropy.

    The encoder is only read (its outputs are precomputed once); its
    parameters are never touched by the optimizer.
    """
    x, y = _check_inputs(features, labels)
    if np.unique(y).size < 2:
        raise TrainingError("probe training set contains a single class")
    reps = layer_forward(x, encoder)
    rng = np.random.default_rng(cfg.seed)
    if probe is None:
        probe = init_probe(encoder.out_dim, rng)
    elif probe.in_dim != encoder.out_dim:
        raise ConfigurationError("probe input dim does not match encoder output")
    layers = [probe.copy()]  # never mutate the caller's model

    def batch_loss_and_grads(idx: np.ndarray):
        rb, yb = reps[idx], y[idx]
        probs, cache = network_forward_batch(rb, layers)
        loss = cross_entropy(probs, yb)
        bundle = backward(cross_entropy_output_grad(probs, yb), cache)
        return loss, bundle.arrays()

    best = _fit(layers, x.shape[0], batch_loss_and_grads, cfg, rng, "probe")
    return best[0]


def train_end_to_end(
    features: np.ndarray,
    labels: np.ndarray,
    cfg: TrainConfig,
    model: list[DenseLayer] | None = None,
) -> list[DenseLayer]:
    """Train encoder and probe jointly with cross-entropy."""
    x, y = _check_inputs(features, labels)
    if np.unique(y).size < 2:
        raise TrainingError("training set contains a single class")
    rng = np.random.default_rng(cfg.seed)
    if model is None:
        encoder = init_encoder(x.shape[1], rng, cfg.encoder_units)
        probe = init_probe(encoder.out_dim, rng)
        model = [encoder, probe]
    layers = [layer.copy() for layer in model]  # never mutate the caller's model

    def batch_loss_and_grads(idx: np.ndarray):
        xb, yb = x[idx], y[idx]
        probs, cache = network_forward_batch(xb, layers)
        loss = cross_entropy(probs, yb)
        bundle = backward(cross_entropy_output_grad(probs, yb), cache)
        return loss, bundle.arrays()

    return _fit(layers, x.shape[0], batch_loss_and_grads, cfg, rng, "end_to_end")
