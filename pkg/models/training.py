"""
Mini-batch SGD training on one-hot BCE targets.

Given the same seed, data and hyperparameters, training reproduces
bit-identical weights: the shuffle order and dropout masks come from two
child streams of the seed.
"""

import logging
import math
import os
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple, Union

import numpy as np

from dataset.batching import DEFAULT_BATCH_SIZE, batch_iterator
from dataset.labels import one_hot
from errors import ConfigError, NumericError, OutputError, ProtocolError
from numerics.loss import bce_loss
from numerics.optim import sgd_step, zero_grad
from numerics.rng import RngState
from numerics.tensor import LayerMode

logger = logging.getLogger(__name__)

Inputs = Union[np.ndarray, Tuple[np.ndarray, ...]]

SHUFFLE_STREAM = 0
DROPOUT_STREAM = 1

# preset -> (learning rate, epochs)
PRESET_DEFAULTS = {
    "fnn": (0.01, 15),
    "cnn": (0.001, 15),
    "dual_cnn": (0.001, 8),
    "fusion": (0.01, 15),
}


@dataclass
class TrainingHyper:
    lr: float
    epochs: int
    batch_size: int = DEFAULT_BATCH_SIZE
    seed: int = 0

    @classmethod
    def for_preset(cls, preset: str, **overrides) -> "TrainingHyper":
        if preset not in PRESET_DEFAULTS:
            raise ConfigError(f"unknown training preset '{preset}', valid: {', '.join(PRESET_DEFAULTS)}")
        lr, epochs = PRESET_DEFAULTS[preset]
        values = {"lr": lr, "epochs": epochs}
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    def validate(self) -> None:
        if not self.lr > 0:
            raise ConfigError(f"learning rate must be positive, got {self.lr}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch size must be >= 1, got {self.batch_size}")


@dataclass
class TrainingResult:
    model: object
    history: List[float] = field(default_factory=list)


def count(inputs: Inputs) -> int:
    return len(inputs[0]) if isinstance(inputs, tuple) else len(inputs)


def take(inputs: Inputs, rows: Sequence[int]) -> Inputs:
    rows = np.asarray(rows, dtype=np.int64)
    if isinstance(inputs, tuple):
        return tuple(part[rows] for part in inputs)
    return inputs[rows]


def train_model(model, inputs: Inputs, labels: np.ndarray, hyper: TrainingHyper) -> TrainingResult:
    """
    Train ``model`` in place.

    Args:
        model: Network or EarlyFusionModel
        inputs: N-row input array (or tuple of arrays for fusion models)
        labels: N binary labels
        hyper: Learning rate, epochs, batch size and seed

    Returns:
        TrainingResult with the per-epoch mean BCE history
    """
    hyper.validate()
    n = count(inputs)
    if n == 0:
        raise ProtocolError("cannot train on an empty training set")
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape[0] != n:
        raise ProtocolError(f"{n} training inputs but {labels.shape[0]} labels")
    if model.has_batchnorm and (n < 2 or hyper.batch_size < 2):
        raise ProtocolError(
            f"{model.name}: batch norm needs at least 2 rows per batch "
            f"(training set {n}, batch size {hyper.batch_size})"
        )
    targets = one_hot(labels).astype(model.dtype)

    root = RngState(hyper.seed)
    shuffle_rng = root.child(SHUFFLE_STREAM)
    dropout_rng = root.child(DROPOUT_STREAM)
    params = model.parameters()
    zero_grad(params)

    history = []
    for epoch in range(1, hyper.epochs + 1):
        losses = []
        weights = []
        for rows in batch_iterator(list(range(n)), hyper.batch_size, shuffle_rng):
            if len(rows) == 1 and model.has_batchnorm:
                logger.debug("epoch %d: skipping trailing batch of 1 (batch norm)", epoch)
                continue
            probs = model.forward(take(inputs, rows), LayerMode.TRAIN, dropout_rng)
            loss, grad = bce_loss(probs, targets[rows])
            model.backward(grad)
            sgd_step(params, hyper.lr)
            losses.append(loss * len(rows))
            weights.append(len(rows))
        mean_loss = math.fsum(losses) / sum(weights)
        if not math.isfinite(mean_loss):
            raise NumericError(f"{model.name}: epoch {epoch} mean loss is not finite ({mean_loss})")
        history.append(mean_loss)
        logger.info("%s epoch %d/%d: mean loss %.6f", model.name, epoch, hyper.epochs, mean_loss)

    return TrainingResult(model, history)


def predict_proba(model, inputs: Inputs, batch_size: int = 256) -> np.ndarray:
    """Eval-mode probabilities, N x 2."""
    n = count(inputs)
    if n == 0:
        return np.empty((0, 2), dtype=np.float64)
    chunks = [
        model.forward(take(inputs, range(start, min(start + batch_size, n))), LayerMode.EVAL)
        for start in range(0, n, batch_size)
    ]
    return np.concatenate(chunks).astype(np.float64)


def write_history(path: str, history: Sequence[float]) -> None:
    """Tab-separated (epoch, mean_loss) table."""
    try:
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        with open(path, 'w') as f:
            f.write("epoch\tmean_loss\n")
            for epoch, loss in enumerate(history, start=1):
                f.write(f"{epoch}\t{loss:.8f}\n")
    except OSError as e:
        raise OutputError(f"cannot write training history {path}: {e}")


def read_history(path: str) -> List[float]:
    with open(path, 'r') as f:
        lines = f.read().splitlines()[1:]
    return [float(line.split("\t")[1]) for line in lines if line]
