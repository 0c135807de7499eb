"""Classifier training with cross-entropy or logit-normalized loss."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .nn import (
    Mlp,
    ShapeError,
    adam_init,
    adam_step,
    backward_from_output_grad,
    cross_entropy_t,
    forward,
    parameters,
    softmax_t,
)

LOSS_KINDS = ("cross_entropy", "logitnorm")


@dataclass(frozen=True)
class TrainConfig:
    loss_kind: str = "cross_entropy"
    logitnorm_tau: float = 0.04
    epochs: int = 50
    batch_size: int = 32
    lr: float = 0.001
    seed: int = 0
    shuffle: bool = True

    def __post_init__(self) -> None:
        if self.loss_kind not in LOSS_KINDS:
            raise ValueError(f"loss_kind must be one of {LOSS_KINDS}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if self.lr < 0.0:
            raise ValueError("lr must be >= 0")
        if self.logitnorm_tau <= 0.0:
            raise ValueError("logitnorm_tau must be > 0")


@dataclass
class TrainHistory:
    losses: list[float] = field(default_factory=list)
    accuracies: list[float] = field(default_factory=list)

    def write_csv(self, path: str) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["epoch", "train_loss", "train_accuracy"])
            for epoch, (loss, acc) in enumerate(zip(self.losses, self.accuracies), 1):
                writer.writerow([epoch, repr(loss), repr(acc)])


def logitnorm_loss(logits: np.ndarray, target: int, tau: float) -> float:
    """Cross-entropy of softmax(logits / (tau * ||logits||_2)) at target."""
    logits = np.asarray(logits, dtype=float)
    norm = float(np.linalg.norm(logits))
    if norm == 0.0:
        raise ValueError("logitnorm loss is undefined for a zero logit vector")
    return cross_entropy_t(logits / norm, target, tau)


def _loss_and_dlogits(
    logits: np.ndarray, target: int, cfg: TrainConfig
) -> tuple[float, np.ndarray]:
    if cfg.loss_kind == "cross_entropy":
        loss = cross_entropy_t(logits, target, 1.0)
        dlogits = softmax_t(logits, 1.0)
        dlogits[target] -= 1.0
        return loss, dlogits
    # logitnorm: chain rule through u = logits / ||logits||
    norm = float(np.linalg.norm(logits))
    if norm == 0.0:
        raise ValueError("logitnorm loss is undefined for a zero logit vector")
    u = logits / norm
    loss = cross_entropy_t(u, target, cfg.logitnorm_tau)
    g = softmax_t(u, cfg.logitnorm_tau)
    g[target] -= 1.0
    g /= cfg.logitnorm_tau
    dlogits = (g - u * float(u @ g)) / norm
    return loss, dlogits


def train(
    model: Mlp,
    data,
    cfg: TrainConfig,
    rng: np.random.Generator | None = None,
) -> tuple[Mlp, TrainHistory]:
    """Mini-batch Adam training; mutates and returns the model.

    Batch gradient is the mean of per-sample gradients accumulated in sample
    order, the last partial batch is kept, and each epoch reshuffles with the
    run seed, so identical (model, data, cfg) reruns are bit-reproducible.
    """
    n = len(data.labels)
    if n == 0:
        raise ValueError("cannot train on an empty dataset")
    if data.features.shape[1] != model.input_dim:
        raise ShapeError(
            f"data dimension {data.features.shape[1]} does not match model input {model.input_dim}"
        )
    if rng is None:
        rng = np.random.default_rng(cfg.seed)

    params = parameters(model)
    state = adam_init(params)
    dropout = model.config.dropout_rate > 0.0
    history = TrainHistory()
    for _ in range(cfg.epochs):
        order = rng.permutation(n) if cfg.shuffle else np.arange(n)
        epoch_loss = 0.0
        for start in range(0, n, cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            grads = [np.zeros_like(p) for p in params]
            for idx in batch:
                logits, trace = forward(
                    model, data.features[idx], stochastic=dropout, rng=rng
                )
                loss, dlogits = _loss_and_dlogits(logits, int(data.labels[idx]), cfg)
                epoch_loss += loss
                sample_grads, _ = backward_from_output_grad(model, trace, dlogits)
                for acc, g in zip(grads, sample_grads):
                    acc += g
            for g in grads:
                g /= len(batch)
            adam_step(state, params, grads, cfg.lr)
        history.losses.append(epoch_loss / n)
        history.accuracies.append(evaluate(model, data))
    return model, history


def evaluate(model: Mlp, data) -> float:
    """Fraction of samples whose argmax logit matches the label.

    Ties resolve to the lowest class index.
    """
    n = len(data.labels)
    if n == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    correct = 0
    for i in range(n):
        logits, _ = forward(model, data.features[i])
        if int(np.argmax(logits)) == int(data.labels[i]):
            correct += 1
    return correct / n
