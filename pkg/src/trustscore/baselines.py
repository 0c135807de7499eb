"""Reference confidence scores: dropout-ensemble entropy and max softmax.

Both are oriented so that higher means more confident, matching the trust
score, so the metrics layer never needs to know which method produced a
score.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nn import Mlp, forward, softmax_t


@dataclass(frozen=True)
class DropoutConfig:
    passes: int = 50
    seed: int = 0

    def __post_init__(self) -> None:
        if self.passes < 1:
            raise ValueError("passes must be >= 1")


def entropy(p: np.ndarray) -> float:
    """Shannon entropy in nats, with 0 * log 0 = 0."""
    p = np.asarray(p, dtype=float)
    if np.any(p < 0.0) or abs(float(p.sum()) - 1.0) > 1e-9:
        raise ValueError("input is not a probability distribution")
    nz = p[p > 0.0]
    return float(-(nz * np.log(nz)).sum())


def mc_dropout_score(
    model: Mlp,
    x: np.ndarray,
    cfg: DropoutConfig = DropoutConfig(),
    rng: np.random.Generator | None = None,
) -> tuple[float, np.ndarray]:
    """Negated entropy of the softmax average over stochastic passes.

    Returns (score, mean_probs); requires a model trained with dropout,
    since without it every pass would be identical. An explicit rng
    overrides the stream derived from cfg.seed (used for per-sample
    substreams in batch scoring).
    """
    if model.config.dropout_rate <= 0.0:
        raise ValueError("mc_dropout_score requires a model with dropout_rate > 0")
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    mean_probs = np.zeros(model.num_classes)
    for _ in range(cfg.passes):
        logits, _ = forward(model, x, stochastic=True, rng=rng)
        mean_probs += softmax_t(logits, 1.0)
    mean_probs /= cfg.passes
    return -entropy(mean_probs), mean_probs


def msp_score(model: Mlp, x: np.ndarray) -> float:
    """Maximum softmax probability under a deterministic forward pass."""
    logits, _ = forward(model, x)
    return float(softmax_t(logits, 1.0).max())
