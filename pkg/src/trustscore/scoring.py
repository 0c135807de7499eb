"""Per-sample test-time optimization and the trust score it yields.

Each test sample's predicted class defines a sparse input perturbation
problem: minimize temperature-scaled cross-entropy toward that class plus an
L1 penalty on the perturbation. The trust score is the feature-space cosine
similarity between the sample and its optimized counterpart; higher means
the sample sits closer to a region the classifier has genuinely learned.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .nn import (
    Mlp,
    adam_init,
    adam_step,
    ce_value_and_input_grad,
    feature,
    forward,
)

L1_MODES = ("subgradient", "proximal")

SCORE_CSV_HEADER = [
    "sample_id",
    "true_label",
    "predicted_label",
    "trust_score",
    "iterations",
    "final_loss",
]


class OptimizationError(RuntimeError):
    """Raised when the perturbation loss becomes non-finite."""

    def __init__(self, message: str, iteration: int):
        super().__init__(message)
        self.iteration = iteration


@dataclass(frozen=True)
class TrustConfig:
    T: float = 5.0
    lam: float = 0.001
    lr: float = 0.001
    max_iters: int = 10000
    tol: float = 1e-6
    window: int = 100
    feature_layer: int | None = None  # None = last hidden layer
    l1_mode: str = "subgradient"
    clip01: bool = False

    def __post_init__(self) -> None:
        if self.T <= 0.0 or self.lr <= 0.0 or self.tol <= 0.0:
            raise ValueError("T, lr, and tol must be > 0")
        if self.lam < 0.0:
            raise ValueError("lam must be >= 0")
        if self.max_iters < 0 or self.window < 1:
            raise ValueError("max_iters must be >= 0 and window >= 1")
        if self.l1_mode not in L1_MODES:
            raise ValueError(f"l1_mode must be one of {L1_MODES}")

    @classmethod
    def from_dict(cls, raw: dict) -> "TrustConfig":
        """Accepts the JSON field names; the L1 weight is spelled 'lambda'."""
        raw = dict(raw)
        if "lambda" in raw:
            raw["lam"] = raw.pop("lambda")
        return cls(**raw)

    def to_dict(self) -> dict:
        return {
            "T": self.T,
            "lambda": self.lam,
            "lr": self.lr,
            "max_iters": self.max_iters,
            "tol": self.tol,
            "window": self.window,
            "feature_layer": self.feature_layer,
            "l1_mode": self.l1_mode,
            "clip01": self.clip01,
        }


@dataclass
class TrustResult:
    predicted_label: int
    delta_x: np.ndarray
    score: float
    iterations_run: int
    final_loss: float
    initial_loss: float


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine of the angle between two nonzero vectors, clamped to [-1, 1]."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine similarity is undefined for zero-norm vectors")
    if np.array_equal(a, b):
        return 1.0
    return float(np.clip(float(a @ b) / (na * nb), -1.0, 1.0))


def _plateaued(losses: list[float], window: int, tol: float) -> bool:
    if len(losses) < 2 * window:
        return False
    recent = sum(losses[-window:]) / window
    previous = sum(losses[-2 * window : -window]) / window
    return abs(recent - previous) < tol


def trust_score(model: Mlp, x: np.ndarray, cfg: TrustConfig = TrustConfig()) -> TrustResult:
    """Optimize a sparse perturbation toward the predicted class and score it.

    The objective per iteration is cross_entropy_t(x + dx, predicted, T)
    plus lam * ||dx||_1, minimized with Adam from dx = 0. Iteration stops
    when the window-averaged loss plateaus (difference below tol) or at
    max_iters. The reported perturbation is the best iterate seen, so
    final_loss never exceeds initial_loss. Dropout is always off here.
    """
    x = np.asarray(x, dtype=float)
    logits, trace = forward(model, x)
    predicted = int(np.argmax(logits))
    layer = cfg.feature_layer if cfg.feature_layer is not None else model.last_hidden
    feat_x = feature(trace, layer).copy()
    if float(np.linalg.norm(feat_x)) == 0.0:
        raise ValueError("feature vector of the input has zero norm")

    def perturbed(dx: np.ndarray) -> np.ndarray:
        xp = x + dx
        return np.clip(xp, 0.0, 1.0) if cfg.clip01 else xp

    dx = np.zeros_like(x)
    state = adam_init([dx])
    ce, grad = ce_value_and_input_grad(model, perturbed(dx), predicted, cfg.T)
    obj = ce
    losses = [obj]
    best_obj = obj
    best_dx = dx.copy()
    initial_loss = obj

    iterations = 0
    while iterations < cfg.max_iters:
        if _plateaued(losses, cfg.window, cfg.tol):
            break
        if cfg.l1_mode == "subgradient":
            total_grad = grad + cfg.lam * np.sign(dx)
            adam_step(state, [dx], [total_grad], cfg.lr)
        else:
            adam_step(state, [dx], [grad], cfg.lr)
            np.multiply(
                np.sign(dx), np.maximum(np.abs(dx) - cfg.lr * cfg.lam, 0.0), out=dx
            )
        iterations += 1
        ce, grad = ce_value_and_input_grad(model, perturbed(dx), predicted, cfg.T)
        obj = ce + cfg.lam * float(np.abs(dx).sum())
        if not np.isfinite(obj):
            raise OptimizationError(
                f"perturbation loss became non-finite at iteration {iterations}",
                iteration=iterations,
            )
        losses.append(obj)
        if obj < best_obj:
            best_obj = obj
            best_dx = dx.copy()

    _, mode_trace = forward(model, perturbed(best_dx))
    feat_mode = feature(mode_trace, layer)
    if float(np.linalg.norm(feat_mode)) == 0.0:
        raise ValueError("feature vector of the optimized input has zero norm")
    score = cosine_similarity(feat_x, feat_mode)
    return TrustResult(
        predicted_label=predicted,
        delta_x=best_dx,
        score=score,
        iterations_run=iterations,
        final_loss=best_obj,
        initial_loss=initial_loss,
    )


def batch_trust_scores(
    model: Mlp,
    xs,
    cfg: TrustConfig = TrustConfig(),
    workers: int = 1,
) -> list[TrustResult]:
    """Score samples independently; results are returned in input order.

    Identical to sequential trust_score calls regardless of worker count;
    per-sample failures are re-raised with the sample index attached.
    """
    xs = list(xs)

    def one(i: int) -> TrustResult:
        try:
            return trust_score(model, xs[i], cfg)
        except Exception as exc:
            raise type(exc)(f"sample {i}: {exc}") from exc

    if workers <= 1 or len(xs) <= 1:
        return [one(i) for i in range(len(xs))]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, range(len(xs))))


def write_scores_csv(
    path: str,
    results: list[TrustResult],
    true_labels,
    sample_ids=None,
    method: str | None = None,
) -> None:
    """Emit one row per sample; a trailing method column marks baseline runs."""
    header = SCORE_CSV_HEADER + (["method"] if method is not None else [])
    if sample_ids is None:
        sample_ids = range(len(results))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for sid, res, label in zip(sample_ids, results, true_labels):
            row = [
                int(sid),
                int(label),
                res.predicted_label,
                repr(float(res.score)),
                res.iterations_run,
                repr(float(res.final_loss)),
            ]
            if method is not None:
                row.append(method)
            writer.writerow(row)
