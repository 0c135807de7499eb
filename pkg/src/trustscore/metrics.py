"""Risk-based evaluation of confidence scores.

All metrics consume (sample_id, score, correct) triples with higher score
meaning more confident, and break score ties by ascending sample id so
results are deterministic.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ScoredPrediction:
    sample_id: int
    score: float
    correct: bool


@dataclass
class RiskCoverageCurve:
    points: list[tuple[float, float]]  # (coverage, risk), coverage increasing

    def write_csv(self, path: str) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["coverage", "risk"])
            for coverage, risk in self.points:
                writer.writerow([repr(coverage), repr(risk)])


def _by_descending_score(preds: list[ScoredPrediction]) -> list[ScoredPrediction]:
    return sorted(preds, key=lambda p: (-p.score, p.sample_id))


def _by_ascending_score(preds: list[ScoredPrediction]) -> list[ScoredPrediction]:
    return sorted(preds, key=lambda p: (p.score, p.sample_id))


def accuracy_at_top(preds: list[ScoredPrediction], fraction: float) -> float:
    """Accuracy over the ceil(fraction * n) most confident samples."""
    if not preds:
        raise ValueError("no predictions")
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    top = _by_descending_score(preds)[: math.ceil(fraction * len(preds))]
    return sum(p.correct for p in top) / len(top)


def aurc(preds: list[ScoredPrediction]) -> float:
    """Mean selective risk over all coverage prefixes of the score ranking."""
    if not preds:
        raise ValueError("no predictions")
    errors = 0
    total = 0.0
    for m, p in enumerate(_by_descending_score(preds), 1):
        errors += not p.correct
        total += errors / m
    return total / len(preds)


def risk_coverage_curve(preds: list[ScoredPrediction]) -> RiskCoverageCurve:
    if not preds:
        raise ValueError("no predictions")
    n = len(preds)
    errors = 0
    points = []
    for m, p in enumerate(_by_descending_score(preds), 1):
        errors += not p.correct
        points.append((m / n, errors / m))
    return RiskCoverageCurve(points=points)


def _error_rate_after_removal(
    remaining: list[ScoredPrediction],
) -> float:
    return sum(not p.correct for p in remaining) / len(remaining)


def sparsification_curve(
    preds: list[ScoredPrediction], steps: int
) -> list[tuple[float, float, float]]:
    """(removed_fraction, method_error, oracle_error) at f = 0 .. (steps-1)/steps.

    The method curve removes the lowest-score samples first; the oracle
    removes incorrect samples first (by ascending sample id), then correct
    ones once none remain.
    """
    if not preds:
        raise ValueError("no predictions")
    if steps < 2:
        raise ValueError("steps must be >= 2")
    n = len(preds)
    ascending = _by_ascending_score(preds)
    incorrect = sorted((p for p in preds if not p.correct), key=lambda p: p.sample_id)
    n_incorrect = len(incorrect)

    rows = []
    for i in range(steps):
        f = i / steps
        removed = math.floor(f * n)
        method_error = _error_rate_after_removal(ascending[removed:])
        oracle_error = max(0, n_incorrect - removed) / (n - removed)
        rows.append((f, method_error, oracle_error))
    return rows


def ause(preds: list[ScoredPrediction], steps: int = 100) -> float:
    """Normalized area between the method and oracle sparsification curves."""
    rows = sparsification_curve(preds, steps)
    gaps = [method - oracle for _, method, oracle in rows]
    area = 0.0
    for left, right in zip(gaps[:-1], gaps[1:]):
        area += (left + right) / 2.0 * (1.0 / steps)
    return area / ((steps - 1) / steps)


def write_sparsification_csv(path: str, rows: list[tuple[float, float, float]]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["removed_fraction", "method_error", "oracle_error"])
        for f, method_error, oracle_error in rows:
            writer.writerow([repr(f), repr(method_error), repr(oracle_error)])


def _fractional_ranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values))
    i = 0
    sorted_vals = values[order]
    while i < len(values):
        j = i
        while j < len(values) and sorted_vals[j] == sorted_vals[i]:
            j += 1
        ranks[order[i:j]] = (i + j - 1) / 2.0 + 1.0
        i = j
    return ranks


def spearman(scores_a, scores_b) -> float:
    """Pearson correlation of average-tied fractional ranks."""
    a = np.asarray(scores_a, dtype=float)
    b = np.asarray(scores_b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("inputs must be equal-length 1-D sequences")
    if len(a) < 2:
        raise ValueError("need at least two observations")
    ra = _fractional_ranks(a)
    rb = _fractional_ranks(b)
    da = ra - ra.mean()
    db = rb - rb.mean()
    denom = float(np.sqrt((da * da).sum() * (db * db).sum()))
    if denom == 0.0:
        raise ValueError("rank correlation is undefined for constant input")
    return float(np.clip(float((da * db).sum()) / denom, -1.0, 1.0))


def _median_pairwise_gap(pooled: np.ndarray) -> float:
    # pairs include i == j, so heavily duplicated samples drive the
    # bandwidth to the floor rather than to a spurious positive value
    diffs = np.abs(pooled[:, None] - pooled[None, :])
    upper = diffs[np.triu_indices(len(pooled))]
    return max(float(np.median(upper)), 1e-9)


def mmd(sample_a, sample_b) -> float:
    """Unbiased Gaussian-kernel MMD between two 1-D samples.

    Bandwidth is the median pairwise absolute gap of the pooled sample
    (floored at 1e-9); negative unbiased estimates clamp to zero before
    the square root.
    """
    a = np.asarray(sample_a, dtype=float)
    b = np.asarray(sample_b, dtype=float)
    if len(a) < 2 or len(b) < 2:
        raise ValueError("each sample needs at least two values")
    h = _median_pairwise_gap(np.concatenate([a, b]))

    def kernel(u: np.ndarray, v: np.ndarray) -> np.ndarray:
        return np.exp(-((u[:, None] - v[None, :]) ** 2) / (2.0 * h * h))

    kaa = kernel(a, a)
    kbb = kernel(b, b)
    kab = kernel(a, b)
    m, n = len(a), len(b)
    term_a = (kaa.sum() - np.trace(kaa)) / (m * (m - 1))
    term_b = (kbb.sum() - np.trace(kbb)) / (n * (n - 1))
    mmd2 = term_a + term_b - 2.0 * kab.mean()
    return float(np.sqrt(max(mmd2, 0.0)))


def histogram(
    values, bins: int, value_range: tuple[float, float]
) -> list[tuple[float, float]]:
    """Equal-width normalized histogram; out-of-range values clamp to edge bins."""
    lo, hi = value_range
    if bins < 1:
        raise ValueError("bins must be >= 1")
    if not lo < hi:
        raise ValueError(f"invalid range ({lo}, {hi})")
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("no values")
    width = (hi - lo) / bins
    idx = np.clip(np.floor((values - lo) / width).astype(int), 0, bins - 1)
    counts = np.bincount(idx, minlength=bins).astype(float)
    counts /= counts.sum()
    return [(lo + (i + 0.5) * width, float(counts[i])) for i in range(bins)]


def write_histogram_csv(path: str, rows: list[tuple[float, float]]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["bin_center", "mass"])
        for center, mass in rows:
            writer.writerow([repr(center), repr(mass)])


def read_scores_csv(path: str) -> tuple[list[ScoredPrediction], list[dict]]:
    """Parse a score CSV into metric inputs plus the raw per-row records."""
    preds = []
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            record = {
                "sample_id": int(row["sample_id"]),
                "true_label": int(row["true_label"]),
                "predicted_label": int(row["predicted_label"]),
                "trust_score": float(row["trust_score"]),
                "iterations": int(row["iterations"]),
                "final_loss": float(row["final_loss"]),
            }
            if "method" in row and row["method"] is not None:
                record["method"] = row["method"]
            rows.append(record)
            preds.append(
                ScoredPrediction(
                    sample_id=record["sample_id"],
                    score=record["trust_score"],
                    correct=record["predicted_label"] == record["true_label"],
                )
            )
    if not preds:
        raise ValueError(f"{path}: no score rows")
    return preds, rows
