"""High-dimensional geometry: closed forms and Monte-Carlo verification.

Covers norm concentration of i.i.d. coordinate vectors, the expected
minimum pairwise cosine of uniformly distributed sphere points, the
Gaussian sorting-error probability for noisy rankings, and the variance
attenuation of angle noise pushed through a cosine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class McReport:
    trials: int
    empirical_value: float
    theoretical_value: float
    abs_error: float
    rel_error: float

    @classmethod
    def compare(cls, trials: int, empirical: float, theoretical: float) -> "McReport":
        abs_error = abs(empirical - theoretical)
        denom = abs(theoretical) if theoretical != 0.0 else 1.0
        return cls(
            trials=trials,
            empirical_value=float(empirical),
            theoretical_value=float(theoretical),
            abs_error=float(abs_error),
            rel_error=float(abs_error / denom),
        )

    def to_dict(self) -> dict:
        return {
            "trials": self.trials,
            "empirical_value": self.empirical_value,
            "theoretical_value": self.theoretical_value,
            "abs_error": self.abs_error,
            "rel_error": self.rel_error,
        }


def normal_cdf(z: float) -> float:
    """Standard normal CDF via erf."""
    return 0.5 * (1.0 + math.erf(z / math.sqrt(2.0)))


def sorting_error_prob(delta_s: float, sigma: float) -> float:
    """Probability that symmetric Gaussian score noise flips a pair.

    Two items with true score gap delta_s >= 0 and independent N(0, sigma^2)
    noise on each swap order with probability 1 - Phi(delta_s / (sqrt(2) sigma)).
    """
    if delta_s < 0.0:
        raise ValueError("delta_s must be >= 0")
    if sigma <= 0.0:
        raise ValueError("sigma must be > 0")
    return 1.0 - normal_cdf(delta_s / (math.sqrt(2.0) * sigma))


def mc_sorting_error(
    delta_s: float, sigma: float, trials: int, rng: np.random.Generator
) -> McReport:
    if trials < 1:
        raise ValueError("trials must be >= 1")
    noise = rng.normal(0.0, sigma, size=(trials, 2))
    empirical = float(np.mean(delta_s + noise[:, 0] - noise[:, 1] < 0.0))
    return McReport.compare(trials, empirical, sorting_error_prob(delta_s, sigma))


def sample_sphere(n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """n points uniform on the unit sphere in R^d, via normalized Gaussians."""
    if d < 2:
        raise ValueError("d must be >= 2")
    points = rng.standard_normal((n, d))
    norms = np.linalg.norm(points, axis=1)
    while np.any(norms == 0.0):
        bad = norms == 0.0
        points[bad] = rng.standard_normal((int(bad.sum()), d))
        norms = np.linalg.norm(points, axis=1)
    return points / norms[:, None]


def min_pairwise_cos(points: np.ndarray) -> float:
    """Minimum cosine over all unordered pairs of points."""
    points = np.asarray(points, dtype=float)
    if points.shape[0] < 2:
        raise ValueError("need at least two points")
    norms = np.linalg.norm(points, axis=1)
    if np.any(norms == 0.0):
        raise ValueError("zero-norm point has no direction")
    unit = points / norms[:, None]
    gram = unit @ unit.T
    i, j = np.triu_indices(points.shape[0], k=1)
    return float(gram[i, j].min())


def expected_min_cos(n: int, d: int) -> float:
    """Extreme-value approximation -sqrt(2 ln n / d) for large n and d."""
    if n < 2 or d < 1:
        raise ValueError("need n >= 2 and d >= 1")
    return -math.sqrt(2.0 * math.log(n) / d)


def norm_concentration(
    d: int, sigma: float, samples: int, eps: float, rng: np.random.Generator
) -> McReport:
    """Empirical P(| ||x|| - sqrt(d) sigma | < eps sqrt(d) sigma) for Gaussian x.

    The theoretical field is the Chebyshev lower bound 1 - 2 / (eps^2 d)
    (fourth moment 3 sigma^4), floored at zero; the empirical probability
    should always dominate it.
    """
    if d < 1 or samples < 1:
        raise ValueError("d and samples must be >= 1")
    if eps <= 0.0:
        raise ValueError("eps must be > 0")
    center = math.sqrt(d) * sigma
    hits = 0
    chunk = max(1, 10_000_000 // d)
    remaining = samples
    while remaining > 0:
        m = min(chunk, remaining)
        x = rng.standard_normal((m, d)) * sigma
        norms = np.linalg.norm(x, axis=1)
        hits += int(np.sum(np.abs(norms - center) < eps * center))
        remaining -= m
    bound = max(0.0, 1.0 - 2.0 / (eps * eps * d))
    return McReport.compare(samples, hits / samples, bound)


def cos_noise_bound_check(
    omega: float, sigma_omega: float, trials: int, rng: np.random.Generator
) -> McReport:
    """Empirical variance of cos(omega + noise) against sin^2(omega) sigma^2.

    The first-order theory is accurate for sigma_omega small relative to the
    distance of omega from 0 and pi (sigma_omega <= 0.1 recommended).
    """
    if not 0.0 < omega < math.pi:
        raise ValueError("omega must lie in (0, pi)")
    if sigma_omega <= 0.0:
        raise ValueError("sigma_omega must be > 0")
    noise = rng.normal(0.0, sigma_omega, size=trials)
    values = np.cos(omega + noise)
    empirical = float(values.var(ddof=1))
    theoretical = math.sin(omega) ** 2 * sigma_omega**2
    return McReport.compare(trials, empirical, theoretical)


def sorting_error_cos_vs_direct(
    omega: float,
    sigma_omega: float,
    delta_s: float,
    trials: int,
    rng: np.random.Generator,
) -> tuple[float, float]:
    """Empirical pairwise sorting-error rates for a fixed score gap.

    Item 1 scores cos(omega); item 2 scores cos(omega) - delta_s. In the
    cosine scenario the noise lives on the angles; in the direct scenario
    N(0, sigma_omega^2) noise lands on the scores themselves. Returns
    (p_cos, p_direct); angle-borne noise should never sort worse.
    """
    s1 = math.cos(omega)
    s2 = s1 - delta_s
    if not -1.0 <= s2 <= 1.0:
        raise ValueError("delta_s pushes the second score outside [-1, 1]")
    omega2 = math.acos(s2)
    angle_noise = rng.normal(0.0, sigma_omega, size=(trials, 2))
    p_cos = float(
        np.mean(np.cos(omega + angle_noise[:, 0]) < np.cos(omega2 + angle_noise[:, 1]))
    )
    score_noise = rng.normal(0.0, sigma_omega, size=(trials, 2))
    p_direct = float(np.mean(s1 + score_noise[:, 0] < s2 + score_noise[:, 1]))
    return p_cos, p_direct
