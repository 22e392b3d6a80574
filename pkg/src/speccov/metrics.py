"""Squared-error loss and the SEPRIAL comparison metric.

SEPRIAL measures the percentage improvement in average squared Frobenius
loss relative to the sample covariance, with the spectrum-oracle matrix as
the reference target: 100 for the oracle, 0 for the sample covariance.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import SymmetricMatrix

__all__ = ["SeprialResult", "ese", "seprial", "seprial_from_losses", "seprial_diff_from_losses"]


@dataclass(frozen=True)
class SeprialResult:
    value: float
    num_repetitions: int
    se_hat: float

    def __post_init__(self):
        if self.value > 100 + 1e-9:
            raise ValueError("SEPRIAL cannot exceed 100")


def ese(estimate: SymmetricMatrix, truth: SymmetricMatrix) -> float:
    """Squared Frobenius error ||A - B||_F^2."""
    if estimate.dim != truth.dim:
        raise ValueError("dimension mismatch")
    return float(np.sum((estimate.values - truth.values) ** 2))


def seprial_from_losses(est_losses: np.ndarray, sample_losses: np.ndarray) -> SeprialResult:
    """SEPRIAL from per-repetition losses against the per-repetition oracle
    target; standard error by the delta method for the ratio of means."""
    b = np.asarray(est_losses, dtype=np.float64)
    a = np.asarray(sample_losses, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1 or a.size < 1:
        raise ValueError("loss vectors must be equal-length and non-empty")
    a_bar, b_bar = a.mean(), b.mean()
    if a_bar == 0:
        raise ValueError("sample-covariance loss is zero in every repetition")
    value = 100.0 * (a_bar - b_bar) / a_bar
    r = a.size
    if r < 2:
        return SeprialResult(value=value, num_repetitions=r, se_hat=float("nan"))
    cov = np.cov(np.vstack([a, b]))
    grad = np.array([100.0 * b_bar / a_bar**2, -100.0 / a_bar])
    var = float(grad @ cov @ grad) / r
    return SeprialResult(value=value, num_repetitions=r, se_hat=float(np.sqrt(max(var, 0.0))))


def seprial_diff_from_losses(
    est1_losses: np.ndarray, est2_losses: np.ndarray, sample_losses: np.ndarray
) -> tuple[float, float]:
    """SEPRIAL(est1) - SEPRIAL(est2) with a paired delta-method standard error."""
    a = np.asarray(sample_losses, dtype=np.float64)
    b1 = np.asarray(est1_losses, dtype=np.float64)
    b2 = np.asarray(est2_losses, dtype=np.float64)
    a_bar = a.mean()
    diff = 100.0 * (b2.mean() - b1.mean()) / a_bar
    r = a.size
    cov = np.cov(np.vstack([a, b1, b2]))
    grad = np.array(
        [-100.0 * (b2.mean() - b1.mean()) / a_bar**2, -100.0 / a_bar, 100.0 / a_bar]
    )
    var = float(grad @ cov @ grad) / r
    return diff, float(np.sqrt(max(var, 0.0)))


def seprial(
    estimates: Sequence[SymmetricMatrix],
    samples: Sequence[SymmetricMatrix],
    oracles: Sequence[SymmetricMatrix],
) -> SeprialResult:
    """SEPRIAL over repetitions: per repetition the oracle matrix S* is the
    target; losses of the estimate and of the sample covariance are averaged."""
    if not len(estimates) == len(samples) == len(oracles):
        raise ValueError("repetition lists must have equal length")
    est_losses = np.array([ese(c, s_star) for c, s_star in zip(estimates, oracles)])
    sample_losses = np.array([ese(s, s_star) for s, s_star in zip(samples, oracles)])
    return seprial_from_losses(est_losses, sample_losses)
