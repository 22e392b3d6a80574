"""Two-class Gaussian classifiers parameterized by a covariance estimate:
standard LDA, shrinkage-LDA (any spectrum-correction estimator) and the
nearest-centroid special case, plus accuracy and the Bayes-accuracy ceiling.
"""

from __future__ import annotations

from dataclasses import dataclass
from statistics import NormalDist
from typing import Optional

import numpy as np

from .core import DataMatrix, MeanMode, SymmetricMatrix, eigendecompose
from .estimators import CovarianceEstimate, estimate, rebuild

__all__ = ["LdaModel", "LabeledData", "fit_lda", "predict", "predict_batch", "accuracy", "bayes_accuracy"]

_STD_NORMAL = NormalDist()


@dataclass(frozen=True)
class LabeledData:
    features: DataMatrix
    labels: np.ndarray  # 0 = class A, 1 = class B

    def __post_init__(self):
        lab = np.asarray(self.labels)
        if lab.shape != (self.features.n,):
            raise ValueError("labels length must match number of rows")
        if not np.all(np.isin(lab, (0, 1))):
            raise ValueError("labels must be binary (0/1)")
        object.__setattr__(self, "labels", lab.astype(np.int64))


@dataclass(frozen=True)
class LdaModel:
    mean_a: np.ndarray
    mean_b: np.ndarray
    covariance: CovarianceEstimate
    prior: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.prior < 1.0:
            raise ValueError("prior must lie in (0, 1)")
        if self.covariance.corrected_spectrum.min() <= 0:
            raise ValueError("covariance estimate is singular after correction")

    def discriminant(self, x: np.ndarray) -> np.ndarray:
        """delta(x) = (mu_B - mu_A)' C^-1 x - 0.5 (mu_B - mu_A)' C^-1 (mu_B + mu_A)
        + log((1 - prior)/prior); class B iff delta > 0."""
        v = self.covariance.basis.eigenvectors
        inv_spec = 1.0 / self.covariance.corrected_spectrum
        d = self.mean_b - self.mean_a
        w = v @ (inv_spec * (v.T @ d))
        bias = -0.5 * w @ (self.mean_b + self.mean_a) + np.log((1.0 - self.prior) / self.prior)
        return np.atleast_2d(x) @ w + bias


def fit_lda(
    data: LabeledData,
    estimator: str,
    *,
    population: Optional[SymmetricMatrix] = None,
    seed: int = 0,
    k: int = 10,
    prior: float = 0.5,
) -> LdaModel:
    """Class means plus a shared covariance estimated from the pooled
    class-wise-centered residuals with the named estimator.

    Special identifiers: 'centroid' forces a spherical covariance (nearest
    centroid, shrinkage intensity 1) and 'population' uses the supplied
    population covariance directly.
    """
    x = data.features.values
    mask_b = data.labels == 1
    if mask_b.all() or (~mask_b).all():
        raise ValueError("both classes must be present")
    xa, xb = x[~mask_b], x[mask_b]
    mean_a, mean_b = xa.mean(axis=0), xb.mean(axis=0)
    pooled = np.vstack([xa - mean_a, xb - mean_b])
    if len(pooled) > 2:
        # rescale so n^-1 X'X on the residuals equals the pooled covariance
        # with divisor n - 2 (two means were estimated)
        pooled = pooled * np.sqrt(len(pooled) / (len(pooled) - 2.0))
    resid = DataMatrix(pooled, MeanMode.ZERO_MEAN)

    if estimator == "centroid":
        scale = float(np.sum(resid.values**2) / resid.n / resid.p)  # p^-1 tr(S)
        basis = eigendecompose(SymmetricMatrix(np.eye(resid.p)))
        spectrum = np.full(resid.p, scale if scale > 0 else 1.0)
        cov = CovarianceEstimate(rebuild(basis, spectrum), spectrum, basis, "centroid")
    elif estimator == "population":
        if population is None:
            raise ValueError("estimator 'population' requires a population covariance")
        basis = eigendecompose(population)
        spectrum = basis.eigenvalues
        cov = CovarianceEstimate(rebuild(basis, spectrum), spectrum, basis, "population")
    else:
        if estimator in ("oracle", "precision-oracle") and population is None:
            raise ValueError(f"estimator '{estimator}' requires a population covariance")
        cov = estimate(resid, estimator, k=k, seed=seed, population=population)
        if cov.corrected_spectrum.min() <= 0:
            # guard tiny non-positive corrected variances so the model is invertible
            floor = 1e-12 * max(cov.corrected_spectrum.max(), 1.0)
            spectrum = np.maximum(cov.corrected_spectrum, floor)
            cov = CovarianceEstimate(rebuild(cov.basis, spectrum), spectrum, cov.basis,
                                     cov.method, cov.params)
    return LdaModel(mean_a=mean_a, mean_b=mean_b, covariance=cov, prior=prior)


def predict_batch(model: LdaModel, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(class labels, class-B probabilities) for rows of x; ties go to class A."""
    delta = model.discriminant(x)
    prob_b = 1.0 / (1.0 + np.exp(-np.clip(delta, -700, 700)))
    return (delta > 0).astype(np.int64), prob_b


def predict(model: LdaModel, x: np.ndarray) -> tuple[int, float]:
    """Class decision and class-B probability for a single point."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != model.mean_a.shape:
        raise ValueError("dimension mismatch")
    labels, probs = predict_batch(model, x[None, :])
    return int(labels[0]), float(probs[0])


def accuracy(model: LdaModel, test: LabeledData) -> float:
    labels, _ = predict_batch(model, test.features.values)
    return float(np.mean(labels == test.labels))


def bayes_accuracy(mean_a: np.ndarray, mean_b: np.ndarray, population: SymmetricMatrix) -> float:
    """Phi(Delta / 2) with Delta the Mahalanobis distance between the means."""
    w = np.linalg.eigvalsh(population.values)
    if w.min() <= 1e-12 * max(w.max(), 0.0):
        raise ValueError("population covariance is singular")
    d = np.asarray(mean_b, dtype=np.float64) - np.asarray(mean_a, dtype=np.float64)
    delta2 = float(d @ np.linalg.solve(population.values, d))
    return _STD_NORMAL.cdf(np.sqrt(max(delta2, 0.0)) / 2.0)
