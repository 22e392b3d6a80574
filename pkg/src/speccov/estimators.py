"""Spectrum-correction covariance estimators.

Every estimator keeps the sample eigenvectors and replaces the sample
eigenvalues: sample covariance, Ledoit-Wolf linear shrinkage, leave-one-out
and K-fold cross-validated correction (with isotonic variants), the
transpose-bug variant of loo used for diagnosis, and the two oracles that
require the population covariance.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import (
    DataMatrix,
    EigenDecomposition,
    MeanMode,
    SymmetricMatrix,
    eigendecompose,
)

__all__ = [
    "CovarianceEstimate",
    "ShrinkageEstimate",
    "ESTIMATOR_IDS",
    "sample_covariance",
    "lw_shrinkage",
    "loo_cvc",
    "kfold_cvc",
    "buggy_loo_cvc",
    "isotonic_correct",
    "spectrum_oracle",
    "precision_oracle",
    "rebuild",
    "estimate",
]

# stable identifiers for CLI / config dispatch
ESTIMATOR_IDS = (
    "sample",
    "lw",
    "loo-cvc",
    "iso-loo-cvc",
    "10f-cvc",
    "iso-10f-cvc",
    "buggy-loo-cvc",
    "oracle",
    "precision-oracle",
    "nls",
    "nls-precision",
)


@dataclass(frozen=True)
class ShrinkageEstimate:
    """Linear shrinkage intensity and the spherical target scale p^-1 tr(S)."""

    lam: float
    target_scale: float

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"shrinkage intensity must lie in [0,1], got {self.lam}")


@dataclass(frozen=True)
class CovarianceEstimate:
    """A corrected spectrum in the sample eigenbasis plus the rebuilt matrix."""

    matrix: SymmetricMatrix
    corrected_spectrum: np.ndarray
    basis: EigenDecomposition
    method: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        spec = np.asarray(self.corrected_spectrum, dtype=np.float64)
        if spec.shape != (self.basis.dim,):
            raise ValueError("corrected spectrum length does not match basis")
        if np.any(spec < 0):
            raise ValueError("corrected spectrum must be non-negative")
        object.__setattr__(self, "corrected_spectrum", spec)
        rebuilt = (self.basis.eigenvectors * spec) @ self.basis.eigenvectors.T
        scale = max(np.linalg.norm(rebuilt), 1e-300)
        if np.linalg.norm(rebuilt - self.matrix.values) > 1e-10 * scale:
            raise ValueError("matrix does not match basis * diag(spectrum) * basis^T")


def _centered_rows(x: DataMatrix) -> tuple[np.ndarray, int]:
    """Rows ready for covariance computation plus the normalization count."""
    if x.mean_mode is MeanMode.CENTERED:
        return x.values - x.values.mean(axis=0), x.n - 1
    return x.values, x.n


def sample_covariance(x: DataMatrix) -> SymmetricMatrix:
    """n^-1 X^T X for zero-mean data, the (n-1)^-1 centered variant otherwise."""
    rows, denom = _centered_rows(x)
    s = rows.T @ rows / denom
    return SymmetricMatrix((s + s.T) / 2.0)


def rebuild(basis: EigenDecomposition, spectrum: np.ndarray) -> SymmetricMatrix:
    """V diag(spectrum) V^T."""
    spectrum = np.asarray(spectrum, dtype=np.float64)
    if spectrum.shape != (basis.dim,):
        raise ValueError("spectrum length does not match basis dimension")
    if np.any(spectrum < 0):
        raise ValueError("spectrum entries must be non-negative")
    m = (basis.eigenvectors * spectrum) @ basis.eigenvectors.T
    return SymmetricMatrix((m + m.T) / 2.0)


def lw_shrinkage(x: DataMatrix) -> tuple[CovarianceEstimate, ShrinkageEstimate]:
    """Ledoit-Wolf shrinkage (1-lam) S + lam T with T = p^-1 tr(S) I.

    lam = min(1, b^2/d^2) with b^2 = n^-2 sum_t ||x_t x_t^T - S||_F^2 and
    d^2 = ||S - T||_F^2; d^2 = 0 (spherical S) gives lam = 1.
    """
    rows, denom = _centered_rows(x)
    n = rows.shape[0]
    s = rows.T @ rows / denom
    s = (s + s.T) / 2.0
    mu = np.trace(s) / x.p
    d2 = np.sum((s - mu * np.eye(x.p)) ** 2)
    # sum_t ||x_t x_t^T - S||^2 = sum_t ||x_t||^4 - 2 sum_t x_t' S x_t + n ||S||^2
    norms4 = np.sum(np.sum(rows**2, axis=1) ** 2)
    cross = np.sum((rows @ s) * rows)
    b2 = max(norms4 - 2.0 * cross + n * np.sum(s**2), 0.0) / n**2
    lam = 1.0 if d2 <= 0 else min(1.0, b2 / d2)

    basis = eigendecompose(SymmetricMatrix(s))
    spectrum = (1.0 - lam) * basis.eigenvalues + lam * np.mean(basis.eigenvalues)
    est = CovarianceEstimate(
        matrix=rebuild(basis, spectrum),
        corrected_spectrum=spectrum,
        basis=basis,
        method="lw",
        params={"lam": float(lam)},
    )
    return est, ShrinkageEstimate(lam=float(lam), target_scale=float(mu))


def _descending_eigvecs(s: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(s)
    return v[:, ::-1]


def cvc_spectra(x: DataMatrix, folds: list[np.ndarray]) -> dict[str, np.ndarray]:
    """Held-out squared projections per eigen rank for a fold schedule.

    Returns both the proper spectrum (projections V^T x) and the transpose-bug
    spectrum (projections V x) from one sweep; the per-row accumulation order
    is fixed by original row index so any fold ordering gives identical sums.
    """
    rows = x.values
    n, p = rows.shape
    center = x.mean_mode is MeanMode.CENTERED
    proj2 = np.zeros((n, p))
    proj2_buggy = np.zeros((n, p))
    train_mask = np.ones(n, dtype=bool)
    for fold in folds:
        fold = np.asarray(fold, dtype=np.intp)
        if fold.size == 0:
            raise ValueError("empty cross-validation fold")
        train_mask[fold] = False
        xtr = rows[train_mask]
        if xtr.shape[0] < 1:
            raise ValueError("cross-validation fold leaves no training rows")
        if center:
            mu = xtr.mean(axis=0)
            xtr = xtr - mu
            xho = rows[fold] - mu
        else:
            xho = rows[fold]
        s = xtr.T @ xtr / xtr.shape[0]
        v = _descending_eigvecs((s + s.T) / 2.0)
        proj2[fold] = (xho @ v) ** 2
        proj2_buggy[fold] = (xho @ v.T) ** 2
        train_mask[fold] = True
    return {
        "proper": proj2.sum(axis=0) / n,
        "buggy": proj2_buggy.sum(axis=0) / n,
    }


def _loo_folds(n: int) -> list[np.ndarray]:
    return [np.array([t], dtype=np.intp) for t in range(n)]


def kfold_partition(n: int, k: int, seed: int) -> list[np.ndarray]:
    """Seeded shuffle split into k near-equal folds (original row indices)."""
    if not 2 <= k <= n:
        raise ValueError(f"need 2 <= k <= n, got k={k}, n={n}")
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(part) for part in np.array_split(perm, k)]


def _finish_cvc(x: DataMatrix, spectrum: np.ndarray, method: str, params: dict) -> CovarianceEstimate:
    basis = eigendecompose(sample_covariance(x))
    spectrum = np.maximum(spectrum, 0.0)
    return CovarianceEstimate(
        matrix=rebuild(basis, spectrum),
        corrected_spectrum=spectrum,
        basis=basis,
        method=method,
        params=params,
    )


def loo_cvc(x: DataMatrix) -> CovarianceEstimate:
    """Leave-one-out cross-validated correction: gamma_i is the mean squared
    projection of each held-out row onto the i-th training eigenvector."""
    if x.n < 2:
        raise ValueError("loo-cvc requires n >= 2")
    spectrum = cvc_spectra(x, _loo_folds(x.n))["proper"]
    return _finish_cvc(x, spectrum, "loo-cvc", {})


def buggy_loo_cvc(x: DataMatrix) -> CovarianceEstimate:
    """loo-cvc with the eigenvector matrix applied untransposed to the
    held-out rows; reproduces the transpose-bug diagnosis and is basis-dependent."""
    if x.n < 2:
        raise ValueError("buggy-loo-cvc requires n >= 2")
    spectrum = cvc_spectra(x, _loo_folds(x.n))["buggy"]
    return _finish_cvc(x, spectrum, "buggy-loo-cvc", {})


def kfold_cvc(x: DataMatrix, k: int = 10, seed: int = 0) -> CovarianceEstimate:
    """K-fold cross-validated correction with seeded near-equal folds; eigen
    indices are matched across folds by descending-eigenvalue rank."""
    folds = kfold_partition(x.n, k, seed)
    spectrum = cvc_spectra(x, folds)["proper"]
    return _finish_cvc(x, spectrum, "10f-cvc" if k == 10 else f"{k}f-cvc",
                       {"k": k, "seed": seed})


def isotonic_correct(spectrum: np.ndarray) -> np.ndarray:
    """Euclidean projection onto non-increasing sequences (pool-adjacent-
    violators); pooled blocks take block means, so the sum is preserved."""
    y = np.asarray(spectrum, dtype=np.float64)
    if y.ndim != 1 or y.size < 1:
        raise ValueError("expected a non-empty vector")
    if not np.all(np.isfinite(y)):
        raise ValueError("spectrum contains non-finite entries")
    # PAVA for a non-increasing fit: stack of (block sum, block length)
    sums: list[float] = []
    lens: list[int] = []
    for v in y:
        cur_sum, cur_len = float(v), 1
        # merge while the new block mean exceeds its predecessor's
        while sums and sums[-1] / lens[-1] < cur_sum / cur_len:
            cur_sum += sums.pop()
            cur_len += lens.pop()
        sums.append(cur_sum)
        lens.append(cur_len)
    out = np.empty_like(y)
    pos = 0
    for s, ln in zip(sums, lens):
        out[pos : pos + ln] = s / ln
        pos += ln
    return out


def spectrum_oracle(basis: EigenDecomposition, population: SymmetricMatrix) -> np.ndarray:
    """Optimal corrected eigenvalues for covariance error: v_i^T C v_i."""
    if population.dim != basis.dim:
        raise ValueError("dimension mismatch between basis and population")
    v = basis.eigenvectors
    return np.einsum("ji,jk,ki->i", v, population.values, v)


def precision_oracle(basis: EigenDecomposition, population: SymmetricMatrix) -> np.ndarray:
    """Optimal corrected eigenvalues for precision error: (v_i^T C^-1 v_i)^-1."""
    if population.dim != basis.dim:
        raise ValueError("dimension mismatch between basis and population")
    w = np.linalg.eigvalsh(population.values)
    if w.min() <= 1e-12 * max(w.max(), 0.0):
        raise ValueError("population matrix is singular or near-singular")
    cinv = np.linalg.inv(population.values)
    cinv = (cinv + cinv.T) / 2.0
    v = basis.eigenvectors
    return 1.0 / np.einsum("ji,jk,ki->i", v, cinv, v)


def _oracle_estimate(x: DataMatrix, population: SymmetricMatrix, method: str) -> CovarianceEstimate:
    basis = eigendecompose(sample_covariance(x))
    if method == "oracle":
        spectrum = spectrum_oracle(basis, population)
    else:
        spectrum = precision_oracle(basis, population)
    spectrum = np.maximum(spectrum, 0.0)
    return CovarianceEstimate(
        matrix=rebuild(basis, spectrum),
        corrected_spectrum=spectrum,
        basis=basis,
        method=method,
        params={},
    )


def estimate(
    x: DataMatrix,
    method: str,
    *,
    k: int = 10,
    seed: int = 0,
    population: Optional[SymmetricMatrix] = None,
) -> CovarianceEstimate:
    """Dispatch on a stable estimator identifier (see ESTIMATOR_IDS)."""
    if method == "sample":
        basis = eigendecompose(sample_covariance(x))
        spectrum = np.maximum(basis.eigenvalues, 0.0)
        return CovarianceEstimate(rebuild(basis, spectrum), spectrum, basis, "sample")
    if method == "lw":
        return lw_shrinkage(x)[0]
    if method == "loo-cvc":
        return loo_cvc(x)
    if method == "buggy-loo-cvc":
        return buggy_loo_cvc(x)
    if method == "10f-cvc":
        return kfold_cvc(x, k=k, seed=seed)
    if method in ("iso-loo-cvc", "iso-10f-cvc"):
        base = loo_cvc(x) if method == "iso-loo-cvc" else kfold_cvc(x, k=k, seed=seed)
        spectrum = isotonic_correct(base.corrected_spectrum)
        return CovarianceEstimate(
            matrix=rebuild(base.basis, spectrum),
            corrected_spectrum=spectrum,
            basis=base.basis,
            method=method,
            params=base.params,
        )
    if method in ("oracle", "precision-oracle"):
        if population is None:
            raise ValueError(f"estimator '{method}' requires the population covariance")
        return _oracle_estimate(x, population, method)
    if method in ("nls", "nls-precision"):
        from . import rmt  # deferred: rmt imports isotonic_correct from here

        return rmt.nls_estimator(x, precision=(method == "nls-precision"))
    raise ValueError(f"unknown estimator '{method}'; valid: {', '.join(ESTIMATOR_IDS)}")
