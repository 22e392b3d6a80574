"""Shared numerical primitives: symmetric matrices, eigendecompositions,
data matrices and Gaussian sampling with a prescribed spectrum.

All public types are immutable after construction (arrays are stored with
``writeable=False``) and every operation is a pure function of its inputs
plus an explicit seed.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional

import numpy as np

__all__ = [
    "MeanMode",
    "NumericalError",
    "DataMatrix",
    "SymmetricMatrix",
    "EigenDecomposition",
    "SpectrumModel",
    "eigendecompose",
    "sample_gaussian",
    "random_rotation",
    "matrix_to_csv",
    "matrix_from_csv",
    "matrix_to_binary",
    "matrix_from_binary",
]

_BINARY_MAGIC = b"SPCV"
_BINARY_VERSION = 1


class NumericalError(RuntimeError):
    """A numerical routine failed; carries diagnostic context."""

    def __init__(self, message: str, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class MeanMode(Enum):
    ZERO_MEAN = "zero-mean"
    CENTERED = "centered"


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class DataMatrix:
    """n observations (rows) of dimension p (columns).

    ``mean_mode`` records the modeling assumption: ZERO_MEAN data is treated
    as having known mean zero, CENTERED data is centered before use.
    """

    values: np.ndarray
    mean_mode: MeanMode = MeanMode.ZERO_MEAN

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise ValueError(f"data matrix must be 2-d and non-empty, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("data matrix contains non-finite entries")
        if self.mean_mode is MeanMode.CENTERED and v.shape[0] < 2:
            raise ValueError("centered mode requires n >= 2")
        object.__setattr__(self, "values", _freeze(v))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class SymmetricMatrix:
    """Dense real symmetric p x p matrix."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] != v.shape[1] or v.shape[0] < 1:
            raise ValueError(f"expected a square matrix, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("matrix contains non-finite entries")
        scale = max(np.abs(v).max(), 1.0)
        if np.abs(v - v.T).max() > 1e-12 * scale:
            raise ValueError("matrix is not symmetric within tolerance")
        # store the exactly symmetric part so downstream eigh sees no skew
        object.__setattr__(self, "values", _freeze((v + v.T) / 2.0))

    @property
    def dim(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenvalues (descending) paired with orthonormal eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.eigenvalues, dtype=np.float64)
        v = np.asarray(self.eigenvectors, dtype=np.float64)
        p = w.shape[0]
        if v.shape != (p, p):
            raise ValueError("eigenvector matrix shape does not match eigenvalue count")
        if np.any(np.diff(w) > 0):
            raise ValueError("eigenvalues must be non-increasing")
        if np.abs(v.T @ v - np.eye(p)).max() > 1e-10:
            raise ValueError("eigenvectors are not orthonormal within 1e-10")
        object.__setattr__(self, "eigenvalues", _freeze(w))
        object.__setattr__(self, "eigenvectors", _freeze(v))

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]


@dataclass(frozen=True)
class SpectrumModel:
    """Population spectrum: positive eigenvalues (descending) plus an optional
    orthonormal basis (identity if absent)."""

    eigenvalues: np.ndarray
    basis: Optional[np.ndarray] = None

    def __post_init__(self):
        w = np.asarray(self.eigenvalues, dtype=np.float64)
        if w.ndim != 1 or w.shape[0] < 1:
            raise ValueError("eigenvalues must be a non-empty vector")
        if np.any(w <= 0):
            raise ValueError("population eigenvalues must be positive")
        object.__setattr__(self, "eigenvalues", _freeze(np.sort(w)[::-1]))
        if self.basis is not None:
            b = np.asarray(self.basis, dtype=np.float64)
            p = w.shape[0]
            if b.shape != (p, p):
                raise ValueError("basis shape mismatch")
            if np.abs(b.T @ b - np.eye(p)).max() > 1e-10:
                raise ValueError("basis is not orthonormal")
            object.__setattr__(self, "basis", _freeze(b))

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]

    def covariance(self) -> SymmetricMatrix:
        if self.basis is None:
            return SymmetricMatrix(np.diag(self.eigenvalues))
        c = (self.basis * self.eigenvalues) @ self.basis.T
        return SymmetricMatrix((c + c.T) / 2.0)


def fix_eigenvector_signs(v: np.ndarray) -> np.ndarray:
    """Deterministic sign convention: the largest-magnitude component of each
    column is made positive; magnitude ties break at the lowest index."""
    v = np.array(v, dtype=np.float64)
    idx = np.argmax(np.abs(v), axis=0)
    signs = np.sign(v[idx, np.arange(v.shape[1])])
    signs[signs == 0] = 1.0
    return v * signs


def eigendecompose(m: SymmetricMatrix) -> EigenDecomposition:
    """Full symmetric eigendecomposition, eigenvalues descending, deterministic
    eigenvector signs."""
    try:
        w, v = np.linalg.eigh(m.values)
    except np.linalg.LinAlgError as exc:
        d = np.abs(np.diag(m.values))
        raise NumericalError(
            "eigendecomposition did not converge",
            dim=m.dim,
            diag_range=(float(d.min()), float(d.max())),
            frobenius=float(np.linalg.norm(m.values)),
        ) from exc
    order = np.argsort(w, kind="stable")[::-1]
    return EigenDecomposition(w[order], fix_eigenvector_signs(v[:, order]))


def sample_gaussian(model: SpectrumModel, n: int, seed: int) -> DataMatrix:
    """Draw n i.i.d. rows from N(0, V diag(eigenvalues) V^T), reproducibly."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n, model.dim))
    x = z * np.sqrt(model.eigenvalues)
    if model.basis is not None:
        x = x @ model.basis.T
    return DataMatrix(x, MeanMode.ZERO_MEAN)


def random_rotation(p: int, seed: int) -> np.ndarray:
    """Haar-distributed orthonormal p x p matrix (sign-fixed QR of a Gaussian)."""
    if p < 1:
        raise ValueError("p must be >= 1")
    rng = np.random.default_rng(seed)
    q, r = np.linalg.qr(rng.standard_normal((p, p)))
    d = np.sign(np.diag(r))
    d[d == 0] = 1.0
    return q * d


# ---------------------------------------------------------------------------
# serialization: CSV with a "# rows=n cols=p" header, and raw binary with a
# 16-byte header (magic SPCV, version u32, rows u32, cols u32), little-endian
# float64 payload, row-major.

def matrix_to_csv(values: np.ndarray, path) -> None:
    values = np.atleast_2d(np.asarray(values, dtype=np.float64))
    rows, cols = values.shape
    with open(path, "w", encoding="ascii", newline="\n") as f:
        f.write(f"# rows={rows} cols={cols}\n")
        for row in values:
            f.write(",".join(format(x, ".17g") for x in row) + "\n")


def matrix_from_csv(path) -> np.ndarray:
    with open(path, "r", encoding="ascii") as f:
        header = f.readline().strip()
        if not header.startswith("#"):
            raise ValueError(f"missing '# rows=.. cols=..' header in {path}")
        fields = dict(kv.split("=") for kv in header.lstrip("# ").split())
        rows, cols = int(fields["rows"]), int(fields["cols"])
        data = np.loadtxt(f, delimiter=",", ndmin=2)
    if data.shape != (rows, cols):
        raise ValueError(f"header claims {rows}x{cols}, file holds {data.shape}")
    return data


def matrix_to_binary(values: np.ndarray, path) -> None:
    values = np.atleast_2d(np.asarray(values, dtype=np.float64))
    rows, cols = values.shape
    with open(path, "wb") as f:
        f.write(struct.pack("<4sIII", _BINARY_MAGIC, _BINARY_VERSION, rows, cols))
        f.write(np.ascontiguousarray(values, dtype="<f8").tobytes())


def matrix_from_binary(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < 16:
        raise ValueError("binary file too short for header")
    magic, version, rows, cols = struct.unpack("<4sIII", raw[:16])
    if magic != _BINARY_MAGIC:
        raise ValueError(f"bad magic {magic!r}")
    if version != _BINARY_VERSION:
        raise ValueError(f"unsupported version {version}")
    body = np.frombuffer(raw[16:], dtype="<f8")
    if body.size != rows * cols:
        raise ValueError("payload size does not match header")
    return body.reshape(rows, cols).astype(np.float64)
