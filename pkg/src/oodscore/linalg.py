"""Dense numeric kernels shared by the scoring modules.

Thin, contract-checked wrappers over numpy/LAPACK: matrix products, a
max-subtracted softmax, rank-interpolated percentiles, deterministic top-k
selection, and a symmetric eigensolver with a fixed ordering and sign
convention.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConvergenceFailure,
    DimensionMismatch,
    EmptyInput,
    NotSymmetric,
)

SYMMETRY_TOL = 1e-10


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product with an explicit conformability check."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise DimensionMismatch(f"matmul expects matrices, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise DimensionMismatch(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def softmax(v: np.ndarray) -> np.ndarray:
    """Probability vector of v, computed with max subtraction for stability.

    Accepts a vector or a batch of row vectors.
    """
    v = np.asarray(v, dtype=np.float64)
    shifted = v - v.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def log_sum_exp(v: np.ndarray, axis: int = -1) -> np.ndarray:
    """log(sum(exp(v))) with max subtraction; overflow-safe."""
    v = np.asarray(v, dtype=np.float64)
    m = v.max(axis=axis, keepdims=True)
    out = m + np.log(np.exp(v - m).sum(axis=axis, keepdims=True))
    return np.squeeze(out, axis=axis)


def percentile(values: np.ndarray, p: float) -> float:
    """p-th percentile with linear interpolation between closest ranks."""
    values = np.asarray(values, dtype=np.float64).ravel()
    if values.size == 0:
        raise EmptyInput("percentile of an empty collection")
    if not 0.0 <= p <= 100.0:
        raise ValueError(f"percentile must lie in [0, 100], got {p}")
    return float(np.percentile(values, p, method="linear"))


def top_k_indices(values: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k largest entries, ties broken by lower index first."""
    values = np.asarray(values)
    if not 0 <= k <= values.size:
        raise ValueError(f"k={k} out of range for {values.size} values")
    order = np.argsort(-values, kind="stable")
    return order[:k]


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenpairs of a symmetric matrix, eigenvalues sorted descending.

    Columns of ``eigenvectors`` are orthonormal; the largest-magnitude entry
    of every column is positive so the basis is reproducible.
    """

    eigenvalues: np.ndarray  # (d,) descending
    eigenvectors: np.ndarray  # (d, d) orthonormal columns


def sym_eig(a: np.ndarray) -> EigenDecomposition:
    """Eigendecomposition of a symmetric matrix.

    Raises NotSymmetric when max|A - A^T| exceeds 1e-10 and
    ConvergenceFailure if the underlying solver does not converge.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"sym_eig expects a square matrix, got {a.shape}")
    if a.size and np.abs(a - a.T).max() > SYMMETRY_TOL:
        raise NotSymmetric(f"max asymmetry {np.abs(a - a.T).max():.3e}")
    sym = (a + a.T) / 2.0
    try:
        eigvals, eigvecs = np.linalg.eigh(sym)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(str(exc)) from exc
    # eigh returns ascending order; flip to descending
    eigvals = eigvals[::-1].copy()
    eigvecs = eigvecs[:, ::-1].copy()
    # deterministic sign: largest-magnitude entry of each column positive
    pivot = np.abs(eigvecs).argmax(axis=0)
    signs = np.sign(eigvecs[pivot, np.arange(eigvecs.shape[1])])
    signs[signs == 0] = 1.0
    eigvecs *= signs
    return EigenDecomposition(eigenvalues=eigvals, eigenvectors=eigvecs)


def warn_once(message: str) -> None:
    """Emit a RuntimeWarning; kept here so callers share one category."""
    warnings.warn(message, RuntimeWarning, stacklevel=3)
