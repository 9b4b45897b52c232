"""Principal-subspace residual scoring fused with a logit score.

A basis for the dominant subspace of the training features' second-moment
matrix is fitted once; at test time the l2 norm of a sample's component
outside that subspace is scaled and subtracted from the sample's logit-based
score. The scale equalizes the training-mean magnitudes of the two terms.

Features enter the moment matrix uncentered by default; optional mean
centering is exposed because either convention is defensible and they fit
different heads of data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DOutOfRange, EmptyInput, ShapeMismatch
from .interchange import ClassifierHead
from .linalg import sym_eig, warn_once
from .logit_scores import LogitScoreConfig, compute_logits, score_logits

# Table of subspace dims for feature widths of common backbones; anything
# else falls back to d // 2.
_KNOWN_SUBSPACE_DIMS = {2048: 1000, 1920: 512, 1024: 512, 768: 512, 512: 256, 342: 171}

CENTER_MODES = ("none", "mean")


def default_subspace_dim(feature_dim: int) -> int:
    return _KNOWN_SUBSPACE_DIMS.get(feature_dim, max(1, feature_dim // 2))


@dataclass
class VimModel:
    """Fitted principal basis, residual scale, and centering offset."""

    basis: np.ndarray  # (d, D), orthonormal columns
    alpha: float
    subspace_dim: int
    center: np.ndarray  # (d,), zeros when centering is off
    degenerate_spectrum: bool = False

    def check_dim(self, d: int) -> None:
        if self.basis.shape[0] != d:
            raise ShapeMismatch(f"model fitted with d={self.basis.shape[0]}, got d={d}")


def residual_norms(features: np.ndarray, model: VimModel) -> np.ndarray:
    """l2 norm of each row's component outside the fitted subspace."""
    features = np.asarray(features, dtype=np.float64)
    single = features.ndim == 1
    rows = features[None, :] if single else features
    model.check_dim(rows.shape[1])
    shifted = rows - model.center
    coeffs = shifted @ model.basis
    resid = shifted - coeffs @ model.basis.T
    out = np.sqrt((resid * resid).sum(axis=1))
    return float(out[0]) if single else out


def fit_vim(
    train_features: np.ndarray,
    head: ClassifierHead,
    subspace_dim: int | None = None,
    center: str = "none",
) -> VimModel:
    """Fit the principal subspace and the residual scale on training data."""
    train_features = np.asarray(train_features, dtype=np.float64)
    if train_features.ndim != 2 or train_features.shape[0] == 0:
        raise EmptyInput("fit_vim needs a non-empty [N, d] matrix")
    if center not in CENTER_MODES:
        raise ValueError(f"center must be one of {CENTER_MODES}, got '{center}'")
    n, d = train_features.shape
    dim = default_subspace_dim(d) if subspace_dim is None else int(subspace_dim)
    if not 1 <= dim <= d:
        raise DOutOfRange(f"subspace dim {dim} outside [1, {d}]")
    if n < d:
        warn_once(
            f"fitting a {d}-dim subspace model on only {n} samples; "
            "the spectrum estimate may be unstable"
        )
    offset = train_features.mean(axis=0) if center == "mean" else np.zeros(d)
    shifted = train_features - offset
    moment = (shifted.T @ shifted) / n
    eig = sym_eig(moment)
    degenerate = bool(
        dim < d and abs(eig.eigenvalues[dim - 1] - eig.eigenvalues[dim]) <= 1e-12
    )
    if degenerate:
        warn_once(
            f"eigenvalues {dim} and {dim + 1} coincide within 1e-12; "
            "the fitted basis is one of many equivalent choices"
        )
    basis = eig.eigenvectors[:, :dim].copy()
    model = VimModel(
        basis=basis,
        alpha=1.0,
        subspace_dim=dim,
        center=offset,
        degenerate_spectrum=degenerate,
    )
    resid_sum = float(residual_norms(train_features, model).sum())
    maxlogit_sum = float(compute_logits(train_features, head).max(axis=1).sum())
    alpha = maxlogit_sum / max(resid_sum, 1e-300)
    if not np.isfinite(alpha) or alpha <= 0.0:
        warn_once(
            f"residual scale came out {alpha:.3g}; falling back to 1.0 "
            "(training maxlogits are not positive on average)"
        )
        alpha = 1.0
    model.alpha = alpha
    return model


def vim_score(
    feat: np.ndarray,
    model: VimModel,
    head: ClassifierHead,
    inner: LogitScoreConfig,
) -> float:
    resid = residual_norms(feat, model)
    logit_part = float(score_logits(compute_logits(feat, head), inner))
    return -model.alpha * resid + logit_part


def vim_score_batch(
    features: np.ndarray,
    model: VimModel,
    head: ClassifierHead,
    inner: LogitScoreConfig,
) -> np.ndarray:
    resid = residual_norms(features, model)
    logit_part = score_logits(compute_logits(features, head), inner)
    return -model.alpha * resid + logit_part


def residual_score(feat: np.ndarray, model: VimModel) -> float:
    """Feature-only variant: negated residual norm, no logit term."""
    return -residual_norms(feat, model)


def residual_score_batch(features: np.ndarray, model: VimModel) -> np.ndarray:
    return -residual_norms(features, model)
