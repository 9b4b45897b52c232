"""Feature-shaping baselines: rewrite features, then apply a logit score.

* ReAct clamps every activation at a global threshold fitted as a percentile
  of all training activations.
* ASH prunes each sample's features below that sample's own percentile and
  rescales (S), keeps (P), or binarizes onto an equal budget (B) the rest.
* DICE masks classifier weights, keeping per class the columns with the
  largest weight-times-mean-activation contribution on the training split.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AllPruned, EmptyInput, ShapeMismatch
from .interchange import ClassifierHead
from .linalg import percentile, top_k_indices
from .logit_scores import LogitScoreConfig, score_logits

ASH_VARIANTS = ("s", "p", "b")


# --- ReAct --------------------------------------------------------------------

def fit_react_threshold(train_features: np.ndarray, p: float = 90.0) -> float:
    """Clamp threshold: p-th percentile over all N*d training activations."""
    train_features = np.asarray(train_features, dtype=np.float64)
    if train_features.size == 0:
        raise EmptyInput("fit_react_threshold needs a non-empty matrix")
    return percentile(train_features.ravel(), p)


def react_shape(features: np.ndarray, threshold: float) -> np.ndarray:
    return np.minimum(np.asarray(features, dtype=np.float64), threshold)


def react_score(
    feat: np.ndarray,
    threshold: float,
    head: ClassifierHead,
    inner: LogitScoreConfig,
) -> float:
    shaped = react_shape(feat, threshold)
    return float(score_logits(shaped @ head.weights.T + head.bias, inner))


def react_score_batch(
    features: np.ndarray,
    threshold: float,
    head: ClassifierHead,
    inner: LogitScoreConfig,
) -> np.ndarray:
    shaped = react_shape(features, threshold)
    return score_logits(shaped @ head.weights.T + head.bias, inner)


# --- ASH ----------------------------------------------------------------------

def ash_shape(features: np.ndarray, variant: str, prune_percent: float) -> np.ndarray:
    """Per-sample activation shaping.

    Each row's pruning threshold is that row's own prune_percent percentile;
    entries at or above the threshold are kept, the rest zeroed. Kept entries
    are then scaled by exp(s_o / s_p) (variant s), left alone (p), or replaced
    by s_o / n (b), where s_o and s_p are the row sums before and after
    pruning and n is the number kept. Thresholds and sums use raw values, so
    negative activations participate as-is.
    """
    if variant not in ASH_VARIANTS:
        raise ValueError(f"unknown ASH variant '{variant}'")
    if not 0.0 <= prune_percent < 100.0:
        raise ValueError(f"prune_percent must lie in [0, 100), got {prune_percent}")
    features = np.asarray(features, dtype=np.float64)
    single = features.ndim == 1
    rows = features[None, :] if single else features
    tau = np.percentile(rows, prune_percent, axis=1, method="linear")
    keep = rows >= tau[:, None]
    n_kept = keep.sum(axis=1)
    if (n_kept == 0).any():
        raise AllPruned("a sample lost every feature to pruning")
    s_before = rows.sum(axis=1)
    s_after = (rows * keep).sum(axis=1)
    if variant == "s":
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            factor = np.where(s_after != 0.0, np.exp(s_before / s_after), 1.0)
        shaped = rows * keep * factor[:, None]
    elif variant == "p":
        shaped = rows * keep
    else:  # b: every kept slot carries an equal share of the pre-pruning sum
        shaped = keep * (s_before / n_kept)[:, None]
    return shaped[0] if single else shaped


def ash_score(
    feat: np.ndarray,
    variant: str,
    prune_percent: float,
    head: ClassifierHead,
    inner: LogitScoreConfig,
) -> float:
    shaped = ash_shape(feat, variant, prune_percent)
    return float(score_logits(shaped @ head.weights.T + head.bias, inner))


def ash_score_batch(
    features: np.ndarray,
    variant: str,
    prune_percent: float,
    head: ClassifierHead,
    inner: LogitScoreConfig,
) -> np.ndarray:
    shaped = ash_shape(features, variant, prune_percent)
    return score_logits(shaped @ head.weights.T + head.bias, inner)


# --- DICE ---------------------------------------------------------------------

@dataclass(frozen=True)
class DiceMask:
    """Per-class boolean keep mask over weight columns."""

    keep: np.ndarray  # (c, d) bool
    sparsity: float

    @property
    def kept_per_class(self) -> int:
        return int(self.keep[0].sum()) if self.keep.size else 0


def fit_dice_mask(
    train_features: np.ndarray,
    head: ClassifierHead,
    sparsity: float = 0.7,
) -> DiceMask:
    """Keep, per class, the top (1 - sparsity) fraction of weight columns.

    A column's contribution for class i is W[i, j] times the global mean
    training activation of feature j. Ties break toward lower column index;
    the kept count is round((1 - sparsity) * d), half away from zero.
    """
    train_features = np.asarray(train_features, dtype=np.float64)
    if train_features.size == 0:
        raise EmptyInput("fit_dice_mask needs a non-empty matrix")
    if not 0.0 <= sparsity < 1.0:
        raise ValueError(f"sparsity must lie in [0, 1), got {sparsity}")
    mean_feat = train_features.mean(axis=0)
    contribution = head.weights * mean_feat[None, :]
    d = head.feature_dim
    kept = int(np.floor((1.0 - sparsity) * d + 0.5))
    keep = np.zeros_like(contribution, dtype=bool)
    for i in range(head.num_classes):
        keep[i, top_k_indices(contribution[i], kept)] = True
    return DiceMask(keep=keep, sparsity=sparsity)


def dice_score(
    feat: np.ndarray,
    mask: DiceMask,
    head: ClassifierHead,
    inner: LogitScoreConfig,
) -> float:
    if mask.keep.shape != head.weights.shape:
        raise ShapeMismatch(
            f"mask {mask.keep.shape} does not match head {head.weights.shape}"
        )
    logits = np.asarray(feat, dtype=np.float64) @ (head.weights * mask.keep).T + head.bias
    return float(score_logits(logits, inner))


def dice_score_batch(
    features: np.ndarray,
    mask: DiceMask,
    head: ClassifierHead,
    inner: LogitScoreConfig,
) -> np.ndarray:
    if mask.keep.shape != head.weights.shape:
        raise ShapeMismatch(
            f"mask {mask.keep.shape} does not match head {head.weights.shape}"
        )
    logits = np.asarray(features, dtype=np.float64) @ (head.weights * mask.keep).T + head.bias
    return score_logits(logits, inner)
