"""Class-aware relative feature scoring.

Training features are grouped by the classifier's own predicted label and
averaged per class. A test sample's score is the negated l1 distance between
its feature vector and its predicted class's average, normalized by the
sample's own l1 norm. Two ablation scores keep only one ingredient: the raw
l1 distance, or the raw l1 norm.

Batch scorers never abort on degenerate samples. A sample whose predicted
class has no training members, or whose feature vector has zero l1 norm,
receives ``-inf`` (most-OOD) and is tallied in the returned warning counters.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import EmptyInput, ShapeMismatch, UnusableClass, ZeroNormFeature
from .interchange import ClassifierHead
from .logit_scores import LogitScoreConfig, compute_logits, predicted_labels

MOST_OOD = float("-inf")

WARN_UNUSABLE = "unusable_class"
WARN_ZERO_NORM = "zero_norm_feature"
WARN_NONPOSITIVE = "nonpositive_logit_score"


@dataclass
class ScoreVector:
    """Per-sample scores (higher = more ID) plus surrogate-score counters."""

    values: np.ndarray
    warnings: dict[str, int] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.values)


@dataclass
class ClassProfile:
    """Fitted per-class statistics all relative-feature scoring depends on."""

    class_means: np.ndarray  # (c, d)
    class_counts: np.ndarray  # (c,) int64
    mean_logit_score: float | None = None  # filled by the decoupled-score fit
    fitted_with: LogitScoreConfig | None = None

    @property
    def usable(self) -> np.ndarray:
        return self.class_counts > 0

    def check_dim(self, d: int) -> None:
        if self.class_means.shape[1] != d:
            raise ShapeMismatch(
                f"profile fitted with d={self.class_means.shape[1]}, got d={d}"
            )


def fit_class_means(train_features: np.ndarray, head: ClassifierHead) -> ClassProfile:
    """Average training features per predicted class.

    Grouping uses the head's own argmax prediction, not ground-truth labels.
    Classes that are never predicted keep a zero mean row and a zero count;
    they are flagged unusable rather than dropped.
    """
    train_features = np.asarray(train_features, dtype=np.float64)
    if train_features.ndim != 2 or train_features.shape[0] == 0:
        raise EmptyInput("fit_class_means needs a non-empty [N, d] matrix")
    c, d = head.num_classes, head.feature_dim
    pred = predicted_labels(compute_logits(train_features, head))
    counts = np.bincount(pred, minlength=c).astype(np.int64)
    sums = np.zeros((c, d))
    np.add.at(sums, pred, train_features)
    means = np.divide(sums, counts[:, None], out=np.zeros_like(sums), where=counts[:, None] > 0)
    return ClassProfile(class_means=means, class_counts=counts)


def caref_score(feat: np.ndarray, profile: ClassProfile, head: ClassifierHead) -> float:
    """Negated normalized l1 error against the predicted class mean."""
    feat = np.asarray(feat, dtype=np.float64)
    profile.check_dim(feat.shape[-1])
    pred = int(predicted_labels(compute_logits(feat, head)))
    if profile.class_counts[pred] == 0:
        raise UnusableClass(f"class {pred} has no training members")
    norm = float(np.abs(feat).sum())
    if norm == 0.0:
        raise ZeroNormFeature("feature vector has zero l1 norm")
    dist = float(np.abs(feat - profile.class_means[pred]).sum())
    return -dist / norm


def l1_distance_score(feat: np.ndarray, profile: ClassProfile, head: ClassifierHead) -> float:
    """Negated raw l1 distance to the predicted class mean."""
    feat = np.asarray(feat, dtype=np.float64)
    profile.check_dim(feat.shape[-1])
    pred = int(predicted_labels(compute_logits(feat, head)))
    if profile.class_counts[pred] == 0:
        raise UnusableClass(f"class {pred} has no training members")
    return -float(np.abs(feat - profile.class_means[pred]).sum())


def l1_norm_score(feat: np.ndarray) -> float:
    """l1 norm of the feature vector itself."""
    return float(np.abs(np.asarray(feat, dtype=np.float64)).sum())


def _batch_predictions(features, profile, head):
    features = np.asarray(features, dtype=np.float64)
    profile.check_dim(features.shape[1])
    pred = predicted_labels(compute_logits(features, head))
    return features, pred


def caref_score_batch(
    features: np.ndarray, profile: ClassProfile, head: ClassifierHead
) -> ScoreVector:
    features, pred = _batch_predictions(features, profile, head)
    dist, norm = _kernels.relative_l1_errors(features, profile.class_means, pred)
    unusable = ~profile.usable[pred]
    zero_norm = norm == 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        scores = -dist / norm
    scores[unusable | zero_norm] = MOST_OOD
    return ScoreVector(
        values=scores,
        warnings={
            WARN_UNUSABLE: int(unusable.sum()),
            WARN_ZERO_NORM: int((zero_norm & ~unusable).sum()),
        },
    )


def l1_distance_score_batch(
    features: np.ndarray, profile: ClassProfile, head: ClassifierHead
) -> ScoreVector:
    features, pred = _batch_predictions(features, profile, head)
    dist, _ = _kernels.relative_l1_errors(features, profile.class_means, pred)
    scores = -dist
    unusable = ~profile.usable[pred]
    scores[unusable] = MOST_OOD
    return ScoreVector(values=scores, warnings={WARN_UNUSABLE: int(unusable.sum())})


def l1_norm_score_batch(features: np.ndarray) -> ScoreVector:
    features = np.asarray(features, dtype=np.float64)
    return ScoreVector(values=np.abs(features).sum(axis=1), warnings={})
