"""Decoupled relative-feature scoring with confidence-based error scaling.

The deviation of a sample from its predicted class's average feature is
split into two parts by the sign of the product between each deviation
component and the matching weight of the predicted class: components whose
product is positive push the winning logit up (aligned), the rest pull it
down or leave it unchanged (anti-aligned; exact zeros land here so the two
sets cover every index).

The aligned error is divided by the sample's own logit-based score and the
anti-aligned error by the training-mean score, then both are negated and
summed. Ablation flags drop either term or the per-sample scaling.

Two readings of the decoupling rule and of the error aggregation are
supported; see ``DecoupleMode`` and ``Aggregation``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .caref import (
    MOST_OOD,
    WARN_NONPOSITIVE,
    WARN_UNUSABLE,
    WARN_ZERO_NORM,
    ClassProfile,
    ScoreVector,
)
from .errors import EmptyInput, NonPositiveMean, NotFitted, UnusableClass, ZeroNormFeature
from .interchange import ClassifierHead
from .logit_scores import LogitScoreConfig, compute_logits, predicted_labels, score_logits

# Sample scores at or below this floor cannot scale an error term; such
# samples get the most-OOD surrogate instead of a sign-flipped ratio.
SCORE_FLOOR = 1e-9

RELATIVE_SIGN = "relative_feature_sign"
RAW_SIGN = "raw_feature_sign"
DECOUPLE_MODES = (RELATIVE_SIGN, RAW_SIGN)

ABS_SUM = "abs_sum"
SUM_ABS = "sum_abs"
AGGREGATIONS = (ABS_SUM, SUM_ABS)


@dataclass(frozen=True)
class CadrefConfig:
    """Decoupling rule, error aggregation, logit score, and ablation flags."""

    decouple_mode: str = RELATIVE_SIGN
    aggregation: str = ABS_SUM
    logit_score: LogitScoreConfig = field(
        default_factory=lambda: LogitScoreConfig(method="energy", temperature=1.0)
    )
    use_pos: bool = True
    use_neg: bool = True
    use_scaling: bool = True

    def __post_init__(self):
        if self.decouple_mode not in DECOUPLE_MODES:
            raise ValueError(f"unknown decouple mode '{self.decouple_mode}'")
        if self.aggregation not in AGGREGATIONS:
            raise ValueError(f"unknown aggregation '{self.aggregation}'")
        if not (self.use_pos or self.use_neg):
            raise ValueError("at least one of use_pos/use_neg must be set")


@dataclass(frozen=True)
class DecoupledError:
    """Aligned and anti-aligned error components; both non-negative."""

    pos: float
    neg: float


def decouple_errors(
    feat: np.ndarray,
    profile: ClassProfile,
    head: ClassifierHead,
    mode: str = RELATIVE_SIGN,
    aggregation: str = ABS_SUM,
) -> DecoupledError:
    """Split one sample's relative error by weight-sign alignment."""
    if mode not in DECOUPLE_MODES:
        raise ValueError(f"unknown decouple mode '{mode}'")
    if aggregation not in AGGREGATIONS:
        raise ValueError(f"unknown aggregation '{aggregation}'")
    feat = np.asarray(feat, dtype=np.float64)
    profile.check_dim(feat.shape[-1])
    pred = int(predicted_labels(compute_logits(feat, head)))
    if profile.class_counts[pred] == 0:
        raise UnusableClass(f"class {pred} has no training members")
    norm = float(np.abs(feat).sum())
    if norm == 0.0:
        raise ZeroNormFeature("feature vector has zero l1 norm")
    rel = feat - profile.class_means[pred]
    w = head.weights[pred]
    basis = rel if mode == RELATIVE_SIGN else feat
    aligned = (w * basis) > 0
    if aggregation == SUM_ABS:
        pos_raw = float(np.abs(rel[aligned]).sum())
        neg_raw = float(np.abs(rel[~aligned]).sum())
    else:
        pos_raw = abs(float(rel[aligned].sum()))
        neg_raw = abs(float(rel[~aligned].sum()))
    return DecoupledError(pos=pos_raw / norm, neg=neg_raw / norm)


def fit_mean_logit_score(
    train_features: np.ndarray,
    head: ClassifierHead,
    logit_score: LogitScoreConfig,
) -> float:
    """Mean of the configured logit score over the training split.

    The mean normalizes anti-aligned errors, so a non-positive value would
    silently flip their sign for every sample; that is a hard error.
    """
    train_features = np.asarray(train_features, dtype=np.float64)
    if train_features.ndim != 2 or train_features.shape[0] == 0:
        raise EmptyInput("fit_mean_logit_score needs a non-empty [N, d] matrix")
    scores = score_logits(compute_logits(train_features, head), logit_score)
    mean = float(scores.mean())
    if mean <= 0.0:
        raise NonPositiveMean(
            f"training-mean {logit_score.describe()} is {mean:.6g}; "
            "choose a logit score that stays positive on the training split"
        )
    return mean


def attach_mean_logit_score(
    profile: ClassProfile,
    train_features: np.ndarray,
    head: ClassifierHead,
    logit_score: LogitScoreConfig,
) -> ClassProfile:
    """Fill the profile's training-mean score field in place and return it."""
    profile.mean_logit_score = fit_mean_logit_score(train_features, head, logit_score)
    profile.fitted_with = logit_score
    return profile


def combine_errors(
    pos: float,
    neg: float,
    sample_score: float,
    mean_score: float,
    use_pos: bool = True,
    use_neg: bool = True,
    use_scaling: bool = True,
) -> float:
    """Assemble the final score from error components and scale factors.

    Returns ``-inf`` when the aligned term needs a per-sample scale but the
    sample's score is at or below the positivity floor.
    """
    total = 0.0
    if use_pos:
        if use_scaling:
            if sample_score <= SCORE_FLOOR:
                return MOST_OOD
            total += pos / sample_score
        else:
            total += pos
    if use_neg:
        total += neg / mean_score
    return -total


def _require_fitted(profile: ClassProfile, config: CadrefConfig) -> float:
    if profile.mean_logit_score is None:
        raise NotFitted("profile has no training-mean logit score; fit it first")
    if profile.fitted_with is not None and profile.fitted_with != config.logit_score:
        raise NotFitted(
            f"profile mean fitted with {profile.fitted_with.describe()} but "
            f"scoring requested {config.logit_score.describe()}"
        )
    return profile.mean_logit_score


def cadref_score(
    feat: np.ndarray,
    profile: ClassProfile,
    head: ClassifierHead,
    config: CadrefConfig | None = None,
) -> float:
    """Score a single sample; raises on unusable class or zero-norm feature."""
    config = config or CadrefConfig()
    mean_score = _require_fitted(profile, config)
    err = decouple_errors(feat, profile, head, config.decouple_mode, config.aggregation)
    sample_score = float(
        score_logits(compute_logits(feat, head), config.logit_score)
    )
    return combine_errors(
        err.pos,
        err.neg,
        sample_score,
        mean_score,
        use_pos=config.use_pos,
        use_neg=config.use_neg,
        use_scaling=config.use_scaling,
    )


def cadref_score_batch(
    features: np.ndarray,
    profile: ClassProfile,
    head: ClassifierHead,
    config: CadrefConfig | None = None,
) -> ScoreVector:
    """Vectorized scoring with the most-OOD surrogate policy.

    Degenerate rows (unusable predicted class, zero-norm feature, or a
    non-positive sample score where scaling needs one) become ``-inf`` and
    are tallied per cause.
    """
    config = config or CadrefConfig()
    mean_score = _require_fitted(profile, config)
    features = np.asarray(features, dtype=np.float64)
    profile.check_dim(features.shape[1])
    logits = compute_logits(features, head)
    pred = predicted_labels(logits)
    pos_raw, neg_raw, norm = _kernels.decoupled_error_sums(
        features,
        profile.class_means,
        head.weights,
        pred,
        config.decouple_mode == RELATIVE_SIGN,
        config.aggregation == SUM_ABS,
    )
    sample_scores = score_logits(logits, config.logit_score)

    unusable = ~profile.usable[pred]
    zero_norm = norm == 0.0
    bad = unusable | zero_norm
    with np.errstate(divide="ignore", invalid="ignore"):
        pos = np.where(bad, 0.0, pos_raw / norm)
        neg = np.where(bad, 0.0, neg_raw / norm)

    total = np.zeros(len(features))
    nonpositive = np.zeros(len(features), dtype=bool)
    if config.use_pos:
        if config.use_scaling:
            nonpositive = sample_scores <= SCORE_FLOOR
            with np.errstate(divide="ignore", invalid="ignore"):
                total += np.where(nonpositive, 0.0, pos / sample_scores)
        else:
            total += pos
    if config.use_neg:
        total += neg / mean_score
    scores = -total
    scores[bad | nonpositive] = MOST_OOD
    return ScoreVector(
        values=scores,
        warnings={
            WARN_UNUSABLE: int(unusable.sum()),
            WARN_ZERO_NORM: int((zero_norm & ~unusable).sum()),
            WARN_NONPOSITIVE: int((nonpositive & ~bad).sum()),
        },
    )


def ablation_configs(base: CadrefConfig | None = None) -> dict[str, CadrefConfig]:
    """The five component-toggle rows of the ablation grid.

    The first row (plain class-aware relative error) is handled by the
    caller; this returns the four decoupled configurations.
    """
    base = base or CadrefConfig()
    return {
        "ep_only": replace(base, use_pos=True, use_neg=False, use_scaling=False),
        "en_only": replace(base, use_pos=False, use_neg=True, use_scaling=False),
        "ep_scaled": replace(base, use_pos=True, use_neg=False, use_scaling=True),
        "cadref": replace(base, use_pos=True, use_neg=True, use_scaling=True),
    }
