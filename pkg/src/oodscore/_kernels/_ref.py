"""Numpy fallback implementations of the hot per-sample kernels."""

from __future__ import annotations

import numpy as np


def relative_l1_errors(features, class_means, pred):
    """Per-row l1 distance to the assigned class mean and l1 norm.

    Returns ``(dist_l1, feat_l1)`` arrays of shape (N,).
    """
    rel = features - class_means[pred]
    return np.abs(rel).sum(axis=1), np.abs(features).sum(axis=1)


def decoupled_error_sums(features, class_means, weights, pred, relative_sign, sum_abs):
    """Split each row's deviation from its class mean by weight alignment.

    An index is aligned when the product of the predicted class's weight with
    the relative feature (``relative_sign=True``) or the raw feature
    (``relative_sign=False``) is strictly positive; zero products count as
    anti-aligned so the two sets cover every index. With ``sum_abs`` the two
    raw errors are sums of absolute deviations, otherwise absolute values of
    the plain sums.

    Returns ``(pos_raw, neg_raw, feat_l1)`` arrays of shape (N,).
    """
    rel = features - class_means[pred]
    w = weights[pred]
    basis = rel if relative_sign else features
    aligned = (w * basis) > 0
    if sum_abs:
        mag = np.abs(rel)
        pos_raw = np.where(aligned, mag, 0.0).sum(axis=1)
        neg_raw = np.where(aligned, 0.0, mag).sum(axis=1)
    else:
        pos_raw = np.abs(np.where(aligned, rel, 0.0).sum(axis=1))
        neg_raw = np.abs(np.where(aligned, 0.0, rel).sum(axis=1))
    return pos_raw, neg_raw, np.abs(features).sum(axis=1)
