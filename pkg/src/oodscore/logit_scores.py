"""Confidence scores computed from classifier logits.

Four scoring rules over a logit vector, higher meaning more in-distribution:

* ``msp``       max softmax probability
* ``maxlogit``  largest raw logit
* ``energy``    T * logsumexp(logits / T)
* ``gen``       negative truncated generalized entropy of the softmax
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, MOutOfRange
from .interchange import ClassifierHead
from .linalg import log_sum_exp, softmax

LOGIT_METHODS = ("msp", "maxlogit", "energy", "gen")


@dataclass(frozen=True)
class LogitScoreConfig:
    """Which logit rule to apply and its hyperparameters.

    ``gen_top_m`` of None resolves to min(100, c) at scoring time.
    """

    method: str = "energy"
    temperature: float = 1.0
    gen_top_m: int | None = None
    gen_gamma: float = 0.1

    def __post_init__(self):
        if self.method not in LOGIT_METHODS:
            raise ValueError(f"unknown logit score '{self.method}'")
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        if self.gen_gamma <= 0:
            raise ValueError("gen_gamma must be positive")

    def resolve_m(self, num_classes: int) -> int:
        m = self.gen_top_m if self.gen_top_m is not None else min(100, num_classes)
        if not 1 <= m <= num_classes:
            raise MOutOfRange(f"M={m} outside [1, {num_classes}]")
        return m

    def describe(self) -> str:
        if self.method == "energy":
            return f"energy(T={self.temperature:g})"
        if self.method == "gen":
            m = self.gen_top_m if self.gen_top_m is not None else "min(100,c)"
            return f"gen(M={m}, gamma={self.gen_gamma:g})"
        return self.method


def compute_logits(features: np.ndarray, head: ClassifierHead) -> np.ndarray:
    """Logits ``features @ W.T + bias`` for a batch of feature rows."""
    features = np.asarray(features, dtype=np.float64)
    single = features.ndim == 1
    if single:
        features = features[None, :]
    if features.shape[1] != head.feature_dim:
        raise DimensionMismatch(
            f"features have dim {features.shape[1]}, head expects {head.feature_dim}"
        )
    logits = features @ head.weights.T + head.bias
    return logits[0] if single else logits


def predicted_labels(logits: np.ndarray) -> np.ndarray:
    """Argmax class per row; ties resolve to the lowest index."""
    logits = np.asarray(logits)
    if logits.ndim == 1:
        return np.int64(logits.argmax())
    return logits.argmax(axis=1).astype(np.int64)


# --- scalar forms (one logit vector) -----------------------------------------

def msp(logits: np.ndarray) -> float:
    """Maximum softmax probability; lies in (0, 1]."""
    return float(softmax(np.asarray(logits, dtype=np.float64)).max())


def maxlogit(logits: np.ndarray) -> float:
    return float(np.asarray(logits, dtype=np.float64).max())


def energy(logits: np.ndarray, temperature: float = 1.0) -> float:
    """T-scaled log-sum-exp of the logits; always >= maxlogit."""
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    v = np.asarray(logits, dtype=np.float64)
    return float(temperature * log_sum_exp(v / temperature))


def gen(logits: np.ndarray, top_m: int, gamma: float = 0.1) -> float:
    """Negative truncated generalized entropy.

    Softmax probabilities are sorted descending, the top ``top_m`` retained,
    and -sum(p^gamma * (1-p)^gamma) returned. Always negative; approaches 0
    as one probability approaches 1.
    """
    v = np.asarray(logits, dtype=np.float64)
    if not 1 <= top_m <= v.shape[-1]:
        raise MOutOfRange(f"M={top_m} outside [1, {v.shape[-1]}]")
    if gamma <= 0:
        raise ValueError("gen_gamma must be positive")
    probs = np.sort(softmax(v))[::-1][:top_m]
    return float(-(probs**gamma * (1.0 - probs) ** gamma).sum())


# --- batch form ---------------------------------------------------------------

def score_logits(logits: np.ndarray, config: LogitScoreConfig) -> np.ndarray:
    """Apply the configured rule to each row of a logit matrix."""
    logits = np.asarray(logits, dtype=np.float64)
    single = logits.ndim == 1
    if single:
        logits = logits[None, :]
    if config.method == "msp":
        out = softmax(logits).max(axis=1)
    elif config.method == "maxlogit":
        out = logits.max(axis=1)
    elif config.method == "energy":
        out = config.temperature * log_sum_exp(logits / config.temperature, axis=1)
    else:  # gen
        m = config.resolve_m(logits.shape[1])
        probs = np.sort(softmax(logits), axis=1)[:, ::-1][:, :m]
        out = -(probs**config.gen_gamma * (1.0 - probs) ** config.gen_gamma).sum(axis=1)
    return out[0] if single else out
