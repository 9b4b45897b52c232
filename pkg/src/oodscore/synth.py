"""Seeded synthetic fixtures: class clusters, a matching head, and OOD draws.

ID features are rectified Gaussian clusters around per-class centers, which
mimics non-negative penultimate activations. The head's weight rows follow
the class centers so predictions are accurate and training confidence scores
stay positive. OOD samples interpolate away from the ID process as the shift
grows: the class pattern is blended with a second class and attenuated while
an isotropic perturbation scales up. A shift of zero reproduces the ID
process exactly.

All randomness comes from one numpy PCG64 generator seeded with a single
64-bit value, so a (params, seed) pair always yields identical tensors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .interchange import ClassifierHead, Split

NOISE_SIGMA = 0.4


@dataclass(frozen=True)
class SynthParams:
    classes: int = 10
    dim: int = 64
    n_per_class: int = 20
    ood_shift: float = 4.0
    seed: int = 0
    train_per_class: int | None = None

    def __post_init__(self):
        if self.classes < 2 or self.dim < 1 or self.n_per_class < 1:
            raise ValueError("classes >= 2, dim >= 1, n_per_class >= 1 required")
        if self.ood_shift < 0:
            raise ValueError("ood_shift must be non-negative")


def generate(params: SynthParams) -> tuple[ClassifierHead, dict[str, Split]]:
    """Build head and train/test/ood splits for the given parameters."""
    c, d = params.classes, params.dim
    rng = np.random.default_rng(params.seed)
    centers = rng.normal(0.0, 1.0, size=(c, d))
    weights = 0.5 * centers + rng.normal(0.0, 0.05, size=(c, d))
    bias = rng.normal(0.0, 0.05, size=c)
    head = ClassifierHead(weights=weights, bias=bias)

    def id_split(n_per: int) -> Split:
        feats, labels = [], []
        for k in range(c):
            x = centers[k][None, :] + rng.normal(0.0, NOISE_SIGMA, size=(n_per, d))
            feats.append(np.maximum(x, 0.0))
            labels.append(np.full(n_per, k, dtype=np.int64))
        return Split(features=np.concatenate(feats), labels=np.concatenate(labels))

    train = id_split(params.train_per_class or params.n_per_class)
    test = id_split(params.n_per_class)

    n_ood = c * params.n_per_class
    shift = params.ood_shift
    k1 = rng.integers(0, c, size=n_ood)
    k2 = rng.integers(0, c, size=n_ood)
    noise = rng.normal(0.0, NOISE_SIGMA, size=(n_ood, d))
    iso = rng.normal(0.0, 1.0, size=(n_ood, d))
    attenuation = 1.0 / (1.0 + shift / 4.0)
    blend = shift / (shift + 4.0)
    base = (1.0 - blend) * centers[k1] + blend * centers[k2]
    ood_features = np.maximum(
        attenuation * base + noise + 0.25 * NOISE_SIGMA * shift * iso, 0.0
    )
    ood = Split(features=ood_features, labels=None)

    return head, {"train": train, "test": test, "ood": ood}
