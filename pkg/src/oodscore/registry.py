"""Uniform method registry.

Every scoring rule is addressable by name through one interface: optional
``fit`` on the training split, ``score_batch`` over a feature matrix, and
``score_one`` for a single sample. Composite names follow
``<base>+<logit>`` (for example ``react+gen``); the logit part defaults to
energy for every method that consumes one.

Fitted state serializes into a directory of interchange tensors plus a JSON
meta file, and reloads bit-identically.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import shapers, vim as vim_mod
from .cadref import (
    ABS_SUM,
    CadrefConfig,
    RELATIVE_SIGN,
    attach_mean_logit_score,
    cadref_score,
    cadref_score_batch,
)
from .caref import (
    ClassProfile,
    ScoreVector,
    caref_score,
    caref_score_batch,
    fit_class_means,
    l1_distance_score,
    l1_distance_score_batch,
    l1_norm_score,
    l1_norm_score_batch,
)
from .errors import ConfigError, NotFitted
from .interchange import ClassifierHead, read_tensor, write_tensor
from .logit_scores import (
    LOGIT_METHODS,
    LogitScoreConfig,
    compute_logits,
    score_logits,
)

META_NAME = "meta.json"


@dataclass(frozen=True)
class Hyperparams:
    """Knobs shared by the CLI and tests; defaults follow common practice."""

    energy_temperature: float = 1.0
    gen_top_m: int | None = None
    gen_gamma: float = 0.1
    react_percentile: float = 90.0
    ash_prune_percent: float = 90.0
    dice_sparsity: float = 0.7
    vim_dim: int | None = None
    vim_center: str = "none"
    decouple_mode: str = RELATIVE_SIGN
    aggregation: str = ABS_SUM

    def logit_config(self, method: str) -> LogitScoreConfig:
        return LogitScoreConfig(
            method=method,
            temperature=self.energy_temperature if method == "energy" else 1.0,
            gen_top_m=self.gen_top_m,
            gen_gamma=self.gen_gamma,
        )


@dataclass(frozen=True)
class MethodSpec:
    name: str
    requires_fit: bool
    config: dict = field(default_factory=dict)


class Method:
    """One named scoring pipeline with optional fitted state."""

    def __init__(self, spec: MethodSpec):
        self.spec = spec
        self.fitted = not spec.requires_fit

    @property
    def name(self) -> str:
        return self.spec.name

    def fit(self, train_features: np.ndarray, head: ClassifierHead) -> "Method":
        """Populate fitted state; refitting replaces any previous state."""
        self._fit(train_features, head)
        self.fitted = True
        return self

    def _fit(self, train_features, head):  # fit-free default
        pass

    def _require_fitted(self) -> None:
        if not self.fitted:
            raise NotFitted(f"method '{self.name}' must be fitted before scoring")

    def score_batch(self, features: np.ndarray, head: ClassifierHead) -> ScoreVector:
        self._require_fitted()
        return self._score_batch(np.asarray(features, dtype=np.float64), head)

    def score_one(self, feat: np.ndarray, head: ClassifierHead) -> float:
        self._require_fitted()
        return self._score_one(np.asarray(feat, dtype=np.float64), head)

    def _score_batch(self, features, head) -> ScoreVector:
        raise NotImplementedError

    def _score_one(self, feat, head) -> float:
        raise NotImplementedError

    # fitted-state serialization; fit-free methods store only their identity
    def save_state(self, directory: str | Path) -> None:
        self._require_fitted()
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        meta = {"method": self.name, **self._state_meta(directory)}
        (directory / META_NAME).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")

    def load_state(self, directory: str | Path) -> "Method":
        directory = Path(directory)
        meta_path = directory / META_NAME
        if not meta_path.is_file():
            raise NotFitted(f"no fitted state in {directory}")
        meta = json.loads(meta_path.read_text())
        if meta.get("method") != self.name:
            raise ConfigError(
                f"state in {directory} belongs to '{meta.get('method')}', "
                f"not '{self.name}'"
            )
        self._load_state_meta(meta, directory)
        self.fitted = True
        return self

    def _state_meta(self, directory: Path) -> dict:
        return {}

    def _load_state_meta(self, meta: dict, directory: Path) -> None:
        pass


class _LogitMethod(Method):
    def __init__(self, spec: MethodSpec, config: LogitScoreConfig):
        super().__init__(spec)
        self.config = config

    def _score_batch(self, features, head):
        return ScoreVector(values=score_logits(compute_logits(features, head), self.config))

    def _score_one(self, feat, head):
        return float(score_logits(compute_logits(feat, head), self.config))


class _ReactMethod(Method):
    def __init__(self, spec, percentile: float, inner: LogitScoreConfig):
        super().__init__(spec)
        self.percentile = percentile
        self.inner = inner
        self.threshold: float | None = None

    def _fit(self, train_features, head):
        self.threshold = shapers.fit_react_threshold(train_features, self.percentile)

    def _score_batch(self, features, head):
        return ScoreVector(
            values=shapers.react_score_batch(features, self.threshold, head, self.inner)
        )

    def _score_one(self, feat, head):
        return shapers.react_score(feat, self.threshold, head, self.inner)

    def _state_meta(self, directory):
        return {"threshold": self.threshold, "percentile": self.percentile}

    def _load_state_meta(self, meta, directory):
        self.threshold = float(meta["threshold"])
        self.percentile = float(meta["percentile"])


class _AshMethod(Method):
    def __init__(self, spec, variant: str, prune_percent: float, inner: LogitScoreConfig):
        super().__init__(spec)
        self.variant = variant
        self.prune_percent = prune_percent
        self.inner = inner

    def _score_batch(self, features, head):
        return ScoreVector(
            values=shapers.ash_score_batch(
                features, self.variant, self.prune_percent, head, self.inner
            )
        )

    def _score_one(self, feat, head):
        return shapers.ash_score(feat, self.variant, self.prune_percent, head, self.inner)


class _DiceMethod(Method):
    def __init__(self, spec, sparsity: float, inner: LogitScoreConfig):
        super().__init__(spec)
        self.sparsity = sparsity
        self.inner = inner
        self.mask: shapers.DiceMask | None = None

    def _fit(self, train_features, head):
        self.mask = shapers.fit_dice_mask(train_features, head, self.sparsity)

    def _score_batch(self, features, head):
        return ScoreVector(
            values=shapers.dice_score_batch(features, self.mask, head, self.inner)
        )

    def _score_one(self, feat, head):
        return shapers.dice_score(feat, self.mask, head, self.inner)

    def _state_meta(self, directory):
        write_tensor(directory / "mask.tnsr", self.mask.keep.astype(np.int32))
        return {"sparsity": self.mask.sparsity}

    def _load_state_meta(self, meta, directory):
        keep = read_tensor(directory / "mask.tnsr").astype(bool)
        self.sparsity = float(meta["sparsity"])
        self.mask = shapers.DiceMask(keep=keep, sparsity=self.sparsity)


class _VimMethod(Method):
    def __init__(self, spec, dim: int | None, center: str, inner: LogitScoreConfig | None):
        super().__init__(spec)
        self.dim = dim
        self.center_mode = center
        self.inner = inner  # None = residual-only variant
        self.model: vim_mod.VimModel | None = None

    def _fit(self, train_features, head):
        self.model = vim_mod.fit_vim(train_features, head, self.dim, self.center_mode)

    def _score_batch(self, features, head):
        if self.inner is None:
            return ScoreVector(values=vim_mod.residual_score_batch(features, self.model))
        return ScoreVector(
            values=vim_mod.vim_score_batch(features, self.model, head, self.inner)
        )

    def _score_one(self, feat, head):
        if self.inner is None:
            return float(vim_mod.residual_score(feat, self.model))
        return vim_mod.vim_score(feat, self.model, head, self.inner)

    def _state_meta(self, directory):
        write_tensor(directory / "basis.tnsr", self.model.basis)
        write_tensor(directory / "center.tnsr", self.model.center)
        return {
            "alpha": self.model.alpha,
            "subspace_dim": self.model.subspace_dim,
            "center_mode": self.center_mode,
            "degenerate_spectrum": self.model.degenerate_spectrum,
        }

    def _load_state_meta(self, meta, directory):
        self.model = vim_mod.VimModel(
            basis=read_tensor(directory / "basis.tnsr"),
            alpha=float(meta["alpha"]),
            subspace_dim=int(meta["subspace_dim"]),
            center=read_tensor(directory / "center.tnsr"),
            degenerate_spectrum=bool(meta["degenerate_spectrum"]),
        )
        self.center_mode = meta["center_mode"]


def _save_profile(profile: ClassProfile, directory: Path) -> dict:
    write_tensor(directory / "class_means.tnsr", profile.class_means)
    write_tensor(directory / "class_counts.tnsr", profile.class_counts.astype(np.int32))
    meta: dict = {}
    if profile.mean_logit_score is not None:
        meta["mean_logit_score"] = profile.mean_logit_score
        cfg = profile.fitted_with
        meta["fitted_with"] = {
            "method": cfg.method,
            "temperature": cfg.temperature,
            "gen_top_m": cfg.gen_top_m,
            "gen_gamma": cfg.gen_gamma,
        }
    return meta


def _load_profile(meta: dict, directory: Path) -> ClassProfile:
    profile = ClassProfile(
        class_means=read_tensor(directory / "class_means.tnsr"),
        class_counts=read_tensor(directory / "class_counts.tnsr").astype(np.int64),
    )
    if "mean_logit_score" in meta:
        profile.mean_logit_score = float(meta["mean_logit_score"])
        cfg = meta["fitted_with"]
        profile.fitted_with = LogitScoreConfig(
            method=cfg["method"],
            temperature=cfg["temperature"],
            gen_top_m=cfg["gen_top_m"],
            gen_gamma=cfg["gen_gamma"],
        )
    return profile


class _ProfileMethod(Method):
    """Shared base for the class-mean scorers."""

    def __init__(self, spec: MethodSpec):
        super().__init__(spec)
        self.profile: ClassProfile | None = None

    def _fit(self, train_features, head):
        self.profile = fit_class_means(train_features, head)

    def _state_meta(self, directory):
        return _save_profile(self.profile, directory)

    def _load_state_meta(self, meta, directory):
        self.profile = _load_profile(meta, directory)


class _CarefMethod(_ProfileMethod):
    def _score_batch(self, features, head):
        return caref_score_batch(features, self.profile, head)

    def _score_one(self, feat, head):
        return caref_score(feat, self.profile, head)


class _L1DistanceMethod(_ProfileMethod):
    def _score_batch(self, features, head):
        return l1_distance_score_batch(features, self.profile, head)

    def _score_one(self, feat, head):
        return l1_distance_score(feat, self.profile, head)


class _L1NormMethod(Method):
    def _score_batch(self, features, head):
        return l1_norm_score_batch(features)

    def _score_one(self, feat, head):
        return l1_norm_score(feat)


class _CadrefMethod(_ProfileMethod):
    def __init__(self, spec: MethodSpec, config: CadrefConfig):
        super().__init__(spec)
        self.config = config

    def _fit(self, train_features, head):
        self.profile = attach_mean_logit_score(
            fit_class_means(train_features, head),
            train_features,
            head,
            self.config.logit_score,
        )

    def _score_batch(self, features, head):
        return cadref_score_batch(features, self.profile, head, self.config)

    def _score_one(self, feat, head):
        return cadref_score(feat, self.profile, head, self.config)


_BASE_METHODS = {
    "msp": "max softmax probability",
    "maxlogit": "largest raw logit",
    "energy": "temperature-scaled log-sum-exp of logits",
    "gen": "negative truncated generalized entropy",
    "react": "activation clamping at a fitted percentile, then a logit score",
    "dice": "contribution-ranked weight masking, then a logit score",
    "ash_s": "per-sample pruning with exponential rescaling, then a logit score",
    "ash_p": "per-sample pruning only, then a logit score",
    "ash_b": "per-sample pruning onto an equal budget, then a logit score",
    "vim": "principal-subspace residual fused with a logit score",
    "residual": "negated principal-subspace residual norm only",
    "caref": "negated class-relative l1 error",
    "l1_distance": "negated l1 distance to the predicted class mean",
    "l1_norm": "l1 norm of the feature vector",
    "cadref": "decoupled class-relative error with confidence scaling",
}

_COMPOSABLE = ("react", "dice", "ash_s", "ash_p", "ash_b", "vim", "cadref")


def parse_method_name(name: str) -> tuple[str, str | None]:
    """Split ``base+logit`` composites; returns (base, inner-or-None)."""
    name = name.strip().lower()
    if "+" in name:
        base, _, inner = name.partition("+")
        if base not in _COMPOSABLE:
            raise ConfigError(f"method '{base}' does not take a '+<logit>' suffix")
        if inner not in LOGIT_METHODS:
            raise ConfigError(f"unknown logit score '{inner}' in '{name}'")
        return base, inner
    if name not in _BASE_METHODS:
        raise ConfigError(f"unknown method '{name}'")
    return name, None


def build_method(name: str, hyper: Hyperparams | None = None) -> Method:
    """Construct a method by name; composites default their logit part to energy."""
    hyper = hyper or Hyperparams()
    base, inner_name = parse_method_name(name)
    canonical = base if inner_name is None else f"{base}+{inner_name}"
    inner = hyper.logit_config(inner_name or "energy")

    if base in LOGIT_METHODS:
        cfg = hyper.logit_config(base)
        spec = MethodSpec(canonical, requires_fit=False, config={"score": cfg.describe()})
        return _LogitMethod(spec, cfg)
    if base == "react":
        spec = MethodSpec(
            canonical,
            requires_fit=True,
            config={"percentile": hyper.react_percentile, "inner": inner.describe()},
        )
        return _ReactMethod(spec, hyper.react_percentile, inner)
    if base in ("ash_s", "ash_p", "ash_b"):
        spec = MethodSpec(
            canonical,
            requires_fit=False,
            config={"prune_percent": hyper.ash_prune_percent, "inner": inner.describe()},
        )
        return _AshMethod(spec, base[-1], hyper.ash_prune_percent, inner)
    if base == "dice":
        spec = MethodSpec(
            canonical,
            requires_fit=True,
            config={"sparsity": hyper.dice_sparsity, "inner": inner.describe()},
        )
        return _DiceMethod(spec, hyper.dice_sparsity, inner)
    if base == "vim":
        spec = MethodSpec(
            canonical,
            requires_fit=True,
            config={
                "subspace_dim": hyper.vim_dim or "auto",
                "center": hyper.vim_center,
                "inner": inner.describe(),
            },
        )
        return _VimMethod(spec, hyper.vim_dim, hyper.vim_center, inner)
    if base == "residual":
        spec = MethodSpec(
            canonical,
            requires_fit=True,
            config={"subspace_dim": hyper.vim_dim or "auto", "center": hyper.vim_center},
        )
        return _VimMethod(spec, hyper.vim_dim, hyper.vim_center, None)
    if base == "caref":
        return _CarefMethod(MethodSpec(canonical, requires_fit=True))
    if base == "l1_distance":
        return _L1DistanceMethod(MethodSpec(canonical, requires_fit=True))
    if base == "l1_norm":
        return _L1NormMethod(MethodSpec(canonical, requires_fit=False))
    if base == "cadref":
        cfg = CadrefConfig(
            decouple_mode=hyper.decouple_mode,
            aggregation=hyper.aggregation,
            logit_score=inner,
        )
        spec = MethodSpec(
            canonical,
            requires_fit=True,
            config={
                "decouple_mode": cfg.decouple_mode,
                "aggregation": cfg.aggregation,
                "logit_score": cfg.logit_score.describe(),
            },
        )
        return _CadrefMethod(spec, cfg)
    raise ConfigError(f"unknown method '{name}'")


def build_cadref_variant(config: CadrefConfig, name: str) -> Method:
    """A cadref method with explicit ablation flags, under a custom name."""
    spec = MethodSpec(
        name,
        requires_fit=True,
        config={
            "use_pos": config.use_pos,
            "use_neg": config.use_neg,
            "use_scaling": config.use_scaling,
        },
    )
    return _CadrefMethod(spec, config)


def available_methods(hyper: Hyperparams | None = None) -> list[dict]:
    """Roster of every method name with its fit requirement and config."""
    hyper = hyper or Hyperparams()
    out = []
    for name, description in _BASE_METHODS.items():
        method = build_method(name, hyper)
        out.append(
            {
                "name": name,
                "requires_fit": method.spec.requires_fit,
                "composable": name in _COMPOSABLE,
                "description": description,
                "config": method.spec.config,
            }
        )
    return out
