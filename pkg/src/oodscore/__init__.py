"""Post-hoc out-of-distribution scoring over exported classifier features.

The engine ingests penultimate-layer feature matrices and a linear head from
an on-disk container, fits class-aware statistics on a training split, and
scores samples under a roster of named methods. An evaluation harness turns
(ID, OOD) score pairs into AUROC/FPR95 reports.
"""

from ._kernels import BACKEND as kernel_backend
from .cadref import (
    CadrefConfig,
    DecoupledError,
    cadref_score,
    cadref_score_batch,
    decouple_errors,
    fit_mean_logit_score,
)
from .caref import (
    ClassProfile,
    ScoreVector,
    caref_score,
    caref_score_batch,
    fit_class_means,
    l1_distance_score,
    l1_norm_score,
)
from .interchange import (
    ClassifierHead,
    Dataset,
    Split,
    load_dataset,
    read_tensor,
    save_dataset,
    write_tensor,
)
from .linalg import EigenDecomposition, matmul, percentile, softmax, sym_eig
from .logit_scores import (
    LogitScoreConfig,
    compute_logits,
    energy,
    gen,
    maxlogit,
    msp,
    predicted_labels,
)
from .metrics import (
    DetectionReport,
    Histogram,
    auroc,
    evaluate_pair,
    fpr_at_tpr,
    histogram,
)
from .registry import Hyperparams, Method, MethodSpec, available_methods, build_method
from .shapers import DiceMask, ash_shape, fit_dice_mask, fit_react_threshold
from .synth import SynthParams, generate
from .vim import VimModel, fit_vim, residual_norms, vim_score

__version__ = "0.1.0"

__all__ = [
    "CadrefConfig",
    "ClassProfile",
    "ClassifierHead",
    "Dataset",
    "DecoupledError",
    "DetectionReport",
    "DiceMask",
    "EigenDecomposition",
    "Histogram",
    "Hyperparams",
    "LogitScoreConfig",
    "Method",
    "MethodSpec",
    "ScoreVector",
    "Split",
    "SynthParams",
    "VimModel",
    "auroc",
    "ash_shape",
    "available_methods",
    "build_method",
    "cadref_score",
    "cadref_score_batch",
    "caref_score",
    "caref_score_batch",
    "compute_logits",
    "decouple_errors",
    "energy",
    "evaluate_pair",
    "fit_class_means",
    "fit_dice_mask",
    "fit_mean_logit_score",
    "fit_react_threshold",
    "fit_vim",
    "fpr_at_tpr",
    "gen",
    "generate",
    "histogram",
    "kernel_backend",
    "l1_distance_score",
    "l1_norm_score",
    "load_dataset",
    "matmul",
    "maxlogit",
    "msp",
    "percentile",
    "predicted_labels",
    "read_tensor",
    "residual_norms",
    "save_dataset",
    "softmax",
    "sym_eig",
    "vim_score",
    "write_tensor",
]
