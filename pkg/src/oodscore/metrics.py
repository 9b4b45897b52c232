"""Detection metrics and report assembly.

AUROC is the Mann-Whitney statistic P(id > ood) + 0.5 * P(id == ood),
computed from average ranks in O((n+m) log(n+m)). The false positive rate is
read at the largest threshold that still accepts at least the target
fraction of ID samples, with >= on both sides, so ties at the threshold
count as accepted for ID and as false positives for OOD.

Reports serialize to JSON lines (machine) and a markdown grid (human); both
are written with sorted keys and fixed row order so identical runs produce
identical bytes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyInput


def _ranks_with_ties(values: np.ndarray) -> np.ndarray:
    """1-based ranks; tied values share the average of their rank range."""
    _, inverse, counts = np.unique(values, return_inverse=True, return_counts=True)
    below = np.cumsum(counts) - counts
    average = below + (counts + 1) / 2.0
    return average[inverse]


def auroc(id_scores: np.ndarray, ood_scores: np.ndarray) -> float:
    """Probability a random ID sample outscores a random OOD sample."""
    id_s = np.asarray(id_scores, dtype=np.float64).ravel()
    ood_s = np.asarray(ood_scores, dtype=np.float64).ravel()
    n, m = id_s.size, ood_s.size
    if n == 0 or m == 0:
        raise EmptyInput("auroc needs non-empty score sets")
    ranks = _ranks_with_ties(np.concatenate([id_s, ood_s]))
    id_rank_sum = float(ranks[:n].sum())
    return (id_rank_sum - n * (n + 1) / 2.0) / (n * m)


@dataclass(frozen=True)
class FprResult:
    fpr: float
    threshold: float


def fpr_at_tpr(
    id_scores: np.ndarray,
    ood_scores: np.ndarray,
    tpr_target: float = 0.95,
) -> FprResult:
    """FPR at the loosest threshold keeping TPR at or above the target.

    The threshold is the k-th largest ID score with k = ceil(target * n);
    every score >= threshold is predicted ID.
    """
    id_s = np.asarray(id_scores, dtype=np.float64).ravel()
    ood_s = np.asarray(ood_scores, dtype=np.float64).ravel()
    if id_s.size == 0 or ood_s.size == 0:
        raise EmptyInput("fpr_at_tpr needs non-empty score sets")
    if not 0.0 < tpr_target <= 1.0:
        raise ValueError(f"tpr_target must lie in (0, 1], got {tpr_target}")
    k = max(1, math.ceil(tpr_target * id_s.size))
    threshold = float(np.sort(id_s)[id_s.size - k])
    fpr = float((ood_s >= threshold).mean())
    return FprResult(fpr=fpr, threshold=threshold)


@dataclass(frozen=True)
class Histogram:
    """Shared-bin score histogram for one (ID set, OOD set) pair."""

    bin_edges: np.ndarray  # (bins + 1,)
    id_counts: np.ndarray  # (bins,) int64
    ood_counts: np.ndarray  # (bins,) int64


def histogram(id_scores: np.ndarray, ood_scores: np.ndarray, bins: int) -> Histogram:
    """Equal-width bins over the pooled range; right-open except the last.

    All scores must be finite. When every score is identical the range is
    degenerate and a single unit-width bin centered on the value is used.
    """
    if bins < 1:
        raise ValueError(f"bins must be >= 1, got {bins}")
    id_s = np.asarray(id_scores, dtype=np.float64).ravel()
    ood_s = np.asarray(ood_scores, dtype=np.float64).ravel()
    if id_s.size == 0 or ood_s.size == 0:
        raise EmptyInput("histogram needs non-empty score sets")
    pooled = np.concatenate([id_s, ood_s])
    if not np.isfinite(pooled).all():
        raise ValueError("histogram requires finite scores; filter surrogates first")
    lo, hi = float(pooled.min()), float(pooled.max())
    if lo == hi:
        edges = np.array([lo - 0.5, lo + 0.5])
        return Histogram(
            bin_edges=edges,
            id_counts=np.array([id_s.size], dtype=np.int64),
            ood_counts=np.array([ood_s.size], dtype=np.int64),
        )
    edges = np.linspace(lo, hi, bins + 1)
    width = (hi - lo) / bins

    def count(scores: np.ndarray) -> np.ndarray:
        idx = np.floor((scores - lo) / width).astype(np.int64)
        idx = np.clip(idx, 0, bins - 1)  # top edge closes the last bin
        return np.bincount(idx, minlength=bins).astype(np.int64)

    return Histogram(bin_edges=edges, id_counts=count(id_s), ood_counts=count(ood_s))


@dataclass(frozen=True)
class DetectionReport:
    """Metrics for one (method, ID split, OOD split) cell."""

    method: str
    id_split: str
    ood_split: str
    auroc: float
    fpr95: float
    threshold_at_tpr95: float
    n_id: int
    n_ood: int
    warnings: dict[str, int] = field(default_factory=dict)

    def to_json(self) -> str:
        doc = {
            "method": self.method,
            "id_split": self.id_split,
            "ood_split": self.ood_split,
            "auroc": self.auroc,
            "fpr95": self.fpr95,
            "threshold_at_tpr95": _finite_or_none(self.threshold_at_tpr95),
            "n_id": self.n_id,
            "n_ood": self.n_ood,
            "warnings": {k: v for k, v in sorted(self.warnings.items()) if v},
        }
        return json.dumps(doc, sort_keys=True, allow_nan=False)


def _finite_or_none(x: float):
    return x if math.isfinite(x) else None


def evaluate_pair(
    method: str,
    id_split: str,
    ood_split: str,
    id_scores: np.ndarray,
    ood_scores: np.ndarray,
    warnings: dict[str, int] | None = None,
) -> DetectionReport:
    res = fpr_at_tpr(id_scores, ood_scores, 0.95)
    return DetectionReport(
        method=method,
        id_split=id_split,
        ood_split=ood_split,
        auroc=auroc(id_scores, ood_scores),
        fpr95=res.fpr,
        threshold_at_tpr95=res.threshold,
        n_id=int(np.size(id_scores)),
        n_ood=int(np.size(ood_scores)),
        warnings=dict(warnings or {}),
    )


def write_reports_jsonl(reports: list[DetectionReport], path) -> None:
    with open(path, "w") as fh:
        for report in reports:
            fh.write(report.to_json() + "\n")


def write_report_md(reports: list[DetectionReport], path) -> None:
    """Markdown grid: one row per method, AUROC/FPR95 columns per OOD split."""
    methods: list[str] = []
    ood_splits: list[str] = []
    for r in reports:
        if r.method not in methods:
            methods.append(r.method)
        if r.ood_split not in ood_splits:
            ood_splits.append(r.ood_split)
    cells = {(r.method, r.ood_split): r for r in reports}
    lines = []
    header = ["Method"]
    for split in ood_splits:
        header += [f"{split} AU%", f"{split} FP%"]
    if len(ood_splits) > 1:
        header += ["Avg AU%", "Avg FP%"]
    lines.append("| " + " | ".join(header) + " |")
    lines.append("|" + "---|" * len(header))
    for method in methods:
        row = [method]
        aus, fps = [], []
        for split in ood_splits:
            r = cells.get((method, split))
            if r is None:
                row += ["-", "-"]
                continue
            aus.append(r.auroc)
            fps.append(r.fpr95)
            row += [f"{100 * r.auroc:.2f}", f"{100 * r.fpr95:.2f}"]
        if len(ood_splits) > 1:
            row += [
                f"{100 * np.mean(aus):.2f}" if aus else "-",
                f"{100 * np.mean(fps):.2f}" if fps else "-",
            ]
        lines.append("| " + " | ".join(row) + " |")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_histogram_csv(hist: Histogram, path) -> None:
    with open(path, "w") as fh:
        fh.write("bin_lo,bin_hi,id_count,ood_count\n")
        for i in range(len(hist.id_counts)):
            fh.write(
                f"{hist.bin_edges[i]!r},{hist.bin_edges[i + 1]!r},"
                f"{hist.id_counts[i]},{hist.ood_counts[i]}\n"
            )
