"""Command-line front end.

Subcommands:

* ``synth``         write a seeded synthetic dataset container
* ``fit``           fit methods on the train split and persist their state
* ``eval``          score ID/OOD splits and write reports plus histograms
* ``ablate``        run the five-row component-toggle grid
* ``list-methods``  print the method roster with configuration defaults

Exit codes: 0 success, 1 runtime failure, 2 configuration or input failure.
Worker count for evaluation cells is capped by ``OODSCORE_THREADS``; outputs
are assembled in a fixed order, so results never depend on it.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .cadref import AGGREGATIONS, CadrefConfig, DECOUPLE_MODES, ablation_configs
from .errors import ConfigError, OodscoreError
from .interchange import Dataset, load_dataset, save_dataset
from .metrics import (
    DetectionReport,
    evaluate_pair,
    histogram,
    write_histogram_csv,
    write_report_md,
    write_reports_jsonl,
)
from .registry import (
    Hyperparams,
    Method,
    available_methods,
    build_cadref_variant,
    build_method,
)
from .synth import SynthParams, generate

HISTOGRAM_BINS = 50
TRAIN_SPLIT = "train"


def _worker_count() -> int:
    raw = os.environ.get("OODSCORE_THREADS", "").strip()
    if raw:
        try:
            return max(1, int(raw))
        except ValueError as exc:
            raise ConfigError(f"OODSCORE_THREADS={raw!r} is not an integer") from exc
    return min(8, os.cpu_count() or 1)


def _hyper_from_args(args: argparse.Namespace) -> Hyperparams:
    return Hyperparams(
        energy_temperature=args.energy_T,
        gen_top_m=args.gen_M,
        gen_gamma=args.gen_gamma,
        react_percentile=args.react_p,
        ash_prune_percent=args.ash_p,
        dice_sparsity=args.dice_p,
        vim_dim=args.vim_D,
        vim_center=args.vim_center,
        decouple_mode=args.decouple_mode,
        aggregation=args.decouple_aggregation,
    )


def _add_hyper_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--energy-T", type=float, default=1.0, help="energy temperature")
    parser.add_argument("--gen-M", type=int, default=None, help="gen truncation (default min(100, c))")
    parser.add_argument("--gen-gamma", type=float, default=0.1, help="gen exponent")
    parser.add_argument("--react-p", type=float, default=90.0, help="react clamp percentile")
    parser.add_argument("--ash-p", type=float, default=90.0, help="ash prune percent")
    parser.add_argument("--dice-p", type=float, default=0.7, help="dice sparsity fraction")
    parser.add_argument("--vim-D", type=int, default=None, help="principal subspace dim")
    parser.add_argument("--vim-center", choices=("none", "mean"), default="none")
    parser.add_argument(
        "--decouple-mode",
        choices=DECOUPLE_MODES + ("relative", "raw"),
        default="relative_feature_sign",
    )
    parser.add_argument("--decouple-aggregation", choices=AGGREGATIONS, default="abs_sum")


def _add_io_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--manifest", required=True, help="dataset manifest path")
    parser.add_argument("--methods", required=True, help="comma-separated method names")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--seed", type=int, default=0, help="recorded in the run config")
    parser.add_argument(
        "--from-csv",
        action="store_true",
        help="allow .csv tensor fixtures referenced by the manifest",
    )


def _normalize_decouple(args: argparse.Namespace) -> None:
    aliases = {"relative": "relative_feature_sign", "raw": "raw_feature_sign"}
    args.decouple_mode = aliases.get(args.decouple_mode, args.decouple_mode)


def _load(args: argparse.Namespace) -> Dataset:
    return load_dataset(args.manifest, allow_csv=args.from_csv)


def _method_names(args: argparse.Namespace) -> list[str]:
    names = [m.strip() for m in args.methods.split(",") if m.strip()]
    if not names:
        raise ConfigError("--methods must name at least one method")
    return names


def _require_split(dataset: Dataset, name: str):
    if name not in dataset.splits:
        raise ConfigError(
            f"split '{name}' not in manifest (has: {', '.join(sorted(dataset.splits))})"
        )
    return dataset.splits[name]


def _fit_methods(
    names: list[str], dataset: Dataset, hyper: Hyperparams
) -> list[Method]:
    methods = [build_method(name, hyper) for name in names]
    if any(m.spec.requires_fit for m in methods):
        if TRAIN_SPLIT not in dataset.splits:
            raise ConfigError(
                "manifest has no 'train' split but these methods require fitting: "
                + ", ".join(m.name for m in methods if m.spec.requires_fit)
            )
        train = dataset.splits[TRAIN_SPLIT].features
        for method in methods:
            if method.spec.requires_fit:
                method.fit(train, dataset.head)
    return methods


def _state_dir(out: Path, method_name: str) -> Path:
    return out / "fitted" / method_name.replace("+", "_plus_")


def _write_run_config(out: Path, args: argparse.Namespace, names: list[str]) -> None:
    doc = {
        "command": args.command,
        "manifest": str(args.manifest),
        "methods": names,
        "seed": args.seed,
    }
    for key in ("id_split", "ood_splits"):
        if hasattr(args, key):
            doc[key] = getattr(args, key)
    (out / "run_config.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


# --- subcommands ---------------------------------------------------------------

def cmd_synth(args: argparse.Namespace) -> int:
    params = SynthParams(
        classes=args.classes,
        dim=args.dim,
        n_per_class=args.n_per_class,
        ood_shift=args.ood_shift,
        seed=args.seed,
        train_per_class=args.train_per_class,
    )
    head, splits = generate(params)
    manifest = save_dataset(args.out, head, splits)
    print(f"wrote {manifest}")
    return 0


def cmd_fit(args: argparse.Namespace) -> int:
    _normalize_decouple(args)
    dataset = _load(args)
    names = _method_names(args)
    hyper = _hyper_from_args(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    methods = _fit_methods(names, dataset, hyper)
    log_lines = []
    for method in methods:
        if method.spec.requires_fit:
            directory = _state_dir(out, method.name)
            method.save_state(directory)
            log_lines.append(f"fitted {method.name} -> {directory}")
        else:
            log_lines.append(f"{method.name} requires no fit")
    _write_run_config(out, args, names)
    (out / "fit_log.txt").write_text("\n".join(log_lines) + "\n")
    for line in log_lines:
        print(line)
    return 0


def _score_split(method: Method, features, head):
    return method.score_batch(features, head)


def _evaluate(
    methods: list[Method],
    dataset: Dataset,
    id_split: str,
    ood_splits: list[str],
) -> tuple[list[DetectionReport], dict]:
    id_features = _require_split(dataset, id_split).features
    ood_features = {name: _require_split(dataset, name).features for name in ood_splits}

    jobs = []
    with ThreadPoolExecutor(max_workers=_worker_count()) as pool:
        for method in methods:
            id_future = pool.submit(_score_split, method, id_features, dataset.head)
            ood_futures = {
                name: pool.submit(_score_split, method, feats, dataset.head)
                for name, feats in ood_features.items()
            }
            jobs.append((method, id_future, ood_futures))

        reports: list[DetectionReport] = []
        histograms: dict[tuple[str, str], object] = {}
        for method, id_future, ood_futures in jobs:
            id_scores = id_future.result()
            for name in ood_splits:  # fixed order: deterministic output
                ood_scores = ood_futures[name].result()
                warnings = {
                    f"id_{k}": v for k, v in sorted(id_scores.warnings.items()) if v
                }
                warnings.update(
                    {f"ood_{k}": v for k, v in sorted(ood_scores.warnings.items()) if v}
                )
                reports.append(
                    evaluate_pair(
                        method.name, id_split, name,
                        id_scores.values, ood_scores.values, warnings,
                    )
                )
                finite_id = id_scores.values[np.isfinite(id_scores.values)]
                finite_ood = ood_scores.values[np.isfinite(ood_scores.values)]
                if finite_id.size and finite_ood.size:
                    histograms[(method.name, name)] = histogram(
                        finite_id, finite_ood, HISTOGRAM_BINS
                    )
    return reports, histograms


def _write_eval_outputs(out: Path, reports, histograms) -> None:
    out.mkdir(parents=True, exist_ok=True)
    write_reports_jsonl(reports, out / "report.jsonl")
    write_report_md(reports, out / "report.md")
    for (method_name, ood_name), hist in sorted(histograms.items()):
        safe = method_name.replace("+", "_plus_")
        write_histogram_csv(hist, out / f"hist_{safe}_{ood_name}.csv")


def cmd_eval(args: argparse.Namespace) -> int:
    _normalize_decouple(args)
    dataset = _load(args)
    names = _method_names(args)
    hyper = _hyper_from_args(args)
    ood_splits = [s.strip() for s in args.ood_splits.split(",") if s.strip()]
    if not ood_splits:
        raise ConfigError("--ood-splits must name at least one split")
    _require_split(dataset, args.id_split)
    for name in ood_splits:
        _require_split(dataset, name)
    methods = _fit_methods(names, dataset, hyper)
    reports, histograms = _evaluate(methods, dataset, args.id_split, ood_splits)
    out = Path(args.out)
    _write_eval_outputs(out, reports, histograms)
    _write_run_config(out, args, names)
    print((out / "report.md").read_text(), end="")
    return 0


def cmd_ablate(args: argparse.Namespace) -> int:
    _normalize_decouple(args)
    dataset = _load(args)
    hyper = _hyper_from_args(args)
    ood_splits = [s.strip() for s in args.ood_splits.split(",") if s.strip()]
    if not ood_splits:
        raise ConfigError("--ood-splits must name at least one split")
    _require_split(dataset, args.id_split)
    for name in ood_splits:
        _require_split(dataset, name)

    base = CadrefConfig(
        decouple_mode=args.decouple_mode,
        aggregation=args.decouple_aggregation,
        logit_score=hyper.logit_config("energy"),
    )
    methods: list[Method] = [build_method("caref", hyper)]
    for name, config in ablation_configs(base).items():
        methods.append(build_cadref_variant(config, name))
    if TRAIN_SPLIT not in dataset.splits:
        raise ConfigError("ablation requires a 'train' split")
    train = dataset.splits[TRAIN_SPLIT].features
    for method in methods:
        method.fit(train, dataset.head)

    reports, histograms = _evaluate(methods, dataset, args.id_split, ood_splits)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_reports_jsonl(reports, out / "ablation.jsonl")
    write_report_md(reports, out / "ablation.md")
    _write_run_config(out, args, [m.name for m in methods])
    print((out / "ablation.md").read_text(), end="")
    return 0


def cmd_list_methods(args: argparse.Namespace) -> int:
    for entry in available_methods():
        fit = "fit" if entry["requires_fit"] else "   "
        plus = "+<logit>" if entry["composable"] else ""
        config = ", ".join(f"{k}={v}" for k, v in entry["config"].items())
        print(f"{entry['name']:12s}{plus:9s} [{fit}] {entry['description']}")
        if config:
            print(f"{'':24s}config: {config}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oodscore",
        description="Post-hoc OOD detection scoring over exported features",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a seeded synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--classes", type=int, default=10)
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--n-per-class", type=int, default=20)
    p.add_argument("--train-per-class", type=int, default=None)
    p.add_argument("--ood-shift", type=float, default=4.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("fit", help="fit methods and persist their state")
    _add_io_flags(p)
    _add_hyper_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("eval", help="evaluate methods on ID vs OOD splits")
    _add_io_flags(p)
    _add_hyper_flags(p)
    p.add_argument("--id-split", default="test")
    p.add_argument("--ood-splits", required=True, help="comma-separated OOD split names")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="five-row component-toggle grid")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--from-csv", action="store_true")
    p.add_argument("--id-split", default="test")
    p.add_argument("--ood-splits", required=True)
    _add_hyper_flags(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("list-methods", help="print the method roster")
    p.set_defaults(func=cmd_list_methods)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OodscoreError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
