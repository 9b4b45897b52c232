"""CLI: run a pretrained vision model over a folder and export features."""

from __future__ import annotations

import argparse
import sys

from .export import EmptyDirectory, ExportJob, KNOWN_MODELS, export
from .hooks import UnsupportedArchitecture


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oodexport",
        description="Export penultimate features, head weights, and predictions",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("export", help="export one image folder as one split")
    p.add_argument("--model", required=True, help=f"e.g. {', '.join(KNOWN_MODELS)}")
    p.add_argument("--dir", required=True, help="image directory")
    p.add_argument("--split", required=True, help="split name in the manifest")
    p.add_argument("--out", required=True, help="output manifest path")
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--device", default="cpu")
    p.add_argument(
        "--no-pretrained",
        action="store_true",
        help="use random weights (offline environments; export mechanics only)",
    )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    job = ExportJob(
        model=args.model,
        image_dir=args.dir,
        split=args.split,
        out_manifest=args.out,
        batch_size=args.batch_size,
        device=args.device,
        pretrained=not args.no_pretrained,
    )
    try:
        manifest = export(job)
    except (UnsupportedArchitecture, EmptyDirectory, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {manifest}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
