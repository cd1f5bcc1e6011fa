"""Command-line front end.

    videofeat extract --weights vgg16.pt --layers pool5,fc6,fc7,softmax \
        --stride 1 --out DIR inputs...
"""

from __future__ import annotations

import argparse
import logging
import sys

from .extract import ExtractJob, extract
from .net import load_network


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="videofeat",
        description="Export VGG-16 activations from videos or frame directories",
    )
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("extract", help="write per-video DESC1 files and a manifest")
    p.add_argument("inputs", nargs="+", help="video files or frame directories")
    p.add_argument("--weights", required=True, help="local VGG-16 state-dict file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument(
        "--layers",
        default="pool5,fc6,fc7,softmax",
        help="comma-separated subset of pool5,fc6,fc7,softmax",
    )
    p.add_argument("--stride", type=int, default=1, help="sample every Nth frame")
    p.add_argument("--batch-size", type=int, default=16, dest="batch_size")
    return ap


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        job = ExtractJob(
            inputs=tuple(args.inputs),
            out=args.out,
            layers=tuple(s for s in args.layers.split(",") if s),
            stride=args.stride,
            batch_size=args.batch_size,
        )
        net = load_network(args.weights)
        manifest = extract(job, net)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(manifest)
    return 0


if __name__ == "__main__":
    sys.exit(main())
