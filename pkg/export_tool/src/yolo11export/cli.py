"""yolo11-export command line."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from .arch import SCALES
from .export import export, load_local_weights
from .fixtures import load_frames

log = logging.getLogger("yolo11export")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="yolo11-export",
        description="Build YOLO11-architecture networks; emit ONNX, model card "
        "and keyed replay fixture",
    )
    parser.add_argument("--variant", default="s", choices=sorted(SCALES))
    parser.add_argument("--task", default="detect", choices=["detect", "segment"])
    parser.add_argument("--classes", type=int, default=80)
    parser.add_argument("--input-size", type=int, default=640)
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--frames", help="directory of sample frames for the fixture")
    parser.add_argument(
        "--weights",
        help="local state-dict file matching this builder's weight names "
        "(random initialization otherwise)",
    )
    parser.add_argument("--seed", type=int, default=0)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    frames = load_frames(args.frames) if args.frames else None
    weights = load_local_weights(args.weights) if args.weights else None
    try:
        result = export(
            out_dir=Path(args.out),
            variant=args.variant,
            task=args.task,
            classes=args.classes,
            input_size=args.input_size,
            seed=args.seed,
            sample_frames=frames,
            weights=weights,
        )
    except (ValueError, KeyError, OSError) as exc:
        log.error("%s", exc)
        return 1
    print(result.card.to_json())
    return 0


if __name__ == "__main__":
    sys.exit(main())
