"""Standalone command: frames + scenes.json -> annotation JSON."""

from __future__ import annotations

import argparse
import logging
import sys

from .export import ExporterConfig, ExporterError, ModelLoadError, export_annotations


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="annotation-exporter",
        description="Ground objects on scene keyframes and export annotation JSON.",
    )
    parser.add_argument("--frames", required=True, help="PNG frame directory")
    parser.add_argument("--scenes", required=True, help="scenes.json from scene detection")
    parser.add_argument("--out", required=True, help="annotation JSON to write")
    parser.add_argument("--tagger", default="color-blob")
    parser.add_argument("--segmenter", default="color-region")
    parser.add_argument("--scorer", default="position-template")
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--threshold", type=float, default=0.3,
                        help="detection confidence floor in (0, 1)")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = ExporterConfig(
            tagger=args.tagger,
            segmenter=args.segmenter,
            scorer=args.scorer,
            device=args.device,
            confidence_threshold=args.threshold,
        )
        out = export_annotations(args.frames, args.scenes, config, args.out)
    except ModelLoadError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ExporterError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"annotations -> {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
