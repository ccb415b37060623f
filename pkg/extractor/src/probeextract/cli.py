"""Command line front end for probe extraction."""

import argparse
import sys
from pathlib import Path

from .extract import ExtractionSpec, extract
from .registry import MODEL_ZOO


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="probeextract",
        description="Dump features/logits/labels from pretrained checkpoints "
                    "over an image folder, ready for transferability scoring.",
    )
    ap.add_argument("--data-root", type=Path, help="folder with <split>/<class>/<image>")
    ap.add_argument("--out", type=Path, help="output directory for arrays + manifest")
    ap.add_argument("--models", default="all",
                    help="comma-separated zoo names, or 'all' (default)")
    ap.add_argument("--splits", default="train",
                    help="comma-separated split subdirectories (default: train)")
    ap.add_argument("--batch-size", type=int, default=32)
    ap.add_argument("--device", default="cpu")
    ap.add_argument("--no-pretrained", action="store_true",
                    help="use random weights instead of downloading pretrained ones")
    ap.add_argument("--image-size", type=int, default=224)
    ap.add_argument("--task", default=None, help="task name for the manifest")
    ap.add_argument("--list-models", action="store_true", help="print the zoo and exit")
    return ap


def run(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.list_models:
        for name, entry in sorted(MODEL_ZOO.items()):
            print(f"{name}  (family: {entry.family}, head: {entry.classifier_attr})")
        return 0
    if args.data_root is None or args.out is None:
        _parser().error("--data-root and --out are required")

    models = tuple(sorted(MODEL_ZOO)) if args.models == "all" else \
        tuple(m.strip() for m in args.models.split(",") if m.strip())
    try:
        spec = ExtractionSpec(
            models=models,
            data_root=args.data_root,
            splits=tuple(s.strip() for s in args.splits.split(",") if s.strip()),
            out_dir=args.out,
            batch_size=args.batch_size,
            device=args.device,
            pretrained=not args.no_pretrained,
            image_size=args.image_size,
            task=args.task,
        )
        result = extract(spec)
    except (KeyError, ValueError, FileNotFoundError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {result.manifest_path}: {len(result.extracted_models)} models")
    for line in result.failed_models:
        print(f"  failed: {line}")
    if result.skipped_images:
        print(f"  skipped {len(result.skipped_images)} unreadable images")
    return 0


def main():
    raise SystemExit(run())


if __name__ == "__main__":
    main()
