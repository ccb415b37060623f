"""Build a synthetic probe-set fixture on disk.

Writes a complete task directory (manifest + per-checkpoint probe arrays)
with a planted quality ordering, ready for the score/rank/correlate CLI.
"""

import argparse
from pathlib import Path

from transferscore.synthetic import build_demo_task


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, required=True, help="task directory to create")
    ap.add_argument("--checkpoints", type=int, default=8)
    ap.add_argument("--classes", type=int, default=3)
    ap.add_argument("--dim", type=int, default=8)
    ap.add_argument("--per-class", type=int, default=80)
    ap.add_argument("--source-classes", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    manifest = build_demo_task(
        args.out,
        checkpoints=args.checkpoints,
        classes=args.classes,
        dim=args.dim,
        per_class=args.per_class,
        source_classes=args.source_classes,
        seed=args.seed,
    )
    print(f"wrote {manifest}")


if __name__ == "__main__":
    main()
