"""Command-line surface: validate, score, rank, correlate, plot-data, plan-hpo.

Exit codes: 0 success, 1 validation or data error (with a diagnostic naming
the file, checkpoint, or scorer involved), 2 usage error. All outputs are
written atomically, and every source of randomness hangs off --seed, so a
given command line is fully reproducible.
"""

from __future__ import annotations

import argparse
import sys

from . import __version__
from .evaluation import (
    CORRELATION_METHODS,
    DegenerateRankingError,
    correlate,
    emit_plot_data,
    rank_checkpoints,
    report_to_text,
    save_report,
)
from .hpo_plan import DEFAULT_COUNT, DEFAULT_LR_RANGE, DEFAULT_SKIP, DEFAULT_WD_RANGE, plan, write_plan
from .probe_store import (
    ARRAY_FORMAT,
    ArrayFormatError,
    ValidationError,
    load_manifest,
    load_probe_set,
)
from .scorers import (
    SCORERS,
    ScoreOptions,
    ScorerInputError,
    ScoringError,
    load_score_table,
    resolve_scorers,
    save_score_table,
    score_all,
)

_DATA_ERRORS = (
    ValidationError,
    ArrayFormatError,
    ScorerInputError,
    ScoringError,
    DegenerateRankingError,
    OSError,
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="transferscore",
        description="Score and rank pretrained checkpoints for a target task "
        "from pre-extracted probe sets, without fine-tuning.",
    )
    parser.add_argument(
        "--version",
        action="version",
        version=f"transferscore {__version__} (array format {ARRAY_FORMAT})",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a manifest and all its probe files")
    p.add_argument("--manifest", required=True)

    p = sub.add_parser("score", help="compute a score table for one split")
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", required=True)
    p.add_argument(
        "--scorers",
        default="all",
        help=f"comma-separated subset of {','.join(SCORERS)}, or 'all'",
    )
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--standardize", action="store_true",
                   help="standardize feature dimensions before feature-based scorers")
    p.add_argument("--nleep-variance-fraction", type=float, default=0.8)
    p.add_argument("--nleep-components", type=int, default=None,
                   help="GMM components for nleep (default: number of target classes)")
    p.add_argument("--gbc-pca-dims", type=int, default=64)

    p = sub.add_parser("rank", help="print checkpoints by descending score")
    p.add_argument("--scores", required=True)
    p.add_argument("--scorer", required=True)

    p = sub.add_parser("correlate", help="rank-correlate scores against performance")
    p.add_argument("--scores", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", required=True,
                   help="performance split to pair the scores with")
    p.add_argument("--method", choices=("wtau", "tau"), default="wtau")
    p.add_argument("--out", default=None, help="also write the report as JSON")

    p = sub.add_parser("plot-data", help="emit scatter-plot CSV of scores vs performance")
    p.add_argument("--scores", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("plan-hpo", help="write a quasi-random hyperparameter plan")
    p.add_argument("--n", type=int, default=DEFAULT_COUNT)
    p.add_argument("--lr-min", type=float, default=DEFAULT_LR_RANGE[0])
    p.add_argument("--lr-max", type=float, default=DEFAULT_LR_RANGE[1])
    p.add_argument("--wd-min", type=float, default=DEFAULT_WD_RANGE[0])
    p.add_argument("--wd-max", type=float, default=DEFAULT_WD_RANGE[1])
    p.add_argument("--skip", type=int, default=DEFAULT_SKIP)
    p.add_argument("--out", required=True)

    return parser


def _cmd_validate(args) -> int:
    manifest = load_manifest(args.manifest)
    for record in manifest.checkpoints:
        for split in sorted(record.probe_paths):
            ps = load_probe_set(record, split, manifest.outputs_kind)
            outputs = "none" if ps.source_outputs is None else manifest.outputs_kind
            print(
                f"ok: {record.id} {split}: n={ps.sample_count} d={ps.feature_dim} "
                f"classes={ps.class_count} outputs={outputs}"
            )
    print(f"manifest {args.manifest}: {len(manifest.checkpoints)} checkpoints valid")
    return 0


def _cmd_score(args) -> int:
    manifest = load_manifest(args.manifest)
    names = resolve_scorers([s.strip() for s in args.scorers.split(",") if s.strip()])
    options = ScoreOptions(
        standardize=args.standardize,
        nleep_variance_fraction=args.nleep_variance_fraction,
        nleep_components=args.nleep_components,
        gbc_pca_dims=args.gbc_pca_dims,
        seed=args.seed,
    )
    table = score_all(manifest, args.split, names, options)
    save_score_table(table, args.out)
    print(
        f"wrote {args.out}: {len(table.checkpoint_ids)} checkpoints x "
        f"{len(table.scorer_names)} scorers on split {args.split!r}"
    )
    return 0


def _cmd_rank(args) -> int:
    table = load_score_table(args.scores)
    for ckpt in rank_checkpoints(table, args.scorer):
        print(ckpt)
    return 0


def _cmd_correlate(args) -> int:
    table = load_score_table(args.scores)
    manifest = load_manifest(args.manifest)
    method = "weighted-tau" if args.method == "wtau" else "tau-b"
    report = correlate(table, manifest, args.split, method=method)
    print(report_to_text(report), end="")
    if args.out:
        save_report(report, args.out)
    return 0


def _cmd_plot_data(args) -> int:
    table = load_score_table(args.scores)
    manifest = load_manifest(args.manifest)
    emit_plot_data(table, manifest, args.split, args.out)
    print(f"wrote {args.out}")
    return 0


def _cmd_plan_hpo(args) -> int:
    configs = plan(
        count=args.n,
        lr_range=(args.lr_min, args.lr_max),
        wd_range=(args.wd_min, args.wd_max),
        skip=args.skip,
    )
    written = write_plan(configs, args.out)
    print(f"wrote {len(configs)} configs to {args.out} ({len(written)} files)")
    return 0


_COMMANDS = {
    "validate": _cmd_validate,
    "score": _cmd_score,
    "rank": _cmd_rank,
    "correlate": _cmd_correlate,
    "plot-data": _cmd_plot_data,
    "plan-hpo": _cmd_plan_hpo,
}


def run(argv=None) -> int:
    """Parse and execute; returns the exit code instead of raising SystemExit."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 0 for --help/--version, 2 for usage errors
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except _DATA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> int:
    return run(sys.argv[1:])
