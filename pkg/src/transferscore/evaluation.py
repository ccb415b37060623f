"""Protocol evaluation: balanced accuracy, rank correlations, reports.

Ties scores to measured fine-tuned performance. The correlation of record
is Kendall's tau: the tie-corrected tau-b, and a weighted variant that
emphasizes agreement among the top-performing checkpoints. Degenerate
(constant) inputs are reported as a distinct outcome rather than a number,
because 0 would falsely read as "no predictive ability was measured".
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np

from . import jsonutil
from .probe_store import TaskManifest, ValidationError, _atomic_write_bytes
from .scorers import ScoreTable

CORRELATION_METHODS = ("weighted-tau", "tau-b")


class DegenerateRankingError(ValueError):
    """A correlation input vector is constant; tau is undefined for it."""


def balanced_accuracy(true_labels, predicted_labels, class_count: int) -> float:
    """Mean of per-class recalls; every class must appear in true_labels."""
    y = np.asarray(true_labels)
    p = np.asarray(predicted_labels)
    if y.ndim != 1 or p.ndim != 1:
        raise ValidationError("balanced_accuracy needs 1-D label vectors")
    if y.shape[0] != p.shape[0]:
        raise ValidationError(
            f"label vectors differ in length: {y.shape[0]} vs {p.shape[0]}"
        )
    if class_count < 1:
        raise ValidationError(f"class_count must be positive, got {class_count}")
    for name, v in (("true", y), ("predicted", p)):
        if v.size == 0 or v.min() < 0 or v.max() >= class_count:
            raise ValidationError(f"{name} labels must be nonempty and lie in [0, {class_count})")
    counts = np.bincount(y, minlength=class_count)
    missing = np.flatnonzero(counts == 0)
    if missing.size:
        raise ValidationError(f"classes {missing.tolist()} absent from true labels")
    hits = np.zeros(class_count)
    np.add.at(hits, y[y == p], 1.0)
    return float(np.mean(hits / counts))


def _pairwise_signs(v: np.ndarray) -> np.ndarray:
    return np.sign(v[:, None] - v[None, :])


def _check_tau_inputs(scores, performances) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(scores, dtype=np.float64)
    y = np.asarray(performances, dtype=np.float64)
    if x.ndim != 1 or y.ndim != 1 or x.shape[0] != y.shape[0]:
        raise ValidationError(
            f"correlation needs two equal-length vectors, got shapes {x.shape} and {y.shape}"
        )
    if x.shape[0] < 2:
        raise ValidationError(f"correlation needs at least 2 points, got {x.shape[0]}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValidationError("correlation inputs must be finite")
    return x, y


def kendall_tau(scores, performances) -> float:
    """Tie-corrected Kendall tau-b in [-1, 1].

    (concordant - discordant) / sqrt(pairs untied in x * pairs untied in y).
    A constant input vector leaves tau undefined and raises
    DegenerateRankingError.
    """
    x, y = _check_tau_inputs(scores, performances)
    iu = np.triu_indices(x.shape[0], k=1)
    sx = _pairwise_signs(x)[iu]
    sy = _pairwise_signs(y)[iu]
    denom_x = float(np.sum(sx * sx))
    denom_y = float(np.sum(sy * sy))
    if denom_x == 0.0 or denom_y == 0.0:
        which = "scores" if denom_x == 0.0 else "performances"
        raise DegenerateRankingError(f"{which} vector is constant; tau undefined")
    return float(np.sum(sx * sy) / np.sqrt(denom_x * denom_y))


def _average_ranks_descending(v: np.ndarray) -> np.ndarray:
    """0-based rank of each element when sorted by decreasing value, ties averaged."""
    order = np.argsort(-v, kind="stable")
    ranks = np.empty(v.shape[0], dtype=np.float64)
    pos = 0
    while pos < order.shape[0]:
        end = pos
        while end + 1 < order.shape[0] and v[order[end + 1]] == v[order[pos]]:
            end += 1
        ranks[order[pos : end + 1]] = (pos + end) / 2.0
        pos = end + 1
    return ranks


def weighted_kendall_tau(scores, performances) -> float:
    """Kendall tau with additive hyperbolic weights on performance ranks.

    Each element gets weight 1/(r+1) where r is its 0-based rank by
    decreasing performance (ties averaged); a pair's weight is the sum of
    its elements' weights, so disagreements among the top performers cost
    more. Normalization mirrors tau-b's tie correction, keeping the value
    in [-1, 1] with 1 for identical orderings and -1 for reversed ones.
    """
    x, y = _check_tau_inputs(scores, performances)
    ranks = _average_ranks_descending(y)
    w = 1.0 / (ranks + 1.0)
    pair_w = w[:, None] + w[None, :]
    iu = np.triu_indices(x.shape[0], k=1)
    pw = pair_w[iu]
    sx = _pairwise_signs(x)[iu]
    sy = _pairwise_signs(y)[iu]
    denom_x = float(np.sum(pw * sx * sx))
    denom_y = float(np.sum(pw * sy * sy))
    if denom_x == 0.0 or denom_y == 0.0:
        which = "scores" if denom_x == 0.0 else "performances"
        raise DegenerateRankingError(f"{which} vector is constant; tau undefined")
    return float(np.sum(pw * sx * sy) / np.sqrt(denom_x * denom_y))


def rank_checkpoints(table: ScoreTable, scorer: str) -> list[str]:
    """Checkpoint ids by descending score; ties break lexicographically by id."""
    if scorer not in table.scorer_names:
        raise ValidationError(
            f"scorer {scorer!r} not in table; available: {list(table.scorer_names)}"
        )
    return sorted(table.scores, key=lambda ckpt: (-table.scores[ckpt][scorer], ckpt))


@dataclass(frozen=True)
class CorrelationRow:
    """One scorer's correlation against measured performance.

    tau is None when the pairing was degenerate (a constant vector);
    reports render that as "n/a".
    """

    scorer: str
    tau: float | None
    pairs: int


@dataclass(frozen=True)
class CorrelationReport:
    """Rank-correlation summary for one task: scores vs one performance split."""

    task: str
    score_split: str
    performance_split: str
    method: str
    rows: tuple[CorrelationRow, ...]

    def __post_init__(self):
        if self.method not in CORRELATION_METHODS:
            raise ValidationError(
                f"method must be one of {CORRELATION_METHODS}, got {self.method!r}"
            )
        for row in self.rows:
            if row.tau is not None and not -1.0 - 1e-12 <= row.tau <= 1.0 + 1e-12:
                raise ValidationError(
                    f"tau for scorer {row.scorer!r} outside [-1, 1]: {row.tau!r}"
                )


def correlate(
    table: ScoreTable,
    manifest: TaskManifest,
    split: str,
    method: str = "weighted-tau",
) -> CorrelationReport:
    """Correlate every scorer's column against performance on a split.

    Pairs each checkpoint's score with manifest performance[split]; only
    checkpoints carrying both enter, and at least 2 complete pairs are
    required. A scorer whose score vector (or the shared performance
    vector) is constant gets an "n/a" row instead of a number.
    """
    pairs: list[tuple[str, float]] = []
    for ckpt in table.checkpoint_ids:
        record = manifest.checkpoint(ckpt)
        perf = (record.performance or {}).get(split)
        if perf is not None:
            pairs.append((ckpt, float(perf)))
    if len(pairs) < 2:
        raise ValidationError(
            f"correlate needs >= 2 checkpoints with performance for split {split!r}, "
            f"found {len(pairs)}"
        )
    perf_vec = np.array([p for _, p in pairs])
    fn = weighted_kendall_tau if method == "weighted-tau" else kendall_tau
    rows = []
    for scorer in table.scorer_names:
        score_vec = np.array([table.scores[ckpt][scorer] for ckpt, _ in pairs])
        try:
            tau = fn(score_vec, perf_vec)
        except DegenerateRankingError:
            tau = None
        rows.append(CorrelationRow(scorer=scorer, tau=tau, pairs=len(pairs)))
    return CorrelationReport(
        task=table.task,
        score_split=table.split,
        performance_split=split,
        method=method,
        rows=tuple(rows),
    )


def report_to_json(report: CorrelationReport) -> str:
    doc = {
        "task": report.task,
        "score_split": report.score_split,
        "performance_split": report.performance_split,
        "method": report.method,
        "rows": [
            {"scorer": row.scorer, "tau": row.tau, "pairs": row.pairs}
            for row in report.rows
        ],
    }
    return jsonutil.dumps(doc) + "\n"


def report_from_json(text: str) -> CorrelationReport:
    raw = json.loads(text)
    rows = tuple(
        CorrelationRow(
            scorer=r["scorer"],
            tau=None if r["tau"] is None else float(r["tau"]),
            pairs=int(r["pairs"]),
        )
        for r in raw["rows"]
    )
    return CorrelationReport(
        task=raw["task"],
        score_split=raw["score_split"],
        performance_split=raw["performance_split"],
        method=raw["method"],
        rows=rows,
    )


def report_to_text(report: CorrelationReport) -> str:
    """Aligned text table: one row per scorer, tau and pair count."""
    header = (
        f"task: {report.task}  scores: {report.score_split}  "
        f"performance: {report.performance_split}  method: {report.method}"
    )
    name_width = max(len("scorer"), *(len(r.scorer) for r in report.rows))
    lines = [header, f"{'scorer':<{name_width}}  {'tau':>10}  pairs"]
    for row in report.rows:
        tau_text = "n/a" if row.tau is None else f"{row.tau:+.4f}"
        lines.append(f"{row.scorer:<{name_width}}  {tau_text:>10}  {row.pairs:>5}")
    return "\n".join(lines) + "\n"


def save_report(report: CorrelationReport, path) -> None:
    _atomic_write_bytes(path, report_to_json(report).encode())


def emit_plot_data(table: ScoreTable, manifest: TaskManifest, split: str, path) -> None:
    """CSV of (checkpoint, scorer) points for external scatter plotting.

    Columns: checkpoint_id, architecture, scorer, score, performance, with
    floats at 17 significant digits. Every checkpoint in the table must
    have performance recorded for the split.
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["checkpoint_id", "architecture", "scorer", "score", "performance"])
    for ckpt in table.checkpoint_ids:
        record = manifest.checkpoint(ckpt)
        perf = (record.performance or {}).get(split)
        if perf is None:
            raise ValidationError(
                f"checkpoint {ckpt!r} has no performance for split {split!r}"
            )
        for scorer in table.scorer_names:
            writer.writerow(
                [
                    ckpt,
                    record.architecture,
                    scorer,
                    jsonutil.format_float(table.scores[ckpt][scorer]),
                    jsonutil.format_float(float(perf)),
                ]
            )
    _atomic_write_bytes(path, buf.getvalue().encode())
