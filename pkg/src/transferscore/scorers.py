"""The seven transferability scorers behind one registry.

Feature-based scorers (h_score, reg_h_score, nleep, logme, gbc) consume
extracted features plus target labels; label-based scorers (nce, leep)
additionally need the source classification head's outputs. All scores are
"higher is more transferable" and are reported at full double precision;
rank correlation downstream is scale-free, so no normalization is applied.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from . import jsonutil
from .numerics import (
    gmm_fit,
    gmm_posteriors,
    ledoit_wolf,
    pca_fit,
    pseudo_inverse,
    sample_covariance,
    softmax_rows,
)
from .probe_store import ProbeSet, TaskManifest, ValidationError, load_probe_set


class ScorerInputError(ValueError):
    """A scorer's preconditions are not met by the given probe set."""


class ScoringError(ValueError):
    """A scorer failed inside score_all; names checkpoint, scorer, cause."""


@dataclass(frozen=True)
class ScoreOptions:
    """Knobs shared by the scorer registry.

    standardize: per-dimension standardization of features (zero mean, unit
    variance, constant dimensions dropped) before feature-based scoring.
    Raw extractor output is scored by default.
    """

    standardize: bool = False
    nleep_variance_fraction: float = 0.8
    nleep_components: int | None = None
    gbc_pca_dims: int = 64
    seed: int = 0


def _require_outputs(ps: ProbeSet, scorer: str) -> np.ndarray:
    if ps.source_outputs is None:
        raise ScorerInputError(f"{scorer} needs source-model outputs; probe set has none")
    return ps.source_outputs


def _require_multiclass(ps: ProbeSet, scorer: str) -> None:
    if ps.class_count < 2:
        raise ScorerInputError(f"{scorer} needs at least 2 target classes, got {ps.class_count}")


def _output_probabilities(ps: ProbeSet, scorer: str) -> np.ndarray:
    outputs = _require_outputs(ps, scorer)
    if ps.outputs_kind == "logits":
        return softmax_rows(outputs)
    return outputs


def standardize_features(F) -> np.ndarray:
    """Zero-mean unit-variance columns; exactly constant columns are dropped."""
    F = np.asarray(F, dtype=np.float64)
    mean = F.mean(axis=0)
    std = F.std(axis=0)
    keep = std > 0.0
    if not keep.any():
        raise ScorerInputError("all feature dimensions are constant")
    return (F[:, keep] - mean[keep]) / std[keep]


def _class_mean_rows(F: np.ndarray, labels: np.ndarray, class_count: int) -> np.ndarray:
    sums = np.zeros((class_count, F.shape[1]))
    np.add.at(sums, labels, F)
    counts = np.bincount(labels, minlength=class_count).astype(np.float64)
    return sums[labels] / counts[labels, None]


def h_score(ps: ProbeSet) -> float:
    """tr( pinv(cov features) . cov class-mean features ).

    Measures how much of the feature variance is between-class variance;
    invariant to invertible linear maps of full-rank features.
    """
    _require_multiclass(ps, "h_score")
    F = ps.features
    cov_f = sample_covariance(F)
    G = _class_mean_rows(F, ps.labels, ps.class_count)
    cov_g = sample_covariance(G)
    return float(np.trace(pseudo_inverse(cov_f) @ cov_g))


def reg_h_score(ps: ProbeSet, shrinkage: float | None = None) -> float:
    """H-score with a shrinkage covariance on standardized features.

    Features are standardized per dimension, the feature covariance is
    replaced by its shrinkage estimate (closed-form coefficient unless
    `shrinkage` overrides it), and the same trace formula applies. Stays
    finite when n < d.
    """
    _require_multiclass(ps, "reg_h_score")
    Z = standardize_features(ps.features)
    cov_f, _ = ledoit_wolf(Z, shrinkage=shrinkage)
    G = _class_mean_rows(Z, ps.labels, ps.class_count)
    cov_g = sample_covariance(G)
    return float(np.trace(pseudo_inverse(cov_f) @ cov_g))


def _dummy_labels(outputs: np.ndarray) -> np.ndarray:
    # np.argmax resolves ties toward the lowest index, as required.
    return np.argmax(outputs, axis=1)


def nce(ps: ProbeSet) -> float:
    """Negative conditional entropy -H(Y|Z) of target labels given source argmax.

    Z are "dummy labels": the source head's argmax prediction per sample
    (ties resolve to the lowest class index). Always <= 0; equals 0 when Y
    is a deterministic function of Z.
    """
    outputs = _require_outputs(ps, "nce")
    z = _dummy_labels(outputs)
    y = ps.labels
    n = y.shape[0]
    joint = np.zeros((ps.class_count, outputs.shape[1]))
    np.add.at(joint, (y, z), 1.0)
    joint /= n
    marginal_z = joint.sum(axis=0)
    mask = joint > 0.0
    cond = np.where(mask, joint / np.where(marginal_z > 0, marginal_z, 1.0), 1.0)
    return float(np.sum(joint[mask] * np.log(cond[mask])))


def _leep_from(theta: np.ndarray, labels: np.ndarray, class_count: int) -> float:
    n = labels.shape[0]
    joint = np.zeros((class_count, theta.shape[1]))
    np.add.at(joint, labels, theta)
    joint /= n
    marginal_z = joint.sum(axis=0)
    nonzero = marginal_z > 0.0
    cond = np.zeros_like(joint)
    cond[:, nonzero] = joint[:, nonzero] / marginal_z[nonzero]
    inner = np.einsum("iz,iz->i", cond[labels], theta)
    return float(np.mean(np.log(inner)))


def leep(ps: ProbeSet) -> float:
    """Log expected empirical prediction through the source output space.

    With theta_i the i-th source probability row, builds the empirical
    joint P(y, z) = mean_i theta_i[z] [y_i = y] and returns
    mean_i ln sum_z P(y_i | z) theta_i[z]. Logit manifests are softmaxed
    first. Always <= 0. Columns with zero marginal contribute nothing.
    """
    theta = _output_probabilities(ps, "leep")
    return _leep_from(theta, ps.labels, ps.class_count)


def nleep(
    ps: ProbeSet,
    variance_fraction: float = 0.8,
    components: int | None = None,
    seed: int = 0,
) -> float:
    """LEEP with a Gaussian-mixture posterior standing in for the source head.

    Features are PCA-reduced to the given variance fraction, a GMM with
    `components` components (default: the number of target classes) is fit,
    and the posterior responsibility matrix plays theta in the LEEP formula.
    Deterministic given the seed.
    """
    K = ps.class_count if components is None else int(components)
    if K > ps.sample_count:
        raise ScorerInputError(
            f"nleep components ({K}) must not exceed sample count ({ps.sample_count})"
        )
    pca = pca_fit(ps.features, variance_fraction=variance_fraction)
    reduced = pca.transform(ps.features)
    gm = gmm_fit(reduced, K, seed=seed)
    theta = gmm_posteriors(gm, reduced)
    return _leep_from(theta, ps.labels, ps.class_count)


def _logme_evidence(s2, z, y_sq, n: int, d: int) -> float:
    """Maximized Bayesian linear-evidence for one binary target.

    s2: squared singular values of F (length r); z: target rotated into the
    left-singular basis; y_sq: ||y||^2. Runs the alpha/beta fixed point in
    the SVD basis and returns the maximized log evidence.
    """
    r = s2.shape[0]
    resid_out = y_sq - float(z @ z)
    resid_out = max(resid_out, 0.0)
    alpha, beta = 1.0, 1.0
    evidence = -np.inf
    for _ in range(100):
        denom = alpha + beta * s2
        m_sq = float(np.sum((beta * np.sqrt(s2) * z / denom) ** 2))
        gamma = float(np.sum(beta * s2 / denom))
        res = float(np.sum((alpha * z / denom) ** 2)) + resid_out
        alpha = min(max(gamma / max(m_sq, 1e-300), 1e-12), 1e12)
        beta = min(max((n - gamma) / max(res, 1e-300), 1e-12), 1e12)

        denom = alpha + beta * s2
        m_sq = float(np.sum((beta * np.sqrt(s2) * z / denom) ** 2))
        res = float(np.sum((alpha * z / denom) ** 2)) + resid_out
        logdet = float(np.sum(np.log(denom))) + (d - r) * np.log(alpha)
        new_evidence = (
            0.5 * d * np.log(alpha)
            + 0.5 * n * np.log(beta)
            - 0.5 * n * np.log(2.0 * np.pi)
            - 0.5 * beta * res
            - 0.5 * alpha * m_sq
            - 0.5 * logdet
        )
        if np.isfinite(evidence) and abs(new_evidence - evidence) < 1e-6:
            evidence = new_evidence
            break
        evidence = new_evidence
    return float(evidence)


def logme_per_class(ps: ProbeSet) -> np.ndarray:
    """Maximized log evidence of a Bayesian linear model, one value per class.

    Each class becomes a one-vs-rest 0/1 target; the evidence
    ln p(y | F, alpha, beta) is maximized over the two precisions by the
    standard fixed point. One SVD of F is shared across classes and
    iterations.
    """
    _require_multiclass(ps, "logme")
    F = ps.features
    n, d = F.shape
    _, s, Vt = np.linalg.svd(F, full_matrices=False)
    s2 = s * s
    # Rotate each one-vs-rest target into the left-singular basis: U^T y
    # computed as diag(1/s) V^T (F^T y) to avoid materializing U.
    evidences = np.empty(ps.class_count)
    for c in range(ps.class_count):
        y = (ps.labels == c).astype(np.float64)
        fty = F.T @ y
        safe_s = np.where(s > 0, s, 1.0)
        z = np.where(s > 0, (Vt @ fty) / safe_s, 0.0)
        evidences[c] = _logme_evidence(s2, z, float(y @ y), n, d)
    return evidences


def logme(ps: ProbeSet) -> float:
    """Mean over classes of the maximized per-class log evidence over n."""
    return float(np.mean(logme_per_class(ps)) / ps.sample_count)


def _bhattacharyya_distance_diag(mu1, var1, mu2, var2) -> float:
    avg = (var1 + var2) / 2.0
    maha = float(np.sum((mu1 - mu2) ** 2 / avg)) / 8.0
    logterm = 0.5 * float(np.sum(np.log(avg) - 0.5 * (np.log(var1) + np.log(var2))))
    return maha + logterm


def gbc(ps: ProbeSet, pca_dims: int = 64) -> float:
    """Negative sum of pairwise Bhattacharyya coefficients between classes.

    Features are PCA-reduced to min(pca_dims, d, n-1) dimensions, each class
    is fit with a diagonal Gaussian (variance floor 1e-8), and the score is
    -sum over unordered class pairs of exp(-D_B). Lies in [-C(C-1)/2, 0];
    closer to 0 means better-separated classes.
    """
    _require_multiclass(ps, "gbc")
    counts = np.bincount(ps.labels, minlength=ps.class_count)
    thin = np.flatnonzero(counts < 2)
    if thin.size:
        raise ScorerInputError(
            f"gbc needs >= 2 samples per class; classes {thin.tolist()} are too small"
        )
    k = min(int(pca_dims), ps.feature_dim, ps.sample_count - 1)
    pca = pca_fit(ps.features, components=k)
    R = pca.transform(ps.features)
    means = np.empty((ps.class_count, R.shape[1]))
    variances = np.empty_like(means)
    for c in range(ps.class_count):
        rows = R[ps.labels == c]
        means[c] = rows.mean(axis=0)
        variances[c] = np.maximum(rows.var(axis=0), 1e-8)
    score = 0.0
    for a in range(ps.class_count):
        for b in range(a + 1, ps.class_count):
            db = _bhattacharyya_distance_diag(means[a], variances[a], means[b], variances[b])
            score -= float(np.exp(-db))
    return score


@dataclass(frozen=True)
class ScorerSpec:
    """Registry entry: name, Table-style category, and input needs."""

    name: str
    category: str  # "feature-based" | "label-based"
    needs_outputs: bool
    fn: Callable[[ProbeSet, ScoreOptions], float]


def _run_h_score(ps: ProbeSet, opts: ScoreOptions) -> float:
    return h_score(ps)


def _run_reg_h_score(ps: ProbeSet, opts: ScoreOptions) -> float:
    return reg_h_score(ps)


def _run_nce(ps: ProbeSet, opts: ScoreOptions) -> float:
    return nce(ps)


def _run_leep(ps: ProbeSet, opts: ScoreOptions) -> float:
    return leep(ps)


def _run_nleep(ps: ProbeSet, opts: ScoreOptions) -> float:
    return nleep(
        ps,
        variance_fraction=opts.nleep_variance_fraction,
        components=opts.nleep_components,
        seed=opts.seed,
    )


def _run_logme(ps: ProbeSet, opts: ScoreOptions) -> float:
    return logme(ps)


def _run_gbc(ps: ProbeSet, opts: ScoreOptions) -> float:
    return gbc(ps, pca_dims=opts.gbc_pca_dims)


SCORERS: dict[str, ScorerSpec] = {
    spec.name: spec
    for spec in (
        ScorerSpec("h_score", "feature-based", False, _run_h_score),
        ScorerSpec("reg_h_score", "feature-based", False, _run_reg_h_score),
        ScorerSpec("nce", "label-based", True, _run_nce),
        ScorerSpec("leep", "label-based", True, _run_leep),
        ScorerSpec("nleep", "feature-based", False, _run_nleep),
        ScorerSpec("logme", "feature-based", False, _run_logme),
        ScorerSpec("gbc", "feature-based", False, _run_gbc),
    )
}


def resolve_scorers(names) -> tuple[str, ...]:
    """Expand "all" / validate a collection of scorer names, keeping registry order."""
    if isinstance(names, str):
        names = [names]
    requested = list(names)
    if requested == ["all"]:
        return tuple(SCORERS)
    unknown = [name for name in requested if name not in SCORERS]
    if unknown:
        raise ScorerInputError(
            f"unknown scorers {unknown}; available: {sorted(SCORERS)} or 'all'"
        )
    seen: dict[str, None] = dict.fromkeys(requested)
    return tuple(name for name in SCORERS if name in seen)


@dataclass(frozen=True)
class ScoreTable:
    """Scores indexed by (checkpoint id, scorer name) for one task and split."""

    task: str
    split: str
    scores: dict[str, dict[str, float]]

    def __post_init__(self):
        if not self.scores:
            raise ValidationError("score table must cover at least one checkpoint")
        scorer_sets = {frozenset(per) for per in self.scores.values()}
        if len(scorer_sets) != 1:
            raise ValidationError("every checkpoint must have the same scorer set")
        for ckpt, per in self.scores.items():
            for scorer, value in per.items():
                if not np.isfinite(value):
                    raise ValidationError(
                        f"score for checkpoint {ckpt!r}, scorer {scorer!r} is not finite"
                    )

    @property
    def scorer_names(self) -> tuple[str, ...]:
        first = next(iter(self.scores.values()))
        return tuple(name for name in SCORERS if name in first) + tuple(
            sorted(set(first) - set(SCORERS))
        )

    @property
    def checkpoint_ids(self) -> tuple[str, ...]:
        return tuple(self.scores)


def score_all(
    manifest: TaskManifest,
    split: str,
    scorers,
    options: ScoreOptions = ScoreOptions(),
) -> ScoreTable:
    """Score every checkpoint in the manifest with every requested scorer.

    Checkpoints are evaluated independently and results do not depend on
    evaluation order. Any scorer failure on any checkpoint aborts the whole
    table with an error naming (checkpoint, scorer, cause).
    """
    names = resolve_scorers(scorers)
    label_based = [n for n in names if SCORERS[n].needs_outputs]
    table: dict[str, dict[str, float]] = {}
    for record in manifest.checkpoints:
        ps = load_probe_set(record, split, manifest.outputs_kind)
        if label_based and ps.source_outputs is None:
            raise ScoringError(
                f"checkpoint {record.id!r}: scorers {label_based} need source outputs, "
                f"but split {split!r} has no {manifest.outputs_kind} file"
            )
        if options.standardize:
            ps = replace_features(ps, standardize_features(ps.features))
        row: dict[str, float] = {}
        for name in names:
            try:
                row[name] = SCORERS[name].fn(ps, options)
            except (ValueError, np.linalg.LinAlgError) as exc:
                raise ScoringError(
                    f"checkpoint {record.id!r}, scorer {name!r}: {exc}"
                ) from exc
        table[record.id] = row
    return ScoreTable(task=manifest.task, split=split, scores=table)


def replace_features(ps: ProbeSet, features) -> ProbeSet:
    """Probe set with the same labels/outputs but a different feature matrix."""
    return ProbeSet(
        features=features,
        labels=ps.labels,
        class_count=ps.class_count,
        source_outputs=ps.source_outputs,
        outputs_kind=ps.outputs_kind,
    )


def save_score_table(table: ScoreTable, path) -> None:
    """Write the table as JSON with 17-significant-digit scores, atomically."""
    from .probe_store import _atomic_write_bytes

    doc = {
        "task": table.task,
        "split": table.split,
        "scores": {
            ckpt: {scorer: float(value) for scorer, value in per.items()}
            for ckpt, per in table.scores.items()
        },
    }
    _atomic_write_bytes(path, (jsonutil.dumps(doc) + "\n").encode())


def load_score_table(path) -> ScoreTable:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: not valid JSON: {exc}") from None
    if not isinstance(raw, dict) or not {"task", "split", "scores"} <= set(raw):
        raise ValidationError(f"{path}: score table needs task, split, and scores fields")
    scores = {
        str(ckpt): {str(s): float(v) for s, v in per.items()}
        for ckpt, per in raw["scores"].items()
    }
    return ScoreTable(task=raw["task"], split=raw["split"], scores=scores)
