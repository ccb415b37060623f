"""Transferability scoring toolkit.

Ranks pretrained checkpoints for a target task from pre-extracted probe
sets (features, optional source-head outputs, labels) without any
fine-tuning, and evaluates how well those rankings track measured
performance.
"""

__version__ = "0.1.0"

from .evaluation import (
    CorrelationReport,
    CorrelationRow,
    DegenerateRankingError,
    balanced_accuracy,
    correlate,
    emit_plot_data,
    kendall_tau,
    rank_checkpoints,
    weighted_kendall_tau,
)
from .hpo_plan import HpoConfig, halton, plan, write_plan
from .numerics import (
    GaussianMixture,
    PcaModel,
    gmm_fit,
    gmm_posteriors,
    ledoit_wolf,
    pca_fit,
    pseudo_inverse,
    sample_covariance,
    softmax_rows,
)
from .probe_store import (
    ArrayFormatError,
    CheckpointRecord,
    ProbeSet,
    TaskManifest,
    ValidationError,
    load_manifest,
    load_probe_set,
    read_array,
    remap_labels,
    save_manifest,
    write_array,
)
from .scorers import (
    SCORERS,
    ScoreOptions,
    ScoreTable,
    ScorerInputError,
    ScoringError,
    gbc,
    h_score,
    leep,
    load_score_table,
    logme,
    logme_per_class,
    nce,
    nleep,
    reg_h_score,
    save_score_table,
    score_all,
)

__all__ = [name for name in dir() if not name.startswith("_")]
