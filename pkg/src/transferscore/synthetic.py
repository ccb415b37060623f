"""Synthetic probe-set fixtures.

Builds a fully on-disk toy task: a handful of fake "checkpoints" whose
features are Gaussian class blobs with progressively worse class
separation, plus recorded performances that follow the same ordering with
small noise. Good checkpoints therefore really are better, which gives the
score -> correlate pipeline a ground truth to recover. Used by the test
suite and the demo script; no trained models involved.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .probe_store import (
    CheckpointRecord,
    TaskManifest,
    outputs_file_name,
    save_manifest,
    write_array,
)

SPLITS = ("train", "test_id", "test_ood")


def _blob_features(rng, separation: float, classes: int, dim: int, per_class: int,
                   shift: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    labels = np.repeat(np.arange(classes), per_class)
    centers = np.zeros((classes, dim))
    centers[np.arange(classes), np.arange(classes)] = separation
    feats = rng.standard_normal((labels.shape[0], dim)) + centers[labels] + shift
    return feats, labels


def _blob_logits(rng, labels: np.ndarray, separation: float, source_classes: int) -> np.ndarray:
    # Source head "sees" target class c as source class c; signal strength
    # tracks separation so weak checkpoints also have noisy heads.
    n = labels.shape[0]
    logits = rng.standard_normal((n, source_classes))
    logits[np.arange(n), labels % source_classes] += 1.5 * separation
    return logits


def build_demo_task(
    root,
    checkpoints: int = 8,
    classes: int = 3,
    dim: int = 8,
    per_class: int = 80,
    source_classes: int = 5,
    seed: int = 0,
    task: str = "synthetic-blobs",
) -> Path:
    """Write a complete fake task under `root`; returns the manifest path.

    Checkpoint j gets class blobs at separation linspace(3.0, 0.4)[j] and a
    recorded balanced accuracy that decreases with j (plus noise of scale
    0.005), for train / test_id / test_ood splits. test_ood adds a global
    covariate shift. Deterministic given the seed.
    """
    if checkpoints < 2:
        raise ValueError(f"need at least 2 checkpoints, got {checkpoints}")
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    separations = np.linspace(3.0, 0.4, checkpoints)
    base_perf = np.linspace(0.92, 0.55, checkpoints)

    records = []
    for j in range(checkpoints):
        ckpt_id = f"ckpt{j:02d}"
        sep = float(separations[j])
        probe_paths = {}
        for split in SPLITS:
            split_dir = root / ckpt_id / split
            split_dir.mkdir(parents=True, exist_ok=True)
            n_per = per_class if split == "train" else per_class // 2
            shift = 0.5 if split == "test_ood" else 0.0
            feats, labels = _blob_features(rng, sep, classes, dim, n_per, shift)
            logits = _blob_logits(rng, labels, sep, source_classes)
            write_array(feats, split_dir / "features.npy")
            write_array(labels.reshape(-1, 1).astype(np.int64), split_dir / "labels.npy")
            write_array(logits, split_dir / outputs_file_name("logits"))
            probe_paths[split] = str(split_dir)
        perf_id = float(np.clip(base_perf[j] + rng.normal(0.0, 0.005), 0.0, 1.0))
        perf_ood = float(np.clip(base_perf[j] - 0.08 + rng.normal(0.0, 0.005), 0.0, 1.0))
        records.append(
            CheckpointRecord(
                id=ckpt_id,
                architecture=f"blobnet{j}",
                probe_paths=probe_paths,
                performance={"test_id": perf_id, "test_ood": perf_ood},
            )
        )

    manifest = TaskManifest(task=task, outputs_kind="logits", checkpoints=tuple(records))
    manifest_path = root / "manifest.json"
    save_manifest(manifest, manifest_path, relative_to=root)
    return manifest_path
