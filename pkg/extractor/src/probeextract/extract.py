"""Run zoo checkpoints over an image folder and dump probe arrays.

Per (model, split) this writes `<out>/<model>/<split>/{features,logits,
labels}.npy` in the NPY v1.0 subset the scoring toolkit reads (float32
features and logits, int64 labels as a column), plus one `manifest.json`
binding everything together with outputs_kind "logits". The manifest also
records the preprocessing actually used and any skipped images, since
those choices are ours rather than inherited from anywhere.
"""

import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .dataset import (
    NORMALIZE_MEAN,
    NORMALIZE_STD,
    SplitIndex,
    build_preprocess,
    index_splits,
    load_image,
)
from .registry import classifier_module, resolve

FORMAT_VERSION = "npy-subset-1.0"


@dataclass(frozen=True)
class ExtractionSpec:
    models: tuple[str, ...]
    data_root: Path
    splits: tuple[str, ...]
    out_dir: Path
    batch_size: int = 32
    device: str = "cpu"
    pretrained: bool = True
    image_size: int = 224
    task: str | None = None

    def __post_init__(self):
        if not self.models:
            raise ValueError("at least one model required")
        for name in self.models:
            resolve(name)  # KeyError on anything outside the zoo
        if len(set(self.splits)) != len(self.splits):
            raise ValueError(f"split names must be disjoint, got {self.splits}")
        if not self.splits:
            raise ValueError("at least one split required")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.image_size < 1:
            raise ValueError("image_size must be >= 1")


class _FeatureTap:
    """Grabs the classifier's input (the pooled pre-head feature vector)."""

    def __init__(self):
        self.value = None

    def __call__(self, module, args):
        self.value = args[0].detach()


@dataclass
class ExtractionResult:
    manifest_path: Path
    extracted_models: list[str] = field(default_factory=list)
    failed_models: list[str] = field(default_factory=list)
    skipped_images: list[str] = field(default_factory=list)


def _load_model(name: str, pretrained: bool, device: str):
    entry = resolve(name)
    if not pretrained:
        # seeded so repeat runs of random-weight extraction agree bit-for-bit
        torch.manual_seed(0)
    model = entry.build(weights="DEFAULT" if pretrained else None)
    model.eval()
    model.to(device)
    tap = _FeatureTap()
    classifier_module(model, entry).register_forward_pre_hook(tap)
    return entry, model, tap


def _run_split(model, tap, split: SplitIndex, preprocess, device, batch_size, skipped):
    feats, logits, labels = [], [], []
    pending_x, pending_y = [], []

    def flush():
        if not pending_x:
            return
        batch = torch.stack(pending_x).to(device)
        with torch.no_grad():
            out = model(batch)
        feature = tap.value
        if feature is None or feature.shape[0] != batch.shape[0] or feature.ndim != 2:
            raise RuntimeError("classifier hook did not see a (batch, d) feature input")
        feats.append(feature.cpu().to(torch.float32).numpy())
        logits.append(out.detach().cpu().to(torch.float32).numpy())
        labels.extend(pending_y)
        pending_x.clear()
        pending_y.clear()

    for sample in split.samples:
        try:
            tensor = load_image(sample.path, preprocess)
        except Exception as exc:  # undecodable file: drop it, keep going
            skipped.append(f"{sample.path}: {exc}")
            continue
        pending_x.append(tensor)
        pending_y.append(sample.label)
        if len(pending_x) == batch_size:
            flush()
    flush()

    if not labels:
        raise RuntimeError(f"every image in split {split.name!r} failed to decode")
    features = np.ascontiguousarray(np.concatenate(feats), dtype=np.float32)
    logit_mat = np.ascontiguousarray(np.concatenate(logits), dtype=np.float32)
    label_col = np.asarray(labels, dtype=np.int64).reshape(-1, 1)
    return features, logit_mat, label_col


def extract(spec: ExtractionSpec) -> ExtractionResult:
    """Extract every (model, split) pair and write the manifest.

    A model that fails to build or run is dropped with a note; the others
    still produce output. Raises only if nothing could be extracted.
    """
    out_dir = Path(spec.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    class_names, split_indexes = index_splits(Path(spec.data_root), spec.splits)
    preprocess = build_preprocess(spec.image_size)

    result = ExtractionResult(manifest_path=out_dir / "manifest.json")
    checkpoints = []
    for name in spec.models:
        try:
            entry, model, tap = _load_model(name, spec.pretrained, spec.device)
            probe_paths = {}
            for split in split_indexes:
                arrays = _run_split(
                    model, tap, split, preprocess, spec.device,
                    spec.batch_size, result.skipped_images,
                )
                split_dir = out_dir / name / split.name
                split_dir.mkdir(parents=True, exist_ok=True)
                for fname, arr in zip(("features", "logits", "labels"), arrays):
                    np.save(split_dir / f"{fname}.npy", arr)
                probe_paths[split.name] = f"{name}/{split.name}"
        except Exception as exc:
            result.failed_models.append(f"{name}: {exc}")
            print(f"warning: skipping model {name}: {exc}", file=sys.stderr)
            continue
        checkpoints.append(
            {"id": name, "architecture": entry.family, "probe_paths": probe_paths}
        )
        result.extracted_models.append(name)

    if not checkpoints:
        raise RuntimeError(
            "no model produced output; failures: " + "; ".join(result.failed_models)
        )

    manifest = {
        "task": spec.task or Path(spec.data_root).name,
        "outputs_kind": "logits",
        "checkpoints": checkpoints,
        "extraction": {
            "format": FORMAT_VERSION,
            "class_names": class_names,
            "pretrained": spec.pretrained,
            "preprocessing": {
                "resize_shorter_side": max(spec.image_size, int(round(spec.image_size * 256 / 224))),
                "center_crop": spec.image_size,
                "normalize_mean": list(NORMALIZE_MEAN),
                "normalize_std": list(NORMALIZE_STD),
            },
            "skipped_images": result.skipped_images,
            "failed_models": result.failed_models,
        },
    }
    result.manifest_path.write_text(json.dumps(manifest, indent=2) + "\n")
    return result
