"""Probe-set data model, bit-exact array files, and task manifests.

A "probe set" is one checkpoint's view of one dataset split: the feature
matrix extracted by the checkpoint, optionally the source classification
head's outputs, and the ground-truth target labels. Probe sets live on disk
as a strict subset of the NPY v1.0 binary layout (see `read_array`), bound
together by a JSON task manifest.
"""

from __future__ import annotations

import ast
import json
import os
import struct
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

ARRAY_FORMAT = "npy-subset-1.0"
MANIFEST_SCHEMA = 1

_MAGIC = b"\x93NUMPY"
_VERSION = b"\x01\x00"
_HEADER_ALIGN = 64
_SUPPORTED_DESCRS = ("<f8", "<f4", "<i8")

OUTPUT_KINDS = ("logits", "probabilities")
FEATURES_FILE = "features.npy"
LABELS_FILE = "labels.npy"


class ValidationError(ValueError):
    """A probe set, manifest, or score table violates its contract."""


class ArrayFormatError(ValueError):
    """An array file violates the on-disk format; carries the byte offset."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


def _atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_array(path) -> np.ndarray:
    """Read a 2-D array from the strict NPY subset.

    Layout: magic ``\\x93NUMPY``, version ``\\x01\\x00``, 2-byte little-endian
    header length, an ASCII header dict padded with spaces so the full
    preamble is 64-byte aligned and terminated by a newline, then the raw
    little-endian C-order payload. Supported dtypes: <f8, <f4, <i8.
    """
    data = Path(path).read_bytes()
    if len(data) < 6 or data[:6] != _MAGIC:
        raise ArrayFormatError(f"{path}: bad magic bytes", 0)
    if len(data) < 8 or data[6:8] != _VERSION:
        raise ArrayFormatError(f"{path}: unsupported format version", 6)
    if len(data) < 10:
        raise ArrayFormatError(f"{path}: truncated header length field", 8)
    (header_len,) = struct.unpack_from("<H", data, 8)
    header_end = 10 + header_len
    if len(data) < header_end:
        raise ArrayFormatError(f"{path}: truncated header", 10)
    if header_end % _HEADER_ALIGN != 0:
        raise ArrayFormatError(
            f"{path}: header length {header_len} is not 64-byte aligned", 8
        )
    try:
        text = data[10:header_end].decode("ascii")
    except UnicodeDecodeError as exc:
        raise ArrayFormatError(f"{path}: header is not ASCII", 10 + exc.start) from None
    if not text.endswith("\n"):
        raise ArrayFormatError(f"{path}: header missing trailing newline", header_end - 1)
    try:
        header = ast.literal_eval(text)
    except (ValueError, SyntaxError):
        raise ArrayFormatError(f"{path}: header is not a dict literal", 10) from None
    if not isinstance(header, dict) or set(header) != {"descr", "fortran_order", "shape"}:
        raise ArrayFormatError(f"{path}: header must have exactly descr/fortran_order/shape", 10)
    descr = header["descr"]
    if descr not in _SUPPORTED_DESCRS:
        raise ArrayFormatError(f"{path}: unsupported dtype {descr!r}", 10)
    if header["fortran_order"] is not False:
        raise ArrayFormatError(f"{path}: fortran_order must be False", 10)
    shape = header["shape"]
    if (
        not isinstance(shape, tuple)
        or len(shape) != 2
        or not all(isinstance(s, int) and s >= 0 for s in shape)
    ):
        raise ArrayFormatError(f"{path}: shape must be a (rows, cols) tuple, got {shape!r}", 10)
    dtype = np.dtype(descr)
    rows, cols = shape
    expected = rows * cols * dtype.itemsize
    payload = len(data) - header_end
    if payload < expected:
        raise ArrayFormatError(
            f"{path}: truncated payload, expected {expected} bytes, got {payload}",
            len(data),
        )
    if payload > expected:
        raise ArrayFormatError(
            f"{path}: {payload - expected} trailing bytes after payload",
            header_end + expected,
        )
    arr = np.frombuffer(data, dtype=dtype, count=rows * cols, offset=header_end)
    return arr.reshape(rows, cols).copy()


def _descr_for(dtype: np.dtype) -> str:
    if dtype == np.float64:
        return "<f8"
    if dtype == np.float32:
        return "<f4"
    if dtype == np.int64:
        return "<i8"
    raise ValidationError(f"unsupported array dtype {dtype}; use float64, float32, or int64")


def write_array(matrix, path) -> None:
    """Write a finite, nonempty 2-D array in the NPY subset (atomically).

    Identical input yields identical bytes, and the output round-trips
    through `read_array` bit-exactly.
    """
    arr = np.asarray(matrix)
    if arr.ndim != 2:
        raise ValidationError(f"write_array needs a 2-D matrix, got shape {arr.shape}")
    if arr.size == 0:
        raise ValidationError("write_array needs a nonempty matrix")
    descr = _descr_for(arr.dtype)
    if arr.dtype.kind == "f" and not np.all(np.isfinite(arr)):
        raise ValidationError("write_array needs finite values, found NaN or Inf")
    header = f"{{'descr': '{descr}', 'fortran_order': False, 'shape': {arr.shape!r}, }}"
    pad = -(10 + len(header) + 1) % _HEADER_ALIGN
    header_bytes = header.encode("ascii") + b" " * pad + b"\n"
    payload = np.ascontiguousarray(arr).astype(np.dtype(descr), copy=False).tobytes()
    blob = _MAGIC + _VERSION + struct.pack("<H", len(header_bytes)) + header_bytes + payload
    _atomic_write_bytes(path, blob)


@dataclass(frozen=True)
class ProbeSet:
    """One checkpoint's extracted view of one dataset split.

    features: (n, d) float matrix of embeddings.
    labels: (n,) int vector with values in [0, class_count).
    source_outputs: optional (n, Z) matrix of source-head outputs, declared
        via outputs_kind as raw "logits" or row-normalized "probabilities".

    All invariants are enforced at construction; instances are immutable
    (arrays are frozen) and safe to share across threads.
    """

    features: np.ndarray
    labels: np.ndarray
    class_count: int
    source_outputs: np.ndarray | None = None
    outputs_kind: str | None = None

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels)
        if feats.ndim != 2 or feats.shape[0] < 1 or feats.shape[1] < 1:
            raise ValidationError(f"features must be a nonempty 2-D matrix, got shape {feats.shape}")
        if not np.all(np.isfinite(feats)):
            raise ValidationError("features contain NaN or Inf")
        if labels.ndim != 1:
            raise ValidationError(f"labels must be a 1-D vector, got shape {labels.shape}")
        if labels.dtype.kind not in "iu":
            raise ValidationError(f"labels must be integers, got dtype {labels.dtype}")
        labels = labels.astype(np.int64)
        n = feats.shape[0]
        if labels.shape[0] != n:
            raise ValidationError(
                f"row count mismatch: {n} feature rows vs {labels.shape[0]} labels"
            )
        c = self.class_count
        if not isinstance(c, int) or c < 1:
            raise ValidationError(f"class_count must be a positive integer, got {c!r}")
        if labels.size and (labels.min() < 0 or labels.max() >= c):
            raise ValidationError(
                f"labels must lie in [0, {c}), found range [{labels.min()}, {labels.max()}]"
            )
        counts = np.bincount(labels, minlength=c)
        missing = np.flatnonzero(counts == 0)
        if missing.size:
            raise ValidationError(f"classes {missing.tolist()} have no samples")

        outputs = self.source_outputs
        kind = self.outputs_kind
        if outputs is None:
            if kind is not None:
                raise ValidationError("outputs_kind given without source_outputs")
        else:
            if kind not in OUTPUT_KINDS:
                raise ValidationError(
                    f"outputs_kind must be one of {OUTPUT_KINDS}, got {kind!r}"
                )
            outputs = np.asarray(outputs, dtype=np.float64)
            if outputs.ndim != 2 or outputs.shape[0] != n:
                raise ValidationError(
                    f"source_outputs must be 2-D with {n} rows, got shape {outputs.shape}"
                )
            if not np.all(np.isfinite(outputs)):
                raise ValidationError("source_outputs contain NaN or Inf")
            if kind == "probabilities":
                if np.any(outputs < 0):
                    raise ValidationError("probability outputs must be nonnegative")
                sums = outputs.sum(axis=1)
                bad = np.flatnonzero(np.abs(sums - 1.0) > 1e-5)
                if bad.size:
                    raise ValidationError(
                        f"probability rows must sum to 1 within 1e-5; row {bad[0]} sums to {sums[bad[0]]!r}"
                    )
            outputs.setflags(write=False)
        feats.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "source_outputs", outputs)

    @property
    def sample_count(self) -> int:
        return self.features.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]


def remap_labels(ps: ProbeSet, mapping: Mapping[int, int]) -> ProbeSet:
    """Remap target classes, e.g. collapse a many-class task to a binary one.

    `mapping` must cover every old class in [0, class_count) and its image
    must be exactly {0, ..., C'-1} for the new class count C'. Features and
    outputs are unchanged.
    """
    c = ps.class_count
    keys = set(mapping)
    if keys != set(range(c)):
        raise ValidationError(
            f"mapping must be total over [0, {c}); keys cover {sorted(keys)}"
        )
    image = set(mapping.values())
    new_c = max(image) + 1
    if image != set(range(new_c)):
        raise ValidationError(
            f"mapping image must be contiguous from 0, got {sorted(image)}"
        )
    lut = np.array([mapping[i] for i in range(c)], dtype=np.int64)
    return ProbeSet(
        features=ps.features,
        labels=lut[ps.labels],
        class_count=int(new_c),
        source_outputs=ps.source_outputs,
        outputs_kind=ps.outputs_kind,
    )


@dataclass(frozen=True)
class CheckpointRecord:
    """One candidate pretrained model: identity, probe locations, measured performance.

    probe_paths maps a split name ("train", "test_id", "test_ood") to the
    directory holding that split's features.npy / labels.npy and, when the
    source head was captured, <outputs_kind>.npy. performance maps split
    names to balanced accuracy in [0, 1].
    """

    id: str
    architecture: str
    probe_paths: Mapping[str, str]
    performance: Mapping[str, float] | None = None

    def __post_init__(self):
        if not isinstance(self.id, str) or not self.id:
            raise ValidationError(f"checkpoint id must be a nonempty string, got {self.id!r}")
        if not isinstance(self.probe_paths, Mapping) or not self.probe_paths:
            raise ValidationError(f"checkpoint {self.id!r}: probe_paths must be a nonempty map")
        for split, p in self.probe_paths.items():
            if not isinstance(split, str) or not isinstance(p, str):
                raise ValidationError(f"checkpoint {self.id!r}: probe_paths must map str to str")
        if self.performance is not None:
            for split, v in self.performance.items():
                if not isinstance(v, (int, float)) or not 0.0 <= float(v) <= 1.0:
                    raise ValidationError(
                        f"checkpoint {self.id!r}: performance[{split!r}] = {v!r} outside [0, 1]"
                    )


@dataclass(frozen=True)
class TaskManifest:
    """Binds a target task to its candidate checkpoints and output declaration."""

    task: str
    outputs_kind: str
    checkpoints: tuple[CheckpointRecord, ...]

    def __post_init__(self):
        if not isinstance(self.task, str) or not self.task:
            raise ValidationError("manifest task name must be a nonempty string")
        if self.outputs_kind not in OUTPUT_KINDS:
            raise ValidationError(
                f"manifest outputs_kind must be one of {OUTPUT_KINDS}, got {self.outputs_kind!r}"
            )
        if not self.checkpoints:
            raise ValidationError("manifest must list at least one checkpoint")
        seen = set()
        for rec in self.checkpoints:
            if rec.id in seen:
                raise ValidationError(f"duplicate checkpoint id {rec.id!r}")
            seen.add(rec.id)

    def checkpoint(self, checkpoint_id: str) -> CheckpointRecord:
        for rec in self.checkpoints:
            if rec.id == checkpoint_id:
                return rec
        raise ValidationError(f"no checkpoint {checkpoint_id!r} in manifest {self.task!r}")


def load_manifest(path) -> TaskManifest:
    """Load a manifest JSON file; relative probe paths resolve against its directory."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ValidationError(f"{path}: manifest must be a JSON object")
    for key in ("task", "outputs_kind", "checkpoints"):
        if key not in raw:
            raise ValidationError(f"{path}: manifest missing field {key!r}")
    if not isinstance(raw["checkpoints"], list):
        raise ValidationError(f"{path}: checkpoints must be a list")
    base = path.parent
    records = []
    for entry in raw["checkpoints"]:
        if not isinstance(entry, dict):
            raise ValidationError(f"{path}: checkpoint entries must be objects")
        for key in ("id", "architecture", "probe_paths"):
            if key not in entry:
                raise ValidationError(
                    f"{path}: checkpoint {entry.get('id', '?')!r} missing field {key!r}"
                )
        probe_paths = {
            split: str(base / p) if not os.path.isabs(p) else p
            for split, p in dict(entry["probe_paths"]).items()
        }
        perf = entry.get("performance")
        records.append(
            CheckpointRecord(
                id=entry["id"],
                architecture=entry["architecture"],
                probe_paths=probe_paths,
                performance=None if perf is None else {k: float(v) for k, v in perf.items()},
            )
        )
    return TaskManifest(
        task=raw["task"], outputs_kind=raw["outputs_kind"], checkpoints=tuple(records)
    )


def save_manifest(manifest: TaskManifest, path, relative_to=None) -> None:
    """Write a manifest as JSON; paths under `relative_to` are stored relative."""
    path = Path(path)
    root = Path(relative_to) if relative_to is not None else None

    def _encode_path(p: str) -> str:
        if root is not None:
            try:
                return os.path.relpath(p, root)
            except ValueError:
                return p
        return p

    doc = {
        "task": manifest.task,
        "outputs_kind": manifest.outputs_kind,
        "checkpoints": [
            {
                "id": rec.id,
                "architecture": rec.architecture,
                "probe_paths": {s: _encode_path(p) for s, p in rec.probe_paths.items()},
                **({"performance": dict(rec.performance)} if rec.performance else {}),
            }
            for rec in manifest.checkpoints
        ],
    }
    _atomic_write_bytes(path, (json.dumps(doc, indent=2) + "\n").encode())


def outputs_file_name(outputs_kind: str) -> str:
    return f"{outputs_kind}.npy"


def load_probe_set(record: CheckpointRecord, split: str, outputs_kind: str) -> ProbeSet:
    """Load and validate one checkpoint's probe set for one split.

    Logits are kept as stored; conversion to probabilities is the scorers'
    business. A missing outputs file yields a feature-only probe set.
    """
    if split not in record.probe_paths:
        raise ValidationError(
            f"checkpoint {record.id!r} has no probe path for split {split!r}; "
            f"available: {sorted(record.probe_paths)}"
        )
    base = Path(record.probe_paths[split])
    features = read_array(base / FEATURES_FILE)
    labels_mat = read_array(base / LABELS_FILE)
    if labels_mat.dtype.kind not in "iu":
        raise ValidationError(
            f"checkpoint {record.id!r} split {split!r}: labels must be int64, got {labels_mat.dtype}"
        )
    if labels_mat.shape[1] != 1:
        raise ValidationError(
            f"checkpoint {record.id!r} split {split!r}: labels file must be (n, 1), "
            f"got {labels_mat.shape}"
        )
    labels = labels_mat.ravel()
    outputs_path = base / outputs_file_name(outputs_kind)
    outputs = read_array(outputs_path) if outputs_path.exists() else None
    if labels.size and labels.min() < 0:
        raise ValidationError(
            f"checkpoint {record.id!r} split {split!r}: negative label {labels.min()}"
        )
    class_count = int(labels.max()) + 1 if labels.size else 0
    try:
        return ProbeSet(
            features=features,
            labels=labels,
            class_count=class_count,
            source_outputs=outputs,
            outputs_kind=outputs_kind if outputs is not None else None,
        )
    except ValidationError as exc:
        raise ValidationError(
            f"checkpoint {record.id!r} split {split!r}: {exc}"
        ) from None
