"""Probe extraction: pretrained checkpoints -> features/logits/labels on disk."""

from .dataset import SplitIndex, build_preprocess, index_splits
from .extract import ExtractionResult, ExtractionSpec, extract
from .registry import MODEL_ZOO, ZooEntry, register_model, resolve

__version__ = "0.1.0"

__all__ = [
    "ExtractionResult",
    "ExtractionSpec",
    "MODEL_ZOO",
    "SplitIndex",
    "ZooEntry",
    "build_preprocess",
    "extract",
    "index_splits",
    "register_model",
    "resolve",
    "__version__",
]
