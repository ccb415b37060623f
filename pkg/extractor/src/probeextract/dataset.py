"""Image-folder enumeration and preprocessing.

Layout: `<data_root>/<split>/<class_name>/<image>`. Class indices come from
the sorted union of class folder names across all requested splits, so the
label mapping is identical for every split. Sample order within a split is
the sorted file path order, which fixes output row order for free.
"""

from dataclasses import dataclass
from pathlib import Path

import torch
from PIL import Image
from torchvision import transforms

IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg", ".bmp", ".gif", ".tif", ".tiff", ".webp")

# standard ImageNet statistics; recorded in the manifest alongside the sizes
NORMALIZE_MEAN = (0.485, 0.456, 0.406)
NORMALIZE_STD = (0.229, 0.224, 0.225)


@dataclass(frozen=True)
class Sample:
    path: Path
    label: int


@dataclass(frozen=True)
class SplitIndex:
    name: str
    samples: tuple[Sample, ...]


def build_preprocess(image_size: int) -> transforms.Compose:
    """Resize shorter side then center-crop, ToTensor, ImageNet-normalize."""
    resize = max(image_size, int(round(image_size * 256 / 224)))
    return transforms.Compose([
        transforms.Resize(resize),
        transforms.CenterCrop(image_size),
        transforms.ToTensor(),
        transforms.Normalize(NORMALIZE_MEAN, NORMALIZE_STD),
    ])


def _class_dirs(split_dir: Path) -> list[Path]:
    return sorted(p for p in split_dir.iterdir() if p.is_dir())


def index_splits(data_root: Path, splits: tuple[str, ...]) -> tuple[list[str], list[SplitIndex]]:
    """Enumerate (class_names, per-split samples) for the requested splits."""
    data_root = Path(data_root)
    for split in splits:
        if not (data_root / split).is_dir():
            raise FileNotFoundError(f"split directory not found: {data_root / split}")
    names = sorted({d.name for s in splits for d in _class_dirs(data_root / s)})
    if not names:
        raise FileNotFoundError(f"no class folders under {data_root} for splits {splits}")
    label_of = {name: i for i, name in enumerate(names)}

    indexed = []
    for split in splits:
        samples = []
        for class_dir in _class_dirs(data_root / split):
            label = label_of[class_dir.name]
            for path in sorted(class_dir.iterdir()):
                if path.suffix.lower() in IMAGE_EXTENSIONS and path.is_file():
                    samples.append(Sample(path=path, label=label))
        if not samples:
            raise FileNotFoundError(f"no images under {data_root / split}")
        indexed.append(SplitIndex(name=split, samples=tuple(samples)))
    return names, indexed


def load_image(path: Path, preprocess) -> torch.Tensor:
    """Decode one image to a preprocessed CHW tensor. Raises on bad files."""
    with Image.open(path) as img:
        return preprocess(img.convert("RGB"))
