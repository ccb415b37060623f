import numpy as np
import pytest
import torch
import torch.nn as nn
from PIL import Image

from probeextract.registry import register_model


class TinyNet(nn.Module):
    """Small conv net with the resnet-style `fc` head convention."""

    def __init__(self, classes=7):
        super().__init__()
        self.conv = nn.Conv2d(3, 4, kernel_size=16, stride=16)
        self.pool = nn.AdaptiveAvgPool2d(1)
        self.fc = nn.Linear(4, classes)

    def forward(self, x):
        x = self.pool(torch.relu(self.conv(x))).flatten(1)
        return self.fc(x)


def _build_tiny(weights=None):
    assert weights is None, "tinynet has no pretrained weights"
    return TinyNet()


def _build_broken(weights=None):
    raise OSError("weights file unavailable")


register_model("tinynet", _build_tiny, classifier_attr="fc", family="tiny")
register_model("brokennet", _build_broken, classifier_attr="fc", family="tiny")


def write_image_folder(root, split_counts, size=40, seed=0):
    """Create <root>/<split>/<class>/<img>.png folders of random RGB images.

    split_counts: {split: {class_name: n_images}}
    """
    rng = np.random.default_rng(seed)
    for split, classes in split_counts.items():
        for cls, count in classes.items():
            d = root / split / cls
            d.mkdir(parents=True)
            for i in range(count):
                pixels = rng.integers(0, 256, (size, size, 3), dtype=np.uint8)
                Image.fromarray(pixels).save(d / f"img_{i:03d}.png")
    return root


@pytest.fixture(scope="session")
def toy_folder(tmp_path_factory):
    """20 images: train 2x8, val 2x2."""
    root = tmp_path_factory.mktemp("toy_images")
    return write_image_folder(
        root,
        {"train": {"cats": 8, "dogs": 8}, "val": {"cats": 2, "dogs": 2}},
    )
