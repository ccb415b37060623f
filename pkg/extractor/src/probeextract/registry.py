"""Model zoo: which checkpoints we can run and where to tap their features.

Every entry names a torchvision constructor plus the attribute holding the
classification head. Features are captured as the head's input, i.e. the
globally pooled vector right before the classifier (for ViT, the class
token after the final encoder norm), which is the standard probe-feature
convention.
"""

from dataclasses import dataclass
from typing import Callable

import torch.nn as nn
import torchvision.models as tvm


@dataclass(frozen=True)
class ZooEntry:
    name: str
    family: str
    build: Callable[..., nn.Module]  # keyword arg `weights`
    classifier_attr: str


MODEL_ZOO: dict[str, ZooEntry] = {}


def register_model(name: str, build, classifier_attr: str, family: str | None = None):
    """Add a checkpoint to the zoo (also how tests plug in toy models)."""
    MODEL_ZOO[name] = ZooEntry(
        name=name, family=family or name, build=build, classifier_attr=classifier_attr
    )


for _name, _family, _build, _attr in [
    ("resnet18", "resnet", tvm.resnet18, "fc"),
    ("resnet34", "resnet", tvm.resnet34, "fc"),
    ("resnet50", "resnet", tvm.resnet50, "fc"),
    ("mobilenet_v2", "mobilenet_v2", tvm.mobilenet_v2, "classifier"),
    ("densenet121", "densenet", tvm.densenet121, "classifier"),
    ("densenet161", "densenet", tvm.densenet161, "classifier"),
    ("densenet169", "densenet", tvm.densenet169, "classifier"),
    ("efficientnet_b0", "efficientnet", tvm.efficientnet_b0, "classifier"),
    ("vit_b_16", "vit", tvm.vit_b_16, "heads"),
]:
    register_model(_name, _build, _attr, _family)


def resolve(name: str) -> ZooEntry:
    if name not in MODEL_ZOO:
        known = ", ".join(sorted(MODEL_ZOO))
        raise KeyError(f"unknown model {name!r}; zoo has: {known}")
    return MODEL_ZOO[name]


def classifier_module(model: nn.Module, entry: ZooEntry) -> nn.Module:
    head = getattr(model, entry.classifier_attr, None)
    if not isinstance(head, nn.Module):
        raise AttributeError(
            f"model {entry.name!r} has no classifier module at "
            f"attribute {entry.classifier_attr!r}"
        )
    return head
