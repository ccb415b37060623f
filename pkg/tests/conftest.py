"""Shared fixtures and helpers for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from transferscore.probe_store import ProbeSet
from transferscore.synthetic import build_demo_task

_acceptance_results: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if report.failed:
        _acceptance_results[name] = "FAIL"
    elif report.skipped:
        _acceptance_results.setdefault(name, "SKIP")
    elif report.when == "call" and report.passed:
        _acceptance_results.setdefault(name, "PASS")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _acceptance_results:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for name in sorted(_acceptance_results):
        terminalreporter.write_line(f"{_acceptance_results[name]}: {name}")


def labels_covering(rng, n: int, classes: int, min_per_class: int = 1) -> np.ndarray:
    """Random label vector of length n with every class hit >= min_per_class times."""
    assert n >= classes * min_per_class
    base = np.tile(np.arange(classes), min_per_class)
    rest = rng.integers(0, classes, n - base.shape[0])
    labels = np.concatenate([base, rest])
    rng.shuffle(labels)
    return labels.astype(np.int64)


def random_probe_set(
    seed: int,
    n: int = 40,
    d: int = 5,
    classes: int = 3,
    source_classes: int = 4,
    outputs_kind: str | None = "probabilities",
    min_per_class: int = 2,
    informative: bool = False,
) -> ProbeSet:
    """Seeded probe set; `informative` shifts class blobs apart."""
    rng = np.random.default_rng(seed)
    labels = labels_covering(rng, n, classes, min_per_class)
    feats = rng.standard_normal((n, d))
    if informative:
        centers = rng.standard_normal((classes, d)) * 3.0
        feats += centers[labels]
    outputs = None
    if outputs_kind is not None:
        logits = rng.standard_normal((n, source_classes))
        if outputs_kind == "probabilities":
            e = np.exp(logits - logits.max(axis=1, keepdims=True))
            outputs = e / e.sum(axis=1, keepdims=True)
        else:
            outputs = logits
    return ProbeSet(
        features=feats,
        labels=labels,
        class_count=classes,
        source_outputs=outputs,
        outputs_kind=outputs_kind,
    )


@pytest.fixture(scope="session")
def demo_task(tmp_path_factory):
    """Small on-disk synthetic task: 4 checkpoints, 3 splits, logits manifest."""
    root = tmp_path_factory.mktemp("demo_task")
    manifest_path = build_demo_task(root, checkpoints=4, per_class=30, seed=0)
    return manifest_path
