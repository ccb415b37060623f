import json
import subprocess
import sys

import numpy as np
import pytest
import torch

from conftest import write_image_folder
from probeextract.cli import run
from probeextract.extract import ExtractionSpec, extract
from probeextract.registry import MODEL_ZOO, classifier_module, resolve


def spec_for(folder, out, models=("tinynet",), splits=("train", "val"), **kw):
    kw.setdefault("pretrained", False)
    kw.setdefault("batch_size", 5)
    return ExtractionSpec(models=tuple(models), data_root=folder, splits=tuple(splits),
                          out_dir=out, **kw)


def softmax_rows(m):
    e = np.exp(m - m.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


class TestExtraction:
    def test_twenty_image_folder_passes_primary_validate(self, toy_folder, tmp_path):
        out = tmp_path / "probes"
        result = extract(spec_for(toy_folder, out))
        assert result.extracted_models == ["tinynet"]
        assert result.skipped_images == []

        features = np.load(out / "tinynet" / "train" / "features.npy")
        logits = np.load(out / "tinynet" / "train" / "logits.npy")
        labels = np.load(out / "tinynet" / "train" / "labels.npy")
        assert features.shape == (16, 4) and features.dtype == np.float32
        assert logits.shape == (16, 7) and logits.dtype == np.float32
        assert labels.shape == (16, 1) and labels.dtype == np.int64
        assert labels.ravel().tolist() == [0] * 8 + [1] * 8
        assert np.load(out / "tinynet" / "val" / "features.npy").shape == (4, 4)

        proc = subprocess.run(
            [sys.executable, "-m", "transferscore", "validate",
             "--manifest", str(result.manifest_path)],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0, proc.stderr
        assert proc.stdout.count("ok:") == 2  # one line per (model, split)

    def test_emitted_logit_rows_softmax_to_one(self, toy_folder, tmp_path):
        result = extract(spec_for(toy_folder, tmp_path / "p"))
        logits = np.load(tmp_path / "p" / "tinynet" / "train" / "logits.npy")
        sums = softmax_rows(logits.astype(np.float64)).sum(axis=1)
        assert np.all(np.abs(sums - 1.0) < 1e-5)
        assert result.manifest_path.exists()

    def test_four_image_two_class_shapes(self, tmp_path):
        folder = write_image_folder(
            tmp_path / "imgs", {"train": {"a": 2, "b": 2}}, seed=3
        )
        extract(spec_for(folder, tmp_path / "p", splits=("train",)))
        labels = np.load(tmp_path / "p" / "tinynet" / "train" / "labels.npy")
        assert labels.ravel().tolist() == [0, 0, 1, 1]
        features = np.load(tmp_path / "p" / "tinynet" / "train" / "features.npy")
        assert features.shape == (4, 4)

    def test_rerun_is_byte_identical(self, toy_folder, tmp_path):
        extract(spec_for(toy_folder, tmp_path / "a"))
        extract(spec_for(toy_folder, tmp_path / "b"))
        for name in ("labels.npy", "features.npy", "logits.npy"):
            first = (tmp_path / "a" / "tinynet" / "train" / name).read_bytes()
            second = (tmp_path / "b" / "tinynet" / "train" / name).read_bytes()
            assert first == second, name

    def test_unreadable_image_skipped_with_manifest_note(self, tmp_path):
        folder = write_image_folder(tmp_path / "imgs", {"train": {"a": 3, "b": 3}})
        bad = folder / "train" / "a" / "img_001.png"
        bad.write_bytes(b"this is not an image")
        result = extract(spec_for(folder, tmp_path / "p", splits=("train",)))
        assert len(result.skipped_images) == 1
        assert "img_001.png" in result.skipped_images[0]
        labels = np.load(tmp_path / "p" / "tinynet" / "train" / "labels.npy")
        assert labels.ravel().tolist() == [0, 0, 1, 1, 1]
        note = json.loads(result.manifest_path.read_text())["extraction"]["skipped_images"]
        assert len(note) == 1 and "img_001.png" in note[0]

    def test_model_load_failure_aborts_that_model_only(self, toy_folder, tmp_path):
        result = extract(spec_for(toy_folder, tmp_path / "p",
                                  models=("brokennet", "tinynet")))
        assert result.extracted_models == ["tinynet"]
        assert len(result.failed_models) == 1
        assert result.failed_models[0].startswith("brokennet:")
        manifest = json.loads(result.manifest_path.read_text())
        assert [c["id"] for c in manifest["checkpoints"]] == ["tinynet"]
        assert manifest["extraction"]["failed_models"] == result.failed_models

    def test_all_models_failing_raises(self, toy_folder, tmp_path):
        with pytest.raises(RuntimeError, match="no model produced output"):
            extract(spec_for(toy_folder, tmp_path / "p", models=("brokennet",)))


class TestSpecValidation:
    def test_unknown_model_rejected(self, tmp_path):
        with pytest.raises(KeyError, match="unknown model"):
            spec_for(tmp_path, tmp_path / "p", models=("nosuchnet",))

    def test_duplicate_splits_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="disjoint"):
            spec_for(tmp_path, tmp_path / "p", splits=("train", "train"))

    def test_missing_split_directory_errors(self, toy_folder, tmp_path):
        with pytest.raises(FileNotFoundError):
            extract(spec_for(toy_folder, tmp_path / "p", splits=("nope",)))


class TestZoo:
    def test_zoo_covers_the_expected_families(self):
        families = {e.family for n, e in MODEL_ZOO.items() if e.family != "tiny"}
        assert families == {"resnet", "mobilenet_v2", "densenet", "efficientnet", "vit"}

    def test_every_entry_builds_and_exposes_its_head(self):
        for name, entry in sorted(MODEL_ZOO.items()):
            if entry.family == "tiny":
                continue
            torch.manual_seed(0)
            model = entry.build(weights=None)
            classifier_module(model, entry)  # raises if the attr is wrong

    @pytest.mark.parametrize("name", ["resnet18", "mobilenet_v2", "efficientnet_b0", "vit_b_16"])
    def test_feature_tap_sees_pooled_vector(self, name):
        entry = resolve(name)
        torch.manual_seed(0)
        model = entry.build(weights=None).eval()
        seen = {}
        classifier_module(model, entry).register_forward_pre_hook(
            lambda m, args: seen.setdefault("x", args[0])
        )
        with torch.no_grad():
            out = model(torch.randn(2, 3, 224, 224))
        assert seen["x"].ndim == 2 and seen["x"].shape[0] == 2
        assert out.shape == (2, 1000)


class TestCli:
    def test_cli_end_to_end(self, toy_folder, tmp_path):
        out = tmp_path / "probes"
        rc = run(["--data-root", str(toy_folder), "--out", str(out),
                  "--models", "tinynet", "--splits", "train,val",
                  "--no-pretrained", "--batch-size", "4"])
        assert rc == 0
        assert (out / "manifest.json").exists()
        assert (out / "tinynet" / "val" / "logits.npy").exists()

    def test_cli_unknown_model_is_data_error(self, toy_folder, tmp_path, capsys):
        rc = run(["--data-root", str(toy_folder), "--out", str(tmp_path / "p"),
                  "--models", "nosuchnet", "--no-pretrained"])
        assert rc == 1
        assert "unknown model" in capsys.readouterr().err

    def test_list_models(self, capsys):
        assert run(["--list-models"]) == 0
        assert "resnet18" in capsys.readouterr().out
