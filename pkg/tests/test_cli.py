"""Command-line behavior: subcommands, exit codes, determinism."""

import json
import subprocess
import sys

import numpy as np
import pytest

from transferscore.cli import run
from transferscore.evaluation import correlate, report_from_json
from transferscore.probe_store import load_manifest
from transferscore.scorers import ScoreOptions, load_score_table, score_all


@pytest.fixture()
def scored(demo_task, tmp_path):
    out = tmp_path / "scores.json"
    rc = run(["score", "--manifest", str(demo_task), "--split", "train",
              "--scorers", "all", "--out", str(out), "--seed", "0"])
    assert rc == 0
    return out


class TestExitCodes:
    def test_unknown_subcommand_is_usage_error(self, capsys):
        assert run(["polish"]) == 2

    def test_unknown_flag_is_usage_error(self):
        assert run(["validate", "--manifest", "x", "--frobnicate"]) == 2

    def test_missing_manifest_is_data_error(self, capsys):
        assert run(["validate", "--manifest", "/nonexistent/manifest.json"]) == 1
        assert "error:" in capsys.readouterr().err

    def test_corrupt_manifest_is_data_error(self, tmp_path, capsys):
        bad = tmp_path / "manifest.json"
        bad.write_text("{broken")
        assert run(["validate", "--manifest", str(bad)]) == 1
        err = capsys.readouterr().err
        assert "manifest.json" in err

    def test_version_exits_zero(self):
        assert run(["--version"]) == 0


class TestValidate:
    def test_valid_manifest_passes(self, demo_task, capsys):
        assert run(["validate", "--manifest", str(demo_task)]) == 0
        out = capsys.readouterr().out
        assert "4 checkpoints valid" in out
        assert out.count("ok:") == 4 * 3  # checkpoints x splits

    def test_corrupt_array_fails_with_named_file(self, demo_task, tmp_path, capsys):
        import shutil

        root = tmp_path / "task"
        shutil.copytree(demo_task.parent, root)
        victim = root / "ckpt01" / "train" / "features.npy"
        blob = bytearray(victim.read_bytes())
        blob[0] = 0
        victim.write_bytes(bytes(blob))
        assert run(["validate", "--manifest", str(root / "manifest.json")]) == 1
        assert "features.npy" in capsys.readouterr().err


class TestScore:
    def test_writes_complete_table(self, scored):
        table = load_score_table(scored)
        assert len(table.checkpoint_ids) == 4
        assert len(table.scorer_names) == 7
        for per in table.scores.values():
            assert all(np.isfinite(v) for v in per.values())

    def test_deterministic_output_bytes(self, demo_task, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        for out in (a, b):
            rc = run(["score", "--manifest", str(demo_task), "--split", "train",
                      "--scorers", "all", "--out", str(out), "--seed", "0"])
            assert rc == 0
        assert a.read_bytes() == b.read_bytes()

    def test_scorer_subset(self, demo_task, tmp_path):
        out = tmp_path / "subset.json"
        rc = run(["score", "--manifest", str(demo_task), "--split", "train",
                  "--scorers", "h_score,gbc", "--out", str(out)])
        assert rc == 0
        table = load_score_table(out)
        assert set(table.scorer_names) == {"h_score", "gbc"}

    def test_unknown_scorer_is_data_error(self, demo_task, tmp_path, capsys):
        rc = run(["score", "--manifest", str(demo_task), "--split", "train",
                  "--scorers", "h_score,bogus", "--out", str(tmp_path / "x.json")])
        assert rc == 1
        assert "bogus" in capsys.readouterr().err

    def test_missing_split_is_data_error(self, demo_task, tmp_path, capsys):
        rc = run(["score", "--manifest", str(demo_task), "--split", "holdout",
                  "--scorers", "h_score", "--out", str(tmp_path / "x.json")])
        assert rc == 1
        assert "holdout" in capsys.readouterr().err


class TestRank:
    def test_prints_descending_order(self, tmp_path, capsys):
        doc = {"task": "t", "split": "s", "scores": {"a": {"x": 0.1}, "b": {"x": 0.9}}}
        path = tmp_path / "scores.json"
        path.write_text(json.dumps(doc))
        assert run(["rank", "--scores", str(path), "--scorer", "x"]) == 0
        assert capsys.readouterr().out.splitlines() == ["b", "a"]

    def test_missing_scorer_is_data_error(self, scored, capsys):
        assert run(["rank", "--scores", str(scored), "--scorer", "nope"]) == 1
        assert "nope" in capsys.readouterr().err


class TestCorrelate:
    def test_report_printed_and_written(self, scored, demo_task, tmp_path, capsys):
        out = tmp_path / "report.json"
        rc = run(["correlate", "--scores", str(scored), "--manifest", str(demo_task),
                  "--split", "test_id", "--method", "tau", "--out", str(out)])
        assert rc == 0
        printed = capsys.readouterr().out
        assert "tau-b" in printed and "h_score" in printed
        report = report_from_json(out.read_text())
        assert report.performance_split == "test_id"
        assert report.method == "tau-b"

    def test_cli_matches_in_process_pipeline(self, scored, demo_task, tmp_path):
        out = tmp_path / "report.json"
        rc = run(["correlate", "--scores", str(scored), "--manifest", str(demo_task),
                  "--split", "test_id", "--method", "wtau", "--out", str(out)])
        assert rc == 0
        via_cli = report_from_json(out.read_text())

        manifest = load_manifest(demo_task)
        table = score_all(manifest, "train", "all", ScoreOptions(seed=0))
        direct = correlate(table, manifest, "test_id", method="weighted-tau")
        assert via_cli == direct

    def test_missing_performance_is_data_error(self, scored, demo_task, capsys):
        rc = run(["correlate", "--scores", str(scored), "--manifest", str(demo_task),
                  "--split", "train"])
        assert rc == 1
        assert "train" in capsys.readouterr().err


class TestPlotData:
    def test_csv_shape(self, scored, demo_task, tmp_path):
        out = tmp_path / "plot.csv"
        rc = run(["plot-data", "--scores", str(scored), "--manifest", str(demo_task),
                  "--split", "test_id", "--out", str(out)])
        assert rc == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "checkpoint_id,architecture,scorer,score,performance"
        assert len(lines) == 1 + 4 * 7


class TestPlanHpo:
    def test_writes_in_range_configs(self, tmp_path):
        out = tmp_path / "plan"
        rc = run(["plan-hpo", "--n", "75", "--out", str(out)])
        assert rc == 0
        paths = sorted(out.glob("config_*.json"))
        assert len(paths) == 75
        for path in paths:
            doc = json.loads(path.read_text())
            assert 1e-4 <= doc["learning_rate"] <= 1e-1
            assert 1e-6 <= doc["weight_decay"] <= 1e-4

    def test_bad_range_is_data_error(self, tmp_path, capsys):
        rc = run(["plan-hpo", "--n", "5", "--lr-min", "0.1", "--lr-max", "0.001",
                  "--out", str(tmp_path / "plan")])
        assert rc == 1
        assert "range" in capsys.readouterr().err


class TestEntryPoints:
    def test_module_invocation(self):
        proc = subprocess.run(
            [sys.executable, "-m", "transferscore", "--version"],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0
        assert "transferscore" in proc.stdout

    def test_console_script(self):
        proc = subprocess.run(
            ["transferscore", "--version"], capture_output=True, text=True
        )
        assert proc.returncode == 0
        assert "transferscore" in proc.stdout

    def test_usage_error_exit_code_via_subprocess(self):
        proc = subprocess.run(
            [sys.executable, "-m", "transferscore", "make-coffee"],
            capture_output=True, text=True,
        )
        assert proc.returncode == 2
