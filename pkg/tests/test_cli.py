import csv
import json
import subprocess
import sys

import pytest

from skdlab.cli import EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, main

TINY_CONFIG = """
[dataset]
kind = "blobs"
classes = 3
points_per_class = 30
separation = 5.0
seed = 0

[student]
hidden_dims = [8]

[[teachers]]
hidden_dims = [8]

[[teachers]]
hidden_dims = [16]

[kd]
regime = "skd"
temperature = 2.0
distribution = { kind = "uniform" }

[run]
epochs = 4
teacher_epochs = 4
batch_size = 32
seeds = [0]
out_dir = "PLACEHOLDER"

[sim]
classes = 3
teachers = 2
iterations = 100
num_seeds = 3
seed = 1
"""


@pytest.fixture
def tiny_config_path(tmp_path):
    out = tmp_path / "runs"
    path = tmp_path / "exp.toml"
    path.write_text(TINY_CONFIG.replace("PLACEHOLDER", str(out).replace("\\", "/")))
    return path, out


class TestTrainAndDistill:
    def test_train_teachers_then_distill(self, tiny_config_path, capsys):
        cfg_path, out = tiny_config_path
        assert main(["train-teachers", "--config", str(cfg_path)]) == EXIT_OK
        assert (out / "teachers" / "seed0" / "T01.skdm").exists()
        assert (out / "teacher_T01_seed0.json").exists()

        assert main(["distill", "--config", str(cfg_path)]) == EXIT_OK
        report_path = out / "distill_skd_seed0.json"
        assert report_path.exists()
        report = json.loads(report_path.read_text())
        assert report["regime"] == "skd"
        assert sum(report["sample_counts"]) == report["iterations"]
        assert "test" in report["final"]
        captured = capsys.readouterr()
        assert "test accuracy" in captured.out

    def test_distill_without_checkpoints_exits_3(self, tiny_config_path, capsys):
        cfg_path, _ = tiny_config_path
        assert main(["distill", "--config", str(cfg_path)]) == EXIT_NUMERIC
        assert "missing teacher checkpoint" in capsys.readouterr().err

    def test_seed_override(self, tiny_config_path):
        cfg_path, out = tiny_config_path
        main(["train-teachers", "--config", str(cfg_path), "--seed", "3"])
        assert (out / "teachers" / "seed3" / "T01.skdm").exists()


class TestGradcheckCommand:
    def test_passes_and_prints(self, capsys):
        assert main(["gradcheck", "--instances", "50"]) == EXIT_OK
        out = capsys.readouterr().out
        assert out.count("PASS") == 3
        assert "runtime" in out

    def test_writes_report(self, tmp_path):
        assert main(["gradcheck", "--instances", "20", "--out", str(tmp_path)]) == EXIT_OK
        report = json.loads((tmp_path / "gradcheck.json").read_text())
        assert report["passed"] is True


class TestSampleStatsCommand:
    def test_writes_json(self, tiny_config_path, capsys):
        cfg_path, out = tiny_config_path
        code = main(["sample-stats", "--config", str(cfg_path),
                     "--draws", "5000", "--seed", "1"])
        assert code == EXIT_OK
        stats = json.loads((out / "sample_stats.json").read_text())
        assert stats["draws"] == 5000
        assert len(stats["frequencies"]) == 2
        assert "p-value" in capsys.readouterr().out

    def test_needs_distribution(self, tmp_path, capsys):
        path = tmp_path / "nodist.toml"
        path.write_text("[run]\nepochs = 1\n")
        assert main(["sample-stats", "--config", str(path)]) == EXIT_CONFIG


class TestSimulateGradientsCommand:
    def test_writes_csv_with_exact_columns(self, tiny_config_path):
        cfg_path, out = tiny_config_path
        assert main(["simulate-gradients", "--config", str(cfg_path)]) == EXIT_OK
        with open(out / "simulate_gradients.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["class", "a", "E_b_closed", "E_b_mc", "gap", "var_b",
                           "g_avg", "g_skd_mean", "g_skd_var", "corrected"]
        assert len(rows) == 1 + 3 * 2  # header + classes x {verbatim, corrected}


class TestCompareRegimesCommand:
    def test_writes_table(self, tiny_config_path, capsys):
        cfg_path, out = tiny_config_path
        assert main(["compare-regimes", "--config", str(cfg_path)]) == EXIT_OK
        with open(out / "compare_regimes.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert [r["regime"] for r in rows] == ["none", "avg_ensemble", "mtbert", "skd"]
        assert all(r["arrow"] in ("↑", "↓", "=") for r in rows)
        assert "table ->" in capsys.readouterr().out


class TestExitCodes:
    def test_missing_config_file(self, capsys):
        assert main(["distill", "--config", "/nonexistent.toml"]) == EXIT_CONFIG
        assert "config error" in capsys.readouterr().err

    def test_bad_config_key(self, tmp_path, capsys):
        path = tmp_path / "bad.toml"
        path.write_text("[run]\nwhat = 1\n")
        assert main(["distill", "--config", str(path)]) == EXIT_CONFIG

    def test_divergent_run_exits_3(self, tmp_path, capsys):
        import numpy as np

        path = tmp_path / "diverge.toml"
        path.write_text(f"""
[dataset]
kind = "blobs"
classes = 2
points_per_class = 20
separation = 5.0

[student]
hidden_dims = [8]

[kd]
regime = "none"

[optimizer]
kind = "sgd"
lr = 1e12
momentum = 0.0
milestones = []

[run]
epochs = 30
seeds = [0]
out_dir = "{str(tmp_path / 'out').replace(chr(92), '/')}"
""")
        with np.errstate(over="ignore", invalid="ignore"):
            assert main(["distill", "--config", str(path)]) == EXIT_NUMERIC
        assert "run failed" in capsys.readouterr().err

    def test_console_entry_point(self, tmp_path):
        result = subprocess.run(
            [sys.executable, "-m", "skdlab.cli", "gradcheck", "--instances", "5"],
            capture_output=True, text=True,
        )
        assert result.returncode == 0
        assert result.stdout.count("PASS") == 3
