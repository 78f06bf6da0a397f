"""End-to-end command-line tests: the four subcommands, exit codes,
config precedence, and byte determinism of the full pipeline.
"""
from __future__ import annotations

import json

import pytest

from dagsel.cli import main
from dagsel.dataio import FEATURES_FILE, GRAPHS_FILE, OUTCOMES_FILE, ZOO_FILE
from conftest import FIXTURES

SPEC = str(FIXTURES / "specs" / "slow_best.json")
DATASET_FILES = (ZOO_FILE, GRAPHS_FILE, OUTCOMES_FILE, FEATURES_FILE)

FAST_TRAIN = ["--epochs", "2", "--patience", "0", "--lr", "3e-3"]


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "data"
    assert main(["gen", SPEC, "--out", str(path)]) == 0
    return path


@pytest.fixture(scope="module")
def checkpoint(tmp_path_factory, data_dir):
    path = tmp_path_factory.mktemp("cli") / "ck.json"
    assert main(["train", "--data", str(data_dir), "--out", str(path)] + FAST_TRAIN) == 0
    return path


def first_sample_id(data_dir):
    line = (data_dir / GRAPHS_FILE).read_text().splitlines()[0]
    return json.loads(line)["sample_id"]


class TestGen:
    def test_writes_four_files(self, data_dir):
        for name in DATASET_FILES:
            assert (data_dir / name).is_file(), name

    def test_same_spec_twice_identical_bytes(self, data_dir, tmp_path):
        other = tmp_path / "again"
        assert main(["gen", SPEC, "--out", str(other)]) == 0
        for name in DATASET_FILES:
            assert (data_dir / name).read_bytes() == (other / name).read_bytes(), name

    def test_bad_spec_is_data_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text('{"n_samples": -3}')
        assert main(["gen", str(bad), "--out", str(tmp_path / "out")]) == 3
        assert capsys.readouterr().err.strip()

    def test_missing_spec_file_is_data_error(self, tmp_path):
        assert main(["gen", str(tmp_path / "nope.json"), "--out", str(tmp_path / "out")]) == 3


class TestTrain:
    def test_prints_val_ser_and_writes_artifacts(self, data_dir, tmp_path, capsys):
        out = tmp_path / "ck.json"
        assert main(["train", "--data", str(data_dir), "--out", str(out)] + FAST_TRAIN) == 0
        assert "val_ser=" in capsys.readouterr().out
        assert out.is_file()
        history = tmp_path / "ck.history.csv"
        lines = history.read_text().splitlines()
        assert lines[0] == "epoch,lr,train_loss,val_ser"
        assert len(lines) == 3  # header + 2 epochs

    def test_loss_flag_switches_objective(self, data_dir, tmp_path):
        base = ["train", "--data", str(data_dir), "--epochs", "1", "--patience", "0"]
        assert main(base + ["--out", str(tmp_path / "cce.json")]) == 0
        assert main(base + ["--out", str(tmp_path / "bce.json"), "--loss", "bce"]) == 0
        cce = (tmp_path / "cce.history.csv").read_text().splitlines()[1]
        bce = (tmp_path / "bce.history.csv").read_text().splitlines()[1]
        assert cce.split(",")[2] != bce.split(",")[2]

    def test_config_file_with_flag_override(self, data_dir, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"max_epochs": 1, "patience": 0, "lr": 0.5}))
        out = tmp_path / "ck.json"
        # flag lr wins over the config's 0.5; config epochs stick
        assert (
            main(
                ["train", "--data", str(data_dir), "--config", str(cfg), "--out", str(out), "--lr", "1e-3"]
            )
            == 0
        )
        ck = json.loads(out.read_text())
        assert ck["config"]["lr"] == 1e-3
        assert ck["config"]["max_epochs"] == 1

    def test_unknown_config_key_is_data_error(self, data_dir, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"learning_rate": 0.1}))
        rc = main(["train", "--data", str(data_dir), "--config", str(cfg), "--out", str(tmp_path / "x")])
        assert rc == 3
        assert "learning_rate" in capsys.readouterr().err

    def test_missing_features_file_is_data_error(self, tmp_path):
        broken = tmp_path / "broken"
        assert main(["gen", SPEC, "--out", str(broken)]) == 0
        (broken / FEATURES_FILE).unlink()
        assert main(["train", "--data", str(broken), "--out", str(tmp_path / "ck")] + FAST_TRAIN) == 3


class TestEval:
    def test_breakdown_has_full_row(self, data_dir, checkpoint, tmp_path):
        out = tmp_path / "report.csv"
        rc = main(
            ["eval", "--data", str(data_dir), "--checkpoint", str(checkpoint), "--out", str(out)]
        )
        assert rc == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "method,bucket,ser,std,count"
        assert lines[-1].startswith("m3,Full,")

    def test_three_methods_report_together(self, data_dir, checkpoint, capsys):
        rc = main(
            [
                "eval",
                "--data",
                str(data_dir),
                "--methods",
                "random,global_best,m3",
                "--checkpoint",
                str(checkpoint),
            ]
        )
        assert rc == 0
        out = capsys.readouterr().out
        methods = {line.split(",")[0] for line in out.splitlines()[1:] if line}
        assert methods == {"random", "global_best", "m3"}

    def test_budget_sweep_two_rows(self, data_dir, checkpoint, capsys):
        rc = main(
            [
                "eval",
                "--data",
                str(data_dir),
                "--methods",
                "global_best",
                "--budgets",
                "0.3,inf",
            ]
        )
        assert rc == 0
        lines = [l for l in capsys.readouterr().out.splitlines()[1:] if l]
        assert len(lines) == 2
        assert lines[0].split(",")[1] == "budget=0.3"
        assert lines[1].split(",")[1] == "budget=inf"
        # the slow model is better: tightening the budget must cost SER
        assert float(lines[0].split(",")[2]) < float(lines[1].split(",")[2])

    def test_missing_sweep_grid(self, data_dir, tmp_path):
        out1, out2 = tmp_path / "j1.csv", tmp_path / "j2.csv"
        base = [
            "eval",
            "--data",
            str(data_dir),
            "--methods",
            "random,global_best",
            "--missing-mode",
            "choices",
            "--ratios",
            "0,0.5",
            "--seeds",
            "0,1",
        ]
        assert main(base + ["--out", str(out1)]) == 0
        assert main(base + ["--jobs", "2", "--out", str(out2)]) == 0
        lines = out1.read_text().splitlines()
        assert len(lines) == 1 + 4  # header + 2 methods x 2 ratios
        assert out1.read_bytes() == out2.read_bytes()

    def test_jsonl_format(self, data_dir, checkpoint, capsys):
        rc = main(
            [
                "eval",
                "--data",
                str(data_dir),
                "--checkpoint",
                str(checkpoint),
                "--format",
                "jsonl",
            ]
        )
        assert rc == 0
        rows = [json.loads(l) for l in capsys.readouterr().out.splitlines() if l]
        assert rows[-1]["bucket"] == "Full"

    def test_trained_method_without_checkpoint_is_usage_error(self, data_dir, capsys):
        assert main(["eval", "--data", str(data_dir), "--methods", "m3"]) == 2
        assert "--checkpoint" in capsys.readouterr().err

    def test_unknown_method_is_usage_error(self, data_dir):
        with pytest.raises(SystemExit) as exc:
            main(["eval", "--data", str(data_dir), "--methods", "alchemy"])
        assert exc.value.code == 2

    def test_missing_mode_requires_ratios(self, data_dir):
        rc = main(
            ["eval", "--data", str(data_dir), "--methods", "random", "--missing-mode", "choices"]
        )
        assert rc == 2


class TestSelect:
    def test_topk_rows(self, data_dir, checkpoint, capsys):
        sid = first_sample_id(data_dir)
        rc = main(
            ["select", sid, "--data", str(data_dir), "--checkpoint", str(checkpoint), "--topk", "3"]
        )
        assert rc == 0
        lines = capsys.readouterr().out.splitlines()
        assert len(lines) == 3
        assert lines[0].startswith("rank=1 score=")
        assert "LOC=" in lines[0] and "VQA=" in lines[0]
        scores = [float(l.split()[1].split("=")[1]) for l in lines]
        assert scores == sorted(scores, reverse=True)

    def test_budget_changes_selection(self, data_dir, checkpoint, capsys):
        sid = first_sample_id(data_dir)
        base = ["select", sid, "--data", str(data_dir), "--checkpoint", str(checkpoint)]
        assert main(base) == 0
        free = capsys.readouterr().out
        assert main(base + ["--budget", "0.3"]) == 0
        tight = capsys.readouterr().out
        # only the fast models fit under 0.3
        assert "LOC=loc-0" in tight and "VQA=vqa-0" in tight
        assert free != tight

    def test_unknown_sample_is_data_error(self, data_dir, checkpoint, capsys):
        rc = main(["select", "ghost", "--data", str(data_dir), "--checkpoint", str(checkpoint)])
        assert rc == 3
        assert "ghost" in capsys.readouterr().err

    def test_impossible_budget_is_numeric_error(self, data_dir, checkpoint):
        sid = first_sample_id(data_dir)
        rc = main(
            [
                "select",
                sid,
                "--data",
                str(data_dir),
                "--checkpoint",
                str(checkpoint),
                "--budget",
                "0.01",
            ]
        )
        assert rc == 4

    def test_topk_zero_is_usage_error(self, data_dir, checkpoint):
        sid = first_sample_id(data_dir)
        rc = main(
            ["select", sid, "--data", str(data_dir), "--checkpoint", str(checkpoint), "--topk", "0"]
        )
        assert rc == 2


class TestDataDirDefault:
    def test_env_var_supplies_data_dir(self, data_dir, checkpoint, monkeypatch, capsys):
        monkeypatch.setenv("M3_DATA_DIR", str(data_dir))
        rc = main(["eval", "--checkpoint", str(checkpoint)])
        assert rc == 0
        assert "Full" in capsys.readouterr().out

    def test_no_data_dir_is_usage_error(self, monkeypatch, capsys):
        monkeypatch.delenv("M3_DATA_DIR", raising=False)
        rc = main(["eval", "--methods", "random"])
        assert rc == 2
        assert "M3_DATA_DIR" in capsys.readouterr().err


class TestDeterminism:
    def run_pipeline(self, root):
        data = root / "data"
        ck = root / "ck.json"
        report = root / "report.csv"
        assert main(["gen", SPEC, "--out", str(data)]) == 0
        assert main(["train", "--data", str(data), "--out", str(ck)] + FAST_TRAIN) == 0
        assert (
            main(
                [
                    "eval",
                    "--data",
                    str(data),
                    "--methods",
                    "random,global_best,m3",
                    "--checkpoint",
                    str(ck),
                    "--out",
                    str(report),
                ]
            )
            == 0
        )
        return data, ck, report

    def test_pipeline_twice_byte_identical(self, tmp_path):
        a_data, a_ck, a_report = self.run_pipeline(tmp_path / "a")
        b_data, b_ck, b_report = self.run_pipeline(tmp_path / "b")
        for name in DATASET_FILES:
            assert (a_data / name).read_bytes() == (b_data / name).read_bytes(), name
        assert a_ck.read_bytes() == b_ck.read_bytes()
        assert a_report.read_bytes() == b_report.read_bytes()
        history_a = a_ck.with_suffix(".history.csv")
        history_b = b_ck.with_suffix(".history.csv")
        assert history_a.read_bytes() == history_b.read_bytes()
