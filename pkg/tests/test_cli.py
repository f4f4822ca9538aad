"""Operator surface: commands, artifacts, exit codes."""

import csv
import json
import os

import numpy as np
import pytest

from tinyrecurse.checkpoint import load_arrays
from tinyrecurse.cli import main
from tinyrecurse.data.io import load_manifest


def run(argv):
    return main(argv)


@pytest.fixture(scope="module")
def sudoku_dir(tmp_path_factory):
    d = str(tmp_path_factory.mktemp("data") / "sudoku4")
    assert run(["gen-data", "sudoku", "--size", "4", "--count", "6", "--test-count", "4",
                "--augment", "2", "--seed", "7", "--out", d]) == 0
    return d


@pytest.fixture(scope="module")
def trained(tmp_path_factory, sudoku_dir):
    out = str(tmp_path_factory.mktemp("run"))
    code = run(["train", "--data", sudoku_dir, "--out", out, "--variant", "trm",
                "--n", "2", "--T", "2", "--n-sup", "3", "--layers", "1", "--width", "16",
                "--net", "mixer", "--batch-size", "4", "--lr", "1e-3", "--warmup", "5",
                "--steps", "6", "--seed", "1"])
    assert code == 0
    return out


class TestGenData:
    def test_counts_and_manifest(self, sudoku_dir):
        manifest = load_manifest(sudoku_dir)
        assert manifest["splits"]["train"]["count"] == 12
        assert manifest["splits"]["test"]["count"] == 8
        assert manifest["seed"] == 7
        assert "config_hash" in manifest

    def test_rerun_same_seed_byte_identical(self, tmp_path):
        outs = []
        for name in ("a", "b"):
            d = str(tmp_path / name)
            assert run(["gen-data", "sudoku", "--size", "4", "--count", "3", "--test-count", "2",
                        "--augment", "1", "--seed", "5", "--out", d]) == 0
            outs.append(d)
        for fn in ("train.jsonl", "test.jsonl", "manifest.json"):
            with open(os.path.join(outs[0], fn), "rb") as fa, open(os.path.join(outs[1], fn), "rb") as fb:
                assert fa.read() == fb.read()

    def test_zero_count_gives_empty_dataset_with_manifest(self, tmp_path):
        d = str(tmp_path / "empty")
        assert run(["gen-data", "sudoku", "--size", "4", "--count", "0", "--test-count", "0",
                    "--augment", "1", "--seed", "0", "--out", d]) == 0
        manifest = load_manifest(d)
        assert manifest["splits"]["train"]["count"] == 0
        assert os.path.exists(os.path.join(d, "train.jsonl"))

    def test_existing_output_without_force_errors(self, tmp_path):
        d = str(tmp_path / "dup")
        args = ["gen-data", "sudoku", "--size", "4", "--count", "1", "--test-count", "1",
                "--augment", "1", "--seed", "0", "--out", d]
        assert run(args) == 0
        assert run(args) == 2
        assert run(args + ["--force"]) == 0

    def test_maze_gen(self, tmp_path):
        d = str(tmp_path / "maze")
        assert run(["gen-data", "maze", "--height", "12", "--width", "12", "--min-path-len", "40",
                    "--count", "3", "--test-count", "2", "--augment", "4", "--seed", "0",
                    "--out", d]) == 0
        assert load_manifest(d)["task"] == "maze"

    def test_arc_requires_input(self, tmp_path):
        assert run(["gen-data", "arc", "--out", str(tmp_path / "x")]) == 1

    def test_arc_ingest(self, tmp_path):
        src = tmp_path / "tasks.json"
        grid = [[1, 2], [3, 4]]
        with open(src, "w") as f:
            json.dump({"t0": {"train": [{"input": grid, "output": grid}],
                              "test": [{"input": grid, "output": grid}]}}, f)
        d = str(tmp_path / "arc")
        assert run(["gen-data", "arc", "--input", str(src), "--augment", "3", "--seed", "0",
                    "--out", d]) == 0
        assert load_manifest(d)["n_puzzle_ids"] == 3

    def test_arc_bad_file_is_data_error(self, tmp_path):
        src = tmp_path / "bad.json"
        src.write_text("{broken")
        assert run(["gen-data", "arc", "--input", str(src), "--out", str(tmp_path / "o")]) == 2


class TestTrain:
    def test_artifacts(self, trained):
        assert os.path.exists(os.path.join(trained, "config.json"))
        assert os.path.exists(os.path.join(trained, "checkpoint.zip"))
        with open(os.path.join(trained, "metrics.jsonl")) as f:
            lines = [json.loads(l) for l in f]
        assert len(lines) == 6
        for k in ("step", "lr", "loss_answer", "loss_halt", "train_exact_match",
                  "mean_sup_steps", "net_calls", "wall_ms", "config_hash"):
            assert k in lines[0], k

    def test_checkpoint_embeds_config_hash_and_seed(self, trained):
        _, meta = load_arrays(os.path.join(trained, "checkpoint.zip"))
        with open(os.path.join(trained, "config.json")) as f:
            cfg = json.load(f)
        assert meta["config_hash"]
        assert meta["seed"] == cfg["train"]["seed"]

    def test_paper_main_and_baseline_configs_accepted(self, sudoku_dir, tmp_path):
        # main configuration: n=6, T=3, 2 layers; baseline: hrm n=2, T=2, 4 layers
        for name, flags in (
            ("main", ["--variant", "trm", "--n", "6", "--T", "3", "--layers", "2"]),
            ("base", ["--variant", "hrm", "--n", "2", "--T", "2", "--layers", "4"]),
        ):
            out = str(tmp_path / name)
            assert run(["train", "--data", sudoku_dir, "--out", out, *flags,
                        "--width", "16", "--net", "mixer", "--batch-size", "2",
                        "--steps", "2", "--seed", "0"]) == 0
            _, meta = load_arrays(os.path.join(out, "checkpoint.zip"))
            assert meta["schedule"]["n"] == int(flags[3])

    def test_resume_bitwise_identical(self, sudoku_dir, tmp_path):
        base = ["--data", sudoku_dir, "--variant", "trm", "--n", "1", "--T", "2",
                "--n-sup", "2", "--layers", "1", "--width", "16", "--net", "mixer",
                "--batch-size", "4", "--lr", "1e-3", "--warmup", "5", "--seed", "3"]
        full = str(tmp_path / "full")
        assert run(["train", *base, "--out", full, "--steps", "6"]) == 0
        half = str(tmp_path / "half")
        assert run(["train", *base, "--out", half, "--steps", "3"]) == 0
        assert run(["train", *base, "--out", half, "--steps", "6",
                    "--resume", os.path.join(half, "checkpoint.zip")]) == 0
        with open(os.path.join(full, "checkpoint.zip"), "rb") as a, \
             open(os.path.join(half, "checkpoint.zip"), "rb") as b:
            assert a.read() == b.read()

    def test_config_file_with_flag_override(self, sudoku_dir, trained, tmp_path):
        out = str(tmp_path / "cfgrun")
        cfg_path = os.path.join(trained, "config.json")
        assert run(["train", "--data", sudoku_dir, "--out", out, "--config", cfg_path,
                    "--steps", "1"]) == 0
        with open(os.path.join(out, "config.json")) as f:
            assert json.load(f)["train"]["max_steps"] == 1  # flag beat the file

    def test_missing_dataset_is_data_error(self, tmp_path):
        assert run(["train", "--data", str(tmp_path / "nope"), "--out", str(tmp_path / "o"),
                    "--steps", "1"]) == 2


class TestEval:
    def test_report_written_and_reproducible(self, sudoku_dir, trained, tmp_path):
        out1 = str(tmp_path / "r1.json")
        out2 = str(tmp_path / "r2.json")
        for out in (out1, out2):
            assert run(["eval", "--checkpoint", os.path.join(trained, "checkpoint.zip"),
                        "--data", sudoku_dir, "--out", out]) == 0
        with open(out1, "rb") as a, open(out2, "rb") as b:
            assert a.read() == b.read()
        with open(out1) as f:
            report = json.load(f)
        assert report["ema"] is True
        assert report["config_hash"] and "exact_match" in report

    def test_no_ema_differs_from_ema(self, sudoku_dir, trained, tmp_path):
        r1 = str(tmp_path / "ema.json")
        r2 = str(tmp_path / "raw.json")
        assert run(["eval", "--checkpoint", os.path.join(trained, "checkpoint.zip"),
                    "--data", sudoku_dir, "--out", r1]) == 0
        assert run(["eval", "--checkpoint", os.path.join(trained, "checkpoint.zip"),
                    "--data", sudoku_dir, "--out", r2, "--no-ema"]) == 0
        assert json.load(open(r1))["ema"] != json.load(open(r2))["ema"]

    def test_n_sup_override_and_per_sample_csv(self, sudoku_dir, trained, tmp_path):
        csv_path = str(tmp_path / "per.csv")
        assert run(["eval", "--checkpoint", os.path.join(trained, "checkpoint.zip"),
                    "--data", sudoku_dir, "--n-sup", "1", "--per-sample", csv_path]) == 0
        with open(csv_path) as f:
            rows = list(csv.reader(f))
        assert rows[0] == ["index", "base_id", "augmentation_id", "exact_match"]
        assert len(rows) == 9  # header + 8 test records

    def test_vocab_mismatch_exits_nonzero(self, trained, tmp_path):
        d = str(tmp_path / "sudoku9")
        assert run(["gen-data", "sudoku", "--size", "9", "--count", "1", "--test-count", "1",
                    "--augment", "1", "--clue-min", "34", "--clue-max", "45",
                    "--seed", "0", "--out", d]) == 0
        assert run(["eval", "--checkpoint", os.path.join(trained, "checkpoint.zip"),
                    "--data", d]) == 2


class TestAblate:
    def test_table_columns_and_oom_skip(self, sudoku_dir, tmp_path):
        out = str(tmp_path / "abl")
        cells = "trm,2,2,1;hrm,1,2,1;trm,12,6,2"
        assert run(["ablate", "--data", sudoku_dir, "--out", out, "--cells", cells,
                    "--steps", "2", "--seeds", "0", "--width", "16", "--heads", "2",
                    "--batch-size", "2", "--n-sup", "2", "--mem-limit", "0.0001"]) == 0
        with open(os.path.join(out, "table.csv")) as f:
            rows = list(csv.DictReader(f))
        assert len(rows) == 3
        by_cell = {r["cell"]: r for r in rows}
        trm = by_cell["trm-n2-T2-L1-mixer"]
        hrm = by_cell["hrm-n1-T2-L1-mixer"]
        big = by_cell["trm-n12-T6-L2-mixer"]
        assert int(trm["depth"]) == 2 * 3 * 1 and int(trm["nfp"]) == 1
        assert int(hrm["depth"]) == 2 * 2 * 1 and int(hrm["nfp"]) == 2
        assert big["note"].startswith("skipped") and big["test_exact_match"] == ""
        assert os.path.exists(os.path.join(out, "table.md"))
        assert os.path.exists(os.path.join(out, "loss_curves.svg"))

    def test_empty_grid_exits_zero(self, sudoku_dir, tmp_path):
        out = str(tmp_path / "abl0")
        assert run(["ablate", "--data", sudoku_dir, "--out", out, "--cells", "",
                    "--steps", "1"]) == 0
        with open(os.path.join(out, "table.csv")) as f:
            assert len(list(csv.DictReader(f))) == 0

    def test_bad_cell_is_usage_error(self, sudoku_dir, tmp_path):
        assert run(["ablate", "--data", sudoku_dir, "--out", str(tmp_path / "x"),
                    "--cells", "trm,2", "--steps", "1"]) == 1


class TestMisc:
    def test_inspect_checkpoint(self, trained, capsys):
        assert run(["inspect-checkpoint", os.path.join(trained, "checkpoint.zip")]) == 0
        out = capsys.readouterr().out
        assert "learnable parameters" in out and "param.head_out" in out

    def test_unknown_command_is_usage_error(self):
        assert run(["frobnicate"]) == 1

    def test_output_root_env(self, sudoku_dir, tmp_path, monkeypatch):
        monkeypatch.setenv("TINYRECURSE_OUT", str(tmp_path))
        assert run(["gen-data", "sudoku", "--size", "4", "--count", "1", "--test-count", "1",
                    "--augment", "1", "--seed", "0", "--out", "rooted"]) == 0
        assert os.path.exists(tmp_path / "rooted" / "manifest.json")
