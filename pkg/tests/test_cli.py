"""Command-line interface: subcommands, manifests, outputs and exit codes."""
import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from meshfree.cli import EXIT_INVALID, EXIT_IO, EXIT_NUMERICAL, EXIT_OK, main
from meshfree.nemdo.checkpoint import load_checkpoint
from meshfree.nemdo.dataset import load_dataset


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("gen")
    assert run("--out", out, "--seed", 3, "gen-data", "--count", 300, "--nx", 10) == EXIT_OK
    return out / "dataset.bin"


class TestGenData:
    def test_writes_dataset_and_manifest(self, dataset):
        ds = load_dataset(dataset)
        assert len(ds) == 300 and ds.stencil_n == 10
        man = json.loads((dataset.parent / "manifest.json").read_text())
        assert man["subcommand"] == "gen-data" and man["seed"] == 3
        assert man["config"]["count"] == 300

    def test_deterministic(self, dataset, tmp_path):
        assert run("--out", tmp_path, "--seed", 3, "gen-data", "--count", 300, "--nx", 10) == EXIT_OK
        assert (tmp_path / "dataset.bin").read_bytes() == dataset.read_bytes()

    def test_invalid_count(self, tmp_path):
        assert run("--out", tmp_path, "gen-data", "--count", 0) == EXIT_INVALID


class TestTrain:
    def test_tiny_run_and_resume(self, dataset, tmp_path):
        args = ("--out", tmp_path, "--seed", 1, "train", "--dataset", dataset, "--f-h", 6,
                "--batch-size", 64)
        assert run(*args, "--epochs", 2) == EXIT_OK
        log = list(csv.DictReader((tmp_path / "train_log.csv").open()))
        assert [int(r["epoch"]) for r in log] == [0, 1]
        params, cfg = load_checkpoint(tmp_path / "model.ckpt")
        assert cfg.f_h == 6 and np.all(np.isfinite(params))
        man = json.loads((tmp_path / "manifest.json").read_text())
        assert man["target_moments"] == [1.0, 0.0, 0.0, 0.0, 0.0]

        assert run(*args, "--epochs", 4, "--resume") == EXIT_OK
        log = list(csv.DictReader((tmp_path / "train_log.csv").open()))
        assert [int(r["epoch"]) for r in log] == [0, 1, 2, 3]

    def test_laplacian_targets(self, dataset, tmp_path):
        assert run("--out", tmp_path, "train", "--dataset", dataset, "--operator", "laplacian",
                   "--f-h", 4, "--epochs", 1) == EXIT_OK
        details = json.loads((tmp_path / "train_config.json").read_text())
        assert details["target_moments"] == [0.0, 0.0, 1.0, 0.0, 1.0]

    def test_resume_without_state(self, dataset, tmp_path):
        assert run("--out", tmp_path, "train", "--dataset", dataset, "--epochs", 1, "--resume") == EXIT_IO

    def test_missing_dataset(self, tmp_path):
        assert run("--out", tmp_path, "train", "--dataset", tmp_path / "nope.bin") == EXIT_IO

    def test_bad_order(self, dataset, tmp_path):
        assert run("--out", tmp_path, "train", "--dataset", dataset, "--operator", "laplacian",
                   "--p", 1) == EXIT_INVALID


class TestDiagnose:
    def test_nemdo_needs_checkpoint(self, tmp_path):
        assert run("--out", tmp_path, "diagnose", "--suite", "moments", "--providers", "nemdo") == EXIT_INVALID

    def test_unknown_provider(self, tmp_path):
        assert run("--out", tmp_path, "diagnose", "--suite", "moments", "--providers", "fd") == EXIT_INVALID

    def test_bad_flag_exits_invalid(self, tmp_path):
        with pytest.raises(SystemExit) as info:
            run("--out", tmp_path, "diagnose", "--suite", "nothing")
        assert info.value.code == EXIT_INVALID

    def test_moments(self, tmp_path):
        assert run("--out", tmp_path, "diagnose", "--suite", "moments", "--providers", "labfm,sph-wendland",
                   "--operator", "dx,laplacian", "--s", "1/16", "--clouds", 1) == EXIT_OK
        rows = list(csv.DictReader((tmp_path / "moments.csv").open()))
        assert len(rows) == 20
        labfm = [float(r["mae"]) for r in rows if r["provider"] == "labfm-p2"]
        assert max(labfm) < 1e-10
        assert json.loads((tmp_path / "moments.json").read_text())["spacing"] == 1 / 16

    def test_spectrum(self, tmp_path):
        assert run("--out", tmp_path, "diagnose", "--suite", "spectrum", "--providers", "labfm",
                   "--operator", "laplacian", "--s", "1/12") == EXIT_OK
        rows = list(csv.reader((tmp_path / "spectrum_labfm-p2_laplacian.csv").open()))
        assert rows[0] == ["re", "im", "provider"] and len(rows) == 145

    def test_modal(self, tmp_path):
        assert run("--out", tmp_path, "diagnose", "--suite", "modal", "--providers", "sph-quintic",
                   "--s", "1/12", "--k-points", 8) == EXIT_OK
        rows = list(csv.DictReader((tmp_path / "modal_dx.csv").open()))
        assert len(rows) == 16 and float(rows[-1]["k_hat"]) == 1.0

    def test_nemdo_checkpoint(self, dataset, tmp_path):
        assert run("--out", tmp_path / "t", "train", "--dataset", dataset, "--f-h", 4, "--epochs", 1) == EXIT_OK
        assert run("--out", tmp_path / "d", "diagnose", "--suite", "moments", "--providers", "nemdo",
                   "--checkpoint", tmp_path / "t" / "model.ckpt", "--operator", "dx,dy", "--s", "1/16",
                   "--clouds", 1) == EXIT_OK
        rows = list(csv.DictReader((tmp_path / "d" / "moments.csv").open()))
        assert {r["operator"] for r in rows} == {"dx", "dy"}

    def test_short_tgv(self, tmp_path):
        assert run("--out", tmp_path, "diagnose", "--suite", "tgv", "--providers", "labfm", "--s", "1/16",
                   "--end-time", 0.02) == EXIT_OK
        err = list(csv.DictReader((tmp_path / "tgv_labfm-p2" / "tgv_error.csv").open()))
        assert len(err) == 11 and float(err[-1]["t"]) == pytest.approx(0.02)
        assert float(err[-1]["err"]) < 0.05

    def test_tgv_run_file_and_blow_up(self, tmp_path):
        rf = tmp_path / "run.json"
        rf.write_text(json.dumps({"end_time": 0.01, "growth_limit": 0.5}))
        assert run("--out", tmp_path, "diagnose", "--suite", "tgv", "--providers", "labfm", "--s", "1/16",
                   "--run-file", rf) == EXIT_NUMERICAL
        rf.write_text(json.dumps({"viscosity": 1}))
        assert run("--out", tmp_path, "diagnose", "--suite", "tgv", "--providers", "labfm", "--s", "1/16",
                   "--run-file", rf) == EXIT_INVALID


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "meshfree.cli", "--out", str(tmp_path), "gen-data",
                           "--count", "50", "--nx", "8"], capture_output=True, text=True, timeout=120)
    assert proc.returncode == 0, proc.stderr
    assert "wrote 50 stencils" in proc.stdout
