import json

import numpy as np
import pytest

from qugeo import io
from qugeo.cli import main
from qugeo.data import WORKERS_ENV, split_sizes
from qugeo.train import Checkpoint


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    assert main(["gen-data", "--samples", "6", "--seed", "5", "--out", str(root / "raw")]) == 0
    assert main(["scale-data", "--method", "physics", "--in", str(root / "raw"),
                 "--out", str(root / "phys")]) == 0
    assert main(["scale-data", "--method", "dsample", "--in", str(root / "raw"),
                 "--out", str(root / "ds")]) == 0
    return root


def test_gen_data_single_sample_shapes(tmp_path):
    assert main(["gen-data", "--samples", "1", "--out", str(tmp_path)]) == 0
    m = io.read_manifest(tmp_path)
    shapes = {t["name"]: t["shape"] for t in m.tensors}
    assert shapes == {"velocity": [1, 70, 70], "seismic": [1, 5, 1000, 70]}
    assert all(t["dtype"] == "float32" for t in m.tensors)
    seis = io.read_tensor(tmp_path, m, "seismic")
    assert np.all(np.isfinite(seis)) and np.any(seis)


def test_gen_data_deterministic(tmp_path, workspace):
    assert main(["gen-data", "--samples", "6", "--seed", "5", "--out", str(tmp_path)]) == 0
    for name in ("velocity.f32", "seismic.f32", "manifest.json"):
        assert (tmp_path / name).read_bytes() == (workspace / "raw" / name).read_bytes()


def test_gen_data_with_workers_matches_serial(tmp_path, workspace, monkeypatch):
    monkeypatch.setenv(WORKERS_ENV, "2")
    assert main(["gen-data", "--samples", "6", "--seed", "5", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "seismic.f32").read_bytes() == \
        (workspace / "raw" / "seismic.f32").read_bytes()


def test_split_boundary():
    assert split_sizes(500) == {"train": 400, "test": 100}
    assert split_sizes(125) == {"train": 100, "test": 25}


def test_manifest_contents(workspace):
    m = io.read_manifest(workspace / "raw")
    assert m.split == split_sizes(6)
    assert m.provenance["seed"] == 5 and m.provenance["wavelet_hz"] == 15.0
    n = m.normalization
    assert n["v_min"] < n["v_max"] and n["pixel_scale"] > 0


def test_scale_data_outputs(workspace):
    phys = io.read_manifest(workspace / "phys")
    ds = io.read_manifest(workspace / "ds")
    assert phys.provenance["wavelet_hz"] == 8.0
    assert phys.provenance["method"] == "physics"
    assert ds.provenance["method"] == "nearest"
    for m in (phys, ds):
        shapes = {t["name"]: t["shape"] for t in m.tensors}
        assert shapes == {"seismic": [6, 256], "velocity": [6, 8, 8]}
    a = io.read_tensor(workspace / "phys", phys, "seismic")
    b = io.read_tensor(workspace / "ds", ds, "seismic")
    assert not np.array_equal(a, b)
    raw = io.read_manifest(workspace / "raw")
    full = io.read_tensor(workspace / "raw", raw, "velocity")
    idx = np.rint(np.arange(8) * 69 / 7).astype(int)
    np.testing.assert_array_equal(io.read_tensor(workspace / "ds", ds, "velocity"),
                                  full[:, idx][:, :, idx])
    np.testing.assert_allclose(io.read_tensor(workspace / "phys", phys, "velocity").mean(),
                               full.mean(), rtol=1e-6)


def test_train_defaults_give_576_parameters(tmp_path, workspace):
    out = tmp_path / "run"
    assert main(["train", "--data", str(workspace / "phys"), "--epochs", "1",
                 "--out", str(out)]) == 0
    ck = Checkpoint.load(out / "checkpoint.json")
    assert ck.n_params == 576 and ck.decoder == "layer"
    raw = json.loads((out / "checkpoint.json").read_text())
    assert raw["n_params"] == 576 and raw["run_metadata"] == {"Batch": 0, "Extra Qubits": 0}
    header, rows = io.read_csv(out / "history.csv")
    assert header == ["epoch", "train_loss", "test_mse", "test_ssim"]
    assert len(rows) == 1


def test_train_deterministic(tmp_path, workspace):
    for name in ("a", "b"):
        assert main(["train", "--data", str(workspace / "phys"), "--epochs", "2", "--seed", "3",
                     "--decoder", "pixel", "--out", str(tmp_path / name)]) == 0
    assert (tmp_path / "a" / "checkpoint.json").read_bytes() == \
        (tmp_path / "b" / "checkpoint.json").read_bytes()


def test_train_batch_qubits_metadata(tmp_path, workspace):
    out = tmp_path / "run"
    assert main(["train", "--data", str(workspace / "phys"), "--epochs", "1",
                 "--batch-qubits", "1", "--train-size", "4", "--out", str(out)]) == 0
    raw = json.loads((out / "checkpoint.json").read_text())
    assert raw["run_metadata"]["Extra Qubits"] == 1
    assert raw["run_metadata"]["Batch"] == 2


@pytest.fixture(scope="module")
def trained(workspace):
    out = workspace / "trained"
    assert main(["train", "--data", str(workspace / "phys"), "--epochs", "2",
                 "--blocks", "2", "--minibatch", "2", "--out", str(out)]) == 0
    return out / "checkpoint.json"


def test_eval_outputs(tmp_path, workspace, trained):
    assert main(["eval", "--checkpoint", str(trained), "--data", str(workspace / "phys"),
                 "--out", str(tmp_path), "--profile-column", "3"]) == 0
    metrics = json.loads((tmp_path / "metrics.json").read_text())
    assert set(metrics) == {"mse", "ssim", "n_samples"}
    assert metrics["n_samples"] == split_sizes(6)["test"]
    preds = io.read_npy(tmp_path / "predictions.npy")
    assert preds.dtype == np.float32 and preds.shape == (metrics["n_samples"], 8, 8)
    header, rows = io.read_csv(tmp_path / "profile.csv")
    assert header == ["depth", "ground_truth", "predicted"]
    assert len(rows) == 8 and [r[0] for r in rows] == list(range(8))
    assert all(1000 < r[1] < 5000 for r in rows)


def test_eval_self_test_scores_one(tmp_path, workspace, trained):
    assert main(["eval", "--checkpoint", str(trained), "--data", str(workspace / "phys"),
                 "--out", str(tmp_path), "--split", "train", "--self-test"]) == 0
    metrics = json.loads((tmp_path / "metrics.json").read_text())
    assert metrics["ssim"] == pytest.approx(1.0) and metrics["mse"] == 0


@pytest.mark.parametrize("argv, category", [
    (["scale-data", "--in", "/nonexistent/qugeo", "--out", "{tmp}/o"], "format"),
    (["train", "--data", "{tmp}", "--out", "{tmp}/o"], "format"),
    (["train", "--data", "{phys}", "--lr", "0", "--out", "{tmp}/o"], "configuration"),
    (["eval", "--checkpoint", "{tmp}/missing.json", "--data", "{phys}", "--out", "{tmp}"],
     "format"),
])
def test_errors_exit_nonzero_with_one_line(tmp_path, workspace, capsys, argv, category):
    argv = [a.format(tmp=tmp_path, phys=workspace / "phys") for a in argv]
    assert main(argv) != 0
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and err[0].startswith(f"error: {category}: ")


def test_bad_worker_env(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv(WORKERS_ENV, "many")
    assert main(["gen-data", "--samples", "1", "--out", str(tmp_path)]) == 2
    assert capsys.readouterr().err.startswith("error: configuration: ")
