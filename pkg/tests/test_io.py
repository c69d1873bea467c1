import hashlib
import json
from pathlib import Path

import numpy as np
import pytest

from vino import io
from vino.cli import (cmd_compare_integration, cmd_eval, cmd_generate,
                      cmd_mesh_study, cmd_train, main)
from vino.fno import FnoConfig, FnoModel
from vino.losses import LossKind
from vino.training import TrainConfig


def _dir_digest(path):
    digest = hashlib.sha256()
    for f in sorted(Path(path).rglob("*")):
        if f.is_file():
            digest.update(f.name.encode())
            digest.update(f.read_bytes())
    return digest.hexdigest()


class TestTensorFile:
    def test_round_trip_bitwise(self, tmp_path):
        rng = np.random.default_rng(0)
        arr = rng.standard_normal((3, 5, 2))
        arr[0, 0, 0] = -0.0
        arr[1, 1, 1] = 1e-308
        path = tmp_path / "t.vt"
        io.write_tensor(path, arr)
        back = io.read_tensor(path)
        assert back.shape == arr.shape
        assert arr.tobytes() == back.tobytes()

    def test_header_layout(self, tmp_path):
        arr = np.arange(6.0).reshape(2, 3)
        blob = io.tensor_to_bytes(arr)
        assert blob[:4] == b"VINO"
        assert blob[4] == 1 and blob[5] == 1 and blob[6] == 2
        assert len(blob) == 7 + 16 + 8 * 6

    def test_bad_magic_rejected(self):
        with pytest.raises(ValueError, match="magic"):
            io.tensor_from_bytes(b"XXXX" + bytes(20))

    def test_bad_dtype_rejected(self):
        blob = bytearray(io.tensor_to_bytes(np.ones(2)))
        blob[5] = 9
        with pytest.raises(ValueError, match="dtype"):
            io.tensor_from_bytes(bytes(blob))


class TestGenerate:
    def test_file_counts_small_1d(self, tmp_path):
        man = cmd_generate("antiderivative1d", 2, 1, (16,), 0, tmp_path)
        inputs = [f for f in man["files"] if f["role"] == "input"]
        targets = [f for f in man["files"] if f["role"] == "target"]
        assert len(inputs) == 3 and len(targets) == 3
        assert (tmp_path / "manifest.json").exists()
        for rec in man["files"]:
            arr = io.read_tensor(tmp_path / rec["path"])
            assert arr.shape == (16,)

    def test_same_seed_bitwise_identical_directories(self, tmp_path):
        cmd_generate("darcy2d", 2, 1, (9, 9), 123, tmp_path / "a")
        cmd_generate("darcy2d", 2, 1, (9, 9), 123, tmp_path / "b")
        assert _dir_digest(tmp_path / "a") == _dir_digest(tmp_path / "b")

    def test_manifest_records_default_length_scale(self, tmp_path):
        man = cmd_generate("antiderivative1d", 1, 1, (16,), 0, tmp_path)
        assert man["grf"]["length_scale"] == 0.1
        reread = io.read_manifest(tmp_path)
        assert reread["grf"]["length_scale"] == 0.1

    def test_elasticity_roles(self, tmp_path):
        man = cmd_generate("elasticity2d", 1, 0, (9, 5), 0, tmp_path)
        roles = {f["role"] for f in man["files"]}
        assert roles == {"coefficient", "traction", "target"}
        ds = io.load_dataset(tmp_path, "train")
        assert ds.targets.shape == (1, 2, 5, 9)

    def test_hyperelastic_has_no_targets(self, tmp_path):
        man = cmd_generate("hyperelastic2d", 2, 0, (9, 5), 0, tmp_path)
        assert all(f["role"] != "target" for f in man["files"])
        ds = io.load_dataset(tmp_path, "train", need_targets=True)
        assert ds.targets is None

    def test_unknown_problem_rejected_before_writing(self, tmp_path):
        with pytest.raises(ValueError, match="unknown problem"):
            cmd_generate("heat3d", 1, 1, (8,), 0, tmp_path / "x")
        assert not (tmp_path / "x").exists()


class TestCheckpoint:
    def test_round_trip_bitwise(self, tmp_path):
        model = FnoModel(FnoConfig(2, 1, 1, width=4, modes=2, layers=2), seed=3)
        path = tmp_path / "m.ckpt"
        io.save_checkpoint(path, model, meta={"note": 1})
        loaded, header = io.load_checkpoint(path)
        assert header["meta"]["note"] == 1
        assert header["config"]["width"] == 4
        for name, p in model.named_parameters().items():
            assert np.array_equal(p.data, loaded.named_parameters()[name].data)

    def test_bad_file_rejected(self, tmp_path):
        path = tmp_path / "bad.ckpt"
        path.write_bytes(b"not a checkpoint")
        with pytest.raises(ValueError, match="checkpoint"):
            io.load_checkpoint(path)


@pytest.fixture(scope="module")
def tiny_1d_dataset(tmp_path_factory):
    d = tmp_path_factory.mktemp("ds1d")
    cmd_generate("antiderivative1d", 6, 3, (17,), 5, d)
    return d


class TestTrainEvalCommands:
    def test_train_writes_checkpoint_and_history(self, tiny_1d_dataset, tmp_path):
        ckpt = tmp_path / "model.ckpt"
        kind = LossKind("vino")
        config = TrainConfig(iterations=4, batch_size=3, seed=1, loss=kind)
        model, hist = cmd_train(tiny_1d_dataset, kind, config, ckpt,
                                width=4, modes=4, layers=1)
        assert ckpt.exists()
        assert Path(str(ckpt) + ".history.csv").exists()
        assert len(hist) == 4

    def test_vino_training_ignores_missing_targets(self, tmp_path):
        d = tmp_path / "notargets"
        cmd_generate("antiderivative1d", 6, 2, (17,), 6, d)
        for f in d.glob("*.target.vt"):
            f.unlink()
        manifest = io.read_manifest(d)
        manifest["files"] = [r for r in manifest["files"] if r["role"] != "target"]
        io.write_manifest(d, manifest)
        kind = LossKind("vino")
        config = TrainConfig(iterations=2, batch_size=3, seed=0, loss=kind)
        model, hist = cmd_train(d, kind, config, tmp_path / "m.ckpt",
                                width=4, modes=4, layers=1)
        assert len(hist) == 2
        with pytest.raises(ValueError, match="targets"):
            cmd_train(d, LossKind("data"),
                      TrainConfig(iterations=1, batch_size=3, loss=LossKind("data")),
                      tmp_path / "m2.ckpt", width=4, modes=4, layers=1)

    def test_eval_report_sections_and_consistency(self, tiny_1d_dataset, tmp_path):
        ckpt = tmp_path / "model.ckpt"
        kind = LossKind("vino")
        config = TrainConfig(iterations=3, batch_size=3, seed=2, loss=kind)
        cmd_train(tiny_1d_dataset, kind, config, ckpt, width=4, modes=4, layers=1)
        report = cmd_eval(ckpt, tiny_1d_dataset, tmp_path / "report")
        assert set(report) == {"train", "test"}
        assert "% ± " in report["test"]["mean_pm_std"]
        rows = (tmp_path / "report.csv").read_text().strip().split("\n")[1:]
        test_errors = [float(r.split(",")[2]) for r in rows if r.startswith("test,")]
        assert abs(np.mean(test_errors) - report["test"]["mean"]) < 1e-12
        saved = json.loads((tmp_path / "report.json").read_text())
        assert saved["train"]["count"] == 6

    def test_eval_channel_mismatch_enumerated(self, tmp_path):
        d2 = tmp_path / "ds2d"
        cmd_generate("elasticity2d", 2, 1, (9, 5), 0, d2)
        model = FnoModel(FnoConfig(2, 1, 1, width=4, modes=2, layers=1), seed=0)
        ckpt = tmp_path / "m.ckpt"
        io.save_checkpoint(ckpt, model)
        with pytest.raises(ValueError, match="in channels|in /"):
            cmd_eval(ckpt, d2, tmp_path / "r")


class TestStudies:
    def test_compare_integration_structure(self, tmp_path):
        report = cmd_compare_integration(grid=8, seed=0, out=tmp_path / "integ",
                                         n_train=6, n_test=3, iterations=2,
                                         width=4, modes=4, batch_size=3)
        assert len(report["methods"]) == 4
        assert set(report["methods"]) == {"midpoint", "trapezoid", "simpson", "vino"}
        assert report["methods"]["vino"]["ratio_vs_vino"] == 1.0
        csv = (tmp_path / "integ" / "integration_report.csv").read_text()
        assert len(csv.strip().split("\n")) == 5

    def test_mesh_study_structure_and_determinism(self, tmp_path):
        kw = dict(sizes=(8,), methods=("vino", "strong"), seed=1,
                  n_train=6, n_test=3, iterations=2, width=4, modes=4, batch_size=3)
        r1 = cmd_mesh_study(out=tmp_path / "a", **kw)
        r2 = cmd_mesh_study(out=tmp_path / "b", **kw)
        assert len(r1["cells"]) == 2
        csv_a = (tmp_path / "a" / "mesh_study.csv").read_bytes()
        csv_b = (tmp_path / "b" / "mesh_study.csv").read_bytes()
        assert csv_a == csv_b
        rows = csv_a.decode().strip().split("\n")
        assert len(rows) == 1 + 1 * 2  # header + |sizes| x |methods|

    def test_mesh_study_rejects_tiny_sizes(self, tmp_path):
        with pytest.raises(ValueError, match="at least 8"):
            cmd_mesh_study(sizes=(4,), methods=("vino",), out=tmp_path / "x")

    def test_mesh_study_large_sizes_need_flag(self, tmp_path):
        with pytest.raises(ValueError, match="allow-large"):
            cmd_mesh_study(sizes=(128,), methods=("vino",), out=tmp_path / "x")


class TestMainEntry:
    def test_cli_generate_and_train(self, tmp_path, capsys):
        d = tmp_path / "ds"
        rc = main(["generate", "--problem", "antiderivative1d", "--n-train", "4",
                   "--n-test", "2", "--grid", "17", "--seed", "3", "--out", str(d)])
        assert rc == 0
        rc = main(["train", str(d), "--loss", "vino", "--iters", "2", "--batch", "2",
                   "--width", "4", "--modes", "4", "--layers", "1",
                   "--out", str(tmp_path / "m.ckpt")])
        assert rc == 0
        rc = main(["eval", str(tmp_path / "m.ckpt"), str(d),
                   "--out", str(tmp_path / "rep")])
        assert rc == 0
        assert "test" in json.loads((tmp_path / "rep.json").read_text())

    def test_cli_error_paths_return_nonzero(self, tmp_path, capsys):
        rc = main(["train", str(tmp_path / "missing"), "--loss", "vino",
                   "--out", str(tmp_path / "m.ckpt")])
        assert rc == 2
        err = capsys.readouterr().err
        assert "error:" in err
