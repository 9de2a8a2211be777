"""Command-line surface: subcommands, exit codes, files, determinism."""

import csv
import json

import numpy as np
import pytest

from ballconv.cli import main
from ballconv.verify import VerifyReport

SPHERE_OFF_HEADER = "OFF\n{nv} {nf} 0\n"


def write_sphere_off(path, n_strips=12):
    """Crude UV-sphere mesh fixture."""
    verts = [(0.0, 0.0, 1.0)]
    for i in range(1, n_strips):
        phi = np.pi * i / n_strips
        for j in range(n_strips):
            th = 2 * np.pi * j / n_strips
            verts.append((np.sin(phi) * np.cos(th), np.sin(phi) * np.sin(th), np.cos(phi)))
    verts.append((0.0, 0.0, -1.0))
    faces = []
    for j in range(n_strips):
        faces.append((0, 1 + j, 1 + (j + 1) % n_strips))
    for i in range(n_strips - 2):
        row0 = 1 + i * n_strips
        row1 = 1 + (i + 1) * n_strips
        for j in range(n_strips):
            a, b = row0 + j, row0 + (j + 1) % n_strips
            c, d = row1 + j, row1 + (j + 1) % n_strips
            faces.append((a, b, c))
            faces.append((b, d, c))
    last = len(verts) - 1
    row = 1 + (n_strips - 2) * n_strips
    for j in range(n_strips):
        faces.append((last, row + (j + 1) % n_strips, row + j))
    with open(path, "w") as fh:
        fh.write(SPHERE_OFF_HEADER.format(nv=len(verts), nf=len(faces)))
        for v in verts:
            fh.write(f"{v[0]:.8f} {v[1]:.8f} {v[2]:.8f}\n")
        for f in faces:
            fh.write(f"3 {f[0]} {f[1]} {f[2]}\n")


@pytest.fixture
def sphere_off(tmp_path):
    path = tmp_path / "sphere.off"
    write_sphere_off(path)
    return path


class TestMoments:
    def test_lsq_writes_file_and_reports_error(self, sphere_off, tmp_path, capsys):
        out = tmp_path / "m.json"
        rc = main(["moments", str(sphere_off), "--k-samples", "1000",
                   "--out", str(out), "--seed", "3"])
        assert rc == 0
        text = capsys.readouterr().out
        assert "# seed: 3" in text
        assert "reconstruction error" in text
        record = json.loads(out.read_text())
        assert record["N"] == 6 and len(record["c"]) == 100
        # a sphere's fitted coefficients concentrate in the l = 0 modes
        from ballconv.layout import get_layout

        layout = get_layout(6)
        c = np.asarray(record["c"])
        l0 = [layout.a_index(n, 0, 0) for n in (0, 2, 4, 6)]
        rest = np.delete(np.abs(c), l0)
        assert np.abs(c[l0]).max() > 10 * rest.max()

    def test_quadrature_error_strictly_larger(self, sphere_off, tmp_path, capsys):
        def run(method):
            rc = main(["moments", str(sphere_off), "--k-samples", "1000",
                       "--method", method, "--seed", "3"])
            assert rc == 0
            out = capsys.readouterr().out
            return float(out.split("reconstruction error:")[1].split()[0])

        lsq = run("lsq")
        quad = run("quadrature")
        assert lsq < quad

    def test_binary_output(self, sphere_off, tmp_path):
        out = tmp_path / "m.bin"
        rc = main(["moments", str(sphere_off), "--k-samples", "500",
                   "--out", str(out), "--format", "binary"])
        assert rc == 0
        assert out.read_bytes()[:4] == b"ZMV1"

    def test_missing_file_exits_2(self, capsys):
        rc = main(["moments", "no-such-file.off"])
        assert rc == 2
        assert "error" in capsys.readouterr().err


class TestVerify:
    def test_fast_suites_pass_and_report_roundtrips(self, tmp_path, capsys):
        out = tmp_path / "report.json"
        rc = main(["verify", "--suite", "pinv", "--seed", "1", "--out", str(out)])
        assert rc == 0
        text = capsys.readouterr().out
        assert "# seed: 1" in text and "PASS" in text
        report = VerifyReport.from_dict(json.loads(out.read_text()))
        assert report.all_passed
        assert report.to_dict() == json.loads(out.read_text())

    def test_corrupted_radial_coefficient_fails_orthogonality(self, tmp_path, capsys):
        out = tmp_path / "report.json"
        rc = main(["verify", "--suite", "orthogonality", "--corrupt-q",
                   "--out", str(out)])
        assert rc == 1
        assert "FAIL" in capsys.readouterr().out
        report = json.loads(out.read_text())  # report written despite failure
        assert not report["all_passed"]

    def test_corruption_hook_restores_state(self):
        rc = main(["verify", "--suite", "orthogonality"])
        assert rc == 0


class TestSymmetry:
    def test_csv_output(self, sphere_off, tmp_path):
        out = tmp_path / "sym.csv"
        rc = main(["symmetry", str(sphere_off), "--k-samples", "2500",
                   "--out", str(out)])
        assert rc == 0
        with open(out) as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["axis_alpha", "axis_beta", "power", "normalized"]
        assert len(rows) == 5  # four tetrahedral axes
        values = [float(r[3]) for r in rows[1:]]
        assert all(v > 0.9 for v in values)  # a sphere is symmetric everywhere


@pytest.fixture(scope="module")
def tiny_training(tmp_path_factory):
    """Train a small model once; reused by classify/descriptor/retrieve tests."""
    root = tmp_path_factory.mktemp("train")
    ckpt = root / "ck.json"
    rc = main(["train", "--data", "synth:5", "--k-samples", "384",
               "--kernels", "4", "--shells", "5", "--epochs", "4",
               "--out", str(ckpt), "--seed", "5", "--threads", "2"])
    assert rc == 0
    return root, ckpt


class TestTrainAndRetrieve:
    def test_checkpoint_and_history_written(self, tiny_training):
        root, ckpt = tiny_training
        assert ckpt.exists()
        hist = json.loads((root / "ck-history.json").read_text())
        assert hist["seed"] == 5
        assert len(hist["loss"]) == 4
        assert hist["test_accuracy"][-1] > 0.5

    def test_classify(self, tiny_training, capsys):
        _, ckpt = tiny_training
        rc = main(["classify", "--ckpt", str(ckpt), "--data", "synth:5",
                   "--k-samples", "384", "--seed", "5"])
        assert rc == 0
        out = capsys.readouterr().out
        acc = float(out.split("accuracy on test split:")[1].split()[0])
        assert acc > 0.5

    def test_descriptor_store_and_retrieve(self, tiny_training, tmp_path, capsys):
        _, ckpt = tiny_training
        store = tmp_path / "store.jsonl"
        rc = main(["descriptor", "--ckpt", str(ckpt), "--data", "synth:5",
                   "--k-samples", "384", "--out", str(store), "--seed", "5"])
        assert rc == 0
        records = [json.loads(line) for line in store.read_text().splitlines()]
        assert all({"id", "label", "vector"} <= set(r) for r in records)

        capsys.readouterr()
        rc = main(["retrieve", "--store", str(store), "--query", records[0]["id"]])
        assert rc == 0
        out = capsys.readouterr().out
        first = out.splitlines()[2]  # header, query line, then rank 1
        assert records[0]["id"] in first and "1.000000" in first
        assert "mAP" in out

    def test_retrieve_unknown_query_exits_2(self, tiny_training, tmp_path, capsys):
        _, ckpt = tiny_training
        store = tmp_path / "store.jsonl"
        main(["descriptor", "--ckpt", str(ckpt), "--data", "synth:5",
              "--k-samples", "384", "--out", str(store), "--seed", "5"])
        rc = main(["retrieve", "--store", str(store), "--query", "nope"])
        assert rc == 2


class TestPlotData:
    def test_recon_vs_n_csv_and_figure(self, tmp_path, capsys):
        out_dir = tmp_path / "plots"
        rc = main(["plot-data", "--experiment", "recon-vs-n", "--seed", "2",
                   "--k-samples", "512", "--out-dir", str(out_dir)])
        assert rc == 0
        csv_path = out_dir / "recon-vs-n.csv"
        png_path = out_dir / "recon-vs-n.png"
        assert csv_path.exists() and png_path.exists()
        with open(csv_path) as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["experiment", "param", "value"]
        lsq = {int(r[1].split(":")[1]): float(r[2]) for r in rows[1:]
               if r[1].startswith("lsq")}
        series = [lsq[n] for n in sorted(lsq)]
        assert all(b <= a * (1 + 1e-9) for a, b in zip(series, series[1:]))

    def test_dataloss_zero_removal_equals_baseline(self, tiny_training, tmp_path, capsys):
        _, ckpt = tiny_training
        out_dir = tmp_path / "plots"
        rc = main(["plot-data", "--experiment", "dataloss", "--ckpt", str(ckpt),
                   "--data", "synth:5", "--k-samples", "384", "--seed", "5",
                   "--out-dir", str(out_dir)])
        assert rc == 0
        with open(out_dir / "dataloss.csv") as fh:
            rows = {r[1]: float(r[2]) for r in list(csv.reader(fh))[1:]}
        capsys.readouterr()
        rc = main(["classify", "--ckpt", str(ckpt), "--data", "synth:5",
                   "--k-samples", "384", "--seed", "5"])
        baseline = float(capsys.readouterr().out.split("accuracy on test split:")[1].split()[0])
        assert rows["0"] == pytest.approx(baseline, abs=1e-12)
        assert (out_dir / "dataloss.png").exists()

    def test_dataloss_without_checkpoint_exits_2(self, tmp_path, capsys):
        out_dir = tmp_path / "plots"
        rc = main(["plot-data", "--experiment", "dataloss", "--out-dir", str(out_dir)])
        assert rc == 2
        assert not out_dir.exists()  # nothing created on a usage error


class TestFeatureHooks:
    def test_axial_symmetry_feature_training(self, tmp_path, capsys):
        ckpt = tmp_path / "sym.json"
        rc = main(["train", "--data", "synth:7", "--k-samples", "384",
                   "--features", "axial-symmetry", "--epochs", "3",
                   "--out", str(ckpt), "--seed", "7"])
        assert rc == 0
        out = capsys.readouterr().out
        assert "final test accuracy" in out
        cfg = json.loads(ckpt.read_text())["config"]
        assert cfg["features"] == "axial-symmetry"

    def test_threads_env_default(self, monkeypatch):
        from ballconv.cli import _default_threads

        monkeypatch.setenv("BALLCONV_THREADS", "3")
        assert _default_threads() == 3
        monkeypatch.setenv("BALLCONV_THREADS", "junk")
        assert _default_threads() >= 1


class TestConfigFile:
    def test_config_sets_defaults_flags_win(self, tmp_path, sphere_off, capsys):
        cfg = tmp_path / "ballconv.conf"
        cfg.write_text("seed = 9\nk_samples = 256\n")
        rc = main(["--config", str(cfg), "moments", str(sphere_off)])
        assert rc == 0
        out = capsys.readouterr().out
        assert "# seed: 9" in out and "K: 256" in out

        rc = main(["--config", str(cfg), "moments", str(sphere_off), "--seed", "4"])
        assert rc == 0
        assert "# seed: 4" in capsys.readouterr().out

    def test_determinism_given_seed(self, sphere_off, capsys):
        outs = []
        for _ in range(2):
            rc = main(["moments", str(sphere_off), "--k-samples", "500", "--seed", "8"])
            assert rc == 0
            outs.append(capsys.readouterr().out)
        assert outs[0] == outs[1]
