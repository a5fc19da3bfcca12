import json

import pytest

from vlmuncert.cli import main
from vlmuncert.store import read_embedding_file


@pytest.fixture(scope="module")
def bench_dir(tmp_path_factory):
    """One small synthetic benchmark shared by the CLI tests."""
    root = tmp_path_factory.mktemp("bench")
    status = main([
        "gen-synthetic", "--out", str(root), "--seed", "3",
        "--classes", "4", "--dim", "32",
        "--train-per-class", "60", "--test-per-class", "40",
    ])
    assert status == 0
    return root


def run_build(root, out, extra=()):
    return main([
        "build-dict", "--manifest", str(root / "dataset.json"),
        "--out", str(out), "--pca-dim", "8", "--seed", "1", *extra,
    ])


def run_eval(root, out, extra=()):
    return main([
        "evaluate", "--manifest", str(root / "dataset.json"),
        "--text-bank", str(root / "text_bank.vlme"),
        "--out", str(out), "--pca-dim", "8", "--seed", "1", *extra,
    ])


class TestGenSynthetic:
    def test_outputs_loadable(self, bench_dir):
        from vlmuncert import load_dataset

        ds = load_dataset(bench_dir / "dataset.json")
        assert ds.embeddings.rows == 4 * (60 + 40)
        bank = read_embedding_file(bench_dir / "text_bank.vlme")
        assert bank.rows == 4


class TestBuildDict:
    def test_build_writes_artifacts(self, bench_dir, tmp_path):
        out = tmp_path / "run"
        assert run_build(bench_dir, out) == 0
        assert (out / "pca.vlmp").is_file()
        assert (out / "dictionary.vlmd").is_file()
        prov = json.loads((out / "build_provenance.json").read_text())
        assert prov["classes"] == 4
        assert prov["excluded_classes"] == []

    def test_rerun_byte_identical(self, bench_dir, tmp_path):
        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        assert run_build(bench_dir, out1) == 0
        assert run_build(bench_dir, out2) == 0
        assert (out1 / "dictionary.vlmd").read_bytes() == (out2 / "dictionary.vlmd").read_bytes()
        assert (out1 / "pca.vlmp").read_bytes() == (out2 / "pca.vlmp").read_bytes()

    def test_missing_train_split_fails(self, bench_dir, tmp_path, capsys):
        manifest = json.loads((bench_dir / "dataset.json").read_text())
        manifest["splits"].pop("train")
        broken = tmp_path / "broken.json"
        broken.write_text(json.dumps(manifest))
        status = main([
            "build-dict", "--manifest", str(broken),
            "--out", str(tmp_path / "x"), "--pca-dim", "4",
        ])
        assert status != 0
        assert "train" in capsys.readouterr().err


class TestEvaluate:
    def test_reports_and_scores(self, bench_dir, tmp_path):
        out = tmp_path / "run"
        assert run_build(bench_dir, out) == 0
        assert run_eval(bench_dir, out, extra=["--tau", "0.5"]) == 0
        scores = (out / "scores.csv").read_text().splitlines()
        header = scores[0].split(",")
        assert header == [
            "sample_index", "true_class", "predicted_class", "correct",
            "method", "confidence", "p_max", "s_d", "log_likelihood", "s_unc",
        ]
        assert len(scores) == 1 + 4 * 40 * 5  # samples x methods
        meta = json.loads((out / "run_metadata.json").read_text())
        assert meta["methods"][0] == "Fused"
        assert (out / "report_Fused.json").is_file()
        assert (out / "decisions.csv").is_file()
        assert (out / "report.txt").read_text().startswith("Method")

    def test_rerun_byte_identical(self, bench_dir, tmp_path):
        out = tmp_path / "run"
        assert run_build(bench_dir, out) == 0
        assert run_eval(bench_dir, out) == 0
        first = (out / "scores.csv").read_bytes()
        assert run_eval(bench_dir, out) == 0
        assert (out / "scores.csv").read_bytes() == first

    def test_accuracy_identical_across_methods(self, bench_dir, tmp_path):
        out = tmp_path / "run"
        run_build(bench_dir, out)
        run_eval(bench_dir, out)
        accs = set()
        for p in out.glob("report_*.json"):
            accs.add(json.loads(p.read_text())["accuracy"])
        assert len(accs) == 1

    def test_fixed_temperature(self, bench_dir, tmp_path):
        out = tmp_path / "run"
        run_build(bench_dir, out)
        assert run_eval(bench_dir, out, extra=["--temp", "2.0"]) == 0
        meta = json.loads((out / "run_metadata.json").read_text())
        assert meta["temperature"] == 2.0


class TestDiagnose:
    def test_condition_csv(self, bench_dir, tmp_path):
        out = tmp_path / "diag"
        status = main([
            "diagnose", "--manifest", str(bench_dir / "dataset.json"),
            "--out", str(out), "--pca-dim", "8",
        ])
        assert status == 0
        lines = (out / "condition_report.csv").read_text().splitlines()
        assert lines[0] == "space,class_index,log10_condition,rank_deficient,n_samples"
        assert sum(1 for l in lines if l.startswith("raw,")) == 4
        assert sum(1 for l in lines if l.startswith("projected,")) == 4

    def test_rerun_identical(self, bench_dir, tmp_path):
        args = lambda o: [
            "diagnose", "--manifest", str(bench_dir / "dataset.json"),
            "--out", str(o), "--pca-dim", "8",
        ]
        assert main(args(tmp_path / "d1")) == 0
        assert main(args(tmp_path / "d2")) == 0
        assert (tmp_path / "d1" / "condition_report.csv").read_bytes() == (
            tmp_path / "d2" / "condition_report.csv"
        ).read_bytes()

    def test_projection_lowers_median_condition(self, bench_dir, tmp_path):
        import numpy as np

        out = tmp_path / "diag"
        main([
            "diagnose", "--manifest", str(bench_dir / "dataset.json"),
            "--out", str(out), "--pca-dim", "8",
        ])
        rows = (out / "condition_report.csv").read_text().splitlines()[1:]
        raw = [float(r.split(",")[2]) for r in rows if r.startswith("raw,")]
        proj = [float(r.split(",")[2]) for r in rows if r.startswith("projected,")]
        assert np.median(proj) < np.median(raw)


class TestSweepThreshold:
    def test_curve_rows(self, bench_dir, tmp_path):
        out = tmp_path / "run"
        run_build(bench_dir, out)
        status = main([
            "sweep-threshold", "--manifest", str(bench_dir / "dataset.json"),
            "--text-bank", str(bench_dir / "text_bank.vlme"),
            "--out", str(out), "--pca-dim", "8", "--seed", "1",
        ])
        assert status == 0
        lines = (out / "f1_curve.csv").read_text().splitlines()
        assert lines[0] == "method,tau,f1"
        assert len(lines) == 1 + 5 * 101

    def test_fused_curve_unimodal(self, bench_dir, tmp_path):
        # direct inspection oracle: the fused F1 curve rises to one plateau
        # and never rises again past its peak (grid noise tolerated)
        import numpy as np

        out = tmp_path / "run"
        run_build(bench_dir, out)
        main([
            "sweep-threshold", "--manifest", str(bench_dir / "dataset.json"),
            "--text-bank", str(bench_dir / "text_bank.vlme"),
            "--out", str(out), "--pca-dim", "8", "--seed", "1",
        ])
        rows = [
            l.split(",") for l in (out / "f1_curve.csv").read_text().splitlines()[1:]
            if l.startswith("Fused,")
        ]
        f1 = np.array([float(r[2]) for r in rows])
        peak = int(np.argmax(f1))
        assert (np.diff(f1[: peak + 1]) >= -5e-3).all()
        assert (np.diff(f1[peak:]) <= 1e-12).all()


class TestMakeShiftMap:
    def test_map_written(self, bench_dir, tmp_path):
        out_file = tmp_path / "map.json"
        status = main([
            "make-shift-map",
            "--query-bank", str(bench_dir / "text_bank.vlme"),
            "--dict-bank", str(bench_dir / "text_bank.vlme"),
            "--out-file", str(out_file),
        ])
        assert status == 0
        payload = json.loads(out_file.read_text())
        assert payload["k"] == 1
        assert payload["map"] == {str(i): [i] for i in range(4)}

    def test_label_shift_evaluation(self, bench_dir, tmp_path):
        # coarse = fine here; the shift path must still run end to end
        out = tmp_path / "run"
        run_build(bench_dir, out)
        map_file = tmp_path / "map.json"
        main([
            "make-shift-map",
            "--query-bank", str(bench_dir / "text_bank.vlme"),
            "--dict-bank", str(bench_dir / "text_bank.vlme"),
            "--out-file", str(map_file),
        ])
        status = run_eval(bench_dir, out, extra=["--shift-map", str(map_file)])
        assert status == 0
        meta = json.loads((out / "run_metadata.json").read_text())
        assert meta["label_shift_k"] == 1


class TestErrorPaths:
    def test_missing_manifest(self, tmp_path, capsys):
        status = main([
            "build-dict", "--manifest", str(tmp_path / "none.json"),
            "--out", str(tmp_path / "o"),
        ])
        assert status == 1
        assert "MissingFile" in capsys.readouterr().err

    def test_empty_test_split(self, bench_dir, tmp_path, capsys):
        manifest = json.loads((bench_dir / "dataset.json").read_text())
        manifest["splits"]["test"] = []
        broken = tmp_path / "broken.json"
        broken.write_text(json.dumps(manifest))
        out = tmp_path / "run"
        run_build(bench_dir, out)
        status = main([
            "evaluate", "--manifest", str(broken),
            "--text-bank", str(bench_dir / "text_bank.vlme"),
            "--out", str(out), "--pca-dim", "8",
        ])
        assert status == 1
