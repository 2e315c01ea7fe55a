import json

import pytest

from procflow.cli import main
from procflow.dataset import CSV_HEADER
from procflow.forest import Forest
from procflow.mlp import make_architecture


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert run("synth", "--classes", 5, "--windows", 80, "--hosts", 3, "--seed", 4, "--out", d / "ev.jsonl") == 0
    assert run("aggregate", "--in", d / "ev.jsonl", "--out", d / "feat.csv") == 0
    return d


def test_synth_is_byte_identical(tmp_path, workdir):
    assert run("synth", "--classes", 5, "--windows", 80, "--hosts", 3, "--seed", 4, "--out", tmp_path / "b.jsonl") == 0
    assert (tmp_path / "b.jsonl").read_bytes() == (workdir / "ev.jsonl").read_bytes()
    manifest = json.loads((tmp_path / "b.manifest.json").read_text())
    assert manifest["seed"] == 4 and manifest["kernel_backend"] in ("numba", "numpy")


def test_synth_rejects_one_class(tmp_path, capsys):
    assert run("synth", "--classes", 1, "--out", tmp_path / "x.jsonl") == 1
    assert "error [validation]" in capsys.readouterr().err


def test_aggregate_empty_input_gives_header_only(tmp_path):
    (tmp_path / "e.jsonl").write_text("")
    assert run("aggregate", "--in", tmp_path / "e.jsonl", "--out", tmp_path / "e.csv") == 0
    lines = (tmp_path / "e.csv").read_text().splitlines()
    assert lines == [",".join(CSV_HEADER)]


def test_aggregate_malformed_line_is_reported(tmp_path, workdir, capsys):
    lines = (workdir / "ev.jsonl").read_text().splitlines()[:20]
    lines[16] = '{"ts_ms": 1, "host":'
    (tmp_path / "bad.jsonl").write_text("\n".join(lines) + "\n")
    assert run("aggregate", "--in", tmp_path / "bad.jsonl", "--out", tmp_path / "bad.csv") == 1
    assert ":17" in capsys.readouterr().err
    assert not (tmp_path / "bad.csv").exists()


def test_train_rf_defaults(tmp_path, workdir):
    out = tmp_path / "rf.json"
    assert run("train", "--model", "rf", "--in", workdir / "feat.csv", "--min-samples", 10,
               "--out", out) == 0
    doc = json.loads(out.read_text())
    forest = Forest.from_dict(doc["model"])
    assert len(forest.trees) == 100
    assert forest.max_path_depth() <= 15
    assert (tmp_path / "rf.test.csv").exists()
    assert run("eval", "--model", out, "--in", tmp_path / "rf.test.csv", "--out", tmp_path / "r.json") == 0
    report = json.loads((tmp_path / "r.json").read_text())
    assert report["model"] == "rf" and report["accuracy"] > 0.8


def test_train_mlp_architecture(tmp_path, workdir):
    out = tmp_path / "mlp.json"
    assert run("train", "--model", "mlp", "--in", workdir / "feat.csv", "--min-samples", 10,
               "--epochs", 2, "--out", out) == 0
    doc = json.loads(out.read_text())
    assert doc["model"]["layer_sizes"] == list(make_architecture(26, 5).layer_sizes)
    assert (tmp_path / doc["binning"]).exists()
    assert run("eval", "--model", out, "--in", tmp_path / "mlp.test.csv", "--out", tmp_path / "r.json") == 0


def test_missing_input_is_io_error(tmp_path, capsys):
    assert run("train", "--model", "rf", "--in", tmp_path / "nope.csv", "--out", tmp_path / "m.json") == 1
    assert "error [io]" in capsys.readouterr().err


def test_unknown_model_is_usage_error(tmp_path, capsys):
    assert run("train", "--model", "svm", "--in", tmp_path / "x.csv") == 2
    assert "error [usage]" in capsys.readouterr().err


def test_experiment_rows_and_rerun(tmp_path, workdir):
    args = ["experiment", "--suite", "top_n_sweep", "--in", workdir / "feat.csv", "--n", "3,5",
            "--min-samples", 10, "--trees", 5, "--epochs", 2]
    assert run(*args, "--out", tmp_path / "a") == 0
    assert run(*args, "--out", tmp_path / "b") == 0
    rows = json.loads((tmp_path / "a" / "summary.json").read_text())
    assert sorted((r["model"], r["task"]) for r in rows) == sorted(
        (m, f"top_n_sweep/top{n}") for m in ("rf", "mlp") for n in (3, 5))
    assert (tmp_path / "a" / "summary.json").read_bytes() == (tmp_path / "b" / "summary.json").read_bytes()
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert {"argv", "seed", "tool_version", "outputs", "duration_s"} <= set(manifest)
    assert (tmp_path / "a" / "reports" / "top_n_sweep_top3_rf.json").exists()


def test_experiment_suite_error(tmp_path, workdir, capsys):
    assert run("experiment", "--suite", "top_n_sweep", "--in", workdir / "feat.csv",
               "--min-samples", 10_000, "--out", tmp_path) == 1
    assert "error [" in capsys.readouterr().err
