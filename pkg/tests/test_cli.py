import json
from pathlib import Path
import sys

import pytest
from astropy.table import Table

from gffdetect import cli
from gffdetect.ingest import write_video
from gffdetect.synth import load_dataset
from gffdetect.tinynet import load_model

from videos import two_person_video


SMALL_MODEL = [
    "--frames", "8", "--slots", "2", "--kernel-sizes", "1,2", "--conv1-filters", "2", "--conv2-filters", "2",
    "--dense-units", "4", "--max-groups", "3", "--hidden-units", "3",
]
SHORT_TRAINING = ["--epochs", "2", "--samples-per-epoch", "8", "--batch-size", "4", "--lr", "0.05"]


@pytest.fixture
def video_file(tmp_path):
    path = tmp_path / "video.jsonl"
    write_video(two_person_video(label=1), path)
    return str(path)


@pytest.fixture
def trained_model(tmp_path, dataset_dir):
    _, manifest = dataset_dir
    path = str(tmp_path / "model.json")
    assert cli.run(["train", "--data", manifest, "--model", path, "--seed", "3", *SMALL_MODEL, *SHORT_TRAINING]) == 0
    return path


def test_version(capsys):
    assert cli.run(["--version"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("gffdetect ")
    assert "model format 1" in out


def test_no_command(capsys):
    assert cli.run([]) == 1
    assert "usage" in capsys.readouterr().err


@pytest.mark.parametrize(
    "argv",
    [
        ["dance"],
        ["train", "--data", "manifest.csv"],
        ["eval", "--data", "manifest.csv", "--variants", "gff,colour"],
        ["synth", "--out", "x", "--mix", "single:1"],
        ["train", "--data", "m.csv", "--model", "m.json", "--kernel-sizes", "1,two"],
    ],
)
def test_usage_errors(argv, capsys):
    assert cli.run(argv) == 1
    assert "error" in capsys.readouterr().err


def test_from_cmdline(monkeypatch, capsys):
    monkeypatch.setattr(sys, "argv", ["gffdetect", "gradcheck", "--seed", "1"])
    assert cli._from_cmdline() == 0
    assert capsys.readouterr().out.rstrip().endswith("PASS")


def test_gradcheck_failure(capsys):
    assert cli.run(["gradcheck", "--seed", "0", "--tolerance", "0"]) == 3
    out = capsys.readouterr().out
    assert out.startswith("max relative error ")
    assert out.rstrip().endswith("FAIL")


def test_synth_needs_seed(tmp_path, capsys):
    assert cli.run(["synth", "--out", str(tmp_path / "data")]) == 1
    assert "--seed is required" in capsys.readouterr().err


def test_synth_template(tmp_path, capsys):
    out = tmp_path / "one"
    assert cli.run(["synth", "--out", str(out), "--template", "interview", "--label", "1", "--seed", "4"]) == 0
    manifest = capsys.readouterr().out.strip()
    dataset = load_dataset(manifest)
    assert len(dataset) == 1
    assert dataset[0][1] == 1


def test_synth_is_reproducible(tmp_path, capsys):
    argv = ["synth", "--n-videos", "4", "--seed", "9", "--mix", "single:0:0.5,crowd:1:0.5", "-q"]
    assert cli.run([*argv, "--out", str(tmp_path / "a")]) == 0
    assert cli.run([*argv, "--out", str(tmp_path / "b")]) == 0
    capsys.readouterr()
    a = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert a == sorted(p.name for p in (tmp_path / "b").iterdir())
    assert len(a) == 5
    for name in a:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    labels = [label for _, label in load_dataset(tmp_path / "a" / "manifest.csv")]
    assert sorted(labels) == [0, 0, 1, 1]


def test_synth_seed_from_config(tmp_path, capsys):
    config = tmp_path / "run.yaml"
    config.write_text("seed: 2\n")
    assert cli.run(["synth", "--config", str(config), "--template", "single", "--out", str(tmp_path / "d")]) == 0


def test_track(video_file, capsys):
    assert cli.run(["track", video_file]) == 0
    lines = capsys.readouterr().out.splitlines()
    entries = [json.loads(line) for line in lines]
    assert [entry["track_id"] for entry in entries] == [0, 1]
    assert all(entry["num_observations"] == 8 for entry in entries)


def test_track_to_file(tmp_path, video_file):
    out = tmp_path / "tracks.jsonl"
    assert cli.run(["track", video_file, "--out", str(out), "--distance-threshold", "0.5"]) == 0
    assert len(out.read_text().splitlines()) == 2


def test_track_malformed_file(tmp_path, capsys):
    path = tmp_path / "broken.jsonl"
    path.write_text("{not json\n")
    assert cli.run(["track", str(path)]) == 2
    assert "ERROR" in capsys.readouterr().err


def test_track_missing_file(tmp_path):
    assert cli.run(["track", str(tmp_path / "missing.jsonl")]) == 2


def test_gff(tmp_path, video_file, capsys):
    out = tmp_path / "gff"
    assert cli.run(["gff", video_file, "--out", str(out), "--frames", "8", "--slots", "2"]) == 0
    paths = capsys.readouterr().out.split()
    assert len(paths) == 1
    table = Table.read(paths[0], format="ascii.csv")
    assert len(table) == 8
    assert len(table.colnames) == 4


def test_train_and_predict(tmp_path, trained_model, video_file, capsys):
    model = load_model(trained_model)
    assert model.input_shape == (8, 4)
    capsys.readouterr()

    assert cli.run(["predict", "--model", trained_model, "--video", video_file]) == 0
    prediction = json.loads(capsys.readouterr().out)
    assert prediction["video_id"] == "v"
    assert 0.0 < prediction["score"] < 1.0
    assert prediction["verdict"] in ("real", "fake")

    assert cli.run(["predict", "--model", trained_model, "--video", video_file, "--threshold", "1.0"]) == 0
    assert json.loads(capsys.readouterr().out)["verdict"] == "real"


def test_train_history_and_resume(tmp_path, dataset_dir, trained_model):
    _, manifest = dataset_dir
    resumed = str(tmp_path / "resumed.asdf")
    history = tmp_path / "loss.csv"
    argv = ["train", "--data", manifest, "--model", resumed, "--seed", "3", "--resume", trained_model,
            "--history", str(history), *SMALL_MODEL, *SHORT_TRAINING]
    assert cli.run(argv) == 0
    assert len(Table.read(history, format="ascii.csv")) == 2
    assert load_model(resumed).parameter_count() == load_model(trained_model).parameter_count()


def test_train_is_reproducible(tmp_path, dataset_dir, trained_model):
    _, manifest = dataset_dir
    again = tmp_path / "again.json"
    argv = ["train", "--data", manifest, "--model", str(again), "--seed", "3", "--jobs", "2",
            *SMALL_MODEL, *SHORT_TRAINING]
    assert cli.run(argv) == 0
    assert again.read_bytes() == Path(trained_model).read_bytes()


def test_train_needs_seed(dataset_dir, tmp_path):
    _, manifest = dataset_dir
    assert cli.run(["train", "--data", manifest, "--model", str(tmp_path / "m.json")]) == 1


def test_train_missing_manifest(tmp_path, capsys):
    argv = ["train", "--data", str(tmp_path / "nope.csv"), "--model", str(tmp_path / "m.json"), "--seed", "1"]
    assert cli.run(argv) == 2
    assert "ERROR" in capsys.readouterr().err


def test_invalid_jobs_variable(monkeypatch, dataset_dir, tmp_path):
    _, manifest = dataset_dir
    monkeypatch.setenv("GFFDETECT_JOBS", "many")
    argv = ["train", "--data", manifest, "--model", str(tmp_path / "m.json"), "--seed", "1", *SMALL_MODEL]
    assert cli.run(argv) == 1


@pytest.mark.parametrize("jobs", ["0", "-2"])
def test_nonpositive_jobs(video_file, jobs, capsys):
    assert cli.run(["track", video_file, "--jobs", jobs]) == 2
    assert "jobs must be >= 1" in capsys.readouterr().err


def test_flag_over_config_file_warns(tmp_path, video_file, capsys):
    config = tmp_path / "run.yaml"
    config.write_text("tracker:\n  distance_threshold: 0.9\n")
    assert cli.run(["track", video_file, "--config", str(config), "--distance-threshold", "0.5"]) == 0
    err = capsys.readouterr().err
    assert "WARNING gffdetect.config: tracker.distance_threshold: 0.9 overridden by 0.5" in err


def test_invalid_config_file(tmp_path, dataset_dir):
    _, manifest = dataset_dir
    config = tmp_path / "run.yaml"
    config.write_text("train:\n  learning_rate: 0.1\n")
    argv = ["train", "--config", str(config), "--data", manifest, "--model", str(tmp_path / "m.json"), "--seed", "1"]
    assert cli.run(argv) == 2


def test_predict_bad_model(tmp_path, video_file):
    model = tmp_path / "model.json"
    model.write_text('{"format": 7}')
    assert cli.run(["predict", "--model", str(model), "--video", video_file]) == 2


def test_eval(tmp_path, dataset_dir, capsys):
    _, manifest = dataset_dir
    report = tmp_path / "report.csv"
    argv = ["eval", "--data", manifest, "--seed", "5", "--variants", "mean_fakeness,gff",
            "--test-fraction", "0.25", "--report", str(report), *SMALL_MODEL, *SHORT_TRAINING]
    assert cli.run(argv) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].split()[0] == "variant"
    assert list(Table.read(report, format="ascii.csv")["variant"]) == ["mean_fakeness", "gff"]


def test_eval_folds(dataset_dir, capsys):
    _, manifest = dataset_dir
    argv = ["eval", "--data", manifest, "--seed", "5", "--variants", "mean_fakeness", "--folds", "2"]
    assert cli.run(argv) == 0
    out = capsys.readouterr().out
    assert "mean_fakeness" in out
