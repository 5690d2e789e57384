import json
import subprocess
import sys

import pytest

from vrurqa.cli import main
from vrurqa.forest import loads_model, predict_many
from vrurqa.pipeline import parse_table


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert main(["synth", "--out", str(d / "data"), "--epochs-per-mode", "20",
                 "--trip-seconds", "10", "--seed", "1"]) == 0
    return d


def test_synth_outputs(workdir):
    log = (workdir / "data" / "log.csv").read_text().splitlines()
    labels = (workdir / "data" / "labels.csv").read_text().splitlines()
    assert len(labels) == 100
    assert log[0].split(",")[0] == "acc_x"


def test_features_rank_evaluate(workdir):
    d = workdir
    data = ["--log", str(d / "data" / "log.csv"), "--labels", str(d / "data" / "labels.csv")]
    assert main(["features", *data, "--feature-set", "time", "--out", str(d / "f.csv")]) == 0
    table = parse_table((d / "f.csv").read_text())
    assert table.n_features == 126 and table.n_rows == 100
    assert main(["rank", "--features", str(d / "f.csv"), "--scheme", "binary",
                 "--out", str(d / "r.csv")]) == 0
    ranking = (d / "r.csv").read_text().splitlines()
    assert ranking[0] == "rank,feature_name,score" and len(ranking) == 127
    assert main(["evaluate", "--features", str(d / "f.csv"), "--ranking", str(d / "r.csv"),
                 "--scheme", "binary", "--k-grid", "5,126", "--n-trees", "10",
                 "--out", str(d / "curve.csv"), "--model-out", str(d / "m.json")]) == 0
    assert (d / "curve.csv").read_text().splitlines()[1].startswith("binary,5,")
    model = loads_model((d / "m.json").read_text())
    assert model.classes == ("vru", "non_vru") and model.n_trees == 10
    assert predict_many(model, table.values).shape == (100,)


def test_calibrate_and_config(workdir):
    d = workdir
    cfg = d / "cfg.json"
    cfg.write_text(json.dumps({"seed": 0, "log_path": str(d / "data" / "log.csv"),
                               "labels_path": str(d / "data" / "labels.csv"),
                               "calib_windows": 10, "calib_max_lag": 15, "calib_max_dim": 4}))
    with pytest.warns(Warning):
        assert main(["calibrate", "--config", str(cfg), "--out", str(d / "cal.csv")]) == 0
    text = (d / "cal.csv").read_text()
    assert "summary,rot_z,delay," in text and "fnn,acc_x,4," in text


def test_sweep_threshold(workdir, tmp_path):
    d = workdir
    cfg = tmp_path / "cfg.json"
    grid = {"accelerometer": [0.5], "gyroscope": [0.3], "rotation_vector": [0.01]}
    cfg.write_text(json.dumps({"seed": 0, "log_path": str(d / "data" / "log.csv"),
                               "labels_path": str(d / "data" / "labels.csv"),
                               "threshold_grid": grid, "n_trees": 5, "folds": 2}))
    assert main(["sweep-threshold", "--config", str(cfg), "--out", str(tmp_path / "s.csv")]) == 0
    rows = (tmp_path / "s.csv").read_text().splitlines()
    assert rows[0] == "channel,threshold,accuracy,selected" and len(rows) == 10


def test_run_all(workdir, tmp_path, capsys):
    d = workdir
    args = ["run-all", "--log", str(d / "data" / "log.csv"), "--labels",
            str(d / "data" / "labels.csv"), "--n-trees", "5", "--feature-set", "rqa",
            "--out", str(tmp_path / "run")]
    assert main([*args, "--seed", "3"]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["n_features"] == 54
    assert (tmp_path / "run" / "manifest.json").exists()


def test_run_all_requires_seed(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["run-all"])
    assert exc.value.code == 2
    assert "--seed" in capsys.readouterr().err


def test_missing_path_exit_code(tmp_path, capsys):
    code = main(["run-all", "--seed", "1", "--log", str(tmp_path / "nope.csv"),
                 "--labels", str(tmp_path / "nope2.csv")])
    assert code == 3
    assert "nope.csv" in capsys.readouterr().err


def test_stage_tagged_failure(workdir, capsys):
    code = main(["rank", "--features", str(workdir / "data" / "labels.csv")])
    assert code == 1
    assert "[rank]" in capsys.readouterr().err


def test_console_script_entry():
    out = subprocess.run([sys.executable, "-m", "vrurqa.cli", "--version"], capture_output=True,
                         text=True)
    assert out.returncode == 0 and out.stdout.strip()
