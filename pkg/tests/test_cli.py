"""Command-line interface: exit codes and artifact plumbing."""

import numpy as np
import pytest

from hqplab import ergomap, svm
from hqplab.cli import main


def test_run_writes_log_and_summary(tmp_path, capsys):
    out = tmp_path / "out"
    code = main(["run", "--scenario", "exp3_reorientation.scn",
                 "--config", "default.yaml", "--duration", "1.2",
                 "--out", str(out)])
    assert code == 0
    assert (out / "log.csv").is_file()
    assert (out / "summary.txt").is_file()
    header = (out / "log.csv").read_text().splitlines()[0]
    assert header.startswith("t,q0")


def test_run_missing_scenario_exits_2(tmp_path):
    with pytest.raises(SystemExit) as excinfo:
        main(["run", "--scenario", "no_such.scn", "--out", str(tmp_path)])
    assert excinfo.value.code == 2


def test_run_bad_scenario_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.scn"
    bad.write_text("t=0.1 kind=warp\n")
    code = main(["run", "--scenario", str(bad), "--out", str(tmp_path)])
    assert code == 2
    assert "error" in capsys.readouterr().err


def test_fit_map_round_trip(tmp_path, capsys):
    grid = ergomap.generate_synthetic_reba_grid(
        ergomap.SubjectProfile(height=1.7))
    grid_path = tmp_path / "grid.csv"
    grid.to_csv(grid_path)
    out = tmp_path / "map.txt"
    code = main(["fit-map", "--grid", str(grid_path), "--out", str(out)])
    assert code == 0
    fitted = ergomap.ErgonomicsMap.load(out)
    assert fitted.meta["fit_rms"] <= 1e-9


def test_train_svm_writes_model(tmp_path, capsys):
    data = svm.synthetic_surface_features(n=60, seed=4)
    feat = tmp_path / "features.csv"
    data.to_csv(feat)
    out = tmp_path / "model.txt"
    code = main(["train-svm", "--features", str(feat), "--C", "10.0",
                 "--variant", "l2", "--out", str(out)])
    assert code == 0
    assert "train_accuracy 1.0000" in capsys.readouterr().out
    model = svm.LinearModel.load(out)
    assert svm.training_accuracy(model, data) == 1.0


def test_check_passes_on_clean_build(capsys):
    assert main(["check"]) == 0
    out = capsys.readouterr().out
    assert "PASS" in out and "FAIL" not in out


def test_bench_kernel_reports_both_kernels(capsys):
    assert main(["bench-kernel", "--n", "3"]) == 0
    out = capsys.readouterr().out
    assert "pure-python kernel" in out
