"""Tests for the command-line interface."""

import json

import pytest

from perfscale.cli import main

CONFIG = """
[domain]
d = 2
etas = 1/2 1/4 1/8

[sweep]
quantities = D poincare
"""


def test_norm_smoke_emits_one_json_row(capsys):
    status = main(["norm", "--which", "D", "--p", "2", "--d", "2",
                   "--eta", "0.125", "--epsilon", "0.25"])
    assert status == 0
    row = json.loads(capsys.readouterr().out.strip())
    assert row["quantity"] == "D"
    assert row["p"] == 2.0
    assert row["value"] > 0
    assert row["kind"] == "exact-p2"


def test_norm_p_not_two_reports_lower_bound(capsys):
    status = main(["norm", "--which", "B", "--p", "4", "--d", "2",
                   "--eta", "0.25"])
    assert status == 0
    row = json.loads(capsys.readouterr().out.strip())
    assert row["kind"] == "lower-bound"


def test_cell_reports_one_line_per_eta(capsys):
    status = main(["cell", "--d", "2", "--etas", "0.5", "0.25", "0.125"])
    assert status == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert [json.loads(l)["eta"] for l in lines] == [0.5, 0.25, 0.125]


def test_poincare_subcommand(capsys):
    status = main(["poincare", "--d", "2", "--etas", "0.5", "0.25"])
    assert status == 0
    lines = capsys.readouterr().out.strip().splitlines()
    rows = [json.loads(l) for l in lines]
    assert all(r["poincare"] > 0 for r in rows)


def test_unknown_flag_exits_2():
    with pytest.raises(SystemExit) as info:
        main(["norm", "--which", "D", "--eta", "0.25", "--frobnicate"])
    assert info.value.code == 2


def test_unknown_subcommand_exits_2():
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == 2


def test_missing_subcommand_exits_2():
    with pytest.raises(SystemExit) as info:
        main([])
    assert info.value.code == 2


def test_config_error_exits_1(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[domain]\netta = 1/4\n")
    status = main(["--config", str(bad), "sweep"])
    assert status == 1
    assert "etta" in capsys.readouterr().err


def test_sweep_writes_reports(tmp_path, capsys):
    cfg = tmp_path / "sweep.ini"
    cfg.write_text(CONFIG)
    out = tmp_path / "out"
    status = main(["--config", str(cfg), "--output", str(out), "sweep"])
    assert status == 0
    assert (out / "report.csv").exists()
    assert (out / "report.json").exists()


def test_verify_passes_on_good_config(tmp_path, capsys):
    cfg = tmp_path / "sweep.ini"
    cfg.write_text(CONFIG)
    out = tmp_path / "out"
    status = main(["--config", str(cfg), "--output", str(out), "verify"])
    captured = capsys.readouterr().out
    assert status == 0
    assert "PASS" in captured
    assert captured.strip().splitlines()[-1].endswith("0 failures")


def test_verify_fails_on_corrupted_predictions(tmp_path, capsys):
    override = tmp_path / "override.json"
    # an unattainable linearity requirement must flip the verdict
    override.write_text(json.dumps({"D-d2-p2": {"r2_min": 1.1}}))
    cfg = tmp_path / "sweep.ini"
    cfg.write_text(CONFIG + f"\n[report]\nprediction_override = {override}\n")
    out = tmp_path / "out"
    status = main(["--config", str(cfg), "--output", str(out), "verify"])
    assert status == 1
    assert "FAIL" in capsys.readouterr().out


def test_export_labels_vtk(tmp_path, capsys):
    out = tmp_path / "vtk"
    status = main(["--output", str(out), "export", "--what", "labels",
                   "--etas", "0.5"])
    assert status == 0
    path = capsys.readouterr().out.strip()
    assert path.endswith(".vtk")
    head = open(path).readline()
    assert head.startswith("# vtk DataFile")


def test_export_corrector_vtk(tmp_path, capsys):
    out = tmp_path / "vtk"
    status = main(["--output", str(out), "export", "--what", "corrector",
                   "--etas", "0.25"])
    assert status == 0
    text = open(capsys.readouterr().out.strip()).read()
    assert "SCALARS chi double 1" in text


def test_workers_env_var(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("PERFSCALE_WORKERS", "2")
    cfg = tmp_path / "sweep.ini"
    cfg.write_text(CONFIG)
    out = tmp_path / "out"
    status = main(["--config", str(cfg), "--output", str(out), "sweep"])
    assert status == 0
