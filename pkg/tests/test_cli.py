import json

import pytest

from jcsmc.cli import main


def test_partial_prints_json_and_succeeds(capsys, tmp_path):
    trace = tmp_path / "trace.csv"
    assert main(["partial", "--trial", "0", "--trace", str(trace)]) == 0
    rec = json.loads(capsys.readouterr().out)
    assert rec["objective_bps"] > 0
    assert trace.read_text().startswith("iteration,objective_bps\n")


def test_bad_config_exit_code(tmp_path, capsys):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text("n_antennas: -3\n")
    assert main(["partial", "--config", str(cfg)]) == 4
    cfg.write_text("no_such_key: 1\n")
    assert main(["partial", "--config", str(cfg)]) == 4
    assert "error" in capsys.readouterr().err


def test_infeasible_exit_code(tmp_path, capsys):
    cfg = tmp_path / "hard.yaml"
    cfg.write_text("sensing_sinr_min_db: 90\n")
    assert main(["partial", "--config", str(cfg)]) == 2
    assert "infeasible" in capsys.readouterr().err


def test_sweep_csv_identical_across_runs(tmp_path, capsys):
    outs = [tmp_path / "1.csv", tmp_path / "2.csv"]
    for out in outs:
        assert main(["sweep-power", "--grid", "30,40", "--trials", "2", "--scheme", "bs-only,cs-only",
                     "--seed", "7", "--out", str(out)]) == 0
    assert outs[0].read_bytes() == outs[1].read_bytes()
    assert "common" in capsys.readouterr().out


def test_feasibility_and_beampattern(tmp_path, capsys):
    out = tmp_path / "f.csv"
    assert main(["feasibility", "--trials", "5", "--grid", "20,40", "--out", str(out)]) == 0
    assert out.read_text().splitlines()[1] == "scheme,gamma_db,n_users,probability"
    assert main(["feasibility", "--scheme", "tdma"]) == 4
    bp = tmp_path / "bp.csv"
    assert main(["beampattern", "--out", str(bp)]) == 0
    assert len(bp.read_text().splitlines()) == 2 + 101


def test_validate(capsys):
    assert main(["validate", "--trials", "10"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert len(out) == 7 and all(line.startswith("PASS") for line in out)


def test_unknown_command_exits():
    with pytest.raises(SystemExit):
        main(["frobnicate"])
