import math

import numpy as np
import pytest

from jcsmc.errors import DegeneratePattern, InvalidArgument
from jcsmc.experiments import (SweepRow, SweepSpec, beampattern, beampattern_grid, common_feasible_means,
                               feasibility_study, parse_grid, read_sweep_csv, run_benchmark, run_sweep,
                               write_sweep_csv)
from jcsmc.partial import initialize_beamformer
from jcsmc.scenario import ScenarioConfig, sample_channels


def test_parse_grid():
    assert parse_grid("10:5:35") == (10.0, 15.0, 20.0, 25.0, 30.0, 35.0)
    assert parse_grid("20:1:22") == (20.0, 21.0, 22.0)
    assert parse_grid("2, 4") == (2.0, 4.0)
    with pytest.raises(InvalidArgument):
        parse_grid("5:1:1")
    with pytest.raises(InvalidArgument):
        parse_grid("1:2")


def test_spec_validation():
    with pytest.raises(InvalidArgument):
        SweepSpec("bogus", (1,))
    with pytest.raises(InvalidArgument):
        SweepSpec("sinr_db", (10,), schemes=("noma-magic",))
    with pytest.raises(InvalidArgument):
        SweepSpec("users", (2.5,)).config_for(2.5)
    spec = SweepSpec("power_dbm", (30,))
    assert spec.config_for(30).bs_power_budget == pytest.approx(1.0)


def test_sweep_csv_is_reproducible(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for out in (a, b):
        run_sweep(SweepSpec("sinr_db", (20, 30), trials=2, schemes=("bs-only", "cs-only"), out=str(out)))
    assert a.read_bytes() == b.read_bytes()
    lines = a.read_text().splitlines()
    assert lines[0] == "# schema_version=1"
    assert lines[1] == "scheme,gamma_db,trial,rate_bps,feasible,iterations,status"
    rows = read_sweep_csv(a)
    assert len(rows) == 8 and {r["scheme"] for r in rows} == {"bs-only", "cs-only"}


def test_timing_column_only_on_request(tmp_path):
    rows = [SweepRow("bs-only", 2, 0, 1.5, True, 3, 0.25)]
    write_sweep_csv(rows, "users", tmp_path / "t.csv", with_timing=True)
    text = (tmp_path / "t.csv").read_text().splitlines()
    assert text[1].endswith("wall_time_s") and text[2] == "bs-only,2,0,1.5,1,3,ok,0.25"


def test_read_rejects_unknown_schema(tmp_path):
    path = tmp_path / "x.csv"
    path.write_text("scheme\nfoo\n")
    with pytest.raises(InvalidArgument):
        read_sweep_csv(path)


def test_common_feasible_filter():
    rows = [SweepRow("a", 1, 0, 10.0, True, 1, 0), SweepRow("b", 1, 0, 4.0, True, 1, 0),
            SweepRow("a", 1, 1, 20.0, True, 1, 0), SweepRow("b", 1, 1, None, False, 0, 0, "infeasible"),
            SweepRow("a", 2, 0, None, False, 0, 0, "infeasible"), SweepRow("b", 2, 0, 1.0, True, 1, 0)]
    means = common_feasible_means(rows, ("a", "b"))
    assert means[1] == {"a": 10.0, "b": 4.0, "_count": 1}
    assert means[2]["_count"] == 0 and math.isnan(means[2]["a"])


def test_benchmark_schemes_zero_unused_parts():
    cfg = ScenarioConfig()
    ch = sample_channels(cfg, 0)
    bs = run_benchmark("bs-only", ch, cfg)
    cs = run_benchmark("cs-only", ch, cfg)
    assert np.all(bs.r_c == 0) and np.all(cs.r_b == 0)
    with pytest.raises(InvalidArgument):
        run_benchmark("nope", ch, cfg)


def test_feasibility_probability_edges():
    cfg = ScenarioConfig()
    rows = feasibility_study(cfg, [-100.0, 200.0], trials=5, user_counts=[2, 3])
    probs = {(a, g, K): p for a, g, K, p in rows}
    assert len(rows) == 8
    for a in ("noma", "sdma"):
        for K in (2, 3):
            assert probs[(a, -100.0, K)] == 1.0 and probs[(a, 200.0, K)] == 0.0


def test_feasibility_sdma_never_above_noma():
    rows = feasibility_study(ScenarioConfig(), [30.0, 35.0, 40.0], trials=40)
    probs = {(a, g): p for a, g, _, p in rows}
    for g in (30.0, 35.0, 40.0):
        assert probs[("sdma", g)] <= probs[("noma", g)]


def test_beampattern_normalised_and_peaks_on_target():
    cfg = ScenarioConfig()
    ch = sample_channels(cfg, 0)
    p = initialize_beamformer(ch, cfg)
    angles, pat = beampattern(p, p.conj(), ch, cfg)
    assert angles.size == 101 and angles[0] == pytest.approx(-np.pi / 2) and angles[-1] == pytest.approx(np.pi / 2)
    assert pat.max() == pytest.approx(1.0)
    assert abs(angles[np.argmax(pat)] - cfg.target_angle) <= np.pi / 100 + 1e-12
    assert len(beampattern_grid()) == 101


def test_beampattern_degenerate():
    cfg = ScenarioConfig()
    with pytest.raises(DegeneratePattern):
        beampattern(np.zeros(cfg.n_antennas), np.ones(cfg.n_antennas), None, cfg)
