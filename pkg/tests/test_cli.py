"""End-to-end tests of the command line front end.

main() is called in process with an argv list; exit codes and file
outputs carry the contract.
"""

import json
import math

import numpy as np
import pytest

from stickysim.cli import main, random_scenario, scenario_id


def write_json(path, data):
    path.write_text(json.dumps(data))
    return str(path)


def headon(tmp_path):
    return write_json(
        tmp_path / "headon.json",
        {
            "particles": [
                {"m": 0.5, "x": [0.0], "v": [1.0]},
                {"m": 0.5, "x": [1.0], "v": [-1.0]},
            ],
            "horizon": 2.0,
        },
    )


def test_simulate_writes_all_three_files(tmp_path):
    out = tmp_path / "run"
    assert main(["simulate", headon(tmp_path), "--out", str(out)]) == 0
    assert (out / "scenario.json").exists()
    assert (out / "trajectories.csv").exists()
    events = [json.loads(line) for line in (out / "events.jsonl").read_text().splitlines()]
    assert len(events) == 1
    assert events[0]["t"] == pytest.approx(0.5, abs=1e-12)
    assert events[0]["groups"] == [[0, 1]]
    assert events[0]["post_v"] == [[0.0]]


def test_simulate_trajectory_csv_has_breakpoints(tmp_path):
    out = tmp_path / "run"
    main(["simulate", headon(tmp_path), "--out", str(out)])
    lines = (out / "trajectories.csv").read_text().splitlines()
    assert lines[0].split(",")[:4] == ["particle_index", "t", "x_1", "v_1"]
    rows = [line.split(",") for line in lines[1:]]
    # each particle: birth breakpoint plus the merge breakpoint
    assert len(rows) == 4
    p0 = [r for r in rows if r[0] == "0"]
    assert float(p0[1][1]) == pytest.approx(0.5, abs=1e-12)
    assert float(p0[1][2]) == pytest.approx(0.5, abs=1e-12)  # meet point
    assert float(p0[1][3]) == 0.0  # post-merge velocity


def test_simulate_coincident_positions_exit_2(tmp_path, capsys):
    path = write_json(
        tmp_path / "degen.json",
        {
            "particles": [
                {"m": 0.5, "x": [0.3], "v": [1.0]},
                {"m": 0.5, "x": [0.3], "v": [-1.0]},
            ]
        },
    )
    assert main(["simulate", path, "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert "0" in err and "1" in err  # names the offending pair


def test_simulate_malformed_json_exit_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["simulate", str(bad), "--out", str(tmp_path / "o")]) == 2


def test_verify_clean_scenario_exit_0(tmp_path):
    report = tmp_path / "report.json"
    rc = main(["verify", headon(tmp_path), "--out", str(report)])
    assert rc == 0
    data = json.loads(report.read_text())
    assert data["pass"] is True
    assert data["schema_version"] == 1
    assert set(data["checks"]) == {
        "variation", "averaging", "convex", "weak", "entropy", "qspp", "transport",
    }
    assert all(c["pass"] for c in data["checks"].values())


def test_verify_reports_byte_identical(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    main(["verify", "--random", "15", "1", "--seed", "11", "--out", str(a)])
    main(["verify", "--random", "15", "1", "--seed", "11", "--out", str(b)])
    assert a.read_bytes() == b.read_bytes()


def test_verify_directory_mode_rebuilds_flow(tmp_path):
    out = tmp_path / "run"
    main(["simulate", headon(tmp_path), "--out", str(out)])
    report = tmp_path / "report.json"
    assert main(["verify", str(out), "--out", str(report)]) == 0
    data = json.loads(report.read_text())
    assert data["engine"] == "rebuilt"
    assert data["event_count"] == 1
    assert data["pass"] is True


def test_verify_directory_mode_matches_direct_run(tmp_path):
    sc = random_scenario(25, 1, seed=4, horizon=2.0)
    scen_path = write_json(tmp_path / "s.json", sc.to_dict())
    out = tmp_path / "run"
    main(["simulate", scen_path, "--out", str(out)])
    direct, rebuilt = tmp_path / "direct.json", tmp_path / "rebuilt.json"
    assert main(["verify", scen_path, "--out", str(direct)]) == 0
    assert main(["verify", str(out), "--out", str(rebuilt)]) == 0
    a = json.loads(direct.read_text())
    b = json.loads(rebuilt.read_text())
    assert a["scenario_id"] == b["scenario_id"]
    assert a["event_count"] == b["event_count"]
    for name, rec in a["checks"].items():
        # same flow, so worst values agree to float noise
        assert abs(rec["worst"] - b["checks"][name]["worst"]) < 1e-12


def test_verify_corrupted_events_exit_4(tmp_path):
    out = tmp_path / "run"
    main(["simulate", headon(tmp_path), "--out", str(out)])
    (out / "events.jsonl").write_text(
        json.dumps({"t": 0.5, "groups": [[0, 1]], "post_v": [[0.7]]}) + "\n"
    )
    report = tmp_path / "report.json"
    assert main(["verify", str(out), "--out", str(report)]) == 4
    data = json.loads(report.read_text())
    assert data["pass"] is False
    assert data["checks"]["averaging"]["pass"] is False


def test_verify_line_checks_skipped_in_2d(tmp_path, capsys):
    report = tmp_path / "report.json"
    rc = main(["verify", "--random", "10", "2", "--seed", "2", "--out", str(report)])
    assert rc == 0
    err = capsys.readouterr().err
    assert "entropy" in err and "skipped" in err
    data = json.loads(report.read_text())
    assert data["checks"]["entropy"]["skipped"] is True
    assert data["checks"]["variation"]["pass"] is True


def test_verify_unknown_check_exit_2(tmp_path):
    assert main(["verify", "--random", "5", "1", "--checks", "variation,nope"]) == 2


def test_verify_check_subset_only_runs_named(tmp_path):
    report = tmp_path / "report.json"
    rc = main([
        "verify", headon(tmp_path), "--checks", "variation,weak",
        "--out", str(report),
    ])
    assert rc == 0
    data = json.loads(report.read_text())
    assert set(data["checks"]) == {"variation", "weak"}


def test_verify_threaded_matches_sequential(tmp_path, monkeypatch):
    seq, thr = tmp_path / "seq.json", tmp_path / "thr.json"
    main(["verify", "--random", "20", "1", "--seed", "3", "--out", str(seq)])
    monkeypatch.setenv("STICKY_THREADS", "4")
    main(["verify", "--random", "20", "1", "--seed", "3", "--out", str(thr)])
    assert seq.read_bytes() == thr.read_bytes()


def test_w1_end_to_end(tmp_path, capsys):
    mu = tmp_path / "mu.csv"
    nu = tmp_path / "nu.csv"
    mu.write_text("weight,point\n0.5,0.0\n0.5,1.0\n")
    nu.write_text("1.0,0.5\n")  # header optional
    assert main(["w1", str(mu), str(nu)]) == 0
    assert float(capsys.readouterr().out) == pytest.approx(0.5, abs=1e-15)


def test_w1_unnormalized_exit_2(tmp_path):
    mu = tmp_path / "mu.csv"
    nu = tmp_path / "nu.csv"
    mu.write_text("0.9,0.0\n")
    nu.write_text("1.0,0.5\n")
    assert main(["w1", str(mu), str(nu)]) == 2


def test_w1_triangle_on_files(tmp_path, capsys):
    rng = np.random.default_rng(5)
    paths = []
    for k in range(3):
        w = rng.uniform(0.1, 1.0, 4)
        w = w / w.sum()
        p = rng.uniform(-1.0, 1.0, 4)
        path = tmp_path / f"m{k}.csv"
        path.write_text(
            "".join(f"{float(wi)!r},{float(pi)!r}\n" for wi, pi in zip(w, p))
        )
        paths.append(str(path))

    def dist(a, b):
        main(["w1", paths[a], paths[b]])
        return float(capsys.readouterr().out)

    assert dist(0, 2) <= dist(0, 1) + dist(1, 2) + 1e-12


def test_converge_writes_report_and_csv(tmp_path):
    recipe = write_json(
        tmp_path / "r.json",
        {"rho0": {"kind": "uniform", "a": 0.0, "b": 1.0}, "v0": "sin(2*pi*x)"},
    )
    out = tmp_path / "conv"
    rc = main([
        "converge", recipe, "--sizes", "25,50", "--times", "0.1,0.5",
        "--out", str(out),
    ])
    assert rc == 0
    data = json.loads((out / "report.json").read_text())
    assert data["sizes"] == [25, 50]
    assert len(data["w1_rho"]) == 2 and len(data["w1_rho"][0]) == 1
    lines = (out / "w1.csv").read_text().splitlines()
    assert lines[0] == "time,w1_rho_25_50,w1_push_25_50"
    assert len(lines) == 3


def test_converge_constant_velocity_zero_variation(tmp_path):
    recipe = write_json(
        tmp_path / "r.json",
        {"rho0": {"kind": "uniform", "a": 0.0, "b": 1.0}, "v0": "0.25 + 0*x"},
    )
    out = tmp_path / "conv"
    assert main([
        "converge", recipe, "--sizes", "10,20", "--times", "1.0",
        "--out", str(out),
    ]) == 0
    data = json.loads((out / "report.json").read_text())
    # rigid translation: no collisions, a priori variation bound is zero
    assert all(b == 0.0 for b in data["variation_bounds"])


def test_converge_bad_recipe_exit_2(tmp_path):
    recipe = write_json(tmp_path / "r.json", {"v0": "x"})
    assert main([
        "converge", recipe, "--sizes", "10,20", "--times", "1.0",
        "--out", str(tmp_path / "conv"),
    ]) == 2


def test_converge_nonincreasing_sizes_exit_2(tmp_path):
    recipe = write_json(
        tmp_path / "r.json",
        {"rho0": {"kind": "uniform", "a": 0.0, "b": 1.0}, "v0": "x"},
    )
    assert main([
        "converge", recipe, "--sizes", "20,10", "--times", "1.0",
        "--out", str(tmp_path / "conv"),
    ]) == 2


def test_scenario_id_stable_and_input_sensitive(tmp_path):
    a = random_scenario(6, 1, seed=0, horizon=2.0)
    b = random_scenario(6, 1, seed=0, horizon=2.0)
    c = random_scenario(6, 1, seed=1, horizon=2.0)
    assert scenario_id(a) == scenario_id(b)
    assert scenario_id(a) != scenario_id(c)


def test_random_scenario_masses_normalized():
    for d in (1, 2, 3):
        sc = random_scenario(17, d, seed=9, horizon=2.0)
        assert abs(math.fsum(sc.masses.tolist()) - 1.0) < 1e-12
        assert sc.d == d


def test_simulate_horizon_override(tmp_path):
    out = tmp_path / "run"
    # horizon 0.25 ends before the t=0.5 collision
    assert main([
        "simulate", headon(tmp_path), "--out", str(out), "--horizon", "0.25",
    ]) == 0
    assert (out / "events.jsonl").read_text() == ""
