import json

import pytest

from reachcert.cli import EXIT_OK, EXIT_STAGE_FAILED, load_scenario, main

ARTIFACTS = ("gains.json", "bounds.json", "tube.json", "trajectory.json", "certification.json")


@pytest.fixture(scope="module")
def hover_runs(tmp_path_factory):
    dirs = [tmp_path_factory.mktemp(f"hover{k}") for k in range(2)]
    codes = [main(["run-all", "--scenario", "hover", "--samples", "0", "--out-dir", str(d)]) for d in dirs]
    return codes, dirs


def test_hover_run_all_certifies(hover_runs):
    codes, (out, _) = hover_runs
    assert codes[0] == EXIT_OK
    for name in ARTIFACTS:
        assert (out / name).is_file()
    assert (out / "traces" / "trace_00.csv").is_file()
    cert = json.loads((out / "certification.json").read_text())
    assert cert["passed"] and len(cert["runs"]) == 1


def test_hover_run_all_is_byte_identical(hover_runs):
    _, (a, b) = hover_runs
    for name in ARTIFACTS:
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_start_inside_obstacle_is_a_load_failure(tmp_path, capsys):
    d = load_scenario("hover").to_dict()
    d["obstacles"] = [{"lo": [2, 2, 2], "hi": [3, 3, 3]}]
    d["target"] = {"lo": [4, 4, 4], "hi": [4.8, 4.8, 4.8]}
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(d))
    code = main(["run-all", "--scenario", str(path), "--out-dir", str(tmp_path / "out")])
    assert code == EXIT_STAGE_FAILED
    err = json.loads((tmp_path / "out" / "error.json").read_text())
    assert err["stage"] == "load" and "p0 lies inside obstacle 0" in err["message"]


def test_bounds_command(capsys):
    assert main(["bounds", "--scenario", "reference"]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["Lp"] == pytest.approx(0.337428571, rel=1e-8)
    assert doc["thrust_compatible"] is True


def test_sample_init_command(tmp_path, capsys):
    out = tmp_path / "init.json"
    assert main(["sample-init", "--n", "500", "--seed", "4", "--out", str(out)]) == EXIT_OK
    doc = json.loads(out.read_text())
    assert doc["n"] == 500 and 0 < doc["member_fraction"] < 1


def test_plan_and_synth_commands(tmp_path, capsys):
    tube = tmp_path / "tube.json"
    assert main(["plan-tube", "--scenario", "hover", "--out", str(tube)]) == EXIT_OK
    traj = tmp_path / "traj.json"
    assert main(["synth-traj", "--scenario", "hover", "--tube", str(tube), "--out", str(traj)]) == EXIT_OK
    doc = json.loads(traj.read_text())
    assert doc["T"] == 10.0 and all(v <= 1e-9 for k, v in doc["verification"].items() if k != "obstacles")
