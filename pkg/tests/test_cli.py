import json

import pytest

from ergolab.cli import CSV_CONFIG_PREFIX, main, read_config


def _run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_birkhoff_exact_doubling(capsys):
    code, out, _ = _run(capsys, "birkhoff", "--system", "doubling", "--obs", "cos:1", "--n", "900",
                        "--precision", "exact", "--seed", "7")
    assert code == 0
    doc = json.loads(out)
    assert doc["config"]["seed"] == 7
    assert doc["result"]["policy"]["mode"] == "exact"
    assert abs(doc["result"]["average"]) < 0.1


def test_distortion_report(capsys):
    code, out, _ = _run(capsys, "distortion", "--system", "perturbed:0.05", "--nmax", "20", "--samples", "1000")
    assert code == 0
    res = json.loads(out)["result"]
    assert res["pass"] is True
    assert res["max_ratio_observed"] <= res["K_theoretical"]


def test_billiard_orbit_csv(capsys):
    code, out, _ = _run(capsys, "billiard-orbit", "--table", "sinai:0.25", "--s", "0.1", "--theta", "1.0",
                        "--n", "1000")
    assert code == 0
    lines = out.splitlines()
    assert lines[0].startswith(CSV_CONFIG_PREFIX)
    assert json.loads(lines[0][len(CSV_CONFIG_PREFIX):])["table"] == "sinai:0.25"
    assert lines[1] == "step,s,theta,flight_length,component"


def test_list_systems(capsys):
    code, out, _ = _run(capsys, "list-systems")
    assert code == 0
    assert "doubling" in out and "sinai" in out
    assert "1/(2 pi)" in out


def test_budget_error_exits_3(capsys):
    code, out, err = _run(capsys, "birkhoff", "--system", "doubling", "--n", "2000", "--precision", "exact",
                          "--bits", "1024")
    assert code == 3 and out == ""
    doc = json.loads(err)
    assert doc["error"] == "PrecisionBudgetExceeded" and doc["exit_code"] == 3


def test_invalid_parameter_exits_2(capsys):
    code, _, err = _run(capsys, "distortion", "--system", "perturbed:0.2")
    assert code == 2
    assert json.loads(err)["exit_code"] == 2


def test_bad_thread_count_exits_2(capsys):
    code, _, _ = _run(capsys, "basin", "--n", "10", "--trials", "2", "--threads", "0")
    assert code == 2


@pytest.mark.parametrize("argv", [
    ["birkhoff", "--system", "perturbed:0.05", "--n", "5000", "--seed", "3"],
    ["density", "--kind", "ulam", "--cells-log2", "6"],
    ["scan-logistic", "--grid", "20", "--n-measure", "2000"],
    ["billiard-orbit", "--table", "stadium:1,0.5", "--s", "0.3", "--theta", "1.1", "--n", "50"],
])
def test_replay_reproduces_artifact(tmp_path, argv):
    first = tmp_path / "a.out"
    second = tmp_path / "b.out"
    assert main(argv + ["--out", str(first)]) == 0
    assert main(["replay", str(first), "--out", str(second)]) == 0
    assert first.read_bytes() == second.read_bytes()
    assert read_config(first.read_text())["command"] == argv[0]


def test_thread_count_does_not_change_artifacts(tmp_path):
    argv = ["basin", "--n", "2000", "--trials", "8", "--seed", "5"]
    paths = []
    for t in ("1", "3"):
        p = tmp_path / f"basin{t}.json"
        assert main(argv + ["--threads", t, "--out", str(p)]) == 0
        paths.append(p)
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_threads_env_fallback(tmp_path, monkeypatch):
    argv = ["billiard-invariance", "--table", "disk", "--samples", "2000", "--steps", "2"]
    p1, p4 = tmp_path / "one.json", tmp_path / "four.json"
    assert main(argv + ["--out", str(p1)]) == 0
    monkeypatch.setenv("ERGOLAB_THREADS", "4")
    assert main(argv + ["--out", str(p4)]) == 0
    assert p1.read_bytes() == p4.read_bytes()
    monkeypatch.setenv("ERGOLAB_THREADS", "0")
    assert main(argv + ["--out", str(p4)]) == 2
