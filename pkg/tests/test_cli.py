import json

import pytest

from wvne.cli import main
from wvne.model import load_solution


@pytest.fixture
def instance(tmp_path):
    path = tmp_path / "inst.json"
    assert main(["gen", "--nodes", "4", "--seed", "1", "--max-slots", "6", "--out", str(path)]) == 0
    return path


def test_solve_and_validate(instance, tmp_path, capsys):
    for method in ("exact", "heuristic"):
        out = tmp_path / f"{method}.json"
        assert main(["solve", "--instance", str(instance), "--method", method, "--k", "all",
                     "--out", str(out)]) == 0
        load_solution(out)
        assert main(["validate", "--instance", str(instance), "--solution", str(out)]) == 0
    printed = capsys.readouterr().out
    assert '"method": "exact"' in printed and '"ok": true' in printed
    # relaxed optimum co-locates blocks, which strict mode refuses
    assert main(["validate", "--instance", str(instance), "--solution", str(tmp_path / "exact.json"),
                 "--mode", "strict"]) == 1


def test_solution_files_are_deterministic(instance, tmp_path):
    for name in ("a", "b"):
        main(["solve", "--instance", str(instance), "--level", "2", "--seed", "5", "--out", str(tmp_path / name)])
    assert (tmp_path / "a").read_bytes() == (tmp_path / "b").read_bytes()


def test_infeasible_exit_code(tmp_path, capsys):
    path = tmp_path / "inst.json"
    main(["gen", "--nodes", "3", "--seed", "0", "--out", str(path)])
    doc = json.loads(path.read_text())
    for node in doc["infrastructure"]["nodes"]:
        node["capacity"] = 0.1
    path.write_text(json.dumps(doc))
    assert main(["solve", "--instance", str(path), "--method", "exact"]) == 2
    assert "infeasible" in capsys.readouterr().err


def test_emit(instance, tmp_path, capsys):
    out = tmp_path / "m.lp"
    assert main(["emit", "--instance", str(instance), "--out", str(out), "--big-m", "200",
                 "--signal-model", "unit"]) == 0
    text = out.read_text()
    assert "big_M=200" in text and "signal_model=unit" in text
    assert main(["emit", "--instance", str(instance), "--out", str(out), "--max-vars", "10"]) == 2
    assert "variables" in capsys.readouterr().err


def test_experiment(tmp_path, capsys):
    plan = tmp_path / "plan.json"
    plan.write_text(json.dumps({"node_counts": [4, 5], "levels": [1], "ks": [3, "all"], "seeds": 3}))
    out = tmp_path / "out"
    assert main(["experiment", "--config", str(plan), "--out-dir", str(out), "--no-timing"]) == 0
    first = (out / "records.csv").read_bytes()
    assert main(["experiment", "--config", str(plan), "--out-dir", str(out), "--no-timing", "--jobs", "2"]) == 0
    assert (out / "records.csv").read_bytes() == first
    assert {p.name for p in out.iterdir()} == {"records.csv", "summary.csv", "gap_ci.svg", "slots_vs_nodes.svg"}
    assert "level" in capsys.readouterr().out


def test_bad_input(tmp_path, capsys):
    assert main(["validate", "--instance", str(tmp_path / "nope.json"), "--solution", "x"]) == 2
    with pytest.raises(SystemExit):
        main(["solve"])
