import json

import numpy as np
import pytest

from wvne.model import (
    InfrastructureNetwork, InstanceError, OverlayApp, Solution, Transmission, derive_forwarding,
    derive_used_slots, dump_instance, dump_solution, load_instance, load_solution, make_solution,
    objective, solution_to_dict,
)
from wvne.scenario import ScenarioConfig, generate_instance


def tiny_net(**kw):
    base = dict(node_ids=("a", "b"), capacities={"a": 1, "b": 1}, gamma=[[0, 0.5], [0.5, 0]],
                noise_floor=0.01, sinr_threshold=2.0, max_slots=3, source_nodes={"a"}, sink_node="b")
    base.update(kw)
    return InfrastructureNetwork(**base)


def test_network_accessors():
    net = tiny_net()
    assert net.n == 2
    assert net.index("b") == 1
    assert net.att("a", "b") == 0.5
    assert net.signal("a", "b") == 0.5
    assert net.replace(signal_model="unit").signal("a", "b") == 1.0
    with pytest.raises(ValueError):
        net.gamma[0, 1] = 3.0


@pytest.mark.parametrize("change", [
    {"capacities": {"a": 1}},
    {"capacities": {"a": -1, "b": 1}},
    {"gamma": [[0, 1], [1, 1]]},
    {"gamma": [[0, -1], [1, 0]]},
    {"gamma": [[0]]},
    {"source_nodes": set()},
    {"source_nodes": {"zz"}},
    {"sink_node": "zz"},
    {"noise_floor": 0},
    {"max_slots": 0},
    {"signal_model": "loud"},
    {"node_ids": ("a", "a")},
])
def test_network_rejects_bad_fields(change):
    with pytest.raises(InstanceError):
        tiny_net(**change)


@pytest.mark.parametrize("kw", [
    dict(block_ids=("s", "s"), weights={"s": 0}, links=(), source_block="s", sink_block="s"),
    dict(block_ids=("s", "t"), weights={"s": 0}, links=(), source_block="s", sink_block="t"),
    dict(block_ids=("s", "t"), weights={"s": 0, "t": -1}, links=(), source_block="s", sink_block="t"),
    dict(block_ids=("s", "t"), weights={"s": 0, "t": 0}, links=(("s", "x"),), source_block="s", sink_block="t"),
    dict(block_ids=("s", "t"), weights={"s": 0, "t": 0}, links=(("s", "s"),), source_block="s", sink_block="t"),
    dict(block_ids=("s", "t"), weights={"s": 0, "t": 0}, links=(("t", "s"),), source_block="s", sink_block="t"),
])
def test_overlay_rejects_bad_fields(kw):
    with pytest.raises(InstanceError):
        OverlayApp(**kw)


def test_overlay_dedupes_links_and_reports_neighbours():
    app = OverlayApp(("s", "x", "t"), {"s": 0, "x": 1, "t": 0}, (("s", "x"), ("s", "x"), ("x", "t")), "s", "t")
    assert app.links == (("s", "x"), ("x", "t"))
    assert app.successors("s") == ["x"]
    assert app.predecessors("t") == ["x"]


def test_solution_normalises_and_derives():
    sol = make_solution({"s": "a", "t": ["b"]}, [("a", "b", "s", "a", 2), ("a", "b", "s", "a", 0)])
    assert sol.hosts("t") == frozenset({"b"})
    assert all(isinstance(tx, Transmission) for tx in sol.transmissions)
    assert objective(sol) == 2
    assert sol.frame_length == 3
    assert derive_forwarding(sol) == {("s", "a", 0): True, ("s", "a", 2): True}
    assert derive_used_slots(sol) == {0: True, 1: False, 2: True}
    assert objective(Solution({"s": "a"})) == 0


def test_instance_and_solution_round_trip(tmp_path):
    net, app = generate_instance(ScenarioConfig(5, seed=3))
    dump_instance(net, app, tmp_path / "i.json")
    net2, app2 = load_instance(tmp_path / "i.json")
    assert net2.node_ids == net.node_ids
    assert np.array_equal(net2.gamma, net.gamma)
    assert net2.capacities == net.capacities and net2.sink_node == net.sink_node
    assert app2 == app
    sol = make_solution({"p_src": net.sink_node}, [(net.node_ids[0], net.node_ids[1], "1", net.node_ids[0], 0)])
    dump_solution(sol, tmp_path / "s.json")
    assert load_solution(tmp_path / "s.json") == sol
    assert json.loads((tmp_path / "s.json").read_text()) == solution_to_dict(sol)


def test_positions_only_file_derives_gamma(tmp_path):
    doc = {
        "infrastructure": {
            "nodes": [{"id": "a", "capacity": 1, "x": 0, "y": 0}, {"id": "b", "capacity": 1, "x": 2, "y": 0}],
            "noise_floor": 0.01, "sinr_threshold": 10, "max_slots": 2, "sources": ["a"], "sink": "b",
        },
        "overlay": {"blocks": [{"id": "s"}, {"id": "t"}], "links": [["s", "t"]],
                    "source_block": "s", "sink_block": "t"},
    }
    (tmp_path / "i.json").write_text(json.dumps(doc))
    net, _ = load_instance(tmp_path / "i.json")
    assert net.att("a", "b") == pytest.approx(0.25)


def test_missing_fields_are_reported(tmp_path):
    (tmp_path / "i.json").write_text(json.dumps({"infrastructure": {"nodes": []}, "overlay": {}}))
    with pytest.raises(InstanceError):
        load_instance(tmp_path / "i.json")
    (tmp_path / "j.json").write_text("{}")
    with pytest.raises(InstanceError):
        load_instance(tmp_path / "j.json")
