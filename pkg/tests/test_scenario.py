import numpy as np
import pytest

from wvne.scenario import (
    SINK_BLOCK, SOURCE_BLOCK, ScenarioConfig, looped_chain_overlay, generate_infrastructure, generate_instance, node_names,
)


def test_overlay_shape():
    app = looped_chain_overlay(2.0)
    assert app.block_ids == (SOURCE_BLOCK, "1", "2", "3", "4", "5", SINK_BLOCK)
    assert ("5", "2") in app.links and len(app.links) == 7
    assert app.weights["3"] == 2.0 and app.weights[SOURCE_BLOCK] == 0.0
    with pytest.raises(ValueError):
        looped_chain_overlay(-1)


def test_node_names_are_padded():
    assert node_names(3) == ("v0", "v1", "v2")
    assert node_names(12)[3] == "v03"


@pytest.mark.parametrize("seed", range(5))
def test_generated_room(seed):
    cfg = ScenarioConfig(8, seed=seed)
    net, app = generate_instance(cfg)
    assert net.n == 8
    assert net.max_slots == 4 * len(app.links)
    assert net.sink_node not in net.source_nodes
    caps = np.array(list(net.capacities.values()))
    assert np.all(caps >= 1.0) and np.all(caps <= 5.0)
    for v, (x, y) in net.positions.items():
        assert 0 <= x <= 25 and 0 <= y <= 25
    u, w = net.node_ids[:2]
    (x1, y1), (x2, y2) = net.positions[u], net.positions[w]
    assert net.att(u, w) == pytest.approx(1 / ((x1 - x2) ** 2 + (y1 - y2) ** 2))


def test_generation_is_seeded():
    a, _ = generate_instance(ScenarioConfig(6, seed=11))
    b, _ = generate_instance(ScenarioConfig(6, seed=11))
    c, _ = generate_instance(ScenarioConfig(6, seed=12))
    assert np.array_equal(a.gamma, b.gamma) and a.capacities == b.capacities
    assert not np.array_equal(a.gamma, c.gamma)


def test_config_checks_and_sources():
    with pytest.raises(ValueError):
        ScenarioConfig(1)
    with pytest.raises(ValueError):
        ScenarioConfig(3, source_count=3)
    net = generate_infrastructure(ScenarioConfig(6, seed=2, source_count=2, max_slots=9))
    assert len(net.source_nodes) == 2 and net.max_slots == 9
