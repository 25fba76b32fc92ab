import numpy as np
import pytest

from wvne.exact import Infeasible, solve_exact
from wvne.model import InfrastructureNetwork, OverlayApp, make_solution
from wvne.scenario import ScenarioConfig, generate_instance

STRONG = 0.25   # 2 m apart under 1/d^2
WEAK = 1e-7     # far below the noise floor


def gamma_from(nodes, pairs, default=WEAK):
    idx = {v: i for i, v in enumerate(nodes)}
    g = np.full((len(nodes), len(nodes)), default)
    np.fill_diagonal(g, 0.0)
    for (a, b), val in pairs.items():
        g[idx[a], idx[b]] = g[idx[b], idx[a]] = val
    return g


def multicast_instance():
    """A reaches only B; B reaches C (sink) and D (the only node that fits block b3)."""
    nodes = ("A", "B", "C", "D")
    g = gamma_from(nodes, {("A", "B"): STRONG, ("B", "C"): STRONG, ("B", "D"): STRONG, ("C", "D"): STRONG})
    net = InfrastructureNetwork(
        node_ids=nodes, capacities={"A": 0, "B": 0, "C": 0, "D": 1}, gamma=g, noise_floor=0.01,
        sinr_threshold=10.0, max_slots=6, source_nodes=frozenset({"A"}), sink_node="C",
    )
    app = OverlayApp(
        block_ids=("p_src", "b3", "p_sink"), weights={"p_src": 0, "b3": 1, "p_sink": 0},
        links=(("p_src", "p_sink"), ("p_src", "b3")), source_block="p_src", sink_block="p_sink",
    )
    return net, app


def phantom_instance():
    """Source A delivers to sink C through B; E and F pass A's traffic back and forth."""
    nodes = ("A", "B", "C", "E", "F")
    g = gamma_from(nodes, {("A", "B"): STRONG, ("B", "C"): STRONG, ("E", "F"): STRONG})
    net = InfrastructureNetwork(
        node_ids=nodes, capacities={v: 1 for v in nodes}, gamma=g, noise_floor=0.01,
        sinr_threshold=10.0, max_slots=4, source_nodes=frozenset({"A"}), sink_node="C",
    )
    app = OverlayApp(("p_src", "p_sink"), {"p_src": 0, "p_sink": 0}, (("p_src", "p_sink"),), "p_src", "p_sink")
    good = make_solution({"p_src": "A", "p_sink": "C"},
                         [("A", "B", "p_src", "A", 0), ("B", "C", "p_src", "A", 1)])
    loop = good.replace(transmissions=good.transmissions | make_solution(
        {}, [("E", "F", "p_src", "A", 2), ("F", "E", "p_src", "A", 3)]).transmissions)
    return net, app, good, loop


def stressed(net, seed):
    """Tighter capacities so blocks must spread over several nodes."""
    rng = np.random.default_rng(1000 + seed)
    return net.replace(capacities={v: float(rng.uniform(1.2, 2.6)) for v in net.node_ids})


def feasible_corpus(node_count, count, max_slots=8, stress=False, start=0):
    out = []
    seed = start
    while len(out) < count:
        net, app = generate_instance(ScenarioConfig(node_count, seed=seed, max_slots=max_slots))
        if stress:
            net = stressed(net, seed)
        try:
            sol = solve_exact(net, app)
        except Infeasible:
            seed += 1
            continue
        out.append((seed, net, app, sol))
        seed += 1
    return out


@pytest.fixture(scope="session")
def corpus4():
    return feasible_corpus(4, 20) + feasible_corpus(4, 10, stress=True)


@pytest.fixture(scope="session")
def corpus3():
    return feasible_corpus(3, 10)
