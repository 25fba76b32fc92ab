import pytest

from conftest import feasible_corpus, multicast_instance
from wvne.exact import BudgetExhausted, Infeasible, solve_exact
from wvne.heuristic import (
    ALL, HeuristicParams, SearchStats, candidate_mappings, order_links, parse_k, solve_heuristic,
)
from wvne.model import Solution, objective
from wvne.scenario import ScenarioConfig, looped_chain_overlay, generate_instance
from wvne.validator import validate


def test_parse_k():
    assert parse_k("all") is ALL and parse_k("ALL") is ALL and parse_k(None) is ALL
    assert parse_k("3") == 3 and parse_k(6) == 6
    with pytest.raises(ValueError):
        parse_k(0)


def test_params_checks():
    assert HeuristicParams(k="all").k is None
    with pytest.raises(ValueError):
        HeuristicParams(level=0)
    with pytest.raises(ValueError):
        HeuristicParams(slot_choice="random")


def test_link_order_puts_loop_closing_link_last():
    links = order_links(looped_chain_overlay())
    assert links[-1] == ("5", "2")
    assert links[0] == ("p_src", "1")
    assert set(links) == set(looped_chain_overlay().links)
    seen = {"p_src"}
    for a, b in links:
        assert a in seen
        seen.add(b)


def test_multicast_found_at_level_one():
    net, app = multicast_instance()
    sol = solve_heuristic(net, app, HeuristicParams(level=1, k=ALL))
    assert objective(sol) == 2


def test_solutions_validate_and_respect_slot_budget():
    for seed in range(8):
        net, app = generate_instance(ScenarioConfig(7, seed=seed))
        for level in (1, 2):
            for k in (3, ALL):
                try:
                    sol = solve_heuristic(net, app, HeuristicParams(level=level, k=k, seed=seed))
                except Infeasible:
                    continue
                assert validate(sol, net, app).ok
                assert objective(sol) <= net.max_slots


def test_seeded_determinism():
    net, app = generate_instance(ScenarioConfig(8, seed=4))
    a = solve_heuristic(net, app, HeuristicParams(level=2, seed=9))
    b = solve_heuristic(net, app, HeuristicParams(level=2, seed=9))
    assert a == b


def test_full_lookahead_reaches_optimum():
    for seed, net, app, sol in feasible_corpus(4, 4, stress=True):
        full = HeuristicParams(level=len(app.links), k=ALL, backtrack_budget=None)
        assert objective(solve_heuristic(net, app, full)) == objective(sol)


def test_never_below_optimum():
    for seed, net, app, sol in feasible_corpus(4, 6):
        for k in (1, 2, ALL):
            try:
                h = solve_heuristic(net, app, HeuristicParams(k=k))
            except Infeasible:
                continue
            assert objective(h) >= objective(sol)


def test_stats_reported():
    net, app = generate_instance(ScenarioConfig(6, seed=1))
    stats = {}
    solve_heuristic(net, app, HeuristicParams(), stats)
    assert stats["expansions"] > 0 and stats["mean_branching"] > 0
    assert stats["objective"] >= 1


def test_candidates_grow_with_k():
    net, app = generate_instance(ScenarioConfig(9, seed=2))
    start = Solution({"p_src": net.source_nodes, "p_sink": net.sink_node})
    counts = []
    for k in (1, 3, ALL):
        st = SearchStats()
        cands = candidate_mappings(net, app, start, ("p_src", "1"), HeuristicParams(k=k, max_path_hops=2), st)
        assert cands == sorted(cands, key=lambda c: c.cost)
        counts.append((len(cands), st.mean_branching))
    assert counts[0] < counts[1] < counts[2]


def test_unplaced_sender_rejected():
    net, app = generate_instance(ScenarioConfig(4, seed=0))
    with pytest.raises(ValueError):
        candidate_mappings(net, app, Solution({}), ("1", "2"))


def test_budget_is_enforced():
    net, app = generate_instance(ScenarioConfig(4, seed=0))
    cramped = net.replace(capacities={v: 1.0 for v in net.node_ids})
    with pytest.raises(Infeasible):
        solve_exact(cramped, app)
    with pytest.raises((Infeasible, BudgetExhausted)):
        solve_heuristic(cramped, app, HeuristicParams(backtrack_budget=5))
