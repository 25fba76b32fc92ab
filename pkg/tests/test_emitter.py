import itertools
from fractions import Fraction

import networkx as nx
import pytest
from hypothesis import given, settings, strategies as st

from conftest import multicast_instance, phantom_instance
from wvne.emitter import (
    LinExpr, ModelTooLarge, conjunction_expr, default_big_m, disjunction_expr, emit_model, flow_paths,
    substitute_and_check, track_flow, variable_estimate,
)
from wvne.exact import ExactConfig, solve_exact
from wvne.model import InfrastructureNetwork, OverlayApp, Solution, make_solution
from wvne.validator import validate


def bits(n):
    return itertools.product((0, 1), repeat=n)


@pytest.mark.parametrize("n", range(1, 7))
def test_conjunction_truth_table(n):
    xs = [f"x{i}" for i in range(n)]
    c = conjunction_expr(xs)
    for b in bits(n):
        assert c.holds(dict(zip(xs, b))) == all(b)


def test_linearisation_examples():
    c = conjunction_expr(["a", "b"])
    assert c.lhs({"a": 1, "b": 1}) + Fraction(1, 4) == 1
    assert c.lhs({"a": 0, "b": 1}) + Fraction(1, 4) == Fraction(1, 2)
    d = disjunction_expr(["a", "b"])
    assert d.holds({"a": 1, "b": 0})
    assert not d.holds({"a": 0, "b": 0})
    # the half-offset form rejects a true second disjunct alone
    assert d.lhs({"a": 0, "b": 1}) + Fraction(1, 2) == Fraction(3, 4)
    assert not d.holds({"a": 0, "b": 1})
    with pytest.raises(ValueError):
        conjunction_expr([])
    with pytest.raises(ValueError):
        disjunction_expr([])


def test_track_flow_base_case():
    e = track_flow("C", "B", "p", "C", (), 1, nodes="ABCD", slots=[0, 1])
    assert e.const == Fraction(1, 2)
    assert e.terms == {"s(C,B,p,C,0)": Fraction(1, 2), "s(C,B,p,C,1)": Fraction(1, 2)}


def test_track_flow_four_nodes():
    x = lambda a, b: LinExpr.var(f"x{a}{b}")  # noqa: E731
    paths = list(flow_paths("A", "B", "p", "C", {"B"}, 1, nodes="ABCD", edge_term=x))
    assert [pc.path for pc in paths] == [("C", "A"), ("C", "D", "A")]
    direct, via_d = (pc.expression for pc in paths)
    assert direct.terms == {"xCA": Fraction(3, 4)} and direct.const == Fraction(1, 4)
    assert via_d.terms == {"xCD": Fraction(3, 4), "xDA": Fraction(1, 8)} and via_d.const == Fraction(1, 8)
    # a term reaches 1 exactly when every hop is active
    for pc in paths:
        names = list(pc.expression.terms)
        for b in bits(len(names)):
            assert (pc.expression.value(dict(zip(names, b))) >= 1) == all(b)


def test_track_flow_unreachable_is_empty():
    e = track_flow("A", "B", "p", "C", {"B", "C"}, 1, nodes="ABC", slots=[0])
    assert e.terms == {} and e.const == 0
    with pytest.raises(ValueError):
        track_flow("A", "B", "p", "C", (), 0, nodes="ABC", slots=[0])


@pytest.mark.parametrize("n", range(2, 7))
def test_one_term_per_simple_path(n):
    nodes = [f"n{i}" for i in range(n)]
    g = nx.complete_graph(nodes)
    expected = sorted(tuple(p) for p in nx.all_simple_paths(g, nodes[0], nodes[-1]))
    got = sorted(pc.path for pc in flow_paths(nodes[-1], nodes[-1], "p", nodes[0], (), 1, nodes=nodes,
                                                edge_term=lambda a, b: LinExpr.var(a + b)))
    assert got == expected


def two_node():
    net = InfrastructureNetwork(("a", "b"), {"a": 1, "b": 1}, [[0, 0.25], [0.25, 0]], 0.01, 10, 2,
                                frozenset({"a"}), "b")
    app = OverlayApp(("s", "t"), {"s": 0, "t": 0}, (("s", "t"),), "s", "t")
    return net, app


def test_core_variable_count_closed_form():
    net, app = two_node()
    m = emit_model(net, app)
    V, P, T = 2, 2, 2
    counts = m.variable_counts()
    core = counts["theta"] + counts["f"] + counts["s"] + counts["beta"]
    assert core == P * V + P * V * T + V * V * P * V * T + T
    names = {n for n, *_ in m.variables}
    used = set(m.objective)
    for c in m.constraints:
        used |= set(c.linear)
        for x, y in c.quadratic:
            used |= {x, y}
    assert names == used
    assert all(c.family == "sinr" for c in m.constraints if c.quadratic)
    assert m.big_M == default_big_m(net) == V * V * T + 1


def test_two_node_solutions():
    net, app = two_node()
    m = emit_model(net, app)
    good = make_solution({"s": "a", "t": "b"}, [("a", "b", "s", "a", 1)])
    assert substitute_and_check(m, good) == []
    assert "recv(s,t,b)" in substitute_and_check(m, good.replace(transmissions=[]))
    with pytest.raises(ValueError):
        substitute_and_check(m, good.replace(transmissions=[("a", "b", "s", "a", 5)]))


def test_capacity_overrun_names_the_node():
    net, app = multicast_instance()
    sol = solve_exact(net, app, ExactConfig(mode="strict"))
    m = emit_model(net, app)
    assert substitute_and_check(m, sol) == []
    moved = sol.replace(placement={**sol.placement, "b3": frozenset({"B"})})
    assert "cap(B)" in substitute_and_check(m, moved)


def test_trivial_zero_hop_instance():
    net = InfrastructureNetwork(("a",), {"a": 0}, [[0]], 0.01, 10, 1, frozenset({"a"}), "a")
    app = OverlayApp(("s", "t"), {"s": 0, "t": 0}, (("s", "t"),), "s", "t")
    m = emit_model(net, app, mode="relaxed")
    assert substitute_and_check(m, Solution({"s": "a", "t": "a"})) == []


def test_phantom_loop_violates_loop_family():
    net, app, good, loop = phantom_instance()
    m = emit_model(net, app)
    assert substitute_and_check(m, good) == []
    bad = substitute_and_check(m, loop)
    assert bad and all(name.startswith("loop(") for name in bad)


def test_modes_and_signal_model():
    net, app = multicast_instance()
    strict = emit_model(net, app, "strict")
    relaxed = emit_model(net, app, "relaxed")
    r_strict = next(c for c in strict.constraints if c.name == "recv(p_src,b3,A)")
    r_relax = next(c for c in relaxed.constraints if c.name == "recv(p_src,b3,A)")
    assert "theta(p_src,A)" not in r_strict.linear and r_relax.linear["theta(p_src,A)"] == 1
    unit = emit_model(net, app, signal_model="unit")
    c = next(c for c in unit.constraints if c.name == "sinr(A,B,0)")
    assert c.linear["s(A,B,p_src,A,0)"] == pytest.approx(10 * 0.01 - 1.0)
    assert "signal_model=unit" in unit.to_lp()
    with pytest.raises(ValueError):
        emit_model(net, app, "loose")
    with pytest.raises(ValueError):
        emit_model(net, app, big_m=0)


def test_variable_cap():
    net, app = multicast_instance()
    with pytest.raises(ModelTooLarge) as err:
        emit_model(net, app, variable_cap=100)
    assert err.value.counts == variable_estimate(net, app)
    assert "s=" in str(err.value)


def test_lp_text(tmp_path):
    net, app = two_node()
    m = emit_model(net, app, big_m=Fraction(7, 2))
    path = tmp_path / "m.lp"
    m.write_lp(path)
    text = path.read_text()
    assert text.startswith("\\ wvne embedding model")
    for section in ("Minimize", "Subject To", "Binaries", "End"):
        assert f"\n{section}\n" in text
    assert "RECONSTRUCTION" in text
    assert "3.5 f(s,a,0)" in text
    four = emit_model(*multicast_instance()).to_lp()
    sinr_rows = [line for line in four.splitlines() if line.startswith(" sinr(")]
    assert sinr_rows and "[" in four and " * " in four
    assert "[" not in four.split("Binaries")[1]
    assert max(len(line) for line in text.splitlines()) <= 120
    assert "path(s,a,b,0): + y(s,a,b,0) - 0.75 e(a,b,s,a) <= 0.25" in text


def test_ids_are_sanitised():
    net = InfrastructureNetwork(("n 1", "n[2]"), {"n 1": 1, "n[2]": 1}, [[0, 0.25], [0.25, 0]], 0.01, 10, 1,
                                frozenset({"n 1"}), "n[2]")
    app = OverlayApp(("s", "t"), {"s": 0, "t": 0}, (("s", "t"),), "s", "t")
    text = emit_model(net, app).to_lp()
    assert "theta(s,n_1)" in text and "theta(s,n_2_)" in text
    clash = InfrastructureNetwork(("a b", "a_b"), {"a b": 1, "a_b": 1}, [[0, 0.25], [0.25, 0]], 0.01, 10, 1,
                                  frozenset({"a b"}), "a_b")
    with pytest.raises(ValueError):
        emit_model(clash, app)


_NET, _APP, _GOOD, _ = phantom_instance()
_MODEL = emit_model(_NET, _APP)
_TX = st.tuples(st.sampled_from(_NET.node_ids), st.sampled_from(_NET.node_ids), st.sampled_from(_APP.block_ids),
                st.sampled_from(_NET.node_ids), st.integers(0, _NET.max_slots - 1))


@settings(max_examples=150, deadline=None)
@given(st.frozensets(_TX, max_size=5), st.sampled_from(_NET.node_ids), st.booleans())
def test_parity_with_validator_on_random_solutions(txs, sink_host, keep_good):
    base = _GOOD.transmissions if keep_good else frozenset()
    sol = Solution({"p_src": "A", "p_sink": sink_host}, base | txs)
    ok = validate(sol, _NET, _APP, "strict").ok
    assert ok == (substitute_and_check(_MODEL, sol) == [])
