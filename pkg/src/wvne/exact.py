"""Exact minimum-slot embedding at desk scale.

:func:`solve_exact` deepens the slot budget ``m`` one step at a time.  For
each budget it walks the capacity-feasible placements (cheapest lower bound
first) and, per placement, runs a depth-first search that routes every
required delivery along a path from a node already holding the traffic and
assigns each new hop a slot ``< m``.  The first budget with a feasible
schedule is optimal.

:func:`brute_force` is the independent oracle: it enumerates placements,
per-block delivery structures and every slot labelling, and keeps whatever
:func:`~wvne.validator.validate` accepts.
"""

from __future__ import annotations

import itertools
from collections import defaultdict
from dataclasses import dataclass
from typing import Optional

from .model import InfrastructureNetwork, OverlayApp, Solution, Transmission
from .schedule import Schedule
from .validator import (
    CAPACITY_TOL, MODES, check_flow, check_no_phantom_loops, check_placement, validate,
)


class SolverError(RuntimeError):
    pass


class Infeasible(SolverError):
    """No solution exists within the allowed number of slots."""


class BudgetExhausted(SolverError):
    """The search hit its node or backtrack limit before finishing."""


@dataclass(frozen=True)
class ExactConfig:
    slot_budget_start: int = 0
    slot_budget_max: Optional[int] = None
    node_limit: int = 5_000_000
    mode: str = "relaxed"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.slot_budget_max is not None and self.slot_budget_start > self.slot_budget_max:
            raise ValueError("slot_budget_start exceeds slot_budget_max")


# --- placements --------------------------------------------------------------

def free_blocks(app: OverlayApp) -> list[str]:
    return [p for p in app.block_ids if p not in (app.source_block, app.sink_block)]


def fixed_placement(net: InfrastructureNetwork, app: OverlayApp) -> dict:
    return {app.source_block: frozenset(net.source_nodes), app.sink_block: frozenset({net.sink_node})}


def enumerate_placements(net: InfrastructureNetwork, app: OverlayApp):
    """All placements respecting uniqueness and node capacities."""
    base = fixed_placement(net, app)
    load = defaultdict(float)
    for p, hosts in base.items():
        for v in hosts:
            load[v] += app.weights[p]
    if any(load[v] > net.capacities[v] + CAPACITY_TOL for v in net.node_ids):
        return
    blocks = free_blocks(app)
    chosen = {}

    def rec(i):
        if i == len(blocks):
            placement = dict(base)
            placement.update({p: frozenset({v}) for p, v in chosen.items()})
            yield placement
            return
        p = blocks[i]
        w = app.weights[p]
        for v in net.node_ids:
            if load[v] + w <= net.capacities[v] + CAPACITY_TOL:
                load[v] += w
                chosen[p] = v
                yield from rec(i + 1)
                load[v] -= w
                del chosen[p]

    yield from rec(0)


def delivery_targets(placement: dict, app: OverlayApp, mode: str) -> dict[str, list]:
    """Nodes that must receive each block's traffic under ``placement``."""
    targets = {}
    for p in app.block_ids:
        need = set()
        for q in app.successors(p):
            need |= placement[q]
        if mode == "relaxed":
            need -= placement[p]
        if need:
            targets[p] = sorted(need)
    return targets


def placement_lower_bound(placement: dict, app: OverlayApp, mode: str) -> int:
    """Per-node busy-slot bound: required receptions plus unavoidable sends."""
    need = defaultdict(int)
    for p, nodes in delivery_targets(placement, app, mode).items():
        for v in nodes:
            need[v] += 1
        hosts = placement[p]
        if len(hosts) == 1:
            need[next(iter(hosts))] += 1
    return max(need.values(), default=0)


def colocation_lower_bound(net: InfrastructureNetwork, app: OverlayApp) -> int:
    """Links whose endpoints fit together on no node, spread over the widest multicast."""
    fixed = fixed_placement(net, app)
    hard = 0
    for p1, p2 in app.links:
        if p1 in fixed and p2 in fixed:
            ok = bool(fixed[p1] & fixed[p2])
        elif p1 in fixed or p2 in fixed:
            pinned, other = (p1, p2) if p1 in fixed else (p2, p1)
            ok = any(
                net.capacities[v] + CAPACITY_TOL >= app.weights[other] + sum(app.weights[q] for q in fixed if v in fixed[q])
                for v in fixed[pinned]
            )
        else:
            ok = any(net.capacities[v] + CAPACITY_TOL >= app.weights[p1] + app.weights[p2] for v in net.node_ids)
        hard += not ok
    fanout = max(net.n - 1, 1)
    return -(-hard // fanout)


# --- exact search ------------------------------------------------------------

class _Search:
    def __init__(self, net, app, placement, budget, mode, counter, node_limit):
        self.net = net
        self.placement = placement
        self.budget = budget
        self.counter = counter
        self.node_limit = node_limit
        self.sched = Schedule(net, limit=budget)
        targets = delivery_targets(placement, app, mode)
        self.demands = [(p, w) for p in app.block_ids for w in targets.get(p, ())]
        self.single_host = {p: next(iter(placement[p])) for p in targets if len(placement[p]) == 1}
        for p in targets:
            for v in sorted(placement[p], key=net.index):
                self.sched.add_root(p, v)
        self.nodes = net.node_ids

    def tick(self):
        self.counter[0] += 1
        if self.counter[0] > self.node_limit:
            raise BudgetExhausted(f"exact search exceeded {self.node_limit} nodes")

    def bound_ok(self) -> bool:
        sched = self.sched
        if sched.used > self.budget:
            return False
        need = defaultdict(int)
        pending = set()
        for p, w in self.demands:
            if not sched.received[w, p]:
                need[w] += 1
                pending.add(p)
        for p in pending:
            h = self.single_host.get(p)
            if h is not None and not sched.sending.get((h, p, h)):
                need[h] += 1
        return all(sched.busy[v] + k <= self.budget for v, k in need.items())

    def run(self) -> bool:
        return self._demand(0)

    def _demand(self, i: int) -> bool:
        while i < len(self.demands) and self.sched.received[self.demands[i][1], self.demands[i][0]]:
            i += 1
        if i == len(self.demands):
            return True
        p, w = self.demands[i]
        holders = self.sched.holders[p]
        for u0 in list(holders):
            if self._extend(i, p, holders[u0], [u0], w):
                return True
        return False

    def _extend(self, i, p, origin, path, w) -> bool:
        """Grow ``path`` (starting at a holder) until it reaches ``w``, scheduling each hop."""
        u = path[-1]
        holders = self.sched.holders[p]
        for x in self.nodes:
            if x == u or x in path[1:]:
                continue
            if x != w and x in holders:
                continue
            if x == w and u == w:
                continue
            if len(path) > len(self.nodes):
                continue
            for t in list(self.sched.options(u, x, p, origin)):
                self.tick()
                self.sched.add(u, x, p, origin, t)
                if self.bound_ok():
                    if x == w:
                        if self._demand(i + 1):
                            return True
                    elif self._extend(i, p, origin, path + [x], w):
                        return True
                self.sched.undo()
        return False


def solve_exact(net: InfrastructureNetwork, app: OverlayApp, cfg: Optional[ExactConfig] = None,
                stats: Optional[dict] = None) -> Solution:
    """Minimum-slot solution accepted by the validator in ``cfg.mode``.

    Raises :class:`Infeasible` when no budget up to ``slot_budget_max`` works
    and :class:`BudgetExhausted` when ``node_limit`` search nodes are spent.
    """
    cfg = cfg or ExactConfig()
    top = net.max_slots if cfg.slot_budget_max is None else min(cfg.slot_budget_max, net.max_slots)
    ranked = sorted(
        ((placement_lower_bound(pl, app, cfg.mode), k, pl) for k, pl in enumerate(enumerate_placements(net, app))),
        key=lambda item: item[:2],
    )
    counter = [0]
    stats = {} if stats is None else stats
    stats.update(placements=len(ranked), search_nodes=0, budgets_tried=[])
    if not ranked:
        raise Infeasible("no placement satisfies the capacity constraints")
    start = max(cfg.slot_budget_start, ranked[0][0], colocation_lower_bound(net, app))
    for m in range(start, top + 1):
        stats["budgets_tried"].append(m)
        for lb, _, placement in ranked:
            if lb > m:
                break
            search = _Search(net, app, placement, m, cfg.mode, counter, cfg.node_limit)
            try:
                found = search.run()
            finally:
                stats["search_nodes"] = counter[0]
            if found:
                sol = Solution(placement, search.sched.transmissions())
                stats["objective"] = m
                return sol
    raise Infeasible(f"no solution with at most {top} slots")


# --- brute force oracle --------------------------------------------------------

def _chain_origin(x, parent, roots):
    seen = set()
    while x not in roots:
        if x in seen or parent.get(x) is None:
            return None
        seen.add(x)
        x = parent[x]
    return x


def block_structures(net, app, placement, p, mode):
    """Every way of giving each node at most one sender of ``p``'s traffic that passes the flow checks."""
    roots = placement[p]
    nodes = net.node_ids
    receivers = [x for x in nodes if x not in roots or mode == "strict"]
    out = []
    for choice in itertools.product(*[[None] + [u for u in nodes if u != x] for x in receivers]):
        parent = {x: u for x, u in zip(receivers, choice) if u is not None}
        edges = []
        for x, u in parent.items():
            o = _chain_origin(u, parent, roots)
            if o is None:
                break
            edges.append((u, x, p, o))
        else:
            probe = Solution(placement, frozenset(Transmission(*e, 0) for e in edges))
            bad = [v for v in check_flow(probe, net, app, mode) + check_no_phantom_loops(probe, net, app) if v.block == p]
            if not bad:
                out.append(edges)
    return out


def _labelled(options, cap, multicast):
    """Pick one structure per block and label its edges with slots in canonical first-use order.

    The only filter is per-slot exclusivity (a node either sends one block's
    traffic or takes one reception); everything else is left to the validator.
    """
    sends = defaultdict(set)     # (node, slot) -> blocks
    sending = defaultdict(int)   # (node, block, origin, slot) -> receivers
    recv = defaultdict(int)      # (node, slot) -> receptions
    chosen = []                  # (edge, slot)

    def edges_rec(bi, edges, i, used):
        if i == len(edges):
            yield from blocks_rec(bi + 1, used)
            return
        u, w, p, o = edges[i]
        for t in range(min(used + 1, cap)):
            if recv[u, t] or sends[w, t] or recv[w, t]:
                continue
            if sends[u, t] and sends[u, t] != {p}:
                continue
            if not multicast and sending[u, p, o, t]:
                continue
            added = p not in sends[u, t]
            sends[u, t].add(p)
            sending[u, p, o, t] += 1
            recv[w, t] += 1
            chosen.append((edges[i], t))
            yield from edges_rec(bi, edges, i + 1, max(used, t + 1))
            chosen.pop()
            recv[w, t] -= 1
            sending[u, p, o, t] -= 1
            if added:
                sends[u, t].discard(p)

    def blocks_rec(bi, used):
        if bi == len(options):
            if used == cap:
                yield chosen
            return
        for edges in options[bi]:
            yield from edges_rec(bi, edges, 0, used)

    yield from blocks_rec(0, 0)


def brute_force(net: InfrastructureNetwork, app: OverlayApp, slot_cap: int, mode: str = "relaxed",
                multicast: bool = True, stats: Optional[dict] = None) -> Solution:
    """Exhaustive minimum over placements x delivery structures x slot labellings.

    Only meant for three or four nodes.  With ``multicast=False`` no sender
    may serve two receivers with one transmission.
    """
    slot_cap = min(slot_cap, net.max_slots)
    stats = {} if stats is None else stats
    stats["validated"] = 0
    # the generator already enforces capacity; the validator stays the judge
    placements = [pl for pl in enumerate_placements(net, app) if not check_placement(Solution(pl), net, app)]
    cache = {}
    per_placement = []
    for pl in placements:
        options = []
        for p in app.block_ids:
            key = (p, pl[p], tuple(pl[q] for q in app.successors(p)))
            if key not in cache:
                cache[key] = block_structures(net, app, pl, p, mode)
            options.append(cache[key])
        per_placement.append((pl, options))

    for c in range(slot_cap + 1):
        for pl, options in per_placement:
            for labelled in _labelled(options, c, multicast):
                sol = Solution(pl, frozenset(Transmission(*e, t) for e, t in labelled))
                stats["validated"] += 1
                if validate(sol, net, app, mode).ok:
                    stats["objective"] = c
                    return sol
    raise Infeasible(f"no valid solution with at most {slot_cap} slots")
