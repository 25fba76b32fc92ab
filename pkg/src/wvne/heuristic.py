"""Link-by-link embedding heuristic with lookahead and backtracking.

Overlay links are mapped in topological order.  Mapping a link means picking
an infrastructure path from the node hosting the sending block and, when the
receiving block is not placed yet, a node to host it at the end of that
path.  Each new hop gets a TDMA slot; a hop whose sender already transmits
the same traffic in a slot that the new receiver can hear joins that slot for
free (multicast).

``level`` consecutive links are decided together: every combination of
candidate mappings is priced by the total number of used slots and the
cheapest is committed (ties broken by a seeded RNG).  When no combination
fits, the previous decision is revisited with its next-best alternative.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import NamedTuple, Optional, Union

import numpy as np

from .exact import BudgetExhausted, Infeasible, fixed_placement
from .model import InfrastructureNetwork, OverlayApp, Solution
from .schedule import Schedule
from .validator import CAPACITY_TOL, validate

ALL = None
SLOT_CHOICES = ("auto", "first_fit", "all")


def parse_k(value: Union[int, str, None]) -> Optional[int]:
    if value is None or (isinstance(value, str) and value.lower() == "all"):
        return ALL
    k = int(value)
    if k < 1:
        raise ValueError("k must be a positive integer or 'all'")
    return k


@dataclass(frozen=True)
class HeuristicParams:
    level: int = 1
    k: Optional[int] = ALL
    seed: int = 0
    backtrack_budget: Optional[int] = 10_000
    max_path_hops: Optional[int] = None  # |V| - 1 when unset
    # "auto" branches over every feasible slot only when level covers all links
    slot_choice: str = "auto"

    def __post_init__(self):
        if self.level < 1:
            raise ValueError("level must be at least 1")
        object.__setattr__(self, "k", parse_k(self.k))
        if self.slot_choice not in SLOT_CHOICES:
            raise ValueError(f"slot_choice must be one of {SLOT_CHOICES}")


class Candidate(NamedTuple):
    link: tuple[str, str]
    host: Optional[str]          # node chosen for the receiving block, None if already placed
    hops: tuple                  # new transmissions (sender, receiver, block, origin, slot)
    cost: int                    # used slots after applying


@dataclass
class SearchStats:
    expansions: int = 0
    children: int = 0
    candidates: int = 0
    backtracks: int = 0
    decisions: int = 0

    @property
    def mean_branching(self) -> float:
        return self.children / self.expansions if self.expansions else 0.0


def order_links(app: OverlayApp) -> list[tuple[str, str]]:
    """Forward links in topological order, then the links that close overlay loops."""
    rank = {p: i for i, p in enumerate(app.block_ids)}
    succ = {p: sorted(app.successors(p), key=rank.get) for p in app.block_ids}
    state = {}
    back = set()

    def dfs(p):
        state[p] = "open"
        for q in succ[p]:
            if state.get(q) == "open":
                back.add((p, q))
            elif q not in state:
                dfs(q)
        state[p] = "done"

    dfs(app.source_block)
    for p in app.block_ids:
        if p not in state:
            dfs(p)

    forward = [link for link in app.links if link not in back]
    indeg = defaultdict(int)
    for _, b in forward:
        indeg[b] += 1
    ready = sorted((p for p in app.block_ids if indeg[p] == 0), key=rank.get)
    topo = {}
    while ready:
        p = ready.pop(0)
        topo[p] = len(topo)
        for a, b in forward:
            if a == p:
                indeg[b] -= 1
                if indeg[b] == 0:
                    ready.append(b)
                    ready.sort(key=rank.get)
    forward.sort(key=lambda link: (topo[link[0]], topo[link[1]]))
    back_sorted = sorted(back, key=lambda link: (topo[link[0]], topo[link[1]]))
    return forward + back_sorted


class _Embedder:
    def __init__(self, net: InfrastructureNetwork, app: OverlayApp, params: HeuristicParams):
        self.net = net
        self.app = app
        self.links = order_links(app)
        self.max_hops = params.max_path_hops if params.max_path_hops is not None else net.n - 1
        if params.slot_choice == "auto":
            self.first_fit = params.level < len(self.links)
        else:
            self.first_fit = params.slot_choice == "first_fit"
        self.sched = Schedule(net)
        self.placement = dict(fixed_placement(net, app))
        self.load = defaultdict(float)
        for p, hosts in self.placement.items():
            for v in hosts:
                self.load[v] += app.weights[p]
        for p, hosts in self.placement.items():
            for v in sorted(hosts, key=net.index):
                self.sched.add_root(p, v)
        self.rng = np.random.default_rng(params.seed)
        self.stats = SearchStats()
        k = params.k if params.k is not None else net.n
        # neighbours ranked by attenuation (strongest first), ties by node order
        self.ranked = {
            u: sorted((v for v in net.node_ids if v != u), key=lambda v: (-net.att(u, v), net.index(v)))
            for u in net.node_ids
        }
        self.k = k

    # --- state --------------------------------------------------------------

    def snapshot(self):
        return self.sched.mark(), dict(self.placement), dict(self.load)

    def restore(self, snap):
        mark, placement, load = snap
        self.sched.rollback(mark)
        for p in set(self.placement) - set(placement):
            self.sched.holders[p].clear()
        self.placement = dict(placement)
        self.load = defaultdict(float, load)

    def fits(self, block, node) -> bool:
        return self.load[node] + self.app.weights[block] <= self.net.capacities[node] + CAPACITY_TOL

    def place(self, block, node):
        self.placement[block] = frozenset({node})
        self.load[node] += self.app.weights[block]
        self.sched.add_root(block, node)

    def unplace(self, block, node):
        del self.placement[block]
        self.load[node] -= self.app.weights[block]
        self.sched.holders[block].clear()

    def apply(self, cand: Candidate):
        if cand.host is not None:
            self.place(cand.link[1], cand.host)
        for hop in cand.hops:
            self.sched.add(*hop)

    def revert(self, cand: Candidate):
        for _ in cand.hops:
            self.sched.undo()
        if cand.host is not None:
            self.unplace(cand.link[1], cand.host)

    # --- candidates ---------------------------------------------------------

    def candidates(self, link, cost_cap: Optional[int] = None, overflow: Optional[list] = None) -> list[Candidate]:
        """All mappings of ``link`` from the current state, ordered by cost (stable)."""
        p1, p2 = link
        if p1 not in self.placement:
            raise ValueError(f"block {p1!r} must be placed before mapping {link}")
        sched = self.sched
        target = self.placement.get(p2)
        out, seen = [], set()
        mark = sched.mark()

        def emit(host):
            hops = tuple(sched.txs[mark:])
            key = (host, frozenset(hops))
            if key not in seen:
                seen.add(key)
                out.append(Candidate(link, host, hops, sched.used))

        def reached(u):
            """Record a candidate ending at ``u``; True when the path must stop here."""
            if target is not None:
                if u in target:
                    emit(None)
                    return True
                return False
            if self.fits(p2, u):
                emit(u)
            return False

        def extend(u, origin, path):
            if reached(u) or len(path) - 1 >= self.max_hops:
                return
            nxt = [x for x in self.ranked[u] if x not in path][: self.k]
            self.stats.expansions += 1
            self.stats.children += len(nxt)
            for x in nxt:
                if sched.edges[u, x, p1, origin]:
                    path.append(x)
                    extend(x, origin, path)
                    path.pop()
                    continue
                if x in sched.holders[p1]:
                    continue
                for t in list(sched.options(u, x, p1, origin, first_fit=self.first_fit)):
                    sched.add(u, x, p1, origin, t)
                    if cost_cap is not None and sched.used > cost_cap:
                        overflow.append(sched.used)
                    else:
                        path.append(x)
                        extend(x, origin, path)
                        path.pop()
                    sched.undo()

        if target is not None:
            # already delivered (co-located or reached by an earlier multicast tree)
            if any(sched.received[v, p1] or v in self.placement[p1] for v in target):
                emit(None)
        for origin in sorted(self.placement[p1], key=self.net.index):
            extend(origin, origin, [origin])
        out.sort(key=lambda c: c.cost)
        self.stats.candidates += len(out)
        return out

    # --- lookahead ----------------------------------------------------------

    def combos(self, start: int, width: int, cap: int):
        """Combinations for links[start:start+width] with final cost <= cap, plus the next cap to try."""
        found, overflow = [], []
        chosen = []

        def rec(j):
            if j == width:
                found.append(tuple(chosen))
                return
            for cand in self.candidates(self.links[start + j], cap, overflow):
                self.apply(cand)
                chosen.append(cand)
                rec(j + 1)
                chosen.pop()
                self.revert(cand)

        rec(0)
        nxt = min((c for c in overflow if c > cap), default=None)
        return found, nxt


class _Decision:
    """One lookahead step: alternatives are served cheapest first, in random order within a cost."""

    def __init__(self, emb: _Embedder, start: int, width: int):
        self.start = start
        self.width = width
        self.snap = emb.snapshot()
        self.cap = emb.sched.used   # cost tier to enumerate next; None once exhausted
        self.served = -1            # every combination costing <= served was queued already
        self.queue = []

    def next(self, emb: _Embedder):
        while not self.queue:
            if self.cap is None:
                return None
            found, nxt = emb.combos(self.start, self.width, self.cap)
            found = [c for c in found if c[-1].cost > self.served]
            self.served = self.cap
            self.cap = nxt if nxt is not None and nxt <= emb.net.max_slots else None
            self.queue = [found[i] for i in emb.rng.permutation(len(found))]
        return self.queue.pop(0)


def solve_heuristic(net: InfrastructureNetwork, app: OverlayApp, params: Optional[HeuristicParams] = None,
                    stats: Optional[dict] = None) -> Solution:
    """Map every overlay link; raises :class:`Infeasible` or :class:`BudgetExhausted` on failure."""
    params = params or HeuristicParams()
    emb = _Embedder(net, app, params)
    total = len(emb.links)
    stack = []
    i = 0
    while i < total:
        dp = _Decision(emb, i, min(params.level, total - i))
        emb.stats.decisions += 1
        choice = dp.next(emb)
        while choice is None:
            if not stack:
                raise Infeasible("no feasible mapping for the overlay")
            emb.stats.backtracks += 1
            if params.backtrack_budget is not None and emb.stats.backtracks > params.backtrack_budget:
                raise BudgetExhausted(f"more than {params.backtrack_budget} backtracks")
            dp = stack.pop()
            emb.restore(dp.snap)
            choice = dp.next(emb)
        for cand in choice:
            emb.apply(cand)
        stack.append(dp)
        i = dp.start + dp.width

    sol = Solution(dict(emb.placement), emb.sched.transmissions())
    report = validate(sol, net, app, "relaxed")
    if not report.ok:
        raise AssertionError(f"heuristic produced an invalid solution: {report.violations[:3]}")
    if stats is not None:
        stats.update(vars(emb.stats))
        stats["mean_branching"] = emb.stats.mean_branching
        stats["objective"] = emb.sched.used
    return sol


def candidate_mappings(net: InfrastructureNetwork, app: OverlayApp, sol: Solution, link,
                       params: Optional[HeuristicParams] = None, stats: Optional[SearchStats] = None) -> list[Candidate]:
    """Candidates for ``link`` on top of a partial solution (for inspection and tests)."""
    emb = _Embedder(net, app, params or HeuristicParams())
    for p, hosts in sol.placement.items():
        if p not in emb.placement:
            for v in hosts:
                emb.place(p, v)
    for tx in sorted(sol.transmissions, key=lambda tx: (tx.slot, tx.sender, tx.receiver, tx.block)):
        if tx.slot > emb.sched.used:
            raise ValueError("partial solution must use a dense slot prefix")
        emb.sched.add(tx.sender, tx.receiver, tx.block, tx.origin, tx.slot)
    out = emb.candidates(tuple(link))
    if stats is not None:
        for f in ("expansions", "children", "candidates"):
            setattr(stats, f, getattr(stats, f) + getattr(emb.stats, f))
    return out
