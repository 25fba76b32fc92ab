"""Constraint checks for embedding solutions.

Every check returns a list of :class:`Violation`.  :func:`validate` runs them
all and wraps the result in a :class:`ValidationReport`.  Two flow modes exist:
``relaxed`` (default) accepts a block whose predecessor runs on the same node
without any transmission; ``strict`` demands a reception even then.
"""

from __future__ import annotations

import json
from collections import defaultdict, deque
from dataclasses import dataclass, field
from typing import NamedTuple

from .model import InfrastructureNetwork, OverlayApp, Solution
from .radio import SlotLoad, sinr_at, sinr_ok

PLACEMENT_UNIQUE = "PLACEMENT_UNIQUE"
CAPACITY = "CAPACITY"
SLOT_EXCLUSIVE = "SLOT_EXCLUSIVE"
SINR = "SINR"
DEP_DELIVERY = "DEP_DELIVERY"
NO_DEAD_END = "NO_DEAD_END"
SEND_LEGITIMACY = "SEND_LEGITIMACY"
PHANTOM_LOOP = "PHANTOM_LOOP"
STRUCTURAL = "STRUCTURAL"

TAGS = (
    PLACEMENT_UNIQUE, CAPACITY, SLOT_EXCLUSIVE, SINR, DEP_DELIVERY,
    NO_DEAD_END, SEND_LEGITIMACY, PHANTOM_LOOP, STRUCTURAL,
)
FLOW_TAGS = frozenset({DEP_DELIVERY, NO_DEAD_END, SEND_LEGITIMACY, PHANTOM_LOOP})
MODES = ("relaxed", "strict")

CAPACITY_TOL = 1e-9


class Violation(NamedTuple):
    tag: str
    detail: str
    entities: dict

    @property
    def block(self):
        return self.entities.get("block")


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def tags(self) -> set[str]:
        return {v.tag for v in self.violations}

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "violations": [
                {"tag": v.tag, "detail": v.detail, "entities": v.entities} for v in self.violations
            ],
        }

    def to_text(self) -> str:
        return json.dumps(self.to_dict(), indent=2, default=list)


def check_structure(sol: Solution, net: InfrastructureNetwork, app: OverlayApp) -> tuple[list[Violation], bool]:
    """Returns (violations, fatal).  Fatal problems make the other checks meaningless."""
    out = []
    nodes = set(net.node_ids)
    blocks = set(app.block_ids)
    for p, hosts in sol.placement.items():
        if p not in blocks:
            out.append(Violation(STRUCTURAL, f"unknown block {p!r} in placement", {"block": p}))
        for v in hosts - nodes:
            out.append(Violation(STRUCTURAL, f"block {p!r} placed on unknown node {v!r}", {"block": p, "node": v}))
    for tx in sol.transmissions:
        bad = [v for v in (tx.sender, tx.receiver, tx.origin) if v not in nodes]
        if bad or tx.block not in blocks:
            out.append(Violation(STRUCTURAL, f"transmission {tuple(tx)} references unknown ids", {"tx": tuple(tx)}))
        elif not 0 <= tx.slot < net.max_slots:
            out.append(Violation(STRUCTURAL, f"slot {tx.slot} outside [0, {net.max_slots})", {"tx": tuple(tx)}))
        elif tx.sender == tx.receiver:
            out.append(Violation(STRUCTURAL, f"node {tx.sender!r} transmits to itself", {"tx": tuple(tx)}))
    fatal = bool(out)
    for tx in sol.transmissions:
        if tx.block in blocks and tx.origin not in sol.hosts(tx.block):
            out.append(Violation(
                STRUCTURAL,
                f"transmission {tuple(tx)} claims origin {tx.origin!r} but block {tx.block!r} is not placed there",
                {"tx": tuple(tx), "block": tx.block, "origin": tx.origin},
            ))
    return out, fatal


def check_placement(sol: Solution, net: InfrastructureNetwork, app: OverlayApp) -> list[Violation]:
    out = []
    for p in app.block_ids:
        hosts = sol.hosts(p)
        if p == app.source_block:
            if hosts != net.source_nodes:
                out.append(Violation(
                    PLACEMENT_UNIQUE, f"source block {p!r} must run on exactly the source nodes",
                    {"block": p, "hosts": sorted(hosts)},
                ))
        elif p == app.sink_block and hosts != {net.sink_node}:
            out.append(Violation(
                PLACEMENT_UNIQUE, f"sink block {p!r} must run on the sink node {net.sink_node!r}",
                {"block": p, "hosts": sorted(hosts)},
            ))
        elif len(hosts) != 1:
            out.append(Violation(
                PLACEMENT_UNIQUE, f"block {p!r} placed {len(hosts)} times", {"block": p, "hosts": sorted(hosts)}
            ))
    load = defaultdict(float)
    for p, hosts in sol.placement.items():
        for v in hosts:
            load[v] += app.weights.get(p, 0.0)
    for v in net.node_ids:
        if load[v] > net.capacities[v] + CAPACITY_TOL:
            out.append(Violation(
                CAPACITY, f"node {v!r} load {load[v]:g} exceeds capacity {net.capacities[v]:g}",
                {"node": v, "load": load[v]},
            ))
    return out


def slot_activity(sol: Solution):
    """Per (node, slot): blocks sent and receptions taken."""
    sent = defaultdict(set)
    received = defaultdict(list)
    for tx in sol.transmissions:
        sent[tx.sender, tx.slot].add(tx.block)
        received[tx.receiver, tx.slot].append(tx)
    return sent, received


def check_slot_exclusivity(sol: Solution, net: InfrastructureNetwork) -> list[Violation]:
    out = []
    sent, received = slot_activity(sol)
    for key in sorted(set(sent) | set(received)):
        v, t = key
        blocks, rx = sent.get(key, set()), received.get(key, [])
        if len(blocks) + len(rx) <= 1:
            continue
        if blocks and rx:
            detail = f"node {v!r} both sends and receives in slot {t}"
        elif len(blocks) > 1:
            detail = f"node {v!r} sends {len(blocks)} blocks' traffic in slot {t}"
        else:
            detail = f"node {v!r} takes {len(rx)} receptions in slot {t}"
        out.append(Violation(SLOT_EXCLUSIVE, detail, {"node": v, "slot": t}))
    return out


def slot_loads(sol: Solution) -> dict[int, SlotLoad]:
    by_slot = defaultdict(set)
    for tx in sol.transmissions:
        by_slot[tx.slot].add((tx.sender, tx.receiver))
    return {t: SlotLoad.build(t, pairs) for t, pairs in by_slot.items()}


def check_sinr(sol: Solution, net: InfrastructureNetwork) -> list[Violation]:
    out = []
    for t, load in sorted(slot_loads(sol).items()):
        for s, r in sorted(load.receptions):
            value = sinr_at(s, r, load, net)
            if not sinr_ok(value, net.sinr_threshold):
                out.append(Violation(
                    SINR, f"SINR {value:.4g} of {s!r}->{r!r} in slot {t} below {net.sinr_threshold:g}",
                    {"sender": s, "receiver": r, "slot": t, "sinr": value},
                ))
    return out


def check_flow(sol: Solution, net: InfrastructureNetwork, app: OverlayApp, mode: str = "relaxed") -> list[Violation]:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    out = []
    received = defaultdict(set)   # (node, block) -> origins whose traffic arrived
    forwards = set()              # (node, block, origin) sent onwards
    for tx in sol.transmissions:
        received[tx.receiver, tx.block].add(tx.origin)
        forwards.add((tx.sender, tx.block, tx.origin))

    for p1, p2 in app.links:
        for v in sorted(sol.hosts(p2)):
            if received.get((v, p1)):
                continue
            if mode == "relaxed" and v in sol.hosts(p1):
                continue
            out.append(Violation(
                DEP_DELIVERY, f"node {v!r} hosts {p2!r} but never receives {p1!r}'s traffic",
                {"node": v, "block": p1, "link": (p1, p2)},
            ))

    for (v, p), origins in sorted(received.items()):
        hosts_successor = any(v in sol.hosts(q) for q in app.successors(p))
        for o in sorted(origins):
            if not hosts_successor and (v, p, o) not in forwards:
                out.append(Violation(
                    NO_DEAD_END, f"node {v!r} receives {p!r}'s traffic from {o!r} but neither uses nor forwards it",
                    {"node": v, "block": p, "origin": o},
                ))

    for v, p, o in sorted(forwards):
        if o in received.get((v, p), ()) or v in sol.hosts(p):
            continue
        out.append(Violation(
            SEND_LEGITIMACY, f"node {v!r} sends {p!r}'s traffic from {o!r} without having it",
            {"node": v, "block": p, "origin": o},
        ))
    return out


def check_no_phantom_loops(sol: Solution, net: InfrastructureNetwork, app: OverlayApp) -> list[Violation]:
    out = []
    edges = defaultdict(lambda: defaultdict(set))
    for tx in sol.transmissions:
        edges[tx.block, tx.origin][tx.sender].add(tx.receiver)
    for (p, o), adj in sorted(edges.items()):
        seen = {o}
        queue = deque([o])
        while queue:
            u = queue.popleft()
            for w in adj.get(u, ()):
                if w not in seen:
                    seen.add(w)
                    queue.append(w)
        for u in sorted(set(adj) - seen):
            out.append(Violation(
                PHANTOM_LOOP, f"node {u!r} relays {p!r}'s traffic but has no active path from origin {o!r}",
                {"node": u, "block": p, "origin": o},
            ))
    return out


def validate(sol: Solution, net: InfrastructureNetwork, app: OverlayApp, mode: str = "relaxed") -> ValidationReport:
    structural, fatal = check_structure(sol, net, app)
    if fatal:
        return ValidationReport(structural)
    return ValidationReport(
        structural
        + check_placement(sol, net, app)
        + check_slot_exclusivity(sol, net)
        + check_sinr(sol, net)
        + check_flow(sol, net, app, mode)
        + check_no_phantom_loops(sol, net, app)
    )
