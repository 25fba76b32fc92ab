"""Incremental TDMA schedule with undo, used by the search procedures.

Slots are kept as a dense prefix ``0..used-1``; a new slot is only ever opened
at index ``used``.  Each slot tracks which node sends which traffic and which
node receives from whom, so half-duplex, single-reception and SINR checks for
one extra transmission cost O(active senders).
"""

from __future__ import annotations

from collections import Counter, defaultdict
from typing import Iterator, Optional

from .model import InfrastructureNetwork, Transmission
from .radio import SINR_RTOL


class Schedule:
    def __init__(self, net: InfrastructureNetwork, limit: Optional[int] = None):
        self.net = net
        self.limit = net.max_slots if limit is None else min(limit, net.max_slots)
        nodes = net.node_ids
        self.att = {u: {v: net.att(u, v) for v in nodes} for u in nodes}
        self.sig = {u: {v: net.signal(u, v) for v in nodes} for u in nodes}
        self.noise = net.noise_floor
        self.min_sinr = net.sinr_threshold * (1.0 - SINR_RTOL)
        self.senders: list[dict] = []     # slot -> {node: (block, origin)}
        self.receivers: list[dict] = []   # slot -> {node: sender}
        self.txs: list[Transmission] = []
        self.sending = defaultdict(list)  # (node, block, origin) -> slots
        self.edges = Counter()            # (sender, receiver, block, origin) -> count
        self.holders = defaultdict(dict)  # block -> {node: origin}
        self.received = Counter()         # (node, block) -> receptions
        self.busy = Counter()             # node -> active slots
        self._log = []

    @property
    def used(self) -> int:
        return len(self.senders)

    def add_root(self, block, node) -> None:
        self.holders[block][node] = node

    def holds(self, node, block) -> bool:
        return node in self.holders[block]

    def feasible(self, slot: int, u, w, block, origin) -> bool:
        if slot == len(self.senders):
            return slot < self.limit and self.sig[u][w] >= self.min_sinr * self.noise
        senders, receivers = self.senders[slot], self.receivers[slot]
        if w in senders or w in receivers or u in receivers:
            return False
        att = self.att
        if u in senders:
            if senders[u] != (block, origin):
                return False
            interference = sum(att[x][w] for x in senders if x != u)
            return self.sig[u][w] >= self.min_sinr * (self.noise + interference)
        interference = sum(att[x][w] for x in senders)
        if self.sig[u][w] < self.min_sinr * (self.noise + interference):
            return False
        for r, s in receivers.items():
            interference = att[u][r] + sum(att[x][r] for x in senders if x != s)
            if self.sig[s][r] < self.min_sinr * (self.noise + interference):
                return False
        return True

    def options(self, u, w, block, origin, first_fit: bool = False) -> Iterator[int]:
        """Feasible slots for ``u -> w``: multicast reuse, then existing slots, then a new one."""
        reuse = self.sending.get((u, block, origin), ())
        for t in reuse:
            if self.feasible(t, u, w, block, origin):
                yield t
                if first_fit:
                    return
        for t in range(len(self.senders) + 1):
            if t in reuse:
                continue
            if self.feasible(t, u, w, block, origin):
                yield t
                if first_fit:
                    return

    def add(self, u, w, block, origin, slot: int) -> None:
        new_slot = slot == len(self.senders)
        if new_slot:
            self.senders.append({})
            self.receivers.append({})
        new_sender = u not in self.senders[slot]
        if new_sender:
            self.senders[slot][u] = (block, origin)
            self.sending[u, block, origin].append(slot)
            self.busy[u] += 1
        self.receivers[slot][w] = u
        self.busy[w] += 1
        self.edges[u, w, block, origin] += 1
        self.received[w, block] += 1
        new_holder = w not in self.holders[block]
        if new_holder:
            self.holders[block][w] = origin
        self.txs.append(Transmission(u, w, block, origin, slot))
        self._log.append((new_slot, new_sender, new_holder))

    def undo(self) -> None:
        new_slot, new_sender, new_holder = self._log.pop()
        u, w, block, origin, slot = self.txs.pop()
        if new_holder:
            del self.holders[block][w]
        self.received[w, block] -= 1
        self.edges[u, w, block, origin] -= 1
        self.busy[w] -= 1
        del self.receivers[slot][w]
        if new_sender:
            del self.senders[slot][u]
            self.sending[u, block, origin].pop()
            self.busy[u] -= 1
        if new_slot:
            self.senders.pop()
            self.receivers.pop()

    def mark(self) -> int:
        return len(self.txs)

    def rollback(self, mark: int) -> None:
        while len(self.txs) > mark:
            self.undo()

    def transmissions(self) -> frozenset[Transmission]:
        return frozenset(self.txs)
