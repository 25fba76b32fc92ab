"""Problem instance and solution types for wireless overlay embedding.

An instance pairs an :class:`InfrastructureNetwork` (radio nodes, capacities,
pairwise attenuation) with an :class:`OverlayApp` (processing blocks and the
data dependencies between them).  A :class:`Solution` places every block on a
node and lists the slotted transmissions that carry block outputs between
nodes.  Forwarding and slot-usage indicators are derived from the
transmissions instead of being stored.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple, Optional, Union

import numpy as np

NodeId = str
BlockId = str

SIGNAL_MODELS = ("gamma", "unit")


class InstanceError(ValueError):
    """Raised for malformed instance or solution data."""


@dataclass(frozen=True, eq=False)
class InfrastructureNetwork:
    node_ids: tuple[NodeId, ...]
    capacities: Mapping[NodeId, float]
    gamma: np.ndarray
    noise_floor: float
    sinr_threshold: float
    max_slots: int
    source_nodes: frozenset[NodeId]
    sink_node: NodeId
    positions: Optional[Mapping[NodeId, tuple[float, float]]] = None
    signal_model: str = "gamma"
    # Desired rate annotation (bit/s); carried through files, never used numerically.
    rate: Optional[float] = None

    def __post_init__(self):
        nodes = tuple(str(v) for v in self.node_ids)
        object.__setattr__(self, "node_ids", nodes)
        if len(set(nodes)) != len(nodes):
            raise InstanceError("duplicate node ids")
        gamma = np.array(self.gamma, dtype=float)
        n = len(nodes)
        if gamma.shape != (n, n):
            raise InstanceError(f"gamma must be {n}x{n}, got {gamma.shape}")
        if np.any(gamma < 0):
            raise InstanceError("gamma entries must be nonnegative")
        if np.any(np.diag(gamma) != 0):
            raise InstanceError("gamma must have a zero diagonal")
        gamma.setflags(write=False)
        object.__setattr__(self, "gamma", gamma)
        caps = {str(v): float(c) for v, c in dict(self.capacities).items()}
        if set(caps) != set(nodes):
            raise InstanceError("capacities must cover exactly the node ids")
        if any(c < 0 for c in caps.values()):
            raise InstanceError("capacities must be nonnegative")
        object.__setattr__(self, "capacities", caps)
        sources = frozenset(str(v) for v in self.source_nodes)
        if not sources or not sources <= set(nodes):
            raise InstanceError("source nodes must be a nonempty subset of the nodes")
        object.__setattr__(self, "source_nodes", sources)
        object.__setattr__(self, "sink_node", str(self.sink_node))
        if self.sink_node not in nodes:
            raise InstanceError(f"unknown sink node {self.sink_node!r}")
        if self.noise_floor <= 0 or self.sinr_threshold <= 0:
            raise InstanceError("noise floor and SINR threshold must be positive")
        if int(self.max_slots) < 1:
            raise InstanceError("max_slots must be at least 1")
        object.__setattr__(self, "max_slots", int(self.max_slots))
        if self.signal_model not in SIGNAL_MODELS:
            raise InstanceError(f"signal_model must be one of {SIGNAL_MODELS}")
        if self.positions is not None:
            pos = {str(v): (float(x), float(y)) for v, (x, y) in dict(self.positions).items()}
            object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "_index", {v: i for i, v in enumerate(nodes)})

    @property
    def n(self) -> int:
        return len(self.node_ids)

    def index(self, v: NodeId) -> int:
        return self._index[v]

    def att(self, u: NodeId, v: NodeId) -> float:
        """Attenuation from ``u`` to ``v``."""
        return float(self.gamma[self._index[u], self._index[v]])

    def signal(self, u: NodeId, v: NodeId) -> float:
        """Received signal power at ``v`` for unit transmit power at ``u``."""
        if self.signal_model == "unit":
            return 1.0
        return self.att(u, v)

    def replace(self, **changes) -> "InfrastructureNetwork":
        kw = {f: getattr(self, f) for f in self.__dataclass_fields__}
        kw.update(changes)
        return InfrastructureNetwork(**kw)


@dataclass(frozen=True)
class OverlayApp:
    block_ids: tuple[BlockId, ...]
    weights: Mapping[BlockId, float]
    links: tuple[tuple[BlockId, BlockId], ...]
    source_block: BlockId
    sink_block: BlockId

    def __post_init__(self):
        blocks = tuple(str(p) for p in self.block_ids)
        if len(set(blocks)) != len(blocks):
            raise InstanceError("duplicate block ids")
        object.__setattr__(self, "block_ids", blocks)
        weights = {str(p): float(w) for p, w in dict(self.weights).items()}
        if set(weights) != set(blocks):
            raise InstanceError("weights must cover exactly the block ids")
        if any(w < 0 for w in weights.values()):
            raise InstanceError("block weights must be nonnegative")
        object.__setattr__(self, "weights", weights)
        links = []
        for a, b in self.links:
            a, b = str(a), str(b)
            if a not in weights or b not in weights:
                raise InstanceError(f"link ({a}, {b}) references an unknown block")
            if a == b:
                raise InstanceError(f"self link on block {a}")
            if (a, b) not in links:
                links.append((a, b))
        object.__setattr__(self, "links", tuple(links))
        object.__setattr__(self, "source_block", str(self.source_block))
        object.__setattr__(self, "sink_block", str(self.sink_block))
        for p in (self.source_block, self.sink_block):
            if p not in weights:
                raise InstanceError(f"unknown block {p!r}")
        if any(b == self.source_block for _, b in links):
            raise InstanceError("source block must not have incoming links")
        if any(a == self.sink_block for a, _ in links):
            raise InstanceError("sink block must not have outgoing links")

    def successors(self, p: BlockId) -> list[BlockId]:
        return [b for a, b in self.links if a == p]

    def predecessors(self, p: BlockId) -> list[BlockId]:
        return [a for a, b in self.links if b == p]


class Transmission(NamedTuple):
    """``sender`` sends to ``receiver`` in ``slot`` the output of ``block`` hosted on ``origin``."""

    sender: NodeId
    receiver: NodeId
    block: BlockId
    origin: NodeId
    slot: int


@dataclass(frozen=True)
class Solution:
    placement: Mapping[BlockId, frozenset[NodeId]]
    transmissions: frozenset[Transmission] = field(default_factory=frozenset)

    def __post_init__(self):
        placement = {}
        for p, hosts in dict(self.placement).items():
            if isinstance(hosts, str):
                hosts = (hosts,)
            placement[str(p)] = frozenset(str(v) for v in hosts)
        object.__setattr__(self, "placement", placement)
        txs = frozenset(
            Transmission(str(a), str(b), str(p), str(o), int(t))
            for a, b, p, o, t in self.transmissions
        )
        object.__setattr__(self, "transmissions", txs)

    @property
    def frame_length(self) -> int:
        return max((tx.slot for tx in self.transmissions), default=-1) + 1

    def hosts(self, p: BlockId) -> frozenset[NodeId]:
        return self.placement.get(p, frozenset())

    def sorted_transmissions(self) -> list[Transmission]:
        return sorted(self.transmissions, key=lambda tx: (tx.slot, tx.sender, tx.block, tx.origin, tx.receiver))

    def replace(self, placement=None, transmissions=None) -> "Solution":
        return Solution(
            self.placement if placement is None else placement,
            self.transmissions if transmissions is None else transmissions,
        )


def derive_forwarding(sol: Solution) -> dict[tuple[BlockId, NodeId, int], bool]:
    """Forwarding indicator: True for each (block, node, slot) in which the node sends that block's output."""
    return {(tx.block, tx.sender, tx.slot): True for tx in sol.transmissions}


def derive_used_slots(sol: Solution) -> dict[int, bool]:
    """Slot-usage indicator over ``0..frame_length-1``."""
    used = {tx.slot for tx in sol.transmissions}
    return {t: t in used for t in range(sol.frame_length)}


def objective(sol: Solution) -> int:
    return sum(derive_used_slots(sol).values())


# --- files -----------------------------------------------------------------

PathLike = Union[str, Path]


def attenuation_matrix(node_ids, positions) -> np.ndarray:
    # deferred import keeps radio free to import model
    from .radio import attenuation_from_positions

    return attenuation_from_positions({v: positions[v] for v in node_ids}, order=node_ids)


def network_from_dict(d: dict) -> InfrastructureNetwork:
    try:
        nodes = d["nodes"]
        node_ids = [str(n["id"]) for n in nodes]
        caps = {str(n["id"]): n["capacity"] for n in nodes}
        positions = None
        if all("x" in n and "y" in n for n in nodes):
            positions = {str(n["id"]): (n["x"], n["y"]) for n in nodes}
        if "gamma" in d:
            gamma = d["gamma"]
        elif positions is not None:
            gamma = attenuation_matrix(node_ids, positions)
        else:
            raise InstanceError("infrastructure needs either gamma or node positions")
        return InfrastructureNetwork(
            node_ids=tuple(node_ids),
            capacities=caps,
            gamma=gamma,
            noise_floor=d["noise_floor"],
            sinr_threshold=d["sinr_threshold"],
            max_slots=d["max_slots"],
            source_nodes=frozenset(d["sources"]),
            sink_node=d["sink"],
            positions=positions,
            signal_model=d.get("signal_model", "gamma"),
            rate=d.get("rate"),
        )
    except KeyError as e:
        raise InstanceError(f"missing infrastructure field {e}") from None


def network_to_dict(net: InfrastructureNetwork, include_gamma: bool = True) -> dict:
    nodes = []
    for v in net.node_ids:
        entry = {"id": v, "capacity": net.capacities[v]}
        if net.positions is not None:
            entry["x"], entry["y"] = net.positions[v]
        nodes.append(entry)
    d = {
        "nodes": nodes,
        "noise_floor": net.noise_floor,
        "sinr_threshold": net.sinr_threshold,
        "max_slots": net.max_slots,
        "sources": sorted(net.source_nodes, key=net.index),
        "sink": net.sink_node,
    }
    if include_gamma or net.positions is None:
        d["gamma"] = net.gamma.tolist()
    if net.signal_model != "gamma":
        d["signal_model"] = net.signal_model
    if net.rate is not None:
        d["rate"] = net.rate
    return d


def overlay_from_dict(d: dict) -> OverlayApp:
    try:
        return OverlayApp(
            block_ids=tuple(str(b["id"]) for b in d["blocks"]),
            weights={str(b["id"]): b.get("weight", 0.0) for b in d["blocks"]},
            links=tuple((a, b) for a, b in d["links"]),
            source_block=d["source_block"],
            sink_block=d["sink_block"],
        )
    except KeyError as e:
        raise InstanceError(f"missing overlay field {e}") from None


def overlay_to_dict(app: OverlayApp) -> dict:
    return {
        "blocks": [{"id": p, "weight": app.weights[p]} for p in app.block_ids],
        "links": [list(link) for link in app.links],
        "source_block": app.source_block,
        "sink_block": app.sink_block,
    }


def load_instance(path: PathLike) -> tuple[InfrastructureNetwork, OverlayApp]:
    d = json.loads(Path(path).read_text())
    if "infrastructure" not in d or "overlay" not in d:
        raise InstanceError("instance file needs 'infrastructure' and 'overlay' keys")
    return network_from_dict(d["infrastructure"]), overlay_from_dict(d["overlay"])


def dump_instance(net: InfrastructureNetwork, app: OverlayApp, path: PathLike) -> None:
    doc = {"infrastructure": network_to_dict(net), "overlay": overlay_to_dict(app)}
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def solution_to_dict(sol: Solution) -> dict:
    return {
        "placement": {p: sorted(sol.placement[p]) for p in sorted(sol.placement)},
        "transmissions": [list(tx) for tx in sol.sorted_transmissions()],
    }


def solution_from_dict(d: dict) -> Solution:
    try:
        return Solution(d["placement"], frozenset(tuple(tx) for tx in d["transmissions"]))
    except (KeyError, TypeError, ValueError) as e:
        raise InstanceError(f"malformed solution: {e}") from None


def dump_solution(sol: Solution, path: PathLike) -> None:
    Path(path).write_text(json.dumps(solution_to_dict(sol), indent=2) + "\n")


def load_solution(path: PathLike) -> Solution:
    return solution_from_dict(json.loads(Path(path).read_text()))


def make_solution(placement: Mapping, transmissions: Iterable) -> Solution:
    """Convenience constructor accepting plain tuples."""
    return Solution(placement, frozenset(tuple(tx) for tx in transmissions))
