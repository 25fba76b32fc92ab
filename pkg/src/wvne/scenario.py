"""Random indoor deployments and the canonical looped overlay.

Nodes are dropped uniformly at random in a square room, attenuation follows
``1/d^2`` and node capacities are uniform between the largest single block
weight and the total overlay weight.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import InfrastructureNetwork, OverlayApp
from .radio import attenuation_from_positions

SOURCE_BLOCK = "p_src"
SINK_BLOCK = "p_sink"

DEFAULT_NOISE_FLOOR = 1e-5
DEFAULT_SINR_THRESHOLD = 10.0


@dataclass(frozen=True)
class ScenarioConfig:
    node_count: int
    seed: int = 0
    room_side: float = 25.0
    noise_floor: float = DEFAULT_NOISE_FLOOR
    sinr_threshold: float = DEFAULT_SINR_THRESHOLD
    block_weight: float = 1.0
    max_slots: Optional[int] = None  # defaults to 4 * |L|
    source_count: int = 1

    def __post_init__(self):
        if self.node_count < 2:
            raise ValueError("need at least two nodes")
        if self.room_side <= 0:
            raise ValueError("room side must be positive")
        if not 1 <= self.source_count < self.node_count:
            raise ValueError("source_count must leave room for a distinct sink")


def looped_chain_overlay(w_o: float = 1.0) -> OverlayApp:
    """Five equally weighted blocks in a chain with a feedback link from 5 back to 2.

    The chain body is a reconstruction; load a custom overlay from file when
    the exact edge set matters.
    """
    if w_o < 0:
        raise ValueError("block weight must be nonnegative")
    body = [str(i) for i in range(1, 6)]
    blocks = (SOURCE_BLOCK, *body, SINK_BLOCK)
    weights = {p: (0.0 if p in (SOURCE_BLOCK, SINK_BLOCK) else float(w_o)) for p in blocks}
    links = [(SOURCE_BLOCK, "1"), ("1", "2"), ("2", "3"), ("3", "4"), ("4", "5"), ("5", "2"), ("5", SINK_BLOCK)]
    return OverlayApp(blocks, weights, tuple(links), SOURCE_BLOCK, SINK_BLOCK)


def node_names(count: int) -> tuple[str, ...]:
    width = len(str(count - 1))
    return tuple(f"v{i:0{width}d}" for i in range(count))


def generate_infrastructure(cfg: ScenarioConfig, app: Optional[OverlayApp] = None) -> InfrastructureNetwork:
    app = looped_chain_overlay(cfg.block_weight) if app is None else app
    rng = np.random.default_rng(cfg.seed)
    nodes = node_names(cfg.node_count)
    xy = rng.uniform(0.0, cfg.room_side, size=(cfg.node_count, 2))
    positions = {v: (float(x), float(y)) for v, (x, y) in zip(nodes, xy)}
    weights = list(app.weights.values())
    caps = rng.uniform(max(weights), sum(weights), size=cfg.node_count)
    picks = rng.choice(cfg.node_count, size=cfg.source_count + 1, replace=False)
    sources = frozenset(nodes[i] for i in picks[:-1])
    sink = nodes[picks[-1]]
    return InfrastructureNetwork(
        node_ids=nodes,
        capacities={v: float(c) for v, c in zip(nodes, caps)},
        gamma=attenuation_from_positions(positions, order=nodes),
        noise_floor=cfg.noise_floor,
        sinr_threshold=cfg.sinr_threshold,
        max_slots=cfg.max_slots if cfg.max_slots is not None else 4 * len(app.links),
        source_nodes=sources,
        sink_node=sink,
        positions=positions,
    )


def generate_instance(cfg: ScenarioConfig) -> tuple[InfrastructureNetwork, OverlayApp]:
    app = looped_chain_overlay(cfg.block_weight)
    return generate_infrastructure(cfg, app), app
