"""Attenuation and SINR arithmetic for slotted wireless transmissions.

All nodes transmit with unit power; the received signal of ``u -> v`` is the
attenuation ``gamma[u, v]`` (or 1 under the ``unit`` signal model).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .model import InfrastructureNetwork, NodeId

# Relative slack used when comparing an SINR against its threshold.
SINR_RTOL = 1e-9


@dataclass(frozen=True)
class SlotLoad:
    slot: int
    active_senders: frozenset[NodeId]
    receptions: frozenset[tuple[NodeId, NodeId]]

    @classmethod
    def build(cls, slot: int, receptions: Iterable[tuple[NodeId, NodeId]], senders: Iterable[NodeId] = ()):
        receptions = frozenset(receptions)
        active = frozenset(senders) | {s for s, _ in receptions}
        return cls(slot, active, receptions)


def attenuation_from_positions(
    positions: Mapping[NodeId, tuple[float, float]], order: Optional[Sequence[NodeId]] = None
) -> np.ndarray:
    """Free-space style attenuation ``1/d^2`` between every pair of positions."""
    order = list(positions) if order is None else list(order)
    xy = np.array([positions[v] for v in order], dtype=float).reshape(-1, 2)
    d2 = ((xy[:, None, :] - xy[None, :, :]) ** 2).sum(axis=-1)
    off = ~np.eye(len(order), dtype=bool)
    if np.any(d2[off] <= 0):
        raise ValueError("coincident node positions give a singular attenuation")
    gamma = np.zeros_like(d2)
    gamma[off] = 1.0 / d2[off]
    return gamma


def interference(receiver: NodeId, sender: NodeId, senders: Iterable[NodeId], net: InfrastructureNetwork) -> float:
    return sum(net.att(u, receiver) for u in senders if u != sender)


def sinr_at(sender: NodeId, receiver: NodeId, load: SlotLoad, net: InfrastructureNetwork) -> float:
    noise = net.noise_floor + interference(receiver, sender, load.active_senders, net)
    return net.signal(sender, receiver) / noise


def sinr_ok(sinr: float, threshold: float) -> bool:
    return sinr >= threshold * (1.0 - SINR_RTOL)


def slot_feasible(load: SlotLoad, net: InfrastructureNetwork) -> bool:
    receivers = [r for _, r in load.receptions]
    if len(set(receivers)) != len(receivers):
        return False
    if load.active_senders & set(receivers):
        return False
    return all(
        sinr_ok(sinr_at(s, r, load, net), net.sinr_threshold) for s, r in load.receptions
    )


def weakest_isolated_sinr(net: InfrastructureNetwork) -> float:
    """Smallest isolated-link SINR over all ordered pairs (inf for a single node)."""
    worst = math.inf
    for u in net.node_ids:
        for v in net.node_ids:
            if u != v:
                worst = min(worst, net.signal(u, v) / net.noise_floor)
    return worst
