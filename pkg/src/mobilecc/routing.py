"""Level-based forwarding with availability flags and stall detection.

Every node forwards to its lowest-level available neighbor, breaking ties
on the smallest node id (so a dynamic spanning tree of shortest paths
forms).  A sink-issued route override short-circuits the rule and pins a
sender to a relief mobile.  When no available lower-level neighbor exists
the node is stalled; stalled traffic waits in place and overflowing
arrivals are tail-dropped.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional

from .topology import Network

#: A route decision is the chosen next-hop id, or None for the stall state.
RouteDecision = Optional[int]


@dataclass(frozen=True)
class RouteOverride:
    """Pin ``sender`` to forward through ``next_hop`` (a relief mobile)."""

    sender: int
    next_hop: int


def next_hop(
    sender: int,
    network: Network,
    overrides: Optional[Mapping[int, int]] = None,
) -> RouteDecision:
    """Next hop for ``sender``, or None when the sender is stalled.

    An active override wins whenever its target is radio-on and in range.
    Otherwise the available neighbor with the lowest level is chosen,
    smallest id first on ties; the sink's availability flag is ignored
    (the sink never refuses traffic).
    """
    nodes = network.nodes
    me = nodes.get(sender)
    if me is None:
        raise KeyError(f"unknown node {sender}")
    if overrides:
        target = overrides.get(sender)
        if target is not None:
            tgt = nodes.get(target)
            if tgt is not None and tgt.radio_on and target in network.in_range_sets[sender]:
                return target
    if not me.radio_on or me.level is None:
        return None
    sink = network.sink
    avail = network.availability
    for cand in network.route_candidates[sender]:
        if cand == sink or avail.get(cand, True):
            return cand
    return None


def set_availability(node: int, flag: bool, network: Network) -> Network:
    """Update a node's declared availability flag.

    The declaration reaches neighbor tables at the next sample tick (the
    engine snapshots ``self_flags`` into ``availability`` once per tick).
    Flags on the sink are ignored by routing either way.
    """
    if node not in network.nodes:
        raise KeyError(f"unknown node {node}")
    network.self_flags[node] = flag
    return network


def propagate_flags(network: Network) -> None:
    """Copy declared flags into the table view (one sample tick elapsed)."""
    network.availability.update(network.self_flags)
