"""Network model: node inventory, unit-disk adjacency and hop levels.

Two nodes are connected iff their distance is at most the (shared)
transmission range, and only radio-on nodes take part in the topology.
Levels are hop counts from the sink over that graph; they are recomputed
from scratch after every topology change, which is cheap at the network
sizes simulated here (tens of nodes).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .geometry import Point, distance


class NodeKind(Enum):
    SINK = "sink"
    STATIC = "static"
    MOBILE = "mobile"


class TopologyError(ValueError):
    """Invalid network construction or mutation."""


class PoolExhausted(RuntimeError):
    """No idle mobile node left in the pool."""


@dataclass
class NodeState:
    """One node of the network.

    ``level`` is the hop count to the sink over radio-on nodes (None while
    unreachable or radio-off).  Queue contents, counters and energy live in
    the simulation engine's run state, keyed by node id.
    """

    id: int
    kind: NodeKind
    position: Point
    radio_on: bool = True
    level: Optional[int] = None


@dataclass
class NeighborEntry:
    """Neighbor-table row as carried inside a congestion message."""

    neighbor: int
    hop: Optional[int]
    packets_received: int
    availability_flag: bool


@dataclass
class Network:
    """A network owned by exactly one simulation run."""

    nodes: dict[int, NodeState]
    sink: int
    tx_range: float
    mobile_pool: list[int] = field(default_factory=list)
    sources: list[int] = field(default_factory=list)

    # Derived structure, rebuilt by build_neighbor_tables/compute_levels.
    neighbors: dict[int, list[int]] = field(default_factory=dict)
    in_range_sets: dict[int, frozenset[int]] = field(default_factory=dict)
    route_candidates: dict[int, list[int]] = field(default_factory=dict)

    # Availability flags: ``self_flags`` is what each node currently
    # declares, ``availability`` the view propagated into neighbor tables
    # (updated once per sample tick).  The sink is always available.
    self_flags: dict[int, bool] = field(default_factory=dict)
    availability: dict[int, bool] = field(default_factory=dict)

    def __post_init__(self) -> None:
        sinks = [n for n in self.nodes.values() if n.kind is NodeKind.SINK]
        if len(sinks) != 1 or sinks[0].id != self.sink:
            raise TopologyError("network needs exactly one sink matching the sink id")
        if self.tx_range <= 0:
            raise TopologyError("transmission range must be positive")
        for nid in self.mobile_pool:
            node = self.nodes.get(nid)
            if node is None or node.kind is not NodeKind.MOBILE:
                raise TopologyError(f"pool id {nid} is not a mobile node")
            node.radio_on = False
        for nid in self.sources:
            node = self.nodes.get(nid)
            if node is None or node.kind is not NodeKind.STATIC:
                raise TopologyError(f"source id {nid} is not a static node")
        for nid in self.nodes:
            self.self_flags.setdefault(nid, True)
            self.availability.setdefault(nid, True)

    def sorted_ids(self) -> list[int]:
        return sorted(self.nodes)

    def refresh(self) -> None:
        """Rebuild neighbor tables, levels and routing candidates."""
        build_neighbor_tables(self)
        compute_levels(self)


def build_neighbor_tables(network: Network) -> Network:
    """Recompute unit-disk adjacency over radio-on nodes.

    Node b appears in a's table iff b is radio-on and within range of a;
    with a single shared range the relation is symmetric.  The same sets
    double as interference sets for the MAC (any transmission from a set
    member reaches the node).
    """
    ids = network.sorted_ids()
    r = network.tx_range
    nodes = network.nodes
    network.neighbors = {}
    network.in_range_sets = {}
    on = [i for i in ids if nodes[i].radio_on]
    pos = {i: nodes[i].position for i in on}
    for i in ids:
        if not nodes[i].radio_on:
            network.neighbors[i] = []
            network.in_range_sets[i] = frozenset()
            continue
        near = [
            j
            for j in on
            if j != i and distance(pos[i], pos[j]) <= r + 1e-9
        ]
        network.neighbors[i] = near
        network.in_range_sets[i] = frozenset(near)
    return network


def compute_levels(network: Network) -> Network:
    """BFS hop distance from the sink over radio-on nodes.

    Unreachable or radio-off nodes get level None and are excluded from
    routing.  Also refreshes per-node routing candidate lists (radio-on
    neighbors with strictly lower level, ordered by (level, id) so the
    lowest-level smallest-id neighbor comes first).
    """
    if not network.neighbors:
        build_neighbor_tables(network)
    nodes = network.nodes
    for n in nodes.values():
        n.level = None
    sink = nodes[network.sink]
    sink.level = 0
    frontier = deque([network.sink])
    while frontier:
        cur = frontier.popleft()
        lvl = nodes[cur].level
        assert lvl is not None
        for nbr in network.neighbors[cur]:
            if nodes[nbr].level is None:
                nodes[nbr].level = lvl + 1
                frontier.append(nbr)
    network.route_candidates = {}
    for i in network.sorted_ids():
        me = nodes[i]
        if not me.radio_on or me.level is None:
            network.route_candidates[i] = []
            continue
        cands = [
            j
            for j in network.neighbors[i]
            if nodes[j].level is not None and nodes[j].level < me.level
        ]
        cands.sort(key=lambda j: (nodes[j].level, j))
        network.route_candidates[i] = cands
    return network


def place_mobile(network: Network, node_id: int, position: Point) -> Network:
    """Bring a (reserved) mobile's radio up at ``position`` and rebuild.

    Pool bookkeeping is the caller's concern: the engine reserves mobiles
    out of the pool at dispatch time and places them on arrival.
    """
    node = network.nodes[node_id]
    if node.kind is not NodeKind.MOBILE:
        raise TopologyError(f"node {node_id} is not a mobile node")
    node.position = Point(*position)
    node.radio_on = True
    network.refresh()
    return network


def admit_mobile(network: Network, node_id: int, position: Point) -> Network:
    """Take a mobile from the pool and place it at ``position``.

    The mobile leaves the pool, joins the topology, and neighbor tables
    plus levels are recomputed for the whole network (correctness over
    micro-optimisation at these sizes).
    """
    if node_id not in network.mobile_pool:
        raise PoolExhausted(f"mobile {node_id} is not idle in the pool")
    network.mobile_pool.remove(node_id)
    return place_mobile(network, node_id, position)
