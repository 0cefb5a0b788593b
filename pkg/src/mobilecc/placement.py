"""Sink-side planner for relief mobiles.

Two strategies over the same congestion message:

* dynamic placement finds the smallest set of upstream contributors whose
  diverted traffic covers the hotspot's packet deficit, and parks one
  mobile at a geometric relief point on their range boundary toward the
  sink, handing the diverted flow to an existing non-congested node;
* direct placement starts from the same first relief point but then builds
  a disjoint chain of mobiles straight toward the sink, one transmission
  range per stride, so the diverted flow never re-enters the old tree.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional, Sequence

from . import congestion
from .congestion import CongestionMessage, ContributorProfile
from .geometry import Point, common_point_closest_to_sink, distance, in_range, point_toward_sink
from .topology import Network, PoolExhausted

#: Upper bound on contributors considered by the subset search; the widest
#: realistic in-range upstream set.  Subset sizes follow the 2..6 window.
MAX_CONTRIBUTORS = 20
SUBSET_SIZES = range(2, 7)


class ChainInfeasible(RuntimeError):
    """The pool cannot supply a full mobile chain; the chain is aborted."""


@dataclass(frozen=True)
class PlacementPlan:
    """One mobile's marching orders.

    ``served`` holds the senders that will be overridden to forward through
    the mobile; ``next_hop_hint`` is the existing node (or next chain
    mobile, or the sink) the mobile itself forwards to.
    """

    target: Point
    served: tuple[int, ...]
    next_hop_hint: int
    mobile: int


def find_forwarder(
    target: Point, congested_level: int, network: Network
) -> Optional[int]:
    """Existing node able to take diverted traffic onward from ``target``.

    Accepts the sink whenever the target is in its range, otherwise the
    lowest-level (then smallest-id) radio-on node strictly below the
    congested node's level that is not itself congestion-flagged.
    """
    r = network.tx_range
    sink = network.nodes[network.sink]
    if in_range(sink.position, target, r):
        return sink.id
    best: Optional[tuple[int, int]] = None
    for nid in network.sorted_ids():
        node = network.nodes[nid]
        if nid == network.sink or not node.radio_on or node.level is None:
            continue
        if node.level >= congested_level:
            continue
        if not network.availability.get(nid, True):
            continue
        if not in_range(node.position, target, r):
            continue
        key = (node.level, nid)
        if best is None or key < best:
            best = key
    return best[1] if best else None


def _single_node_candidates(
    profiles: Sequence[ContributorProfile], deficit: float
) -> list[ContributorProfile]:
    """Contributors whose own sending rate covers the deficit."""
    return [p for p in profiles if p.sending_rate >= deficit]


def _best_subset_target(
    profiles: Sequence[ContributorProfile],
    deficit: float,
    network: Network,
    congested_level: int,
    require_forwarder: bool,
) -> Optional[tuple[tuple[int, ...], Point, Optional[int]]]:
    """Smallest subset of contributors with a feasible common relief point.

    Enumerates subsets in lexicographic order per size, keeps those whose
    total sending rate covers the deficit and whose transmission disks
    share a point (closest to the sink per subset), and stops at the first
    size with any feasible subset, choosing the feasible point closest to
    the sink.
    """
    pool = sorted(profiles, key=lambda p: (-p.sending_rate, p.node))[:MAX_CONTRIBUTORS]
    by_id = sorted(pool, key=lambda p: p.node)
    r = network.tx_range
    sinkpos = network.nodes[network.sink].position
    for n in SUBSET_SIZES:
        if n > len(by_id):
            break
        best = None
        for subset in itertools.combinations(by_id, n):
            if sum(p.sending_rate for p in subset) < deficit:
                continue
            centers = [network.nodes[p.node].position for p in subset]
            point = common_point_closest_to_sink(centers, r, sinkpos)
            if point is None:
                continue
            forwarder = None
            if require_forwarder:
                forwarder = find_forwarder(point, congested_level, network)
                if forwarder is None:
                    continue
            ids = tuple(p.node for p in subset)
            key = (distance(point, sinkpos), point.x, point.y, ids)
            if best is None or key < best[0]:
                best = (key, ids, point, forwarder)
        if best is not None:
            return best[1], best[2], best[3]
    return None


def plan_dynamic(
    cm: CongestionMessage,
    network: Network,
    pool: Sequence[int],
    profiles: Optional[Sequence[ContributorProfile]] = None,
) -> list[PlacementPlan]:
    """Plan a single relief mobile for one congestion occurrence.

    Prefers a single contributor whose rate alone covers the deficit (taken
    in descending-rate then ascending-id order, first one whose relief
    point has a non-congested forwarder in range); falls back to the
    smallest contributor subset with a common feasible point.  Returns an
    empty list when nothing is feasible.
    """
    if not pool:
        raise PoolExhausted("no idle mobile available for dynamic placement")
    if profiles is None:
        profiles = congestion.contributors(cm, network)
    if not profiles:
        return []
    deficit = congestion.deficit_rate(cm)
    r = network.tx_range
    sinkpos = network.nodes[network.sink].position
    for prof in _single_node_candidates(profiles, deficit):
        target = point_toward_sink(network.nodes[prof.node].position, r, sinkpos)
        forwarder = find_forwarder(target, cm.congested_level, network)
        if forwarder is not None:
            return [PlacementPlan(target, (prof.node,), forwarder, pool[0])]
    found = _best_subset_target(
        profiles, deficit, network, cm.congested_level, require_forwarder=True
    )
    if found is None:
        return []
    ids, point, forwarder = found
    assert forwarder is not None
    return [PlacementPlan(point, ids, forwarder, pool[0])]


def chain_targets(first: Point, network: Network) -> list[Point]:
    """Relief point followed by range-length strides straight to the sink."""
    r = network.tx_range
    sinkpos = network.nodes[network.sink].position
    targets = [first]
    while not in_range(targets[-1], sinkpos, r):
        targets.append(point_toward_sink(targets[-1], r, sinkpos))
    return targets


def plan_direct(
    cm: CongestionMessage,
    network: Network,
    pool: Sequence[int],
    profiles: Optional[Sequence[ContributorProfile]] = None,
) -> list[PlacementPlan]:
    """Plan a disjoint chain of mobiles from the relief point to the sink.

    The first target is computed exactly as dynamic placement's first
    placement; afterwards mobiles are appended one transmission range at a
    time toward the sink, each serving the previous one.  The forwarder
    requirement applies only when the first placement already reaches the
    sink (chain of one, identical to the dynamic plan).  A chain the pool
    cannot fully staff is aborted as a whole.
    """
    if not pool:
        raise PoolExhausted("no idle mobile available for direct placement")
    if profiles is None:
        profiles = congestion.contributors(cm, network)
    if not profiles:
        return []
    deficit = congestion.deficit_rate(cm)
    r = network.tx_range
    sinkpos = network.nodes[network.sink].position

    served: Optional[tuple[int, ...]] = None
    targets: Optional[list[Point]] = None
    forwarder: Optional[int] = None
    for prof in _single_node_candidates(profiles, deficit):
        first = point_toward_sink(network.nodes[prof.node].position, r, sinkpos)
        candidate_chain = chain_targets(first, network)
        if len(candidate_chain) == 1:
            fwd = find_forwarder(first, cm.congested_level, network)
            if fwd is None:
                continue
            forwarder = fwd
        served = (prof.node,)
        targets = candidate_chain
        break
    if targets is None:
        found = _best_subset_target(
            profiles, deficit, network, cm.congested_level, require_forwarder=False
        )
        if found is None:
            return []
        ids, point, _ = found
        candidate_chain = chain_targets(point, network)
        if len(candidate_chain) == 1:
            forwarder = find_forwarder(point, cm.congested_level, network)
            if forwarder is None:
                return []
        served = ids
        targets = candidate_chain

    if len(targets) > len(pool):
        raise ChainInfeasible(
            f"chain of {len(targets)} mobiles exceeds pool of {len(pool)}"
        )
    mobiles = list(pool[: len(targets)])
    plans = []
    for i, target in enumerate(targets):
        if i == 0:
            who = served
        else:
            who = (mobiles[i - 1],)
        if i + 1 < len(targets):
            hint = mobiles[i + 1]
        elif len(targets) == 1 and forwarder is not None:
            hint = forwarder
        else:
            hint = network.sink
        plans.append(PlacementPlan(target, who, hint, mobiles[i]))
    return plans
