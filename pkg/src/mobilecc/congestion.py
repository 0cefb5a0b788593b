"""Congestion detection and the congestion message sent to the sink.

A node is treated as congested when its queue occupancy reaches the
threshold while it keeps receiving more than it forwards.  The packet
deficit is expressed as the additional-resources rate: the per-second
amount of traffic the node receives but cannot forward, which is exactly
the capacity a relief placement must absorb.

Counters are windowed: they reset at every detection and at every cooldown
boundary, so the rate reflects the current overload rather than a lifetime
average (a lifetime mode is available behind a configuration switch for
comparison).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .topology import NeighborEntry, Network


class CongestionError(ValueError):
    """Invalid congestion-accounting input."""


@dataclass(frozen=True)
class CongestionMessage:
    """Distress report a congested node sends to the sink.

    Carries the node's id and level, its received/forwarded packet counts
    over the detection window, the timestamp the detection window started,
    and a snapshot of its neighbor table (id, hop, packets received from
    that neighbor during the window, availability flag).
    """

    congested: int
    congested_level: int
    recv_count: int
    tran_count: int
    detected_at: float
    emitted_at: float
    neighbors: tuple[NeighborEntry, ...]

    def recv_per_period(self, sample_period: float = 1.0) -> float:
        window = self.emitted_at - self.detected_at
        return self.recv_count * sample_period / window

    def fwd_per_period(self, sample_period: float = 1.0) -> float:
        window = self.emitted_at - self.detected_at
        return self.tran_count * sample_period / window


@dataclass(frozen=True)
class ContributorProfile:
    """An upstream neighbor currently pushing traffic into a hotspot."""

    node: int
    sending_rate: float  # packets/second measured over the detection window


def additional_resources(recv: int, tran: int, t: float, t0: float) -> float:
    """Per-second packet deficit of a congested node.

    ``(recv - tran) / (t - t0)`` with ``recv`` packets received and
    ``tran`` packets transmitted since window start ``t0``.  A node that
    forwarded everything it received has no deficit, so the rate is 0.
    """
    if t <= t0:
        raise CongestionError(f"invalid window: t={t} must exceed t0={t0}")
    if recv < 0 or tran < 0:
        raise CongestionError("packet counters cannot be negative")
    if recv < tran:
        return 0.0
    return (recv - tran) / (t - t0)


def deficit_rate(cm: CongestionMessage) -> float:
    """Additional-resources rate carried by a congestion message."""
    return additional_resources(
        cm.recv_count, cm.tran_count, cm.emitted_at, cm.detected_at
    )


def should_emit(
    occupancy: int,
    threshold: int,
    recv_count: int,
    tran_count: int,
    now: float,
    window_start: float,
    cooldown_until: float,
    has_route: bool,
) -> bool:
    """Detection rule evaluated at each sample tick.

    Fires when the queue is at or above the congestion threshold and the
    window shows a positive deficit, at most once per cooldown period.
    A node whose own forwarding is stalled by an unavailable downstream
    stays quiet: its trouble sits below it and that hotspot reports
    instead, so a congestion message from here would misdirect placement.
    """
    if occupancy < threshold:
        return False
    if now < cooldown_until:
        return False
    if now <= window_start:
        return False
    if not has_route:
        return False
    return additional_resources(recv_count, tran_count, now, window_start) > 0.0


def contributors(
    cm: CongestionMessage, network: Network
) -> list[ContributorProfile]:
    """Upstream neighbors that pushed packets into the congested node.

    One profile per neighbor with a higher hop level that sent at least one
    packet during the detection window, with per-second rates measured over
    that window; sorted by descending rate, then ascending node id.  An
    empty list signals a spurious congestion message (no placement is
    attempted for it).
    """
    window = cm.emitted_at - cm.detected_at
    if window <= 0:
        raise CongestionError("congestion message carries an empty window")
    found = []
    for entry in cm.neighbors:
        if entry.hop is None or entry.hop <= cm.congested_level:
            continue
        if entry.packets_received < 1:
            continue
        if entry.neighbor not in network.nodes:
            continue
        found.append(
            ContributorProfile(entry.neighbor, entry.packets_received / window)
        )
    found.sort(key=lambda p: (-p.sending_rate, p.node))
    return found
