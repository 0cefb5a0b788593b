"""Deterministic discrete-event core: traffic, MAC, queues, mobiles, clock.

Time is continuous but transmissions are aligned to MAC slots of one
packet airtime (size * 8 / channel_rate, about 4.096 ms for 128-byte
packets at 250 kbps).  Per slot, transmission-ready nodes are admitted in
seeded random order under a carrier-sense rule, then receptions resolve
against the unit-disk interference sets:

* a ready node defers (cost-free, retries next slot) when an
  already-admitted transmitter other than its own receiver is within its
  range — it can hear that the channel is busy;
* a reception fails when any admitted transmitter other than the sender
  and the receiver itself is within range of the receiver — the classic
  hidden-terminal collision, which carrier sensing cannot prevent;
* a failed packet stays at the head of its queue and retries after a
  uniform random backoff of 1..8 slots, up to 5 retries, then drops.

The receiver's own concurrent transmission does not corrupt its reception
(an abstract full-duplex radio), which lets multi-hop chains pipeline.
Identical (network, config, seed) inputs replay to bit-identical metrics.
"""

from __future__ import annotations

import heapq
import math
import random
from collections import deque
from dataclasses import dataclass
from typing import Optional, TextIO

from . import congestion, placement, routing
from .congestion import CongestionMessage
from .energy import ledger_from_times, node_energy
from .geometry import distance
from .metrics import PlacementRecord, RunMetrics
from .placement import ChainInfeasible, PlacementPlan
from .topology import NeighborEntry, Network, NodeKind, PoolExhausted, place_mobile

ALGORITHMS = ("baseline", "dynamic", "direct")

# Event kinds, in processing order at equal timestamps: packets generated
# exactly on a slot boundary may ride that slot; the sample tick runs last
# and observes the completed second.
K_GENERATE = 0
K_MOBILE_ARRIVE = 1
K_CM_ARRIVE = 2
K_SLOT = 3
K_TICK = 4

# Packet record layout (lists are cheaper than objects in the hot loop).
P_UID, P_SRC, P_CREATED, P_HOPS, P_RETRIES = range(5)


class ConfigError(ValueError):
    """Invalid simulation configuration, raised before any event runs."""


@dataclass
class SimConfig:
    """Knobs of one simulation run."""

    sim_time: float = 600.0
    queue_len: int = 8
    tx_range: float = 25.0
    channel_rate: float = 250_000.0  # bits/second
    source_rate: float = 1.0  # packets/second per source node
    sample_period: float = 1.0
    seed: int = 1
    mobile_speed: float = 1.0  # metres/second
    algorithm: str = "baseline"
    packet_size: int = 128  # bytes
    max_retries: int = 5
    backoff_slots: int = 8
    congestion_threshold: int = 6
    cooldown_periods: int = 10
    lifetime_deficit: bool = False
    literal_energy_scaling: bool = False
    cpu_event_seconds: float = 0.001

    @property
    def slot_time(self) -> float:
        """Airtime of one packet, the MAC slot length, in seconds."""
        return self.packet_size * 8 / self.channel_rate

    @property
    def cooldown_s(self) -> float:
        return self.cooldown_periods * self.sample_period

    def validate(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}")
        positive = {
            "sim_time": self.sim_time,
            "tx_range": self.tx_range,
            "channel_rate": self.channel_rate,
            "sample_period": self.sample_period,
            "mobile_speed": self.mobile_speed,
            "cpu_event_seconds": self.cpu_event_seconds,
        }
        for name, value in positive.items():
            if value <= 0:
                raise ConfigError(f"{name} must be positive, got {value}")
        if self.queue_len < 1:
            raise ConfigError("queue_len must be at least 1")
        if self.packet_size < 1:
            raise ConfigError("packet_size must be at least 1 byte")
        if self.source_rate < 0:
            raise ConfigError("source_rate cannot be negative")
        if self.max_retries < 0:
            raise ConfigError("max_retries cannot be negative")
        if self.backoff_slots < 1:
            raise ConfigError("backoff_slots must be at least 1")
        if not 1 <= self.congestion_threshold <= self.queue_len:
            raise ConfigError("congestion_threshold must fit the queue")
        if self.cooldown_periods < 1:
            raise ConfigError("cooldown_periods must be at least 1")


def travel_time(origin, destination, config: SimConfig) -> float:
    """Seconds a mobile spends radio-off travelling between two points."""
    return distance(origin, destination) / config.mobile_speed


def run(network: Network, config: SimConfig, trace: Optional[TextIO] = None) -> RunMetrics:
    """Simulate one run to completion and return its metrics.

    The network is owned by the run and mutated (levels, pool, mobiles).
    """
    config.validate()
    return _Run(network, config, trace).execute()


class _Run:
    def __init__(self, network: Network, config: SimConfig, trace: Optional[TextIO]):
        self.net = network
        self.cfg = config
        self.trace = trace
        network.refresh()

        ids = network.sorted_ids()
        self.max_id = max(ids)
        n = self.max_id + 1
        self.pos = [None] * n
        for i in ids:
            self.pos[i] = network.nodes[i].position
        self.sink = network.sink
        self.slot_t = config.slot_time

        self.queues = [deque() for _ in range(n)]
        self.qcap = config.queue_len

        # Window counters for congestion accounting.
        self.recv_w = [0] * n
        self.tran_w = [0] * n
        self.recv_from: list[dict[int, int]] = [dict() for _ in range(n)]
        self.window_start = [0.0] * n
        self.cooldown_until = [float("-inf")] * n
        self.first_tx: list[Optional[float]] = [None] * n

        # Energy tallies.
        self.tx_slots = [0] * n
        self.cpu_events = [0] * n
        self.radio_on_from: dict[int, float] = {}

        # MAC scheduling.
        self.buckets: dict[int, list[int]] = {}
        self.scheduled: set[int] = set()
        self.bucketed = [False] * n
        self.stalled: set[int] = set()
        self.slot_hwm = 0  # first not-yet-processed slot index

        # Relief machinery.
        self.override: dict[int, int] = {}
        self.pending_relief: dict[int, dict] = {}
        self.chain_served: set[int] = set()
        self.payloads: dict[int, tuple] = {}
        self.seq = 0

        # Metrics.
        self.generated = 0
        self.delivered = 0
        self.dropped = 0
        self.delay_sum = 0.0
        self.uid = 0
        self.per_node_drops = [0] * n
        self.mobiles_used = 0
        self.cm_emitted = 0
        self.cm_lost = 0
        self.placements: list[dict] = []

        self.rng = random.Random(config.seed)
        self.heap: list[tuple[float, int, int]] = []

        sources = sorted(network.sources)
        if config.source_rate > 0:
            period = 1.0 / config.source_rate
            for s in sources:
                phase = self.rng.uniform(0.0, period)
                heapq.heappush(self.heap, (phase, K_GENERATE, s))
        self.gen_period = 1.0 / config.source_rate if config.source_rate > 0 else 0.0

        t = config.sample_period
        while t <= config.sim_time + 1e-9:
            heapq.heappush(self.heap, (t, K_TICK, 0))
            t += config.sample_period

    # ------------------------------------------------------------------
    # infrastructure

    def _log(self, t: float, kind: str, detail: str) -> None:
        if self.trace is not None:
            self.trace.write(f"{t:.6f} {kind} {detail}\n")

    def _bucket(self, node: int, slot: int) -> None:
        slot = max(slot, self.slot_hwm)
        self.bucketed[node] = True
        bucket = self.buckets.get(slot)
        if bucket is None:
            self.buckets[slot] = [node]
            if slot not in self.scheduled:
                self.scheduled.add(slot)
                heapq.heappush(self.heap, (slot * self.slot_t, K_SLOT, slot))
        else:
            bucket.append(node)

    def _slot_at(self, t: float) -> int:
        """First slot whose transmission can start at or after time t."""
        return int(math.ceil(t / self.slot_t - 1e-9))

    def _wake(self, node: int, slot: int) -> None:
        if self.queues[node] and not self.bucketed[node]:
            self.stalled.discard(node)
            self._bucket(node, slot)

    def _route(self, sender: int) -> Optional[int]:
        return routing.next_hop(sender, self.net, self.override)

    # ------------------------------------------------------------------
    # event handlers

    def execute(self) -> RunMetrics:
        cfg = self.cfg
        horizon = cfg.sim_time + 1e-9
        heap = self.heap
        while heap:
            t, kind, key = heapq.heappop(heap)
            if t > horizon:
                break
            if kind == K_SLOT:
                self.scheduled.discard(key)
                self.slot_hwm = key + 1
                self._process_slot(key)
            elif kind == K_GENERATE:
                self._generate(t, key)
            elif kind == K_TICK:
                self._tick(t)
            elif kind == K_MOBILE_ARRIVE:
                self._arrive(t, key)
            else:
                self._cm_arrive(t, key)
        return self._finish()

    def _generate(self, t: float, src: int) -> None:
        self.uid += 1
        self.generated += 1
        self.cpu_events[src] += 1
        pkt = [self.uid, src, t, 0, 0]
        q = self.queues[src]
        if len(q) >= self.qcap:
            self.dropped += 1
            self.per_node_drops[src] += 1
            self._log(t, "DROP", f"node={src} uid={self.uid} reason=queue-full")
        else:
            q.append(pkt)
            if not self.bucketed[src] and src not in self.stalled:
                self._bucket(src, self._slot_at(t))
            self._log(t, "GEN", f"node={src} uid={self.uid}")
        nxt = t + self.gen_period
        if nxt <= self.cfg.sim_time:
            heapq.heappush(self.heap, (nxt, K_GENERATE, src))

    def _process_slot(self, k: int) -> None:
        ready = self.buckets.pop(k, None)
        if not ready:
            return
        rng = self.rng
        if len(ready) > 1:
            rng.shuffle(ready)
        inrange = self.net.in_range_sets
        admitted: list[tuple[int, int, list]] = []
        admitted_ids: set[int] = set()
        for s in ready:
            self.bucketed[s] = False
            q = self.queues[s]
            if not q:
                continue
            r = self._route(s)
            if r is None:
                self.stalled.add(s)
                continue
            near = admitted_ids & inrange[s]
            if near and not (len(near) == 1 and r in near):
                # channel audibly busy: defer to the ongoing transmission
                self._bucket(s, k + 1)
                continue
            admitted.append((s, r, q[0]))
            admitted_ids.add(s)
        if not admitted:
            return
        t_end = (k + 1) * self.slot_t
        t_start = k * self.slot_t
        cap = self.qcap
        sink = self.sink
        for s, r, pkt in admitted:
            self.tx_slots[s] += 1
            self.cpu_events[s] += 1
            if self.first_tx[s] is None:
                self.first_tx[s] = t_start
            interferers = admitted_ids & inrange[r]
            interferers.discard(s)
            interferers.discard(r)
            if interferers:
                pkt[P_RETRIES] += 1
                if pkt[P_RETRIES] > self.cfg.max_retries:
                    self.queues[s].popleft()
                    self.dropped += 1
                    self.per_node_drops[s] += 1
                    self._log(t_end, "DROP", f"node={s} uid={pkt[P_UID]} reason=retries")
                    if self.queues[s]:
                        self._bucket(s, k + 1)
                else:
                    self._bucket(s, k + rng.randint(1, self.cfg.backoff_slots))
                    self._log(t_end, "COLL", f"node={s} uid={pkt[P_UID]} to={r}")
                continue
            self.queues[s].popleft()
            self.tran_w[s] += 1
            pkt[P_HOPS] += 1
            if r == sink:
                self.delivered += 1
                self.delay_sum += t_end - pkt[P_CREATED]
                self.cpu_events[sink] += 1
                self._log(t_end, "DLVR", f"node={sink} uid={pkt[P_UID]} from={s}")
            else:
                self.recv_w[r] += 1
                rf = self.recv_from[r]
                rf[s] = rf.get(s, 0) + 1
                self.cpu_events[r] += 1
                qr = self.queues[r]
                if len(qr) >= cap:
                    self.dropped += 1
                    self.per_node_drops[r] += 1
                    self._log(t_end, "DROP", f"node={r} uid={pkt[P_UID]} reason=queue-full")
                else:
                    pkt[P_RETRIES] = 0
                    qr.append(pkt)
                    if not self.bucketed[r] and r not in self.stalled:
                        self._bucket(r, k + 1)
                    self._log(t_end, "RECV", f"node={r} uid={pkt[P_UID]} from={s}")
            if self.queues[s] and not self.bucketed[s]:
                self._bucket(s, k + 1)

    def _tick(self, t: float) -> None:
        net = self.net
        cfg = self.cfg
        threshold = cfg.congestion_threshold
        # Yesterday's declarations reach the neighbor tables now.
        routing.propagate_flags(net)
        net.availability[self.sink] = True
        # Fresh declarations from current occupancy, visible next tick.
        for i in net.sorted_ids():
            node = net.nodes[i]
            if i == self.sink or not node.radio_on:
                continue
            occ = len(self.queues[i])
            if occ >= threshold:
                net.self_flags[i] = False
            elif 2 * occ < threshold:
                net.self_flags[i] = True
            self.cpu_events[i] += 1
        # Congestion detection.
        for i in net.sorted_ids():
            node = net.nodes[i]
            if i == self.sink or not node.radio_on:
                continue
            occ = len(self.queues[i])
            t0 = self._window_start(i)
            if not congestion.should_emit(
                occ,
                threshold,
                self.recv_w[i],
                self.tran_w[i],
                t,
                t0,
                self.cooldown_until[i],
                has_route=self._route(i) is not None,
            ):
                continue
            self._emit_cm(t, i, t0)
        # Windows restart at every cooldown boundary so the deficit tracks
        # the current overload (lifetime mode keeps accumulating).
        if not cfg.lifetime_deficit:
            boundary = round(t / cfg.sample_period) % cfg.cooldown_periods == 0
            if boundary:
                for i in net.sorted_ids():
                    self._reset_window(i, t)
        # Stalled nodes retry under the refreshed table view.
        if self.stalled:
            slot = self._slot_at(t)
            for s in sorted(self.stalled):
                if self.queues[s] and not self.bucketed[s]:
                    self._bucket(s, slot)
            self.stalled.clear()

    def _window_start(self, i: int) -> float:
        if self.cfg.lifetime_deficit:
            first = self.first_tx[i]
            return first if first is not None else 0.0
        return self.window_start[i]

    def _reset_window(self, i: int, t: float) -> None:
        self.recv_w[i] = 0
        self.tran_w[i] = 0
        self.recv_from[i] = {}
        self.window_start[i] = t

    def _emit_cm(self, t: float, i: int, t0: float) -> None:
        net = self.net
        node = net.nodes[i]
        entries = tuple(
            NeighborEntry(
                j,
                net.nodes[j].level,
                self.recv_from[i].get(j, 0),
                net.availability.get(j, True),
            )
            for j in net.neighbors[i]
        )
        level = node.level if node.level is not None else 0
        cm = CongestionMessage(
            congested=i,
            congested_level=level,
            recv_count=self.recv_w[i],
            tran_count=self.tran_w[i],
            detected_at=t0,
            emitted_at=t,
            neighbors=entries,
        )
        self.cm_emitted += 1
        self.cooldown_until[i] = t + self.cfg.cooldown_s
        if not self.cfg.lifetime_deficit:
            self._reset_window(i, t)
        if node.level is None:
            self.cm_lost += 1
            self._log(t, "CMLOST", f"node={i}")
            return
        # Distress transport: hop-by-hop along the level gradient in a
        # reserved queue slot, immune to tail drop; one slot per hop.
        arrival = t + node.level * self.slot_t
        self.seq += 1
        self.payloads[self.seq] = (cm,)
        heapq.heappush(self.heap, (arrival, K_CM_ARRIVE, self.seq))
        self._log(
            t,
            "CM",
            f"node={i} recv={cm.recv_count} tran={cm.tran_count} window={t - t0:.3f}",
        )

    def _cm_arrive(self, t: float, seq: int) -> None:
        (cm,) = self.payloads.pop(seq)
        self.cpu_events[self.sink] += 1
        cg = cm.congested
        self._log(t, "CMRX", f"node={cg}")
        if self.cfg.algorithm == "baseline":
            return
        if cg in self.pending_relief or cg in self.chain_served:
            self._log(t, "PLAN", f"node={cg} outcome=already-served")
            return
        profiles = congestion.contributors(cm, self.net)
        if not profiles:
            self._log(t, "PLAN", f"node={cg} outcome=spurious")
            return
        try:
            if self.cfg.algorithm == "dynamic":
                plans = placement.plan_dynamic(cm, self.net, self.net.mobile_pool, profiles)
            else:
                plans = placement.plan_direct(cm, self.net, self.net.mobile_pool, profiles)
        except PoolExhausted:
            self._log(t, "PLAN", f"node={cg} outcome=pool-exhausted")
            return
        except ChainInfeasible as exc:
            self._log(t, "PLAN", f"node={cg} outcome=chain-infeasible detail={exc}")
            return
        if not plans:
            self._log(t, "PLAN", f"node={cg} outcome=no-feasible-target")
            return
        self._dispatch(plans, cg, t)

    def _dispatch(self, plans: list[PlacementPlan], congested: int, now: float) -> None:
        group = {"remaining": len(plans), "plans": plans, "congested": congested}
        for plan in plans:
            m = plan.mobile
            self.net.mobile_pool.remove(m)
            self.mobiles_used += 1
            dist = distance(self.pos[m], plan.target)
            arrival = now + dist / self.cfg.mobile_speed
            self.seq += 1
            self.payloads[self.seq] = (m, plan, group)
            heapq.heappush(self.heap, (arrival, K_MOBILE_ARRIVE, self.seq))
            self.placements.append(
                {
                    "mobile": m,
                    "target": (plan.target[0], plan.target[1]),
                    "served": tuple(plan.served),
                    "next_hop": plan.next_hop_hint,
                    "dispatched_at": now,
                    "arrival_at": arrival,
                    "activated_at": -1.0,
                }
            )
            self._log(
                now,
                "MOVE",
                f"mobile={m} target=({plan.target[0]:.2f},{plan.target[1]:.2f}) "
                f"served={','.join(map(str, plan.served))} eta={arrival:.3f}",
            )
        self.pending_relief[congested] = group

    def _arrive(self, t: float, seq: int) -> None:
        m, plan, group = self.payloads.pop(seq)
        place_mobile(self.net, m, plan.target)
        # Invisible to route selection until the whole group stands.
        self.net.self_flags[m] = False
        self.net.availability[m] = False
        self.pos[m] = self.net.nodes[m].position
        self.radio_on_from[m] = t
        self.cpu_events[m] += 1
        self._log(t, "PLACE", f"mobile={m}")
        group["remaining"] -= 1
        if group["remaining"] == 0:
            self._activate(t, group)

    def _activate(self, t: float, group: dict) -> None:
        slot = self._slot_at(t)
        affected: list[int] = []
        for plan in group["plans"]:
            self.net.self_flags[plan.mobile] = True
            self.net.availability[plan.mobile] = True
            self.override[plan.mobile] = plan.next_hop_hint
            affected.append(plan.mobile)
            for served in plan.served:
                self.override[served] = plan.mobile
                affected.append(served)
            for rec in self.placements:
                if rec["mobile"] == plan.mobile:
                    rec["activated_at"] = t
        for node in sorted(set(affected)):
            self._wake(node, slot)
        congested = group["congested"]
        self.pending_relief.pop(congested, None)
        if self.cfg.algorithm == "direct":
            self.chain_served.add(congested)
        self._log(t, "ACTIVATE", f"congested={congested} mobiles={len(group['plans'])}")

    # ------------------------------------------------------------------
    # wrap-up

    def _finish(self) -> RunMetrics:
        net = self.net
        cfg = self.cfg
        residual = sum(len(q) for q in self.queues)
        per_node_energy: dict[int, float] = {}
        total = 0.0
        for i in net.sorted_ids():
            node = net.nodes[i]
            if node.kind is NodeKind.MOBILE:
                placed_at = self.radio_on_from.get(i)
                radio_s = cfg.sim_time - placed_at if placed_at is not None else 0.0
            else:
                radio_s = cfg.sim_time
            transmit_s = min(self.tx_slots[i] * self.slot_t, radio_s)
            cpu_s = min(self.cpu_events[i] * cfg.cpu_event_seconds, cfg.sim_time)
            ledger = ledger_from_times(transmit_s, radio_s, cpu_s, cfg.sim_time)
            mj = node_energy(ledger, cfg.literal_energy_scaling)
            per_node_energy[i] = mj
            total += mj
        mean_delay = self.delay_sum / self.delivered if self.delivered else 0.0
        return RunMetrics(
            generated=self.generated,
            delivered=self.delivered,
            dropped=self.dropped,
            residual=residual,
            mean_delay_s=mean_delay,
            total_energy_mj=total,
            mobiles_used=self.mobiles_used,
            cm_emitted=self.cm_emitted,
            cm_lost=self.cm_lost,
            per_node_drops={
                i: self.per_node_drops[i]
                for i in net.sorted_ids()
                if self.per_node_drops[i]
            },
            per_node_energy_mj=per_node_energy,
            placements=tuple(
                PlacementRecord(
                    mobile=rec["mobile"],
                    target=rec["target"],
                    served=rec["served"],
                    next_hop=rec["next_hop"],
                    dispatched_at=rec["dispatched_at"],
                    arrival_at=rec["arrival_at"],
                    activated_at=rec["activated_at"],
                )
                for rec in self.placements
            ),
        )
