"""Proactive distance-vector routing with destination sequence numbers.

Every node keeps a route to every destination it has heard of and
advertises its table to neighbors: the whole table in periodic full dumps,
and just the changed rows immediately (after a short coalescing window)
whenever anything changes in between. A fresher sequence number always
wins; on equal sequence the lower hop count does. Destinations stamp even
sequence numbers on their own entries; a node detecting a broken link
marks affected routes with an odd (broken) sequence and an infinite
metric, which propagates until the destination's next even stamp repairs
it. There is no settling-time damping, so every adopted change is
re-advertised promptly.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from ..netsim import MessageKind
from .base import MAX_DATA_HOPS, DataPacket, RoutingProtocol

INFINITE_METRIC = float("inf")


@dataclass(slots=True)
class DsdvTableEntry:
    destination: int
    next_hop: int
    metric: float  # hop count; INFINITE_METRIC marks a broken route
    sequence_number: int  # even = reachable, odd = broken
    install_time: float


class DsdvNode(RoutingProtocol):
    name = "dsdv"

    def __init__(self, services):
        super().__init__(services)
        cfg = services.cfg
        self.full_period = cfg.dsdv_full_period_s
        self.trigger_delay = cfg.dsdv_trigger_delay_s
        self.relay_hold = cfg.relay_hold_s
        self.control_bytes = cfg.control_bytes
        self.data_bytes = cfg.data_bytes
        self.table: dict[int, DsdvTableEntry] = {}
        self.own_seq = 0
        self.changed: set[int] = set()
        self._trigger_armed = False
        self.neighbor_last_heard: dict[int, float] = {}

    def initialize(self) -> None:
        me = self.sv.node_id
        self.table[me] = DsdvTableEntry(me, me, 0, 0, 0.0)
        phase = self.full_period * (me % self.sv.node_count) / self.sv.node_count
        self.sv.set_timer(phase, "full")

    # -- timers -----------------------------------------------------------

    def on_timer(self, tag: str, data, now: float) -> None:
        if tag == "full":
            self._full_dump(now)
            self.sv.set_timer(self.full_period, "full")
        elif tag == "trig":
            self._trigger_armed = False
            self._send_incremental(now)
        elif tag == "fwd":
            self._forward(data, now)

    def _full_dump(self, now: float) -> None:
        self.own_seq += 2
        self.table[self.sv.node_id].sequence_number = self.own_seq
        self._expire_silent_neighbors(now)
        rows = [
            (e.destination, e.metric, e.sequence_number)
            for e in self.table.values()
        ]
        self.sv.broadcast(
            MessageKind.ROUTING_UPDATE, ("full", rows), self.control_bytes
        )
        self.changed.clear()

    def _send_incremental(self, now: float) -> None:
        if not self.changed:
            return
        rows = [
            (d, self.table[d].metric, self.table[d].sequence_number)
            for d in sorted(self.changed)
            if d in self.table
        ]
        self.changed.clear()
        if rows:
            self.sv.broadcast(
                MessageKind.ROUTING_UPDATE, ("incr", rows), self.control_bytes
            )

    def _mark_changed(self, dst: int) -> None:
        self.changed.add(dst)
        if not self._trigger_armed:
            self._trigger_armed = True
            self.sv.set_timer(self.trigger_delay, "trig")

    def _expire_silent_neighbors(self, now: float) -> None:
        # A neighbor that missed two-plus full dumps is assumed gone.
        cutoff = now - 2.2 * self.full_period
        for nid in sorted(self.neighbor_last_heard):
            if self.neighbor_last_heard[nid] < cutoff:
                del self.neighbor_last_heard[nid]
                self._break_via(nid)

    # -- table merge --------------------------------------------------------

    def on_message(self, msg, now: float) -> None:
        if msg.kind == MessageKind.ROUTING_UPDATE:
            self._merge(msg.src, msg.payload[1], now)
        elif msg.kind == MessageKind.DATA:
            self._on_data(msg.payload, now)

    def _merge(self, sender: int, rows, now: float) -> None:
        self.neighbor_last_heard[sender] = now
        me = self.sv.node_id
        for dst, metric, seq in rows:
            if dst == me:
                # Someone rumors a stale or broken route to us: answer with
                # a fresher even sequence of our own.
                if seq >= self.own_seq:
                    self.own_seq = seq + 1 if seq % 2 else seq + 2
                    self.table[me].sequence_number = self.own_seq
                    self._mark_changed(me)
                continue
            cand = metric if metric == INFINITE_METRIC else metric + 1
            cur = self.table.get(dst)
            if cur is None:
                if cand == INFINITE_METRIC:
                    continue  # no point learning a dead route
                self.table[dst] = DsdvTableEntry(dst, sender, cand, seq, now)
                self._mark_changed(dst)
            elif seq > cur.sequence_number or (
                seq == cur.sequence_number and cand < cur.metric
            ):
                if (
                    cur.sequence_number != seq
                    or cur.metric != cand
                    or cur.next_hop != sender
                ):
                    self._mark_changed(dst)
                self.table[dst] = DsdvTableEntry(dst, sender, cand, seq, now)

    # -- data plane -----------------------------------------------------------

    def send_data(self, dst: int, packet_id: int, now: float) -> None:
        attempt = self.sv.metrics.record_attempt(now, "table")
        entry = self.table.get(dst)
        if entry is None or entry.metric == INFINITE_METRIC:
            self.sv.metrics.resolve_attempt(attempt, False)
            return
        self.sv.metrics.bind_packet(packet_id, attempt)
        self._forward(DataPacket(packet_id, self.sv.node_id, dst), now)

    def _forward(self, pkt: DataPacket, now: float) -> None:
        entry = self.table.get(pkt.dst)
        if entry is None or entry.metric == INFINITE_METRIC:
            return  # no live route here; packet dies
        ok = self.sv.unicast(entry.next_hop, MessageKind.DATA, pkt, self.data_bytes)
        if not ok:
            self._break_via(entry.next_hop)

    def _on_data(self, pkt: DataPacket, now: float) -> None:
        if pkt.dst == self.sv.node_id:
            self.sv.metrics.data_delivered(pkt.packet_id, now)
            return
        pkt = replace(pkt, hops=pkt.hops + 1)
        if pkt.hops > MAX_DATA_HOPS:
            return
        self.sv.set_timer(self.relay_hold, "fwd", pkt)

    def _break_via(self, next_hop: int) -> None:
        """Mark every route through a dead next hop broken and advertise."""
        for dst in sorted(self.table):
            entry = self.table[dst]
            if entry.next_hop == next_hop and entry.metric != INFINITE_METRIC:
                if dst == self.sv.node_id:
                    continue
                entry.metric = INFINITE_METRIC
                if entry.sequence_number % 2 == 0:
                    entry.sequence_number += 1
                self._mark_changed(dst)
