"""On-demand distance-vector routing: flood a request when a route is
needed, keep only active routes alive.

A request floods with duplicate suppression on (origin, request id);
every node the flood reaches installs a reverse route toward the origin.
The destination, or any node holding a fresh-enough active route, answers
with a reply that unicasts back along the reverse path installing forward
routes. Destination sequence numbers arbitrate freshness: routes are only
replaced by a higher sequence, or an equal sequence with fewer hops, which
keeps installed routes loop-free. Link breaks are noticed when forwarding
fails; affected routes are invalidated with a bumped sequence and a route
error propagates to upstream users. There is no hello-based neighbor
sensing.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from ..netsim import MessageKind
from .base import MAX_DATA_HOPS, DataPacket, RoutingProtocol

SEEN_TTL_S = 30.0


@dataclass(slots=True)
class AodvTableEntry:
    destination: int
    next_hop: int
    hop_count: int
    dest_sequence_number: int
    active: bool
    lifetime: float  # absolute expiry time


@dataclass(slots=True)
class _Pending:
    attempt_id: int
    tries: int
    request_id: int
    queue: list = field(default_factory=list)


class AodvNode(RoutingProtocol):
    name = "aodv"

    def __init__(self, services):
        super().__init__(services)
        cfg = services.cfg
        self.t_disc = cfg.t_disc_s
        self.retries = cfg.discovery_retries
        self.route_lifetime = cfg.route_lifetime_s
        self.relay_hold = cfg.relay_hold_s
        self.control_bytes = cfg.control_bytes
        self.data_bytes = cfg.data_bytes
        self.table: dict[int, AodvTableEntry] = {}
        self.own_seq = 0
        self.request_counter = 0
        self.seen: dict[tuple[int, int], float] = {}
        self.pending: dict[int, _Pending] = {}

    # -- route table -------------------------------------------------------

    def _valid_route(self, dst: int, now: float) -> AodvTableEntry | None:
        entry = self.table.get(dst)
        if entry is not None and entry.active and entry.lifetime > now:
            return entry
        return None

    def _maybe_install(
        self, dst: int, via: int, hops: int, seq: int, now: float
    ) -> None:
        cur = self.table.get(dst)
        if (
            cur is None
            or seq > cur.dest_sequence_number
            or (
                seq == cur.dest_sequence_number
                and (not cur.active or cur.lifetime <= now or hops < cur.hop_count)
            )
        ):
            self.table[dst] = AodvTableEntry(
                dst, via, hops, seq, True, now + self.route_lifetime
            )

    # -- discovery -----------------------------------------------------------

    def send_data(self, dst: int, packet_id: int, now: float) -> None:
        pkt = DataPacket(packet_id, self.sv.node_id, dst)
        entry = self._valid_route(dst, now)
        if entry is not None:
            entry.lifetime = now + self.route_lifetime
            ok = self.sv.unicast(entry.next_hop, MessageKind.DATA, pkt, self.data_bytes)
            if not ok:
                self._link_break(entry.next_hop, now)
            return
        if dst in self.pending:
            self.pending[dst].queue.append(pkt)
            return
        attempt = self.sv.metrics.record_attempt(now, "cycle")
        self.pending[dst] = _Pending(attempt, 0, 0, [pkt])
        self._send_request(dst, now)

    def _send_request(self, dst: int, now: float) -> None:
        self.own_seq += 1
        self.request_counter += 1
        pend = self.pending[dst]
        pend.request_id = self.request_counter
        me = self.sv.node_id
        self.seen[(me, self.request_counter)] = now + SEEN_TTL_S
        known = self.table.get(dst)
        dest_seq_known = known.dest_sequence_number if known else 0
        payload = (me, self.request_counter, dst, self.own_seq, dest_seq_known, 0)
        self.sv.broadcast(MessageKind.ROUTE_REQUEST, payload, self.control_bytes)
        self.sv.set_timer(self.t_disc, "disc", dst)

    def on_timer(self, tag: str, data, now: float) -> None:
        if tag == "disc":
            pend = self.pending.get(data)
            if pend is None:
                return  # already resolved
            pend.tries += 1
            if pend.tries <= self.retries:
                self._send_request(data, now)
            else:
                self.pending.pop(data)
                self.sv.metrics.resolve_attempt(pend.attempt_id, False)
        elif tag == "relay_rreq":
            self.sv.broadcast(MessageKind.ROUTE_REQUEST, data, self.control_bytes)
        elif tag == "relay_rrep":
            next_hop, payload = data
            self.sv.unicast(next_hop, MessageKind.ROUTE_REPLY, payload, self.control_bytes)
        elif tag == "relay_rerr":
            self.sv.broadcast(MessageKind.ROUTE_ERROR, data, self.control_bytes)
        elif tag == "fwd":
            self._forward(data, now)

    # -- message handling -------------------------------------------------

    def on_message(self, msg, now: float) -> None:
        kind = msg.kind
        if kind == MessageKind.ROUTE_REQUEST:
            self._on_rreq(msg.src, msg.payload, now)
        elif kind == MessageKind.ROUTE_REPLY:
            self._on_rrep(msg.src, msg.payload, now)
        elif kind == MessageKind.ROUTE_ERROR:
            self._on_rerr(msg.src, msg.payload, now)
        elif kind == MessageKind.DATA:
            self._on_data(msg.payload, now)

    def _on_rreq(self, sender: int, payload, now: float) -> None:
        origin, request_id, target, origin_seq, dest_seq_known, hops = payload
        key = (origin, request_id)
        if key in self.seen:
            return  # duplicate flood copy, recorded once
        self.seen[key] = now + SEEN_TTL_S
        self._maybe_install(origin, sender, hops + 1, origin_seq, now)
        me = self.sv.node_id
        if target == me:
            self.own_seq = max(self.own_seq, dest_seq_known)
            reply = (origin, target, self.own_seq, 0)
            self.sv.unicast(sender, MessageKind.ROUTE_REPLY, reply, self.control_bytes)
            return
        cached = self._valid_route(target, now)
        if cached is not None and cached.dest_sequence_number >= dest_seq_known:
            reply = (origin, target, cached.dest_sequence_number, cached.hop_count)
            self.sv.unicast(sender, MessageKind.ROUTE_REPLY, reply, self.control_bytes)
            return
        if hops + 1 > MAX_DATA_HOPS:
            return
        relayed = (origin, request_id, target, origin_seq, dest_seq_known, hops + 1)
        self.sv.set_timer(self.relay_hold, "relay_rreq", relayed)

    def _on_rrep(self, sender: int, payload, now: float) -> None:
        origin, target, dest_seq, hops = payload
        self._maybe_install(target, sender, hops + 1, dest_seq, now)
        if origin == self.sv.node_id:
            pend = self.pending.pop(target, None)
            if pend is not None:
                self.sv.metrics.resolve_attempt(pend.attempt_id, True)
                for pkt in pend.queue:
                    self._forward(pkt, now)
            return
        if hops + 1 > MAX_DATA_HOPS:
            return  # stale reverse routes can cycle; bound the relay
        back = self._valid_route(origin, now)
        if back is None:
            return  # reverse path evaporated; discovery will retry
        relayed = (origin, target, dest_seq, hops + 1)
        self.sv.set_timer(self.relay_hold, "relay_rrep", (back.next_hop, relayed))

    def _on_rerr(self, sender: int, payload, now: float) -> None:
        invalidated = []
        for dst, seq in payload:
            entry = self.table.get(dst)
            if (
                entry is not None
                and entry.active
                and entry.next_hop == sender
                and seq > entry.dest_sequence_number
            ):
                entry.active = False
                entry.dest_sequence_number = seq
                invalidated.append((dst, seq))
        if invalidated:
            self.sv.set_timer(self.relay_hold, "relay_rerr", invalidated)

    # -- data plane ----------------------------------------------------------

    def _forward(self, pkt: DataPacket, now: float) -> None:
        entry = self._valid_route(pkt.dst, now)
        if entry is None:
            return  # route evaporated under the packet
        entry.lifetime = now + self.route_lifetime
        ok = self.sv.unicast(entry.next_hop, MessageKind.DATA, pkt, self.data_bytes)
        if not ok:
            self._link_break(entry.next_hop, now)

    def _on_data(self, pkt: DataPacket, now: float) -> None:
        if pkt.dst == self.sv.node_id:
            self.sv.metrics.data_delivered(pkt.packet_id, now)
            return
        pkt = replace(pkt, hops=pkt.hops + 1)
        if pkt.hops > MAX_DATA_HOPS:
            return
        self.sv.set_timer(self.relay_hold, "fwd", pkt)

    def _link_break(self, next_hop: int, now: float) -> None:
        affected = []
        for dst in sorted(self.table):
            entry = self.table[dst]
            if entry.active and entry.next_hop == next_hop:
                entry.active = False
                entry.dest_sequence_number += 1
                affected.append((dst, entry.dest_sequence_number))
        if affected:
            self.sv.broadcast(MessageKind.ROUTE_ERROR, affected, self.control_bytes)
