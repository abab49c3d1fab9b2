"""Cluster-based hybrid routing over mobility addresses.

Nodes broadcast their address every hello period; receivers run the
pairwise membership test (zero road/lane bit distance, position gap
within MAD) and elect the front-most member as head. Forwarding is
hybrid: inside a cluster the proactively maintained tables route data
directly or through the head with no discovery wait, while traffic for
another cluster is handed to the head, which reactively floods a route
request relayed only by other heads and caches the resulting head-chain
route for every member of the destination cluster. A data packet received
by a node that sits in a different cluster than the packet's scope is
dropped, never relayed.

Maintenance follows three procedures: a head about to leave its road asks
members for their positions and hands the role to the closest one; an
unclustered node broadcasts a join request and follows the closest
eligible replier; a node that passes a roadside unit (or sees a silence
window) without hearing from its cluster broadcasts an enquiry, joins the
closest replying head or restarts clustering from scratch as a lone head.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from ..clustering import (
    ClusterFlag,
    ClusterState,
    LinkFailureAction,
    pick_join_target,
    pick_replacement_head,
)
from ..netsim import MessageKind
from .base import MAX_DATA_HOPS, DataPacket, RoutingProtocol


@dataclass(slots=True)
class _Pending:
    attempt_id: int
    tries: int
    request_id: int
    queue: list = field(default_factory=list)


@dataclass(slots=True)
class _BackboneEntry:
    next_hop: int
    hops: int
    expires: float


class AcrNode(RoutingProtocol):
    name = "acr"

    def __init__(self, services, cluster_log=None):
        super().__init__(services)
        cfg = services.cfg
        self.hello_period = cfg.hello_period_s
        self.entry_ttl = cfg.entry_ttl_s
        self.silence_window = cfg.ch_silence_factor * cfg.hello_period_s
        self.ch_update_period = cfg.ch_update_period_s
        self.t_disc = cfg.t_disc_s
        self.retries = cfg.discovery_retries
        self.route_lifetime = cfg.route_lifetime_s
        self.relay_hold = cfg.relay_hold_s
        self.reply_window = cfg.reply_window_s
        self.enquiry_window = cfg.enquiry_timeout_s
        self.join_retry = cfg.join_retry_s
        self.hello_bytes = cfg.hello_bytes
        self.control_bytes = cfg.control_bytes
        self.data_bytes = cfg.data_bytes

        self.cluster = ClusterState(
            services.node_id, cfg.mad_m, services.loco, log=cluster_log
        )
        self.direct_members: dict[int, float] = {}  # advertise me as head
        self.comembers: set[int] = set()  # member list from head updates
        self.last_cluster_contact = 0.0
        self.route_cache: dict[int, tuple[int, float]] = {}  # dst -> (head, expiry)
        self.backbone: dict[int, _BackboneEntry] = {}
        self.pending: dict[int, _Pending] = {}
        self.seen_requests: dict[tuple[int, int], float] = {}
        self.request_counter = 0
        self.join_replies: list | None = None
        self.enquiry_replies: list | None = None
        self.leave_replies: list | None = None
        self.unclustered_queue: list[DataPacket] = []
        self.last_link_failure_action: LinkFailureAction | None = None
        self.last_advisory = None

    # -- lifecycle ---------------------------------------------------------

    def initialize(self) -> None:
        me, n = self.sv.node_id, self.sv.node_count
        phase = self.hello_period * (me % n) / n
        self.sv.set_timer(phase, "hello")
        self.sv.set_timer(self.ch_update_period * ((me % n) + 0.5) / n, "chupd")
        self.sv.set_timer(0.01 + 0.19 * (me % n) / n, "join_start")

    @property
    def cluster_id(self):
        return self.cluster.cluster_id

    @property
    def is_ch(self) -> bool:
        return self.cluster.is_ch

    def _in_my_cluster(self, node: int) -> bool:
        entry = self.cluster.table.get(node)
        if entry is not None:
            if entry.cluster_flag is ClusterFlag.CLUSTERED:
                return True
            if entry.cluster_id is not None and entry.cluster_id == self.cluster_id:
                return True
        return node in self.comembers or node in self.direct_members

    # -- timers --------------------------------------------------------------

    def on_timer(self, tag: str, data, now: float) -> None:
        if tag == "hello":
            self._hello_tick(now)
        elif tag == "chupd":
            self._ch_update_tick(now)
        elif tag == "join_start":
            self._maybe_send_join(now)
        elif tag == "join_eval":
            self._finish_join(now)
        elif tag == "enq_eval":
            self._finish_enquiry(now)
        elif tag == "leave_eval":
            self._finish_leave(now)
        elif tag == "disc":
            self._discovery_timeout(data, now)
        elif tag == "uncl":
            self._unclustered_expiry(data, now)
        elif tag == "relay_rreq":
            self.sv.broadcast(MessageKind.ROUTE_REQUEST, data, self.control_bytes)
        elif tag == "relay_rrep":
            next_hop, payload = data
            self.sv.unicast(next_hop, MessageKind.ROUTE_REPLY, payload, self.control_bytes)
        elif tag == "fwd":
            next_hop, pkt = data
            self._tx_data(next_hop, pkt, now)

    def _hello_tick(self, now: float) -> None:
        if self.cluster.cluster_id is None:
            self.cluster.recompute(now)
            self._flush_unclustered(now)
        loco = self.sv.loco()
        payload = (
            loco.road_id, loco.lane_direction, loco.physical_location,
            self.cluster_id, self.is_ch,
        )
        self.sv.broadcast(MessageKind.HELLO, payload, self.hello_bytes)
        removed = self.cluster.expire_stale_entries(now, self.entry_ttl)
        for nid in removed:
            self.direct_members.pop(nid, None)
        if not self.is_ch and now - self.last_cluster_contact > self.silence_window:
            self._start_enquiry(now)
        self.sv.set_timer(self.hello_period, "hello")

    def _ch_update_tick(self, now: float) -> None:
        if self.is_ch:
            cutoff = now - self.entry_ttl
            for nid in [n for n, t in self.direct_members.items() if t < cutoff]:
                del self.direct_members[nid]
            loco = self.sv.loco()
            members = tuple(sorted(self.direct_members) + [self.sv.node_id])
            self.sv.broadcast(
                MessageKind.ROUTING_UPDATE,
                ("chupd", self.sv.node_id, members, loco.road_id, loco.lane_direction),
                self.control_bytes,
            )
            rsu = self.sv.nearest_rsu()
            if rsu is not None:
                report = (self.sv.node_id, True, loco.road_id,
                          loco.lane_direction, len(members))
                self.sv.unicast(rsu, MessageKind.RSU_REPORT, report, self.control_bytes)
        self.sv.set_timer(self.ch_update_period, "chupd")

    # -- maintenance flows --------------------------------------------------

    def _maybe_send_join(self, now: float) -> None:
        if self.cluster.cluster_id is not None:
            return  # already in a cluster (possibly a lone head)
        self.join_replies = []
        self.sv.broadcast(MessageKind.JOIN_REQ, None, self.control_bytes)
        self.sv.set_timer(self.reply_window, "join_eval")

    def _finish_join(self, now: float) -> None:
        replies, self.join_replies = self.join_replies, None
        if replies is None:
            return
        choice = pick_join_target(self.sv.loco(), replies, self.cluster.mad_m)
        if choice is not None:
            self.cluster.force_cluster(choice[0], now)
            self.last_cluster_contact = now
            self._flush_unclustered(now)
        elif self.cluster.cluster_id is None:
            self.sv.set_timer(self.join_retry, "join_start")

    def on_approaching_wrap(self, now: float) -> None:
        if not self.is_ch or not self.direct_members or self.leave_replies is not None:
            return
        loco = self.sv.loco()
        self.sv.broadcast(MessageKind.CH_LEAVE, (loco.physical_location,), self.control_bytes)
        self.leave_replies = []
        self.sv.set_timer(self.reply_window, "leave_eval")

    def _finish_leave(self, now: float) -> None:
        replies, self.leave_replies = self.leave_replies, None
        if replies is None:
            return
        new_head = pick_replacement_head(self.sv.loco().physical_location, replies)
        if new_head is None:
            return  # nobody answered; members re-join on their own
        self.sv.broadcast(
            MessageKind.CH_ASSIGN, (self.sv.node_id, new_head), self.control_bytes
        )
        self.cluster.force_cluster(new_head, now)
        self.last_cluster_contact = now
        self.direct_members.clear()

    def _check_disconnection(self, now: float) -> None:
        if not self.is_ch and now - self.last_cluster_contact > self.silence_window:
            self._start_enquiry(now)

    def on_rsu_pass(self, now: float) -> None:
        self._check_disconnection(now)

    def _start_enquiry(self, now: float) -> None:
        if self.enquiry_replies is not None:
            self.last_link_failure_action = LinkFailureAction.STILL_WAITING
            return
        self.enquiry_replies = []
        self.last_link_failure_action = LinkFailureAction.STILL_WAITING
        self.sv.broadcast(MessageKind.ENQUIRY, None, self.control_bytes)
        self.sv.set_timer(self.enquiry_window, "enq_eval")

    def _finish_enquiry(self, now: float) -> None:
        replies, self.enquiry_replies = self.enquiry_replies, None
        if replies is None:
            return
        choice = pick_join_target(self.sv.loco(), replies, self.cluster.mad_m)
        if choice is not None:
            self.cluster.force_cluster(choice[0], now)
            self.last_link_failure_action = LinkFailureAction.JOINED_EXISTING
        else:
            self.cluster.dissolve(now)  # restart clustering as a lone head
            self.last_link_failure_action = LinkFailureAction.FORMED_NEW
        self.last_cluster_contact = now

    # -- message handling ------------------------------------------------------

    def on_message(self, msg, now: float) -> None:
        kind = msg.kind
        if kind == MessageKind.HELLO:
            self._on_hello(msg.src, msg.payload, now)
        elif kind == MessageKind.DATA:
            self._on_data(msg.payload, now)
        elif kind == MessageKind.ROUTING_UPDATE:
            self._on_ch_update(msg.payload, now)
        elif kind == MessageKind.ROUTE_REQUEST:
            self._on_route_request(msg.src, msg.payload, now)
        elif kind == MessageKind.ROUTE_REPLY:
            self._on_route_reply(msg.src, msg.payload, now)
        elif kind == MessageKind.JOIN_REQ:
            if self.cluster.cluster_id is not None:
                loco = self.sv.loco()
                reply = ("join", (loco.road_id, loco.lane_direction,
                                  loco.physical_location), self.cluster_id)
                self.sv.unicast(msg.src, MessageKind.JOIN_REPLY, reply, self.control_bytes)
        elif kind == MessageKind.JOIN_REPLY:
            self._on_location_reply(msg.src, msg.payload, now)
        elif kind == MessageKind.CH_LEAVE:
            if msg.src == self.cluster_id and not self.is_ch:
                loco = self.sv.loco()
                reply = ("leave", (loco.road_id, loco.lane_direction,
                                   loco.physical_location), self.cluster_id)
                self.sv.unicast(msg.src, MessageKind.JOIN_REPLY, reply, self.control_bytes)
        elif kind == MessageKind.CH_ASSIGN:
            old_head, new_head = msg.payload
            if self.cluster_id == old_head:
                self.cluster.force_cluster(new_head, now)
                self.last_cluster_contact = now
        elif kind == MessageKind.ENQUIRY:
            if self.is_ch:
                loco = self.sv.loco()
                reply = ("enquiry", (loco.road_id, loco.lane_direction,
                                     loco.physical_location), self.cluster_id)
                self.sv.unicast(msg.src, MessageKind.JOIN_REPLY, reply, self.control_bytes)
        elif kind == MessageKind.RSU_ADVISORY:
            self.last_advisory = (now, msg.payload)

    def _on_hello(self, sender: int, payload, now: float) -> None:
        road_id, lane, pl, sender_cluster, sender_is_ch = payload
        from ..addressing import LocoAddress

        flag = self.cluster.process_loco_broadcast(
            sender, LocoAddress(road_id, lane, pl), now,
            sender_cluster_id=sender_cluster, sender_is_ch=sender_is_ch,
        )
        if flag is ClusterFlag.CLUSTERED and (
            sender_cluster == self.cluster_id or sender == self.cluster_id
        ):
            self.last_cluster_contact = now
        if sender_cluster == self.sv.node_id:
            self.direct_members[sender] = now
        else:
            self.direct_members.pop(sender, None)
        self._flush_unclustered(now)

    def _on_ch_update(self, payload, now: float) -> None:
        _, head, members, _, _ = payload
        if head == self.cluster_id:
            self.last_cluster_contact = now
            self.comembers = set(members)

    def _on_location_reply(self, sender: int, payload, now: float) -> None:
        context, loco_tuple, sender_cluster = payload
        from ..addressing import LocoAddress

        loco = LocoAddress(*loco_tuple)
        if context == "join" and self.join_replies is not None:
            self.join_replies.append((sender, loco, sender_cluster))
        elif context == "enquiry" and self.enquiry_replies is not None:
            self.enquiry_replies.append((sender, loco, sender_cluster))
        elif context == "leave" and self.leave_replies is not None:
            self.leave_replies.append((sender, loco.physical_location))

    # -- inter-cluster discovery ---------------------------------------------

    def _fresh_backbone(self, head: int, now: float) -> _BackboneEntry | None:
        entry = self.backbone.get(head)
        if entry is not None and entry.expires > now:
            return entry
        return None

    def _send_request(self, target: int, now: float) -> None:
        self.request_counter += 1
        pend = self.pending[target]
        pend.request_id = self.request_counter
        me = self.sv.node_id
        self.seen_requests[(me, self.request_counter)] = now
        payload = (me, self.request_counter, target, 0)
        self.sv.broadcast(MessageKind.ROUTE_REQUEST, payload, self.control_bytes)
        self.sv.set_timer(self.t_disc, "disc", target)

    def _discovery_timeout(self, target: int, now: float) -> None:
        pend = self.pending.get(target)
        if pend is None:
            return
        pend.tries += 1
        if pend.tries <= self.retries:
            self._send_request(target, now)
        else:
            self.pending.pop(target)
            self.sv.metrics.resolve_attempt(pend.attempt_id, False)

    def _on_route_request(self, sender: int, payload, now: float) -> None:
        if not self.is_ch:
            return  # members never relay inter-cluster requests
        origin_ch, request_id, target, hops = payload
        key = (origin_ch, request_id)
        if key in self.seen_requests:
            return
        self.seen_requests[key] = now
        if origin_ch != self.sv.node_id and (
            self._fresh_backbone(origin_ch, now) is None
        ):
            self.backbone[origin_ch] = _BackboneEntry(
                sender, hops + 1, now + self.route_lifetime
            )
        if target == self.sv.node_id or self._in_my_cluster(target):
            members = tuple(sorted(self.direct_members) + [self.sv.node_id])
            reply = (origin_ch, target, self.sv.node_id, 0, members)
            self.sv.unicast(sender, MessageKind.ROUTE_REPLY, reply, self.control_bytes)
            return
        cached = self.route_cache.get(target)
        if cached is not None and cached[1] > now:
            head = cached[0]
            if head == self.sv.node_id or head == origin_ch:
                # Stale gossip: the cache names a cluster that just denied
                # knowing the target (mine) or the asker's own. Worthless
                # as a route and a self-flood hazard; let the flood go on.
                self.route_cache.pop(target, None)
            else:
                onward = self._fresh_backbone(head, now)
                if onward is not None:
                    reply = (origin_ch, target, head, onward.hops, ())
                    self.sv.unicast(sender, MessageKind.ROUTE_REPLY, reply, self.control_bytes)
                    return
        if hops + 1 > MAX_DATA_HOPS:
            return
        relayed = (origin_ch, request_id, target, hops + 1)
        self.sv.set_timer(self.relay_hold, "relay_rreq", relayed)

    def _on_route_reply(self, sender: int, payload, now: float) -> None:
        origin_ch, target, dst_ch, hops, members = payload
        if dst_ch == origin_ch:
            return  # names the asker's own cluster: carries no usable route
        if dst_ch != self.sv.node_id:
            cur = self._fresh_backbone(dst_ch, now)
            if cur is None or hops + 1 < cur.hops:
                self.backbone[dst_ch] = _BackboneEntry(
                    sender, hops + 1, now + self.route_lifetime
                )
        expiry = now + self.route_lifetime
        self.route_cache[target] = (dst_ch, expiry)
        for m in members:
            self.route_cache[m] = (dst_ch, expiry)
        if origin_ch == self.sv.node_id:
            pend = self.pending.pop(target, None)
            if pend is not None:
                self.sv.metrics.resolve_attempt(pend.attempt_id, True)
                for pkt in pend.queue:
                    self._dispatch_from_head(pkt, now, relay=False)
            return
        if hops + 1 > MAX_DATA_HOPS:
            return  # stale reverse entries can cycle; bound the relay
        back = self._fresh_backbone(origin_ch, now)
        if back is not None:
            relayed = (origin_ch, target, dst_ch, hops + 1, members)
            self.sv.set_timer(self.relay_hold, "relay_rrep", (back.next_hop, relayed))

    # -- data plane ---------------------------------------------------------------

    def send_data(self, dst: int, packet_id: int, now: float) -> None:
        pkt = DataPacket(packet_id, self.sv.node_id, dst)
        if self.cluster.cluster_id is None:
            self.unclustered_queue.append(pkt)
            self.sv.set_timer(self.t_disc, "uncl", packet_id)
            return
        if self._in_my_cluster(dst):
            attempt = self.sv.metrics.record_attempt(now, "intra")
            self.sv.metrics.bind_packet(packet_id, attempt)
            self._forward_intra(pkt, now, relay=False)
        elif self.is_ch:
            self._dispatch_from_head(pkt, now, relay=False)
        else:
            up = self._next_hop_toward_head()
            if up is None:
                attempt = self.sv.metrics.record_attempt(now, "inter")
                self.sv.metrics.resolve_attempt(attempt, False)
                return
            pkt = replace(pkt, phase="to_ch", scope=self.cluster_id)
            self._tx_data(up, pkt, now)

    def _unclustered_expiry(self, packet_id: int, now: float) -> None:
        for i, pkt in enumerate(self.unclustered_queue):
            if pkt.packet_id == packet_id:
                del self.unclustered_queue[i]
                attempt = self.sv.metrics.record_attempt(now, "inter")
                self.sv.metrics.resolve_attempt(attempt, False)
                return

    def _flush_unclustered(self, now: float) -> None:
        if not self.unclustered_queue or self.cluster.cluster_id is None:
            return
        queued, self.unclustered_queue = self.unclustered_queue, []
        for pkt in queued:
            self.send_data(pkt.dst, pkt.packet_id, now)

    def _next_hop_toward_head(self) -> int | None:
        """The head itself when heard directly, else the front-most mate."""
        if self.cluster_id in self.cluster.table:
            return self.cluster_id
        clustered = self.cluster.clustered_entries()
        if not clustered:
            return None
        from ..clustering import front_key

        parent = min(
            clustered,
            key=lambda e: front_key(e.lane_direction, e.physical_location, e.node_id),
        )
        return parent.node_id

    def _tx_data(self, next_hop: int, pkt: DataPacket, now: float) -> None:
        ok = self.sv.unicast(next_hop, MessageKind.DATA, pkt, self.data_bytes)
        if not ok and pkt.phase == "backbone":
            entry = self.backbone.get(next_hop)
            if entry is not None:
                entry.expires = 0.0

    def _hold_tx(self, next_hop: int, pkt: DataPacket) -> None:
        self.sv.set_timer(self.relay_hold, "fwd", (next_hop, pkt))

    def _forward_intra(self, pkt: DataPacket, now: float, *, relay: bool) -> None:
        """Route a packet whose destination we believe shares our cluster."""
        pkt = replace(pkt, phase="intra", scope=self.cluster_id)
        entry = self.cluster.table.get(pkt.dst)
        if entry is not None and (
            entry.cluster_flag is ClusterFlag.CLUSTERED
            or entry.cluster_id == self.cluster_id
        ):
            self._send_or_hold(pkt.dst, pkt, now, relay)
        elif not self.is_ch:
            up = self._next_hop_toward_head()
            if up is not None:
                pkt = replace(pkt, phase="to_ch")
                self._send_or_hold(up, pkt, now, relay)
        elif pkt.dst in self.direct_members:
            self._send_or_hold(pkt.dst, pkt, now, relay)
        # else: believed member is unknown here; the packet dies

    def _send_or_hold(self, next_hop: int, pkt: DataPacket, now: float, relay: bool) -> None:
        if relay:
            self._hold_tx(next_hop, pkt)
        else:
            self._tx_data(next_hop, pkt, now)

    def _dispatch_from_head(self, pkt: DataPacket, now: float, *, relay: bool) -> None:
        """Head decides: deliver into own cluster, use a cached head chain,
        or start a reactive discovery."""
        dst = pkt.dst
        if self._in_my_cluster(dst):
            self._forward_intra(pkt, now, relay=relay)
            return
        cached = self.route_cache.get(dst)
        if cached is not None and cached[1] > now:
            if cached[0] == self.sv.node_id:
                self.route_cache.pop(dst, None)  # stale self-reference
            else:
                onward = self._fresh_backbone(cached[0], now)
                if onward is not None:
                    pkt = replace(pkt, phase="backbone", scope=None, dst_ch=cached[0])
                    self._send_or_hold(onward.next_hop, pkt, now, relay)
                    return
        if dst in self.pending:
            self.pending[dst].queue.append(pkt)
            return
        attempt = self.sv.metrics.record_attempt(now, "inter")
        self.pending[dst] = _Pending(attempt, 0, 0, [pkt])
        self._send_request(dst, now)

    def _on_data(self, pkt: DataPacket, now: float) -> None:
        me = self.sv.node_id
        if pkt.phase in ("intra", "to_ch"):
            # The drop rule: received by a node in a different cluster
            # means dropped, destination included.
            if pkt.scope != self.cluster_id:
                self.sv.metrics.scope_drops += 1
                return
            if pkt.dst == me:
                self.sv.metrics.data_delivered(pkt.packet_id, now)
                return
            self._relay_member_phase(pkt, now)
        elif pkt.phase == "backbone":
            if pkt.dst == me:
                self.sv.metrics.data_delivered(pkt.packet_id, now)
                return
            self._relay_backbone(pkt, now)
        elif pkt.dst == me:
            self.sv.metrics.data_delivered(pkt.packet_id, now)

    def _relay_member_phase(self, pkt: DataPacket, now: float) -> None:
        if pkt.scope != self.cluster_id:
            # Relaying across cluster lines would break the drop rule.
            self.sv.metrics.drop_rule_violations += 1
            return
        pkt = replace(pkt, hops=pkt.hops + 1)
        if pkt.hops > MAX_DATA_HOPS:
            return
        if pkt.phase == "to_ch" and self.is_ch:
            self._dispatch_from_head(pkt, now, relay=True)
        else:
            self._forward_intra(pkt, now, relay=True)

    def _relay_backbone(self, pkt: DataPacket, now: float) -> None:
        if not self.is_ch:
            return  # stale head-chain hop; packet dies
        pkt = replace(pkt, hops=pkt.hops + 1)
        if pkt.hops > MAX_DATA_HOPS:
            return
        if pkt.dst_ch == self.sv.node_id:
            if self._in_my_cluster(pkt.dst):
                self._forward_intra(pkt, now, relay=True)
            return
        onward = self._fresh_backbone(pkt.dst_ch, now)
        if onward is not None:
            self._hold_tx(onward.next_hop, pkt)
