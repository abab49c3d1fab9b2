"""Roadside infrastructure: per-lane report collection and advisories.

Each station covers one lane of one road and is addressed hierarchically
("11" covers road 1 lane 0, "11.1" a sub-segment of it). Cluster heads
passing within radio range report their lane's situation; the station
stores the reports and pushes an advisory to vehicles that enter its
coverage afterwards. Reports from nodes that are not cluster heads, or
that concern a road/lane the station does not cover, are dropped and
counted. With bridging enabled the station also relays inter-cluster
route discovery between heads that have no direct radio path.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from ..mobility import RsuSite
from ..netsim import MessageKind


@dataclass(slots=True)
class RsuAddress:
    """Hierarchical dotted identifier bound to a covered road and lane."""

    address: str
    road_id: str
    lane_direction: int
    position_m: float

    @property
    def parent(self) -> str | None:
        if "." not in self.address:
            return None
        return self.address.rsplit(".", 1)[0]

    def covers_same_lane(self, other: "RsuAddress") -> bool:
        return (self.road_id, self.lane_direction) == (other.road_id, other.lane_direction)


class RsuStation:
    """One fixed infrastructure endpoint on the radio medium."""

    def __init__(self, services, site: RsuSite, road_id: str):
        self.sv = services
        self.site = site
        self.address = RsuAddress(site.address, road_id, site.lane, site.position_m)
        self.reports: deque = deque(maxlen=200)  # (time, head_id, member_count)
        self.reports_accepted = 0
        self.reports_rejected = 0
        self.advisories_sent = 0
        self.bridging = bool(services.cfg.rsu_bridging)
        self.report_ttl = services.cfg.rsu_report_ttl_s
        self._seen: dict[tuple[int, int], float] = {}
        self._reverse: dict[int, int] = {}  # origin head -> next hop back
        self._forward: dict[int, int] = {}  # target head -> next hop on

    def initialize(self) -> None:
        pass

    def on_timer(self, tag: str, data, now: float) -> None:
        if tag == "relay_rreq":
            self.sv.broadcast(MessageKind.ROUTE_REQUEST, data, self.sv.cfg.control_bytes)

    def on_message(self, msg, now: float) -> None:
        if msg.kind == MessageKind.RSU_REPORT:
            self._on_report(msg.payload, now)
        elif self.bridging and msg.kind == MessageKind.ROUTE_REQUEST:
            self._bridge_request(msg.src, msg.payload, now)
        elif self.bridging and msg.kind == MessageKind.ROUTE_REPLY:
            self._bridge_reply(msg.src, msg.payload, now)
        elif self.bridging and msg.kind == MessageKind.DATA:
            self._bridge_data(msg.payload, now)

    def _on_report(self, payload, now: float) -> None:
        head_id, is_ch, road_id, lane, member_count = payload
        if not is_ch or road_id != self.address.road_id or lane != self.address.lane_direction:
            self.reports_rejected += 1
            return
        self.reports.append((now, head_id, member_count))
        self.reports_accepted += 1

    def on_vehicle_entered(self, vehicle_id: int, now: float) -> None:
        """Push the freshest stored report to a vehicle entering coverage."""
        if not self.reports:
            return
        t, head_id, member_count = self.reports[-1]
        if now - t > self.report_ttl:
            return
        payload = (self.address.address, self.address.road_id,
                   self.address.lane_direction, t, head_id, member_count)
        if self.sv.unicast(vehicle_id, MessageKind.RSU_ADVISORY, payload,
                           self.sv.cfg.control_bytes):
            self.advisories_sent += 1

    # -- optional inter-cluster bridging ---------------------------------

    def _bridge_request(self, sender: int, payload, now: float) -> None:
        origin_ch, request_id, target, hops = payload
        key = (origin_ch, request_id)
        if key in self._seen:
            return
        self._seen[key] = now
        self._reverse[origin_ch] = sender
        relayed = (origin_ch, request_id, target, hops + 1)
        self.sv.set_timer(self.sv.cfg.relay_hold_s, "relay_rreq", relayed)

    def _bridge_reply(self, sender: int, payload, now: float) -> None:
        origin_ch, target, dst_ch, hops, members = payload
        back = self._reverse.get(origin_ch)
        if back is None:
            return
        self._forward[dst_ch] = sender
        relayed = (origin_ch, target, dst_ch, hops + 1, members)
        self.sv.unicast(back, MessageKind.ROUTE_REPLY, relayed, self.sv.cfg.control_bytes)

    def _bridge_data(self, pkt, now: float) -> None:
        if pkt.phase != "backbone" or pkt.dst_ch is None:
            return
        onward = self._forward.get(pkt.dst_ch)
        if onward is not None:
            self.sv.unicast(onward, MessageKind.DATA, pkt, self.sv.cfg.data_bytes)
