"""Common surface shared by the routing protocols under test.

Every protocol is instantiated once per vehicle and only ever talks to the
world through its NodeServices: radio sends, timers, the node's current
mobility address and the metrics hooks. Protocols hold no generator of
their own, so identical inbound event sequences always produce identical
outbound message sequences.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..addressing import LocoAddress
from ..metrics import MetricsCollector
from ..netsim import MessageKind


MAX_DATA_HOPS = 24  # stale tables can briefly loop a packet; cap its life


@dataclass(slots=True)
class DataPacket:
    """Application payload routed by any of the protocols.

    phase/scope/dst_ch carry acr's forwarding state: scope is the cluster
    a member-phase packet belongs to, dst_ch the backbone target head.
    hops counts relay steps so transient routing loops cannot keep a
    packet alive forever.
    """

    packet_id: int
    origin: int
    dst: int
    phase: str = ""
    scope: int | None = None
    dst_ch: int | None = None
    hops: int = 0


class NodeServices:
    """What the simulation runner exposes to a protocol instance.

    Concrete implementation lives in the runner; this stub only documents
    the contract and backs the protocol unit tests' fakes.
    """

    node_id: int
    node_count: int
    cfg: object
    metrics: MetricsCollector

    def now(self) -> float:
        raise NotImplementedError

    def loco(self) -> LocoAddress:
        raise NotImplementedError

    def broadcast(self, kind: MessageKind, payload, size_bytes: int) -> int:
        raise NotImplementedError

    def unicast(self, dst: int, kind: MessageKind, payload, size_bytes: int) -> bool:
        raise NotImplementedError

    def set_timer(self, delay: float, tag: str, data=None) -> None:
        raise NotImplementedError

    def nearest_rsu(self) -> int | None:
        """Node id of an in-range RSU covering this node's road and lane."""
        return None


class RoutingProtocol:
    """Event-driven per-node protocol instance."""

    name = "?"

    def __init__(self, services: NodeServices):
        self.sv = services

    def initialize(self) -> None:
        """Arm initial timers; called once before the clock starts."""

    def on_message(self, msg, now: float) -> None:
        """Handle one radio arrival addressed or broadcast to this node."""

    def on_timer(self, tag: str, data, now: float) -> None:
        """Handle one of this node's own timers."""

    def send_data(self, dst: int, packet_id: int, now: float) -> None:
        """Originate one application data packet toward dst."""

    # Mobility hooks; only the cluster-based protocol reacts to these.

    def on_approaching_wrap(self, now: float) -> None:
        pass

    def on_rsu_pass(self, now: float) -> None:
        pass
