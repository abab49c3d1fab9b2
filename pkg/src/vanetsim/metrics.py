"""Per-run measurement: route-discovery attempts, data delivery times and
network-wide traffic received.

What counts as one discovery attempt differs per protocol and is decided
by the protocol code itself through record_attempt/resolve_attempt:
  - acr: each inter-cluster discovery cycle plus each intra-cluster
    first-delivery attempt (the latter succeeds only if the packet lands);
  - aodv: each request cycle, retries within a cycle counted once;
  - dsdv: each data send checked against the table, succeeding only when
    a live route existed and the packet arrived.
All metrics exclude the warm-up window; records keep timestamps so the
filter is applied when the report is built.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .netsim import MessageKind, RadioCounters


@dataclass(slots=True)
class AttemptRecord:
    time: float
    kind: str  # "intra" | "inter" | "cycle" | "table"
    success: bool | None = None  # None = unresolved


@dataclass(slots=True)
class MetricsReport:
    """Counters for one repetition, already filtered to post-warm-up."""

    seed: int
    protocol: str
    discovery_attempts: int
    discovery_successes: int
    attempts_by_kind: dict
    data_pairs: list  # (send_time, receive_time) for delivered data
    data_undelivered: int
    total_messages_received: int
    received_by_kind: dict  # kind name -> count
    scope_drops: int
    drop_rule_violations: int
    radio: RadioCounters
    cluster_snapshot: dict | None = None  # node -> (cluster_id, is_ch), acr only
    extras: dict = field(default_factory=dict)


class MetricsCollector:
    """Accumulates raw events during a run and builds the filtered report."""

    def __init__(self, warmup_s: float):
        self.warmup_s = warmup_s
        self.attempts: list[AttemptRecord] = []
        self._packet_send: dict[int, float] = {}
        self._packet_recv: dict[int, float] = {}
        self._packet_attempt: dict[int, int] = {}
        self.received_by_kind: dict[MessageKind, int] = {}
        self.scope_drops = 0
        self.drop_rule_violations = 0

    # -- discovery accounting (called by protocols) ----------------------

    def record_attempt(self, time: float, kind: str) -> int:
        self.attempts.append(AttemptRecord(time, kind))
        return len(self.attempts) - 1

    def resolve_attempt(self, attempt_id: int, success: bool) -> None:
        record = self.attempts[attempt_id]
        if record.success is None:
            record.success = success

    def bind_packet(self, packet_id: int, attempt_id: int) -> None:
        """Tie an attempt's outcome to a data packet's delivery."""
        self._packet_attempt[packet_id] = attempt_id

    # -- data plane -------------------------------------------------------

    def data_sent(self, packet_id: int, time: float) -> None:
        self._packet_send[packet_id] = time

    def data_delivered(self, packet_id: int, time: float) -> None:
        if packet_id in self._packet_recv:
            return  # duplicate arrival
        self._packet_recv[packet_id] = time
        attempt_id = self._packet_attempt.get(packet_id)
        if attempt_id is not None:
            self.resolve_attempt(attempt_id, True)

    # -- traffic ----------------------------------------------------------

    def on_radio_delivered(self, kind: MessageKind, arrival_time: float) -> None:
        if arrival_time >= self.warmup_s:
            self.received_by_kind[kind] = self.received_by_kind.get(kind, 0) + 1

    # -- report -----------------------------------------------------------

    def finalize(self) -> None:
        """Fail every attempt still unresolved at experiment end."""
        for record in self.attempts:
            if record.success is None:
                record.success = False

    def report(self, seed: int, protocol: str, radio: RadioCounters,
               cluster_snapshot: dict | None = None) -> MetricsReport:
        self.finalize()
        post = [a for a in self.attempts if a.time >= self.warmup_s]
        by_kind: dict[str, list[int]] = {}
        for a in post:
            succ, tot = by_kind.get(a.kind, (0, 0))
            by_kind[a.kind] = (succ + (1 if a.success else 0), tot + 1)
        pairs = []
        undelivered = 0
        for pid, t_send in self._packet_send.items():
            if t_send < self.warmup_s:
                continue
            t_recv = self._packet_recv.get(pid)
            if t_recv is None:
                undelivered += 1
            else:
                pairs.append((t_send, t_recv))
        received = {k.name.lower(): v for k, v in sorted(self.received_by_kind.items())}
        return MetricsReport(
            seed=seed,
            protocol=protocol,
            discovery_attempts=len(post),
            discovery_successes=sum(1 for a in post if a.success),
            attempts_by_kind=by_kind,
            data_pairs=pairs,
            data_undelivered=undelivered,
            total_messages_received=sum(received.values()),
            received_by_kind=received,
            scope_drops=self.scope_drops,
            drop_rule_violations=self.drop_rule_violations,
            radio=radio,
            cluster_snapshot=cluster_snapshot,
        )
