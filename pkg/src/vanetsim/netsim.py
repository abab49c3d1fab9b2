"""Deterministic discrete-event engine with a unit-disk radio.

Events dequeue in (time, sequence) order, so equal-time events run in
insertion order and a given seed always replays the same trace. The radio
delivers to every endpoint within range that survives an independent
Bernoulli loss draw; losses and out-of-range candidates are counted, never
raised. Per-candidate accounting keeps the conservation identity
messages_sent = delivered + lost + out_of_range exact on every run.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

PROPAGATION_SPEED = 3.0e8  # m/s

BROADCAST = -1


class SchedulingError(RuntimeError):
    """An event was scheduled in the past or the clock would regress."""


class EventKind(IntEnum):
    TIMER_FIRE = 0
    MESSAGE_ARRIVAL = 1
    MOBILITY_TICK = 2
    EXPERIMENT_END = 3


class MessageKind(IntEnum):
    HELLO = 0
    JOIN_REQ = 1
    JOIN_REPLY = 2
    CH_LEAVE = 3
    CH_ASSIGN = 4
    ROUTE_REQUEST = 5
    ROUTE_REPLY = 6
    ROUTE_ERROR = 7
    ROUTING_UPDATE = 8
    DATA = 9
    RSU_REPORT = 10
    RSU_ADVISORY = 11
    ENQUIRY = 12


@dataclass(slots=True)
class SimEvent:
    time: float
    sequence: int
    kind: EventKind
    data: object = None

    def __lt__(self, other: "SimEvent") -> bool:
        return (self.time, self.sequence) < (other.time, other.sequence)


@dataclass(slots=True)
class Message:
    msg_id: int
    kind: MessageKind
    src: int
    dst: int  # node id or BROADCAST
    payload: object
    size_bytes: int
    created_at: float


class EventQueue:
    """Priority queue of simulation events with a monotone clock."""

    def __init__(self):
        self.now = 0.0
        self._heap: list[SimEvent] = []
        self._seq = 0
        self._handlers: dict[EventKind, object] = {}

    def register(self, kind: EventKind, handler) -> None:
        self._handlers[kind] = handler

    def schedule(self, time: float, kind: EventKind, data: object = None) -> SimEvent:
        if time < self.now:
            raise SchedulingError(
                f"cannot schedule {kind.name} at {time} before current time {self.now}"
            )
        event = SimEvent(time, self._seq, kind, data)
        self._seq += 1
        heapq.heappush(self._heap, event)
        return event

    def run_until(self, t_end: float) -> int:
        """Process all events up to t_end; returns the executed count."""
        if t_end < self.now:
            raise SchedulingError(
                f"run_until({t_end}) would regress clock from {self.now}"
            )
        executed = 0
        heap = self._heap
        while heap and heap[0].time <= t_end:
            event = heapq.heappop(heap)
            self.now = event.time
            handler = self._handlers.get(event.kind)
            if handler is not None:
                handler(event)
            executed += 1
        self.now = t_end
        return executed


class PositionTable:
    """Planar coordinates for every radio endpoint, updated by the runner."""

    def __init__(self, n: int):
        self.x = np.zeros(n)
        self.y = np.zeros(n)

    def __len__(self) -> int:
        return len(self.x)

    def set_block(self, start: int, xs: np.ndarray, ys: np.ndarray) -> None:
        self.x[start : start + len(xs)] = xs
        self.y[start : start + len(ys)] = ys


@dataclass(slots=True)
class RadioCounters:
    """Per-candidate accounting: a broadcast to k other endpoints counts as
    k sent message copies; a unicast as one."""

    sent: int = 0
    delivered: int = 0
    lost: int = 0
    out_of_range: int = 0
    transmissions: int = 0
    delivered_by_kind: dict = field(default_factory=dict)

    def conserved(self) -> bool:
        return self.sent == self.delivered + self.lost + self.out_of_range


class DeliveryLog:
    """Optional per-outcome log of radio candidates (CSV-exportable)."""

    COLUMNS = ("time", "msg_id", "kind", "src", "dst", "outcome")

    def __init__(self):
        self.rows: list[tuple] = []

    def add(self, time, msg_id, kind, src, dst, outcome):
        self.rows.append((time, msg_id, kind.name.lower(), src, dst, outcome))

    def write_csv(self, path, seed: int) -> None:
        with open(path, "w") as fh:
            fh.write(f"# seed={seed}\n")
            fh.write(",".join(self.COLUMNS) + "\n")
            for row in self.rows:
                fh.write(",".join(str(v) for v in row) + "\n")


class Radio:
    """Unit-disk medium: delivery iff Euclidean distance <= range and the
    Bernoulli loss draw survives. Delay is transmission (size*8/bitrate)
    plus propagation (distance/c)."""

    def __init__(
        self,
        queue: EventQueue,
        positions: PositionTable,
        *,
        range_m: float = 100.0,
        p_loss: float = 0.0,
        bitrate_bps: float = 6e6,
        rng_loss: np.random.Generator | None = None,
        log: DeliveryLog | None = None,
    ):
        self.queue = queue
        self.positions = positions
        self.range_m = range_m
        self.p_loss = p_loss
        self.bitrate_bps = bitrate_bps
        self.rng_loss = rng_loss
        self.log = log
        self.counters = RadioCounters()
        self.on_delivered = None  # hook(kind, arrival_time) for metrics
        self._msg_counter = 0

    def next_msg_id(self) -> int:
        self._msg_counter += 1
        return self._msg_counter

    def _tx_delay(self, size_bytes: int) -> float:
        return size_bytes * 8.0 / self.bitrate_bps

    def _deliver(self, msg: Message, dst: int, distance: float, now: float) -> None:
        assert distance <= self.range_m + 1e-9, "delivery beyond radio range"
        arrival = now + self._tx_delay(msg.size_bytes) + distance / PROPAGATION_SPEED
        self.queue.schedule(arrival, EventKind.MESSAGE_ARRIVAL, (dst, msg))
        self.counters.delivered += 1
        kinds = self.counters.delivered_by_kind
        kinds[msg.kind] = kinds.get(msg.kind, 0) + 1
        if self.on_delivered is not None:
            self.on_delivered(msg.kind, arrival)
        if self.log is not None:
            self.log.add(now, msg.msg_id, msg.kind, msg.src, dst, "delivered")

    def broadcast(self, src: int, msg: Message, now: float) -> int:
        """Schedule arrivals at every other endpoint in range; returns the
        delivered count."""
        c = self.counters
        c.transmissions += 1
        px, py = self.positions.x, self.positions.y
        d2 = (px - px[src]) ** 2 + (py - py[src]) ** 2
        d2[src] = np.inf
        in_range = np.nonzero(d2 <= self.range_m * self.range_m)[0]
        n_candidates = len(px) - 1
        c.sent += n_candidates
        c.out_of_range += n_candidates - len(in_range)
        if self.log is not None:
            far = np.nonzero(d2 > self.range_m * self.range_m)[0]
            for dst in far:
                if dst != src:
                    self.log.add(now, msg.msg_id, msg.kind, src, int(dst), "out_of_range")
        if len(in_range) == 0:
            return 0
        if self.p_loss > 0.0:
            survive = self.rng_loss.random(len(in_range)) >= self.p_loss
        else:
            survive = np.ones(len(in_range), dtype=bool)
        delivered = 0
        dists = np.sqrt(d2[in_range])
        for i, dst in enumerate(in_range):
            if survive[i]:
                self._deliver(msg, int(dst), float(dists[i]), now)
                delivered += 1
            else:
                c.lost += 1
                if self.log is not None:
                    self.log.add(now, msg.msg_id, msg.kind, src, int(dst), "lost")
        return delivered

    def unicast(self, src: int, dst: int, msg: Message, now: float) -> bool:
        """Deliver to one endpoint; False when out of range or lost."""
        c = self.counters
        c.transmissions += 1
        c.sent += 1
        dx = self.positions.x[dst] - self.positions.x[src]
        dy = self.positions.y[dst] - self.positions.y[src]
        d2 = dx * dx + dy * dy
        if d2 > self.range_m * self.range_m:
            c.out_of_range += 1
            if self.log is not None:
                self.log.add(now, msg.msg_id, msg.kind, src, dst, "out_of_range")
            return False
        if self.p_loss > 0.0 and self.rng_loss.random() < self.p_loss:
            c.lost += 1
            if self.log is not None:
                self.log.add(now, msg.msg_id, msg.kind, src, dst, "lost")
            return False
        self._deliver(msg, dst, float(np.sqrt(d2)), now)
        return True
