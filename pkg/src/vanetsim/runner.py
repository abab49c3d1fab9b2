"""One simulation run: mobility, radio, per-node protocols and workload
wired onto the event queue.

Each run owns four named random streams (placement, speeds, loss,
traffic) derived from the run seed, so changing one knob never perturbs
draws of an unrelated concern. The run is single-threaded and fully
deterministic: identical config and seed replay the identical event
trace byte for byte.
"""

from __future__ import annotations

import numpy as np

from .addressing import LocoAddress, encode_loco
from .clustering import ClusterTransition
from .config import ScenarioConfig
from .metrics import MetricsCollector, MetricsReport
from .mobility import build_map, spawn_vehicles
from .netsim import (
    DeliveryLog,
    EventKind,
    EventQueue,
    Message,
    MessageKind,
    PositionTable,
    Radio,
)
from .protocols import PROTOCOLS, AcrNode, RsuStation

_STREAMS = {"placement": 0, "speeds": 1, "loss": 2, "traffic": 3}


def _stream(seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence(entropy=seed, spawn_key=(_STREAMS[name],))
    )


class _Services:
    """Concrete per-node facade over the shared run state."""

    __slots__ = ("sim", "node_id")

    def __init__(self, sim: "Simulation", node_id: int):
        self.sim = sim
        self.node_id = node_id

    @property
    def cfg(self) -> ScenarioConfig:
        return self.sim.cfg

    @property
    def node_count(self) -> int:
        return self.sim.n_vehicles

    @property
    def metrics(self) -> MetricsCollector:
        return self.sim.metrics

    def now(self) -> float:
        return self.sim.queue.now

    def loco(self) -> LocoAddress:
        return self.sim.loco_of(self.node_id)

    def broadcast(self, kind: MessageKind, payload, size_bytes: int) -> int:
        sim = self.sim
        now = sim.queue.now
        msg = Message(sim.radio.next_msg_id(), kind, self.node_id, -1,
                      payload, size_bytes, now)
        return sim.radio.broadcast(self.node_id, msg, now)

    def unicast(self, dst: int, kind: MessageKind, payload, size_bytes: int) -> bool:
        sim = self.sim
        now = sim.queue.now
        msg = Message(sim.radio.next_msg_id(), kind, self.node_id, dst,
                      payload, size_bytes, now)
        return sim.radio.unicast(self.node_id, dst, msg, now)

    def set_timer(self, delay: float, tag: str, data=None) -> None:
        sim = self.sim
        sim.queue.schedule(
            sim.queue.now + delay, EventKind.TIMER_FIRE, (self.node_id, tag, data)
        )

    def nearest_rsu(self) -> int | None:
        return self.sim.nearest_rsu(self.node_id)


class Simulation:
    """Builds and runs one repetition of a scenario."""

    def __init__(
        self,
        cfg: ScenarioConfig,
        seed: int,
        *,
        collect_delivery_log: bool = False,
        collect_cluster_log: bool = False,
        scripted_sends: list[tuple[float, int, int]] | None = None,
        zero_speeds: bool = False,
        trajectory_path=None,
    ):
        cfg.validate()
        self.cfg = cfg
        self.seed = seed
        self.road_map = build_map(
            area_width_m=cfg.area_width_m,
            area_height_m=cfg.area_height_m,
            horizontal_roads=cfg.horizontal_roads,
            vertical_roads=cfg.vertical_roads,
            rsus_per_lane=cfg.rsus_per_lane,
            road_id_width=cfg.road_id_bits,
        )
        self.fleet = spawn_vehicles(
            self.road_map, cfg.node_count, tuple(cfg.class_mix),
            _stream(seed, "placement"), _stream(seed, "speeds"),
        )
        if zero_speeds:
            self.fleet.speed[:] = 0.0
        self.n_vehicles = cfg.node_count
        self.use_rsus = cfg.protocol == "acr"
        self.rsu_sites = self.road_map.rsu_sites if self.use_rsus else []
        n_endpoints = self.n_vehicles + len(self.rsu_sites)

        self.queue = EventQueue()
        self.positions = PositionTable(n_endpoints)
        self.delivery_log = DeliveryLog() if collect_delivery_log else None
        self.radio = Radio(
            self.queue, self.positions,
            range_m=cfg.radio_range_m, p_loss=cfg.p_loss,
            bitrate_bps=cfg.bitrate_bps, rng_loss=_stream(seed, "loss"),
            log=self.delivery_log,
        )
        self.metrics = MetricsCollector(cfg.warmup_s)
        self.radio.on_delivered = self.metrics.on_radio_delivered
        self.cluster_log: list[ClusterTransition] | None = (
            [] if collect_cluster_log else None
        )

        proto_cls = PROTOCOLS[cfg.protocol]
        self.handlers: list = []
        self.protocols: list = []
        for i in range(self.n_vehicles):
            services = _Services(self, i)
            if proto_cls is AcrNode:
                node = AcrNode(services, cluster_log=self.cluster_log)
            else:
                node = proto_cls(services)
            self.protocols.append(node)
            self.handlers.append(node)
        self.rsus: list[RsuStation] = []
        for k, site in enumerate(self.rsu_sites):
            node_id = self.n_vehicles + k
            road_id = self.road_map.roads[site.road_index].road_id
            station = RsuStation(_Services(self, node_id), site, road_id)
            self.rsus.append(station)
            self.handlers.append(station)

        self._rng_traffic = _stream(seed, "traffic")
        self._scripted = sorted(scripted_sends or [])
        self._packet_counter = 0
        self._wrap_notified = np.zeros(self.n_vehicles, dtype=bool)
        self._rsu_inside: dict[int, np.ndarray] = {}
        self._trajectory_path = trajectory_path
        self._trajectory_rows: list[tuple] = []
        self._locos: list[LocoAddress | None] = [None] * self.n_vehicles

        self.queue.register(EventKind.TIMER_FIRE, self._on_timer_event)
        self.queue.register(EventKind.MESSAGE_ARRIVAL, self._on_arrival)
        self.queue.register(EventKind.MOBILITY_TICK, self._on_tick)
        self.queue.register(EventKind.EXPERIMENT_END, lambda e: None)

    # -- address/position plumbing -----------------------------------------

    def loco_of(self, node_id: int) -> LocoAddress:
        cached = self._locos[node_id]
        if cached is None:
            cached = self.fleet.loco_of(node_id)
            self._locos[node_id] = cached
        return cached

    def _refresh_positions(self) -> None:
        xs, ys = self.fleet.positions_xy()
        self.positions.set_block(0, xs, ys)
        self._locos = [None] * self.n_vehicles

    def nearest_rsu(self, node_id: int) -> int | None:
        road = int(self.fleet.road_index[node_id])
        lane = int(self.fleet.lane[node_id])
        pos = float(self.fleet.position[node_id])
        best = None
        for k, site in enumerate(self.rsu_sites):
            if site.road_index != road or site.lane != lane:
                continue
            gap = abs(site.position_m - pos)
            if gap <= self.cfg.radio_range_m and (best is None or gap < best[0]):
                best = (gap, self.n_vehicles + k)
        return None if best is None else best[1]

    # -- event handlers ----------------------------------------------------

    def _on_timer_event(self, event) -> None:
        node_id, tag, data = event.data
        if tag == "@send":
            self._workload_send(node_id, event.time)
        elif tag == "@scripted":
            src, dst = data
            self._emit_data(src, dst, event.time)
        elif tag == "@rsu_check":
            self._rsu_coverage_check(event.time)
            nxt = event.time + self.cfg.rsu_check_period_s
            if nxt < self.cfg.duration_s:
                self.queue.schedule(nxt, EventKind.TIMER_FIRE, (-1, "@rsu_check", None))
        else:
            self.handlers[node_id].on_timer(tag, data, event.time)

    def _on_arrival(self, event) -> None:
        dst, msg = event.data
        self.handlers[dst].on_message(msg, event.time)

    def _on_tick(self, event) -> None:
        now = event.time
        cfg = self.cfg
        fleet = self.fleet
        if self.use_rsus and cfg.leave_lead_s > 0:
            lead = fleet.distance_to_end() < fleet.speed * cfg.leave_lead_s
            due = np.nonzero(lead & ~self._wrap_notified)[0]
            for i in due:
                self._wrap_notified[i] = True
                self.protocols[i].on_approaching_wrap(now)
        wrapped = fleet.advance(cfg.mobility_tick_s)
        if len(wrapped):
            self._wrap_notified[wrapped] = False
        self._refresh_positions()
        if self._trajectory_path is not None:
            for i in range(self.n_vehicles):
                self._trajectory_rows.append((
                    now, i, self.road_map.roads[fleet.road_index[i]].road_id,
                    int(fleet.lane[i]), float(fleet.position[i]),
                ))
        self.queue.schedule(now + cfg.mobility_tick_s, EventKind.MOBILITY_TICK)

    def _rsu_coverage_check(self, now: float) -> None:
        fleet = self.fleet
        r = self.cfg.radio_range_m
        for k, site in enumerate(self.rsu_sites):
            on_lane = (fleet.road_index == site.road_index) & (fleet.lane == site.lane)
            inside = on_lane & (np.abs(fleet.position - site.position_m) <= r)
            prev = self._rsu_inside.get(k)
            if prev is None:
                prev = np.zeros(self.n_vehicles, dtype=bool)
            entered = np.nonzero(inside & ~prev)[0]
            self._rsu_inside[k] = inside
            for i in entered:
                self.rsus[k].on_vehicle_entered(int(i), now)
                self.protocols[int(i)].on_rsu_pass(now)

    # -- workload ------------------------------------------------------------

    def _emit_data(self, src: int, dst: int, now: float) -> None:
        self._packet_counter += 1
        pid = self._packet_counter
        self.metrics.data_sent(pid, now)
        self.protocols[src].send_data(dst, pid, now)

    def _workload_send(self, src: int, now: float) -> None:
        rng = self._rng_traffic
        dst = int(rng.integers(0, self.n_vehicles - 1))
        if dst >= src:
            dst += 1
        self._emit_data(src, dst, now)
        nxt = now + rng.exponential(1.0 / self.cfg.traffic_lambda)
        if nxt < self.cfg.duration_s:
            self.queue.schedule(nxt, EventKind.TIMER_FIRE, (src, "@send", None))

    # -- run -------------------------------------------------------------------

    def run(self) -> MetricsReport:
        cfg = self.cfg
        self._refresh_positions()
        for k, site in enumerate(self.rsu_sites):
            road = self.road_map.roads[site.road_index]
            x, y = road.point_at(site.position_m)
            self.positions.x[self.n_vehicles + k] = x
            self.positions.y[self.n_vehicles + k] = y
        for node in self.protocols:
            node.initialize()
        for station in self.rsus:
            station.initialize()
        self.queue.schedule(cfg.mobility_tick_s, EventKind.MOBILITY_TICK)
        if self.use_rsus:
            self.queue.schedule(
                cfg.rsu_check_period_s, EventKind.TIMER_FIRE, (-1, "@rsu_check", None)
            )
        if cfg.traffic_lambda > 0:
            rng = self._rng_traffic
            for i in range(self.n_vehicles):
                t0 = rng.exponential(1.0 / cfg.traffic_lambda)
                if t0 < cfg.duration_s:
                    self.queue.schedule(t0, EventKind.TIMER_FIRE, (i, "@send", None))
        for t, src, dst in self._scripted:
            self.queue.schedule(t, EventKind.TIMER_FIRE, (src, "@scripted", (src, dst)))
        self.queue.schedule(cfg.duration_s, EventKind.EXPERIMENT_END)
        self.queue.run_until(cfg.duration_s)

        if not self.radio.counters.conserved():
            raise AssertionError(
                "radio conservation violated: "
                f"{self.radio.counters}"
            )
        if self._trajectory_path is not None:
            self._write_trajectories()
        snapshot = None
        if cfg.protocol == "acr":
            snapshot = {
                i: (p.cluster_id, p.is_ch) for i, p in enumerate(self.protocols)
            }
        return self.metrics.report(self.seed, cfg.protocol, self.radio.counters, snapshot)

    def _write_trajectories(self) -> None:
        with open(self._trajectory_path, "w") as fh:
            fh.write("time,node,road,lane,position\n")
            for row in self._trajectory_rows:
                fh.write(",".join(str(v) for v in row) + "\n")
