"""Synthetic road grids and constant-speed vehicles moving along lanes.

Roads are straight segments laid on a grid inside a rectangular area.
Each road carries two lanes sharing the same centerline: lane 0 runs
toward increasing axis coordinates, lane 1 toward decreasing ones.
Vehicles keep their road, lane and speed for a whole run and wrap to the
opposite end of the lane when they reach a road end, so node count and
density stay stationary.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .addressing import DEFAULT_ROAD_ID_BITS, LocoAddress, encode_loco

# Speed classes in m/s; vehicles draw a constant speed uniformly from one.
SPEED_CLASSES = {
    "slow": (0.0, 4.0),
    "med": (6.0, 10.0),
    "fast": (12.0, 16.0),
}
SPEED_CLASS_ORDER = ("slow", "med", "fast")


class MapConfigError(ValueError):
    """The map description cannot produce a valid road set."""


@dataclass(frozen=True, slots=True)
class Road:
    index: int
    road_id: str
    length_m: float
    origin: tuple[float, float]
    axis: tuple[float, float]  # unit vector along increasing positions

    def point_at(self, position_m: float) -> tuple[float, float]:
        ox, oy = self.origin
        ax, ay = self.axis
        return ox + ax * position_m, oy + ay * position_m


@dataclass(frozen=True, slots=True)
class RsuSite:
    """A roadside unit anchor covering one lane of one road.

    Addresses are hierarchical dotted identifiers: per-lane units get
    "<road><lane+1>" (e.g. "11", "12") and sub-road units append ".<k>"
    ("11.1"); a child's parent prefix must cover the same road and lane.
    """

    address: str
    road_index: int
    lane: int
    position_m: float

    @property
    def parent(self) -> str | None:
        if "." not in self.address:
            return None
        return self.address.rsplit(".", 1)[0]


@dataclass(slots=True)
class RoadMap:
    roads: list[Road]
    rsu_sites: list[RsuSite]
    road_id_width: int

    def road_by_id(self, road_id: str) -> Road:
        for road in self.roads:
            if road.road_id == road_id:
                return road
        raise KeyError(road_id)

    @property
    def total_length(self) -> float:
        return sum(r.length_m for r in self.roads)


def build_map(
    *,
    area_width_m: float = 1000.0,
    area_height_m: float = 1000.0,
    horizontal_roads: int = 3,
    vertical_roads: int = 3,
    rsus_per_lane: int = 1,
    road_id_width: int = DEFAULT_ROAD_ID_BITS,
    road_ids: list[str] | None = None,
) -> RoadMap:
    """Lay a deterministic grid of roads over the area and anchor RSUs.

    Horizontal roads span the full width at evenly spaced heights and
    vertical roads the full height at evenly spaced abscissas. road_ids
    overrides the generated sequential ids (mainly for tests).
    """
    n_roads = horizontal_roads + vertical_roads
    if n_roads < 1:
        raise MapConfigError("a map needs at least one road")
    if n_roads >= 2**road_id_width:
        raise MapConfigError(
            f"{n_roads} roads do not fit in {road_id_width}-bit road ids"
        )
    if road_ids is None:
        road_ids = [format(i + 1, f"0{road_id_width}b") for i in range(n_roads)]
    if len(road_ids) != n_roads:
        raise MapConfigError(
            f"got {len(road_ids)} road ids for {n_roads} roads"
        )
    if len(set(road_ids)) != len(road_ids):
        raise MapConfigError("duplicate road id in map config")
    for rid in road_ids:
        if len(rid) != road_id_width or any(c not in "01" for c in rid):
            raise MapConfigError(f"bad road id {rid!r}")

    roads: list[Road] = []
    for i in range(horizontal_roads):
        y = area_height_m * (i + 1) / (horizontal_roads + 1)
        roads.append(
            Road(len(roads), road_ids[len(roads)], area_width_m, (0.0, y), (1.0, 0.0))
        )
    for j in range(vertical_roads):
        x = area_width_m * (j + 1) / (vertical_roads + 1)
        roads.append(
            Road(len(roads), road_ids[len(roads)], area_height_m, (x, 0.0), (0.0, 1.0))
        )

    sites: list[RsuSite] = []
    for road in roads:
        for lane in (0, 1):
            top = f"{road.index + 1}{lane + 1}"
            sites.append(RsuSite(top, road.index, lane, road.length_m / 2.0))
            if rsus_per_lane > 1:
                for k in range(rsus_per_lane):
                    pos = road.length_m * (k + 1) / (rsus_per_lane + 1)
                    sites.append(RsuSite(f"{top}.{k + 1}", road.index, lane, pos))
    _check_rsu_hierarchy(sites)
    return RoadMap(roads, sites, road_id_width)


def _check_rsu_hierarchy(sites: list[RsuSite]) -> None:
    by_addr = {s.address: s for s in sites}
    for site in sites:
        parent = site.parent
        if parent is None:
            continue
        if parent not in by_addr:
            raise MapConfigError(f"rsu {site.address} has no parent {parent}")
        top = by_addr[parent]
        if (top.road_index, top.lane) != (site.road_index, site.lane):
            raise MapConfigError(
                f"rsu {site.address} not covered by parent {parent}"
            )


@dataclass(slots=True)
class Vehicle:
    """Read-only view of one vehicle's kinematic state."""

    node_id: int
    road_index: int
    lane: int
    position_m: float
    speed_mps: float
    speed_class: str


@dataclass(slots=True)
class VehicleFleet:
    """Array-backed vehicle states advanced in lockstep."""

    road_map: RoadMap
    road_index: np.ndarray  # int64
    lane: np.ndarray  # int64
    position: np.ndarray  # float64, meters along road axis
    speed: np.ndarray  # float64, m/s
    speed_class: list[str]
    _road_length: np.ndarray = field(init=False)
    _dir_sign: np.ndarray = field(init=False)
    traveled: np.ndarray = field(init=False)  # odometer, excludes wraps

    def __post_init__(self):
        lengths = np.array([r.length_m for r in self.road_map.roads])
        self._road_length = lengths[self.road_index]
        self._dir_sign = np.where(self.lane == 0, 1.0, -1.0)
        self.traveled = np.zeros(len(self.position))

    def __len__(self) -> int:
        return len(self.position)

    def advance(self, dt: float) -> np.ndarray:
        """Move every vehicle dt seconds; returns indices that wrapped.

        Vehicles reaching a road end continue from the opposite end of the
        same lane, keeping speed and direction.
        """
        if dt <= 0:
            raise ValueError(f"dt must be positive, got {dt}")
        step = self._dir_sign * self.speed * dt
        new_pos = self.position + step
        wrapped = (new_pos < 0.0) | (new_pos >= self._road_length)
        new_pos = np.mod(new_pos, self._road_length)
        self.position = new_pos
        self.traveled += np.abs(step)
        return np.nonzero(wrapped)[0]

    def positions_xy(self) -> tuple[np.ndarray, np.ndarray]:
        origins = np.array([r.origin for r in self.road_map.roads])
        axes = np.array([r.axis for r in self.road_map.roads])
        o = origins[self.road_index]
        a = axes[self.road_index]
        return o[:, 0] + a[:, 0] * self.position, o[:, 1] + a[:, 1] * self.position

    def distance_to_end(self) -> np.ndarray:
        """Remaining meters before each vehicle reaches its lane's end."""
        return np.where(
            self.lane == 0, self._road_length - self.position, self.position
        )

    def loco_of(self, i: int) -> LocoAddress:
        road = self.road_map.roads[self.road_index[i]]
        return encode_loco(
            road.road_id,
            int(self.lane[i]),
            float(self.position[i]),
            road_id_width=self.road_map.road_id_width,
            road_length_m=road.length_m,
        )

    def vehicle(self, i: int) -> Vehicle:
        return Vehicle(
            i,
            int(self.road_index[i]),
            int(self.lane[i]),
            float(self.position[i]),
            float(self.speed[i]),
            self.speed_class[i],
        )


def spawn_vehicles(
    road_map: RoadMap,
    n: int,
    class_mix: tuple[float, float, float],
    rng_placement: np.random.Generator,
    rng_speeds: np.random.Generator,
) -> VehicleFleet:
    """Place n vehicles uniformly over the lanes with class-drawn speeds.

    Roads are weighted by length, lanes are equiprobable and positions are
    uniform along the road. Speeds are drawn once per vehicle, uniformly
    within the assigned class interval. Deterministic per generator state.
    """
    if n < 1:
        raise ValueError("need at least one vehicle")
    mix = np.asarray(class_mix, dtype=float)
    if mix.shape != (3,) or np.any(mix < 0) or not np.isclose(mix.sum(), 1.0):
        raise ValueError(f"class mix must be three weights summing to 1, got {class_mix}")

    lengths = np.array([r.length_m for r in road_map.roads])
    road_probs = lengths / lengths.sum()
    road_index = rng_placement.choice(len(road_map.roads), size=n, p=road_probs)
    lane = rng_placement.integers(0, 2, size=n)
    position = rng_placement.uniform(0.0, lengths[road_index])

    class_idx = rng_speeds.choice(3, size=n, p=mix)
    names = [SPEED_CLASS_ORDER[c] for c in class_idx]
    lo = np.array([SPEED_CLASSES[c][0] for c in names])
    hi = np.array([SPEED_CLASSES[c][1] for c in names])
    speed = rng_speeds.uniform(lo, hi)

    return VehicleFleet(
        road_map,
        road_index.astype(np.int64),
        lane.astype(np.int64),
        position,
        speed,
        names,
    )
