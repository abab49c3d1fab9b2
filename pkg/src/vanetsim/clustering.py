"""Per-node cluster state: neighbor table, membership decisions and head
election driven by received address broadcasts.

Two nodes become cluster mates when their road/lane bits match exactly
(zero Hamming distance) and their positions differ by at most the
configured maximum allowed distance (MAD). The head of a cluster is its
front-most member along the lane direction; ties go to the lower node id.
A cluster's identity is its current head's node id, and that identity
propagates down member chains through the cluster id each node advertises
with its broadcasts, so clusters may stretch beyond MAD by chaining while
every individual membership decision stays pairwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable

from .addressing import LocoAddress, mobility_distance


class ClusterFlag(Enum):
    CANDIDATE = "candidate"
    CLUSTERED = "clustered"


class LinkFailureAction(Enum):
    JOINED_EXISTING = "joined_existing"
    FORMED_NEW = "formed_new"
    STILL_WAITING = "still_waiting"


def front_key(lane_direction: int, physical_location: int, node_id: int):
    """Total order placing the front-most node first.

    Front means larger position on lane 0 and smaller position on lane 1;
    equal positions break toward the lower node id.
    """
    if lane_direction == 0:
        return (-physical_location, node_id)
    return (physical_location, node_id)


@dataclass(slots=True)
class RoutingTableEntry:
    """What one received broadcast taught us about a neighbor."""

    node_id: int
    road_id: str
    lane_direction: int
    physical_location: int
    cluster_flag: ClusterFlag
    last_heard: float
    cluster_id: int | None = None  # cluster the sender advertised
    sender_is_ch: bool = False

    def loco(self) -> LocoAddress:
        return LocoAddress(self.road_id, self.lane_direction, self.physical_location)


@dataclass(slots=True)
class ClusterView:
    """A node's local belief about its own cluster."""

    cluster_id: int | None
    is_ch: bool
    members: set[int]
    mad_m: float


@dataclass(slots=True)
class ClusterTransition:
    """One structured log row per cluster-state change (CSV-exportable).

    The extra loco snapshot fields let a replay check re-evaluate the
    membership predicate exactly as it was decided.
    """

    time: float
    node_id: int
    event: str
    cluster_id: int | None
    is_ch: bool
    peer_id: int | None = None
    self_pl: int | None = None
    peer_pl: int | None = None
    hd: int | None = None

    CSV_COLUMNS = ("time", "node", "event", "cluster_id", "is_ch")

    def csv_row(self) -> tuple:
        return (self.time, self.node_id, self.event, self.cluster_id, int(self.is_ch))


class ClusterState:
    """State machine run by each vehicle over its routing table."""

    def __init__(
        self,
        node_id: int,
        mad_m: float,
        get_self_loco: Callable[[], LocoAddress],
        log: list[ClusterTransition] | None = None,
    ):
        self.node_id = node_id
        self.mad_m = mad_m
        self.get_self_loco = get_self_loco
        self.table: dict[int, RoutingTableEntry] = {}
        self.cluster_id: int | None = None  # None until first evaluation
        self.is_ch = False
        self.log = log

    # -- table updates -------------------------------------------------

    def process_loco_broadcast(
        self,
        sender_id: int,
        sender_loco: LocoAddress,
        now: float,
        *,
        sender_cluster_id: int | None = None,
        sender_is_ch: bool = False,
    ) -> ClusterFlag:
        """Upsert the sender and decide pairwise cluster-ship.

        The sender is marked clustered iff road and lane bits match and
        the position gap is within MAD; otherwise it stays a candidate.
        """
        self_loco = self.get_self_loco()
        hd, pl_delta = mobility_distance(self_loco, sender_loco)
        clustered = hd == 0 and pl_delta <= self.mad_m
        flag = ClusterFlag.CLUSTERED if clustered else ClusterFlag.CANDIDATE
        prev = self.table.get(sender_id)
        self.table[sender_id] = RoutingTableEntry(
            sender_id,
            sender_loco.road_id,
            sender_loco.lane_direction,
            sender_loco.physical_location,
            flag,
            now,
            sender_cluster_id,
            sender_is_ch,
        )
        if self.log is not None and (prev is None or prev.cluster_flag != flag):
            self.log.append(
                ClusterTransition(
                    now, self.node_id, f"membership_{flag.value}",
                    self.cluster_id, self.is_ch,
                    peer_id=sender_id,
                    self_pl=self_loco.physical_location,
                    peer_pl=sender_loco.physical_location,
                    hd=hd,
                )
            )
        self.recompute(now)
        return flag

    def clustered_entries(self) -> list[RoutingTableEntry]:
        return [e for e in self.table.values() if e.cluster_flag is ClusterFlag.CLUSTERED]

    def members(self) -> set[int]:
        return {e.node_id for e in self.clustered_entries()}

    def view(self) -> ClusterView:
        return ClusterView(self.cluster_id, self.is_ch, self.members(), self.mad_m)

    # -- head election ---------------------------------------------------

    def select_cluster_head(self) -> bool:
        """True iff no clustered member is strictly in front of this node."""
        loco = self.get_self_loco()
        mine = front_key(loco.lane_direction, loco.physical_location, self.node_id)
        front = not any(
            front_key(e.lane_direction, e.physical_location, e.node_id) < mine
            for e in self.clustered_entries()
        )
        self.is_ch = front
        return front

    def recompute(self, now: float) -> None:
        """Re-derive head flag and cluster identity from the table.

        A non-head node adopts the cluster id advertised by its front-most
        clustered neighbor, which walks identity up the chain to the
        component's true head after enough broadcast rounds.
        """
        prev = (self.cluster_id, self.is_ch)
        if self.select_cluster_head():
            self.cluster_id = self.node_id
        else:
            loco = self.get_self_loco()
            parent = min(
                self.clustered_entries(),
                key=lambda e: front_key(e.lane_direction, e.physical_location, e.node_id),
            )
            self.cluster_id = self._verify_adopted(parent, loco)
        if self.log is not None and (self.cluster_id, self.is_ch) != prev:
            self.log.append(
                ClusterTransition(
                    now, self.node_id, "head" if self.is_ch else "member",
                    self.cluster_id, self.is_ch,
                )
            )

    def _verify_adopted(self, parent: RoutingTableEntry, loco: LocoAddress) -> int:
        """Sanity-check the head id the parent advertises before adopting.

        Stale broadcasts can circulate head ids pointing at nodes that are
        behind us (or off our lane) by now; adopting those can create
        identity cycles under mobility. An advertised head we know about
        must sit on our road/lane strictly in front of us, otherwise the
        parent itself is the best verified head."""
        adopted = parent.cluster_id
        if adopted is None or adopted == self.node_id:
            return parent.node_id
        if adopted == parent.node_id:
            return adopted
        known = self.table.get(adopted)
        if known is None:
            return adopted  # beyond radio range, presumably up front
        mine = front_key(loco.lane_direction, loco.physical_location, self.node_id)
        theirs = front_key(known.lane_direction, known.physical_location, known.node_id)
        if (
            known.road_id == loco.road_id
            and known.lane_direction == loco.lane_direction
            and theirs < mine
        ):
            return adopted
        return parent.node_id

    # -- maintenance ------------------------------------------------------

    def expire_stale_entries(self, now: float, ttl: float) -> list[int]:
        """Drop entries not heard for ttl seconds and re-evaluate."""
        stale = [nid for nid, e in self.table.items() if now - e.last_heard > ttl]
        for nid in stale:
            del self.table[nid]
        if stale:
            self.recompute(now)
        return stale

    def force_cluster(self, cluster_id: int, now: float) -> None:
        """Adopt a cluster identity announced out of band (join/handover)."""
        self.is_ch = cluster_id == self.node_id
        self.cluster_id = cluster_id
        if self.log is not None:
            self.log.append(
                ClusterTransition(now, self.node_id, "adopted", cluster_id, self.is_ch)
            )

    def dissolve(self, now: float) -> None:
        """Forget pairwise cluster-ship and restart as a lone head."""
        for entry in self.table.values():
            entry.cluster_flag = ClusterFlag.CANDIDATE
        self.recompute(now)


# -- maintenance decision helpers (pure) ---------------------------------


def pick_replacement_head(
    leaving_pl: int, replies: Iterable[tuple[int, int]]
) -> int | None:
    """Departing head picks the member closest to its own position.

    replies are (node_id, physical_location) pairs; ties go to the lower
    node id; no replies means the cluster dissolves (None).
    """
    best = None
    for node_id, pl in replies:
        key = (abs(pl - leaving_pl), node_id)
        if best is None or key < best:
            best = key
    return None if best is None else best[1]


def pick_join_target(
    self_loco: LocoAddress,
    replies: Iterable[tuple[int, LocoAddress, int]],
    mad_m: float,
) -> tuple[int, int] | None:
    """Joining node picks the cluster of the closest eligible replier.

    replies are (sender_id, sender_loco, sender_cluster_id); eligible means
    zero road/lane distance and a position gap within MAD. Returns
    (cluster_id, sender_id) or None when nothing is eligible.
    """
    best = None
    for sender_id, loco, cluster_id in replies:
        hd, pl_delta = mobility_distance(self_loco, loco)
        if hd != 0 or pl_delta > mad_m:
            continue
        key = (pl_delta, sender_id)
        if best is None or key < best[0]:
            best = (key, cluster_id, sender_id)
    return None if best is None else (best[1], best[2])
