"""Mobility-derived node addresses and the bit-distance primitive built on them.

A node's address packs three things: the road it travels (a fixed-width
binary string), its lane direction (one bit) and its position along the
road quantized to whole meters. Road and lane are compared bitwise with a
Hamming distance; the position stays numeric and is compared separately
against a physical threshold by the clustering layer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

DEFAULT_ROAD_ID_BITS = 8


class AddressFormatError(ValueError):
    """A road id is not a binary string of the expected width."""


class AddressRangeError(ValueError):
    """A position lies outside the extent of the road it refers to."""


class ComparisonError(ValueError):
    """Two bit strings of different widths were compared."""


def _require_bits(bits: str, width: int | None = None) -> None:
    if not bits or any(c not in "01" for c in bits):
        raise AddressFormatError(f"not a binary string: {bits!r}")
    if width is not None and len(bits) != width:
        raise AddressFormatError(
            f"road id {bits!r} is {len(bits)} bits wide, expected {width}"
        )


@dataclass(frozen=True, slots=True)
class LocoAddress:
    """Road id bits, lane direction bit and quantized position in meters.

    lane_direction 0 moves toward increasing coordinates, 1 toward
    decreasing ones. physical_location is floor-quantized to 1 m.
    """

    road_id: str
    lane_direction: int
    physical_location: int

    def __post_init__(self):
        _require_bits(self.road_id)
        if self.lane_direction not in (0, 1):
            raise AddressFormatError(
                f"lane direction must be 0 or 1, got {self.lane_direction!r}"
            )
        if self.physical_location < 0:
            raise AddressRangeError(
                f"negative position: {self.physical_location}"
            )


def encode_loco(
    road_id: str,
    lane_direction: int,
    position_m: float,
    *,
    road_id_width: int = DEFAULT_ROAD_ID_BITS,
    road_length_m: float | None = None,
) -> LocoAddress:
    """Build an address from raw mobility inputs.

    position_m is floor-quantized to whole meters. When road_length_m is
    given, positions beyond it are rejected.
    """
    _require_bits(road_id, road_id_width)
    if lane_direction not in (0, 1):
        raise AddressFormatError(
            f"lane direction must be 0 or 1, got {lane_direction!r}"
        )
    if position_m < 0:
        raise AddressRangeError(f"negative position: {position_m}")
    if road_length_m is not None and position_m > road_length_m:
        raise AddressRangeError(
            f"position {position_m} m beyond road length {road_length_m} m"
        )
    return LocoAddress(road_id, lane_direction, int(math.floor(position_m)))


def update_loco(
    current: LocoAddress,
    new_road_id: str,
    new_lane_direction: int,
    new_position_m: float,
    *,
    road_length_m: float | None = None,
) -> LocoAddress:
    """Re-encode an address after the vehicle moved or changed road/lane.

    Returns a fresh address; on any validation error the current address
    is left untouched (addresses are immutable, so no partial update can
    ever be observed).
    """
    return encode_loco(
        new_road_id,
        new_lane_direction,
        new_position_m,
        road_id_width=len(current.road_id),
        road_length_m=road_length_m,
    )


def hamming_distance(a: str, b: str) -> int:
    """Count differing bit positions between two equal-width bit strings."""
    _require_bits(a)
    _require_bits(b)
    if len(a) != len(b):
        raise ComparisonError(
            f"cannot compare streams of different width: {len(a)} vs {len(b)}"
        )
    return (int(a, 2) ^ int(b, 2)).bit_count()


def mobility_distance(a: LocoAddress, b: LocoAddress) -> tuple[int, int]:
    """Hamming distance over road‖lane plus the absolute position gap.

    The bitwise part covers the (width+1)-bit concatenation of road id and
    lane direction; the position gap is returned separately in meters.
    Note the gap is only physically meaningful when the bitwise distance
    is zero (same road, same lane).
    """
    hd = hamming_distance(
        a.road_id + str(a.lane_direction),
        b.road_id + str(b.lane_direction),
    )
    return hd, abs(a.physical_location - b.physical_location)
