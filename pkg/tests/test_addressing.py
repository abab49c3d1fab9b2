import pytest
from hypothesis import given, strategies as st

from vanetsim.addressing import (
    AddressFormatError,
    AddressRangeError,
    ComparisonError,
    LocoAddress,
    encode_loco,
    hamming_distance,
    mobility_distance,
    update_loco,
)


def brute_hamming(a: str, b: str) -> int:
    """Independent per-bit comparison loop used as the test oracle."""
    assert len(a) == len(b)
    return sum(1 for x, y in zip(a, b) if x != y)


bits = st.integers(min_value=1, max_value=64).flatmap(
    lambda w: st.tuples(
        st.text(alphabet="01", min_size=w, max_size=w),
        st.text(alphabet="01", min_size=w, max_size=w),
    )
)


class TestEncode:
    def test_zero_position(self):
        addr = encode_loco("00000101", 0, 0.0)
        assert addr == LocoAddress("00000101", 0, 0)

    def test_floor_quantization(self):
        addr = encode_loco("00000101", 1, 120.7)
        assert addr.physical_location == 120
        assert addr.lane_direction == 1

    def test_width_mismatch_rejected(self):
        with pytest.raises(AddressFormatError):
            encode_loco("101", 0, 10.0, road_id_width=8)

    def test_position_beyond_road_rejected(self):
        with pytest.raises(AddressRangeError):
            encode_loco("00000101", 0, 1200.0, road_length_m=1000.0)

    def test_negative_position_rejected(self):
        with pytest.raises(AddressRangeError):
            encode_loco("00000101", 0, -1.0)

    def test_bad_lane_rejected(self):
        with pytest.raises(AddressFormatError):
            encode_loco("00000101", 2, 5.0)


class TestUpdate:
    def test_position_only(self):
        cur = encode_loco("00000101", 0, 10.0)
        new = update_loco(cur, "00000101", 0, 20.0)
        assert new.physical_location == 20
        assert new.road_id == cur.road_id
        assert new.lane_direction == cur.lane_direction

    def test_road_change(self):
        cur = encode_loco("00000101", 0, 10.0)
        new = update_loco(cur, "00000110", 1, 33.9)
        assert new == LocoAddress("00000110", 1, 33)

    def test_invalid_road_leaves_current_untouched(self):
        cur = encode_loco("00000101", 0, 10.0)
        with pytest.raises(AddressFormatError):
            update_loco(cur, "011", 0, 20.0)
        assert cur == LocoAddress("00000101", 0, 10)


class TestHamming:
    def test_identity(self):
        assert hamming_distance("1010", "1010") == 0

    def test_full_complement(self):
        assert hamming_distance("1010", "0101") == 4

    def test_two_flipped_bits(self):
        # XOR-then-popcount by hand: 110100 ^ 100110 = 010010
        assert hamming_distance("110100", "100110") == 2

    def test_length_mismatch(self):
        with pytest.raises(ComparisonError):
            hamming_distance("1010", "10100")

    def test_non_binary_rejected(self):
        with pytest.raises(AddressFormatError):
            hamming_distance("10a0", "1010")

    @given(bits)
    def test_matches_bruteforce_oracle(self, pair):
        a, b = pair
        assert hamming_distance(a, b) == brute_hamming(a, b)

    @given(bits)
    def test_symmetric_and_zero_iff_equal(self, pair):
        a, b = pair
        assert hamming_distance(a, b) == hamming_distance(b, a)
        assert (hamming_distance(a, b) == 0) == (a == b)

    @given(
        st.integers(min_value=1, max_value=32).flatmap(
            lambda w: st.tuples(
                *[st.text(alphabet="01", min_size=w, max_size=w)] * 3
            )
        )
    )
    def test_triangle_inequality(self, triple):
        a, b, c = triple
        assert hamming_distance(a, c) <= hamming_distance(a, b) + hamming_distance(b, c)


locos = st.builds(
    LocoAddress,
    road_id=st.text(alphabet="01", min_size=8, max_size=8),
    lane_direction=st.integers(0, 1),
    physical_location=st.integers(0, 2000),
)


class TestMobilityDistance:
    def test_identical(self):
        a = encode_loco("00000101", 0, 120.0)
        assert mobility_distance(a, a) == (0, 0)

    def test_same_road_lane_position_gap(self):
        a = encode_loco("00000101", 0, 120.0)
        b = encode_loco("00000101", 0, 180.0)
        assert mobility_distance(a, b) == (0, 60)

    def test_opposite_lane_is_one_flip(self):
        a = encode_loco("00000101", 0, 120.0)
        b = encode_loco("00000101", 1, 120.0)
        hd, _ = mobility_distance(a, b)
        assert hd == 1

    @given(locos, locos)
    def test_zero_iff_same_road_and_lane(self, a, b):
        hd, _ = mobility_distance(a, b)
        same = a.road_id == b.road_id and a.lane_direction == b.lane_direction
        assert (hd == 0) == same

    @given(locos, locos)
    def test_pl_delta_is_absolute_gap(self, a, b):
        _, delta = mobility_distance(a, b)
        assert delta == abs(a.physical_location - b.physical_location)


@given(
    st.text(alphabet="01", min_size=8, max_size=8),
    st.integers(0, 1),
    st.floats(min_value=0.0, max_value=1000.0, allow_nan=False),
)
def test_encode_never_exceeds_road_length(road_id, lane, pos):
    addr = encode_loco(road_id, lane, pos, road_length_m=1000.0)
    assert 0 <= addr.physical_location <= 1000
