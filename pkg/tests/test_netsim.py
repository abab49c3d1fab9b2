import numpy as np
import pytest

from vanetsim.netsim import (
    BROADCAST,
    DeliveryLog,
    EventKind,
    EventQueue,
    Message,
    MessageKind,
    PositionTable,
    Radio,
    SchedulingError,
)


def make_radio(xy, *, p_loss=0.0, seed=0, log=None, range_m=100.0):
    q = EventQueue()
    pos = PositionTable(len(xy))
    for i, (x, y) in enumerate(xy):
        pos.x[i] = x
        pos.y[i] = y
    radio = Radio(
        q, pos, range_m=range_m, p_loss=p_loss,
        rng_loss=np.random.default_rng(seed), log=log,
    )
    return q, radio


def msg(radio, kind=MessageKind.HELLO, src=0, dst=BROADCAST, size=32, t=0.0):
    return Message(radio.next_msg_id(), kind, src, dst, None, size, t)


class TestEventQueue:
    def test_empty_run_advances_clock(self):
        q = EventQueue()
        assert q.run_until(10.0) == 0
        assert q.now == 10.0

    def test_equal_time_events_in_insertion_order(self):
        q = EventQueue()
        seen = []
        q.register(EventKind.TIMER_FIRE, lambda e: seen.append(e.data))
        q.schedule(1.0, EventKind.TIMER_FIRE, "first")
        q.schedule(1.0, EventKind.TIMER_FIRE, "second")
        q.schedule(0.5, EventKind.TIMER_FIRE, "early")
        assert q.run_until(2.0) == 3
        assert seen == ["early", "first", "second"]

    def test_past_schedule_is_fatal(self):
        q = EventQueue()
        q.schedule(1.0, EventKind.TIMER_FIRE)
        q.run_until(5.0)
        with pytest.raises(SchedulingError):
            q.schedule(4.0, EventKind.TIMER_FIRE)

    def test_clock_never_regresses(self):
        q = EventQueue()
        q.run_until(5.0)
        with pytest.raises(SchedulingError):
            q.run_until(1.0)

    def test_handler_can_schedule_followups(self):
        q = EventQueue()
        fired = []

        def handler(event):
            fired.append(event.time)
            if event.time < 3.0:
                q.schedule(event.time + 1.0, EventKind.TIMER_FIRE)

        q.register(EventKind.TIMER_FIRE, handler)
        q.schedule(1.0, EventKind.TIMER_FIRE)
        q.run_until(10.0)
        assert fired == [1.0, 2.0, 3.0]


class TestBroadcast:
    def test_in_range_delivered(self):
        q, radio = make_radio([(0, 0), (99, 0)])
        arrivals = []
        q.register(EventKind.MESSAGE_ARRIVAL, lambda e: arrivals.append(e.data))
        assert radio.broadcast(0, msg(radio), 0.0) == 1
        q.run_until(1.0)
        assert len(arrivals) == 1
        assert arrivals[0][0] == 1

    def test_out_of_range_not_delivered(self):
        q, radio = make_radio([(0, 0), (101, 0)])
        assert radio.broadcast(0, msg(radio), 0.0) == 0
        assert radio.counters.out_of_range == 1

    def test_total_loss_counts_neighbors(self):
        q, radio = make_radio([(0, 0), (10, 0), (20, 0), (500, 0)], p_loss=1.0)
        assert radio.broadcast(0, msg(radio), 0.0) == 0
        assert radio.counters.lost == 2  # the two in-range neighbors
        assert radio.counters.out_of_range == 1

    def test_conservation_identity(self):
        q, radio = make_radio(
            [(0, 0), (10, 0), (50, 0), (99, 0), (200, 0)], p_loss=0.3, seed=5
        )
        for i in range(5):
            radio.broadcast(i % 5, msg(radio, src=i % 5), 0.0)
        c = radio.counters
        assert c.conserved()
        assert c.sent == 5 * 4

    def test_arrival_delay_is_transmission_plus_propagation(self):
        q, radio = make_radio([(0, 0), (60, 0)])
        times = []
        q.register(EventKind.MESSAGE_ARRIVAL, lambda e: times.append(e.time))
        radio.broadcast(0, msg(radio, size=32), 1.0)
        q.run_until(2.0)
        expected = 1.0 + 32 * 8 / 6e6 + 60 / 3e8
        assert times[0] == pytest.approx(expected)


class TestUnicast:
    def test_in_range_lossless(self):
        q, radio = make_radio([(0, 0), (50, 0)])
        assert radio.unicast(0, 1, msg(radio, dst=1), 0.0) is True

    def test_out_of_range(self):
        q, radio = make_radio([(0, 0), (150, 0)])
        assert radio.unicast(0, 1, msg(radio, dst=1), 0.0) is False
        assert radio.counters.out_of_range == 1

    def test_seeded_loss_reproducible(self):
        outcomes = []
        for _ in range(2):
            q, radio = make_radio([(0, 0), (50, 0)], p_loss=0.5, seed=11)
            outcomes.append(
                [radio.unicast(0, 1, msg(radio, dst=1), 0.0) for _ in range(20)]
            )
        assert outcomes[0] == outcomes[1]
        assert True in outcomes[0] and False in outcomes[0]


class TestDeliveryLog:
    def test_outcomes_logged_and_written(self, tmp_path):
        log = DeliveryLog()
        q, radio = make_radio([(0, 0), (50, 0), (500, 0)], log=log)
        radio.broadcast(0, msg(radio), 0.0)
        assert {r[-1] for r in log.rows} == {"delivered", "out_of_range"}
        out = tmp_path / "deliveries.csv"
        log.write_csv(out, seed=42)
        text = out.read_text().splitlines()
        assert text[0] == "# seed=42"
        assert text[1].split(",") == list(DeliveryLog.COLUMNS)
        assert len(text) == 2 + len(log.rows)

    def test_log_matches_counters(self):
        log = DeliveryLog()
        q, radio = make_radio(
            [(0, 0), (30, 0), (80, 0), (300, 0)], p_loss=0.4, seed=3, log=log
        )
        for _ in range(10):
            radio.broadcast(0, msg(radio), 0.0)
        by_outcome = {}
        for row in log.rows:
            by_outcome[row[-1]] = by_outcome.get(row[-1], 0) + 1
        c = radio.counters
        assert by_outcome.get("delivered", 0) == c.delivered
        assert by_outcome.get("lost", 0) == c.lost
        assert by_outcome.get("out_of_range", 0) == c.out_of_range


def test_identical_seed_identical_trace():
    traces = []
    for _ in range(2):
        q, radio = make_radio(
            [(0, 0), (40, 0), (90, 0), (130, 0)], p_loss=0.2, seed=9
        )
        arrivals = []
        q.register(
            EventKind.MESSAGE_ARRIVAL,
            lambda e: arrivals.append((e.time, e.data[0], e.data[1].msg_id)),
        )
        for t in range(5):
            q.run_until(float(t))
            radio.broadcast(t % 4, msg(radio, src=t % 4, t=float(t)), float(t))
        q.run_until(10.0)
        traces.append(arrivals)
    assert traces[0] == traces[1]
