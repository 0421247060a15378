import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import naive_order
from mtdns.errors import SchedulingInPast
from mtdns.sim import ArrivalStream, Engine, EventKind, Rng, Stream, seconds_to_us


def test_simultaneous_events_run_in_insertion_order():
    eng = Engine()
    seen = []
    for name in "abc":
        eng.at(100, EventKind.STATS_POLL, lambda t, n=name: seen.append(n), name)
    eng.at(50, EventKind.FLOW_MOD, lambda t: seen.append("early"), "early")
    eng.run_until(1000)
    assert seen == ["early", "a", "b", "c"]
    assert eng.log == ["50 3 FlowMod early", "100 0 StatsPoll a", "100 1 StatsPoll b", "100 2 StatsPoll c"]


def test_cancelled_event_is_skipped_and_logged():
    eng = Engine()
    fired = []
    ev = eng.at(200, EventKind.BOOT_COMPLETE, lambda t: fired.append(t), "backup")
    eng.at(100, EventKind.FLOW_MOD, lambda t: eng.cancel(ev), "stop")
    eng.run_until(1000)
    assert fired == []
    assert "100 - cancel BootComplete backup" in eng.log
    assert eng.cancelled == 1
    assert eng.processed == 1


def test_scheduling_in_the_past_is_rejected():
    eng = Engine()
    eng.run_until(500)
    with pytest.raises(SchedulingInPast):
        eng.at(499, EventKind.STATS_POLL, lambda t: None)
    with pytest.raises(SchedulingInPast):
        eng.add_arrivals(ArrivalStream([10], lambda at, i: None))
    with pytest.raises(SchedulingInPast):
        eng.run_until(100)


def test_run_until_advances_clock_and_leaves_later_events():
    eng = Engine()
    eng.at(10, EventKind.STATS_POLL, lambda t: None)
    eng.at(2000, EventKind.STATS_POLL, lambda t: None)
    assert eng.run_until(1000) == 1
    assert eng.now == 1000
    assert eng.pending == 1
    assert eng.peek() == 2000


def test_after_is_relative_to_clock():
    eng = Engine()
    got = []
    eng.at(100, EventKind.FLOW_MOD, lambda t: eng.after(5, EventKind.PROBE_PING, got.append))
    eng.run_until(1000)
    assert got == [105]


def test_seconds_to_us():
    assert seconds_to_us(7.75) == 7_750_000
    assert seconds_to_us("0.1") == 100_000


def _run_batched(streams, events):
    eng = Engine(trace_packets=True)
    out = []
    for label, times in streams:
        eng.add_arrivals(ArrivalStream(times, lambda at, i, lab=label: out.append((at, f"{lab}#{i}")), label))
    for at, label in events:
        eng.at(at, EventKind.STATS_POLL, lambda t, lab=label: out.append((t, lab)), label)
    eng.run_until(10**9)
    return out, eng


sorted_times = st.lists(st.integers(0, 200), max_size=25).map(sorted)


@settings(max_examples=300, deadline=None)
@given(
    streams=st.lists(sorted_times, max_size=4),
    events=st.lists(st.tuples(st.integers(0, 200), st.sampled_from(["p", "q"])), max_size=10),
)
def test_batched_arrivals_match_one_event_per_arrival(streams, events):
    named = [(f"s{k}", t) for k, t in enumerate(streams)]
    out, eng = _run_batched(named, events)
    assert out == naive_order(named, events)
    assert eng.processed == sum(len(t) for t in streams) + len(events)


@settings(max_examples=100, deadline=None)
@given(times=st.lists(st.integers(0, 1000), min_size=1, max_size=40).map(sorted), cut=st.integers(0, 1000))
def test_run_until_can_be_split(times, cut):
    whole, _ = _run_batched([("s", times)], [(500, "p")])
    eng = Engine()
    out = []
    eng.add_arrivals(ArrivalStream(times, lambda at, i: out.append((at, f"s#{i}")), "s"))
    eng.at(500, EventKind.STATS_POLL, lambda t: out.append((t, "p")), "p")
    eng.run_until(cut)
    eng.run_until(10**9)
    assert out == whole


def test_packet_trace_is_deterministic():
    def trace():
        eng = Engine(seed=3, trace_packets=True)
        u = eng.rng.stream("x").uniforms
        times = sorted(int(next(u) * 10_000) for _ in range(200))
        eng.add_arrivals(ArrivalStream(times, lambda at, i: None, "client"))
        for k in range(1, 5):
            eng.at(k * 2500, EventKind.STATS_POLL, lambda t: None, "controller")
        eng.run_until(10_000)
        return eng.log

    a, b = trace(), trace()
    assert a == b
    assert sum("PacketArrival" in line for line in a) == 200


def test_streams_are_reproducible_and_independent():
    a1 = [Stream(42, "bucket-select").uniform() for _ in range(1)]
    s1, s2 = Stream(42, "bucket-select"), Stream(42, "bucket-select")
    first = [s1.uniform() for _ in range(100)]
    assert first == [s2.uniform() for _ in range(100)]
    assert first[0] == a1[0]
    other = Stream(42, "workload-client")
    assert [other.uniform() for _ in range(100)] != first
    assert [Stream(43, "bucket-select").uniform() for _ in range(1)] != first[:1]


def test_drawing_from_one_stream_leaves_others_alone():
    r1, r2 = Rng(9), Rng(9)
    for _ in range(5000):
        r1.stream("workload-flood-0").u32()
    assert [r1.stream("bucket-select").uniform() for _ in range(50)] == \
        [r2.stream("bucket-select").uniform() for _ in range(50)]


def test_uniform_range_and_block_boundary():
    s = Stream(1, "x")
    vals = [s.uniform() for _ in range((1 << 14) + 10)]
    assert all(0.0 <= v < 1.0 for v in vals)
    assert len(set(vals)) == len(vals)
