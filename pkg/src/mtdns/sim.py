"""Deterministic discrete-event engine.

Time is an integer count of microseconds since scenario start. Events are
ordered by ``(at, seq)`` where ``seq`` is a global insertion counter, so
simultaneous events run in FIFO order.

Packet arrivals are the bulk of every run, so a workload registers an
:class:`ArrivalStream` instead of millions of individual events. A stream
behaves exactly like a self-rescheduling arrival process: it holds one queue
entry at a time and each arrival takes the next sequence number, but runs of
arrivals that precede every other pending event are dispatched without a heap
round trip.
"""
from __future__ import annotations

import enum
import hashlib
import heapq
import itertools
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import SchedulingInPast

US_PER_S = 1_000_000
US_PER_MS = 1_000

_BLOCK = 1 << 14


def seconds_to_us(s) -> int:
    return int(round(float(s) * US_PER_S))


def us_to_seconds(t: int) -> float:
    return t / US_PER_S


class EventKind(enum.Enum):
    PACKET_ARRIVAL = "PacketArrival"
    STATS_POLL = "StatsPoll"
    FLOW_MOD = "FlowMod"
    BOOT_COMPLETE = "BootComplete"
    PROBE_PING = "ProbePing"
    PROBE_REPLY = "ProbeReply"
    QUERY_SERVICED = "QueryServiced"
    SCENARIO_END = "ScenarioEnd"


@dataclass(eq=False)
class SimEvent:
    at: int
    kind: EventKind
    action: Callable[[int], object] | None = None
    label: str = ""
    seq: int = -1
    cancelled: bool = False

    def cancel(self) -> None:
        self.cancelled = True


class ArrivalStream:
    """A sorted run of packet arrivals fired through ``fire(at, index)``."""

    kind = EventKind.PACKET_ARRIVAL
    cancelled = False

    def __init__(self, times: Sequence[int], fire: Callable[[int, int], object], label: str = "arrival"):
        self.times = list(times)
        self.fire = fire
        self.label = label
        self.index = 0

    def __len__(self) -> int:
        return len(self.times)

    @property
    def exhausted(self) -> bool:
        return self.index >= len(self.times)


class Stream:
    """One named random stream: Philox keyed by (seed, name).

    ``uniforms`` and ``u32s`` are infinite iterators backed by block draws, so
    the sequence a consumer sees does not depend on how it is read.
    """

    def __init__(self, seed: int, name: str):
        self.name = name
        key = int.from_bytes(hashlib.blake2b(name.encode(), digest_size=8).digest(), "little")
        self._ss = np.random.SeedSequence(entropy=seed, spawn_key=(key,))
        self.generator = np.random.Generator(np.random.Philox(self._ss))
        self._uniform_gen = np.random.Generator(np.random.Philox(self._ss.spawn(1)[0]))
        self._u32_gen = np.random.Generator(np.random.Philox(self._ss.spawn(1)[0]))
        self.uniforms = itertools.chain.from_iterable(self._uniform_blocks())
        self.u32s = itertools.chain.from_iterable(self._u32_blocks())

    def _uniform_blocks(self):
        while True:
            yield self._uniform_gen.random(_BLOCK).tolist()

    def _u32_blocks(self):
        while True:
            yield self._u32_gen.integers(0, 1 << 32, _BLOCK, dtype=np.uint64).tolist()

    def uniform(self) -> float:
        return next(self.uniforms)

    def u32(self) -> int:
        return next(self.u32s)


class Rng:
    """Seeded factory of independent named streams."""

    def __init__(self, seed: int):
        self.seed = int(seed) & ((1 << 64) - 1)
        self._streams: dict[str, Stream] = {}

    def stream(self, name: str) -> Stream:
        s = self._streams.get(name)
        if s is None:
            s = self._streams[name] = Stream(self.seed, name)
        return s


class Engine:
    def __init__(self, seed: int = 0, trace_packets: bool = False):
        self.now = 0
        self.rng = Rng(seed)
        self.trace_packets = trace_packets
        self.log: list[str] = []
        self.scheduled = 0
        self.processed = 0
        self.cancelled = 0
        self._heap: list = []
        self._seq = 0

    @property
    def pending(self) -> int:
        return len(self._heap)

    def peek(self) -> int | None:
        return self._heap[0][0] if self._heap else None

    def schedule(self, event: SimEvent) -> SimEvent:
        if event.at < self.now:
            raise SchedulingInPast(f"event at {event.at} us scheduled at clock {self.now} us")
        event.seq = self._seq
        self._seq += 1
        heapq.heappush(self._heap, (event.at, event.seq, event))
        self.scheduled += 1
        return event

    def at(self, t: int, kind: EventKind, action: Callable[[int], object], label: str = "") -> SimEvent:
        return self.schedule(SimEvent(t, kind, action, label))

    def after(self, delay: int, kind: EventKind, action: Callable[[int], object], label: str = "") -> SimEvent:
        return self.at(self.now + delay, kind, action, label)

    def cancel(self, event: SimEvent | None) -> None:
        if event is not None and not event.cancelled and event.seq >= 0:
            event.cancel()
            self.log.append(f"{self.now} - cancel {event.kind.value} {event.label}".rstrip())

    def add_arrivals(self, stream: ArrivalStream) -> ArrivalStream:
        if not stream.times:
            return stream
        first = stream.times[stream.index]
        if first < self.now:
            raise SchedulingInPast(f"arrival at {first} us scheduled at clock {self.now} us")
        seq = self._seq
        self._seq += 1
        heapq.heappush(self._heap, (first, seq, stream))
        self.scheduled += 1
        return stream

    def run_until(self, t_end: int) -> int:
        """Process every event with ``at <= t_end``; return how many ran."""
        if t_end < self.now:
            raise SchedulingInPast(f"run_until({t_end}) behind clock {self.now}")
        heap = self._heap
        log = self.log
        count = 0
        while heap and heap[0][0] <= t_end:
            at, seq, ev = heapq.heappop(heap)
            self.now = at
            if ev.kind is EventKind.PACKET_ARRIVAL:
                count += self._drain(ev, at, seq, t_end)
                continue
            if ev.cancelled:
                self.cancelled += 1
                continue
            self.processed += 1
            count += 1
            log.append(f"{at} {seq} {ev.kind.value} {ev.label}".rstrip())
            if ev.action is not None:
                ev.action(at)
        self.now = t_end
        return count

    def _drain(self, stream: ArrivalStream, at: int, seq: int, t_end: int) -> int:
        heap = self._heap
        times = stream.times
        fire = stream.fire
        n = len(times)
        trace = self.log if self.trace_packets else None
        i = stream.index
        label = stream.label
        count = 0
        while True:
            if trace is not None:
                trace.append(f"{at} {seq} PacketArrival {label}#{i}")
            fire(at, i)
            i += 1
            count += 1
            if i >= n:
                break
            nxt = times[i]
            seq = self._seq
            self._seq += 1
            self.scheduled += 1
            # strictly earlier than every queued event: dispatch in place
            if nxt <= t_end and (not heap or nxt < heap[0][0]):
                at = nxt
                self.now = at
                continue
            heapq.heappush(heap, (nxt, seq, stream))
            break
        stream.index = i
        self.processed += count
        return count
