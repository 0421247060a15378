"""Legitimate client load (DNSperf-like) and flood traffic (hping3-like).

Both generators emit exactly floor(qps * duration) arrivals inside
[start, start + duration). Even spacing is the default; ``arrivals="poisson"``
places the same number of arrivals uniformly at random instead (a Poisson
process conditioned on its count).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .controller import exact
from .errors import ValidationError
from .sim import Stream, seconds_to_us

ARRIVAL_MODES = ("even", "poisson")


def event_count(qps, duration_s) -> int:
    return math.floor(exact(qps) * exact(duration_s))


@dataclass
class ClientWorkload:
    qps: float
    clients: int = 125
    duration_s: float = 20.0
    request_size: int = 28
    response_size: int = 70
    start_s: float = 0.0
    arrivals: str = "even"

    def __post_init__(self):
        _check_positive("client.qps", self.qps)
        _check_positive("client.duration_s", self.duration_s)
        if int(self.clients) != self.clients or self.clients < 1:
            raise ValidationError("client.clients", "must be a positive integer")
        _check_start("client.start_s", self.start_s)
        _check_size("client.request_size", self.request_size)
        _check_size("client.response_size", self.response_size)
        _check_mode("client.arrivals", self.arrivals)

    @property
    def count(self) -> int:
        return event_count(self.qps, self.duration_s)


@dataclass
class FloodWorkload:
    qps: float
    start_s: float
    duration_s: float
    payload: int = 120
    src_ip_mode: str = "random_per_packet"
    arrivals: str = "even"

    def __post_init__(self):
        if self.qps < 0:
            raise ValidationError("flood.qps", "must be non-negative")
        _check_positive("flood.duration_s", self.duration_s)
        _check_start("flood.start_s", self.start_s)
        _check_size("flood.payload", self.payload)
        if self.src_ip_mode != "random_per_packet":
            raise ValidationError("flood.src_ip_mode", "only random_per_packet is supported")
        _check_mode("flood.arrivals", self.arrivals)

    @property
    def count(self) -> int:
        return event_count(self.qps, self.duration_s)


def _check_positive(name, v):
    if not v > 0:
        raise ValidationError(name, "must be positive")


def _check_start(name, v):
    if v < 0:
        raise ValidationError(name, "must be non-negative")


def _check_size(name, v):
    if int(v) != v or v <= 0:
        raise ValidationError(name, "must be a positive integer")


def _check_mode(name, v):
    if v not in ARRIVAL_MODES:
        raise ValidationError(name, f"must be one of {ARRIVAL_MODES}")


@dataclass
class ClientSchedule:
    times: list          # arrival instants, sorted
    client_of: list      # client index of each arrival; arrival index is the query id
    src_ips: list        # one fixed address per client


@dataclass
class FloodSchedule:
    times: list


def client_schedule(w: ClientWorkload, stream: Stream) -> ClientSchedule:
    """Per-client evenly spaced requests, each client with its own phase."""
    n = w.count
    c = int(w.clients)
    start = seconds_to_us(w.start_s)
    span = seconds_to_us(w.duration_s)
    gen = stream.generator
    ips = gen.integers(0, 1 << 32, c, dtype=np.uint64).tolist()
    if n == 0:
        return ClientSchedule([], [], ips)
    if w.arrivals == "poisson":
        t = np.sort(np.floor(gen.random(n) * span).astype(np.int64))
        who = gen.integers(0, c, n)
        return ClientSchedule((t + start).tolist(), who.tolist(), ips)
    per = np.full(c, n // c, dtype=np.int64)
    per[: n % c] += 1
    per = per[per > 0]
    phase_u = gen.random(len(per))
    who = np.repeat(np.arange(len(per)), per)
    j = np.arange(n) - np.repeat(np.cumsum(per) - per, per)
    period = span / per
    t = np.floor(phase_u[who] * period[who] + j * period[who]).astype(np.int64)
    t = np.minimum(t, span - 1)
    order = np.lexsort((who, t))
    return ClientSchedule((t[order] + start).tolist(), who[order].tolist(), ips)


def flood_schedule(w: FloodWorkload) -> FloodSchedule:
    """Evenly spaced flood arrivals; exact integer placement, no RNG involved."""
    n = w.count
    if n == 0:
        return FloodSchedule([])
    start = seconds_to_us(w.start_s)
    span = seconds_to_us(w.duration_s)
    t = start + (np.arange(n, dtype=np.int64) * span) // n
    return FloodSchedule(t.tolist())


def poisson_flood_schedule(w: FloodWorkload, stream: Stream) -> FloodSchedule:
    n = w.count
    start = seconds_to_us(w.start_s)
    span = seconds_to_us(w.duration_s)
    t = np.sort(np.floor(stream.generator.random(n) * span).astype(np.int64))
    return FloodSchedule((t + start).tolist())


def schedule_flood(w: FloodWorkload, stream: Stream) -> FloodSchedule:
    if w.arrivals == "poisson":
        return poisson_flood_schedule(w, stream)
    return flood_schedule(w)
