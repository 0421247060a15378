"""Capacity-limited DNS resolvers run as VNFs, plus master/slave zone files.

A server is a single FIFO queue with deterministic service time
``1/service_rate``. A client query's latency is ``base_latency`` plus its
time waiting behind earlier queries, so an idle server answers in exactly
``base_latency``. Flood queries occupy the queue like any other query but
never produce client outcomes.

Completions leave the server in queue order, so the pending FIFO is already
the time-ordered list of QueryServiced instants; it is settled whenever the
clock passes them instead of through the global event heap.
"""
from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass
from typing import Callable

from .dataplane import DNS_PORT, Packet, PacketKind, Protocol
from .errors import AlreadyOff, AlreadyRunning, ReadOnlyZone, SlaveUnreachable

RECORDS_PER_MESSAGE = 20
_REQUEST = PacketKind.DNS_REQUEST


class ServerRole(enum.Enum):
    DEFAULT = "default"
    BACKUP = "backup"


class Lifecycle(enum.Enum):
    OFF = "Off"
    BOOTING = "Booting"
    OPERATIONAL = "Operational"


@dataclass(frozen=True)
class ServerState:
    phase: Lifecycle
    until: int | None = None


class DropReason(enum.Enum):
    OVERLOAD = "Overload"
    NOT_OPERATIONAL = "NotOperational"
    UNANSWERED = "Unanswered"
    UNROUTED = "Unrouted"


@dataclass(frozen=True)
class QueryOutcome:
    qid: int
    server_id: str | None
    latency_us: float | None = None
    reason: DropReason | None = None

    @property
    def completed(self) -> bool:
        return self.reason is None


class ZoneFile:
    def __init__(self, origin: str, records: dict[str, str] | None = None, serial: int = 1, writable: bool = True):
        self.origin = origin
        self.records = dict(records or {})
        self.serial = serial
        self.writable = writable
        self.listeners: list[Callable[["ZoneFile"], None]] = []

    def lookup(self, name: str) -> str | None:
        return self.records.get(name)

    def set_record(self, name: str, address: str) -> None:
        self._check_writable()
        self.records[name] = address
        self._bump()

    def delete_record(self, name: str) -> None:
        self._check_writable()
        del self.records[name]
        self._bump()

    def replica(self) -> "ZoneFile":
        return ZoneFile(self.origin, self.records, self.serial, writable=False)

    def _check_writable(self):
        if not self.writable:
            raise ReadOnlyZone(f"zone {self.origin} is a read-only slave copy")

    def _bump(self):
        self.serial += 1
        for cb in list(self.listeners):
            cb(self)


_OPERATIONAL = Lifecycle.OPERATIONAL


class DnsServer:
    def __init__(
        self,
        server_id: str,
        role: ServerRole,
        service_rate: float,
        queue_capacity: int,
        base_latency_us: int,
        zone: ZoneFile | None = None,
        ip: int = 0,
    ):
        if service_rate <= 0:
            raise ValueError("service_rate must be positive")
        self.server_id = server_id
        self.role = ServerRole(role)
        self.service_rate = service_rate
        self.queue_capacity = int(queue_capacity)
        self.base_latency_us = base_latency_us
        self.zone = zone
        self.ip = ip
        self.phase = Lifecycle.OPERATIONAL if self.role is ServerRole.DEFAULT else Lifecycle.OFF
        self.boot_until: int | None = None
        # QueryServiced sink: (query, completed_at_us, latency_us) -> None
        self.on_complete: Callable[[Packet, float, float], None] | None = None
        # client drop sink: (query, reason, now) -> None
        self.on_drop: Callable[[Packet, DropReason, int], None] | None = None
        self.service_us = 1_000_000 / service_rate
        self._departures: deque[float] = deque()
        self._pending: deque = deque()
        self.client_offered = 0
        self.client_completed = 0
        self.client_dropped = 0
        self.flood_offered = 0
        self.flood_served = 0
        self.flood_dropped = 0

    @property
    def state(self) -> ServerState:
        return ServerState(self.phase, self.boot_until if self.phase is Lifecycle.BOOTING else None)

    @property
    def operational(self) -> bool:
        return self.phase is Lifecycle.OPERATIONAL

    def queue_length(self, now: int) -> int:
        dq = self._departures
        while dq and dq[0] <= now:
            dq.popleft()
        return len(dq)

    def busy(self, now: int) -> bool:
        return self.queue_length(now) > 0

    # -- lifecycle --------------------------------------------------------

    def start(self, now: int, boot_latency_us: int) -> int:
        """Off -> Booting; returns the BootComplete instant."""
        if self.phase is not Lifecycle.OFF:
            raise AlreadyRunning(f"{self.server_id} is {self.phase.value}")
        self.phase = Lifecycle.BOOTING
        self.boot_until = now + boot_latency_us
        return self.boot_until

    def boot_complete(self, now: int) -> None:
        if self.phase is Lifecycle.BOOTING:
            self.phase = Lifecycle.OPERATIONAL
            self.boot_until = None

    def shutdown(self, now: int) -> list[QueryOutcome]:
        """Go Off; queries still waiting for service are dropped."""
        if self.phase is Lifecycle.OFF:
            raise AlreadyOff(f"{self.server_id} is already off")
        self.settle(now)
        drained = []
        while self._pending:
            _, q, _ = self._pending.popleft()
            drained.append(QueryOutcome(q.qid, self.server_id, reason=DropReason.NOT_OPERATIONAL))
            self._drop_client(q, DropReason.NOT_OPERATIONAL, now)
        self._departures.clear()
        self.phase = Lifecycle.OFF
        self.boot_until = None
        return drained

    # -- queries ----------------------------------------------------------

    def handle_query(self, q: Packet, now: int):
        """Admit ``q`` at ``now``.

        Returns the QueryServiced instant (float microseconds) when the query
        is queued, or the :class:`DropReason` when it is refused.
        """
        if q.kind is not _REQUEST:
            if self.handle_flood(now):
                return self._departures[-1] - self.service_us + self.base_latency_us
            return DropReason.OVERLOAD if self.phase is _OPERATIONAL else DropReason.NOT_OPERATIONAL
        self.client_offered += 1
        if self.phase is not _OPERATIONAL:
            self._drop_client(q, DropReason.NOT_OPERATIONAL, now)
            return DropReason.NOT_OPERATIONAL
        pend = self._pending
        if pend and pend[0][0] <= now:
            self.settle(now)
        dq = self._departures
        while dq and dq[0] <= now:
            dq.popleft()
        if len(dq) >= self.queue_capacity:
            self._drop_client(q, DropReason.OVERLOAD, now)
            return DropReason.OVERLOAD
        start = dq[-1] if dq else now
        dq.append(start + self.service_us)
        latency = self.base_latency_us + (start - now)
        done = now + latency
        pend.append((done, q, latency))
        return done

    def handle_flood(self, now: int) -> bool:
        """Attack-traffic fast path of :meth:`handle_query`; True if queued."""
        self.flood_offered += 1
        if self.phase is not _OPERATIONAL:
            self.flood_dropped += 1
            return False
        pend = self._pending
        if pend and pend[0][0] <= now:
            self.settle(now)
        dq = self._departures
        while dq and dq[0] <= now:
            dq.popleft()
        n = len(dq)
        if n >= self.queue_capacity:
            self.flood_dropped += 1
            return False
        dq.append((dq[-1] if n else now) + self.service_us)
        self.flood_served += 1
        return True

    def settle(self, now: int) -> int:
        """Emit every client completion due by ``now``."""
        pend = self._pending
        n = 0
        cb = self.on_complete
        while pend and pend[0][0] <= now:
            done, q, latency = pend.popleft()
            self.client_completed += 1
            n += 1
            if cb is not None:
                cb(q, done, latency)
        return n

    def abandon(self, now: int) -> int:
        """Scenario end: queries not answered by ``now`` are lost."""
        self.settle(now)
        n = 0
        while self._pending:
            _, q, _ = self._pending.popleft()
            self._drop_client(q, DropReason.UNANSWERED, now)
            n += 1
        return n

    def resolve(self, name: str) -> str | None:
        if self.phase is not Lifecycle.OPERATIONAL or self.zone is None:
            return None
        return self.zone.lookup(name)

    def _drop_client(self, q: Packet, reason: DropReason, now: int) -> None:
        self.client_dropped += 1
        if self.on_drop is not None:
            self.on_drop(q, reason, now)


def zone_transfer(master: DnsServer, slave: DnsServer, now: int, send: Callable[[Packet], object] | None = None) -> list[Packet]:
    """Master -> slave zone sync over TCP/53 (normal traffic).

    NOTIFY and its acknowledgement always go out; zone data follows only when
    the slave's serial is behind. Returns the packets emitted.
    """
    if slave.phase is not Lifecycle.OPERATIONAL:
        raise SlaveUnreachable(f"{slave.server_id} is {slave.phase.value}")
    if master.zone is None:
        raise ValueError(f"{master.server_id} has no zone to transfer")

    def pkt(src: DnsServer, dst: DnsServer, size: int) -> Packet:
        return Packet(now, src.ip, src.server_id, dst.server_id, Protocol.TCP, DNS_PORT, size, PacketKind.ZONE_TRANSFER)

    packets = [pkt(master, slave, 64), pkt(slave, master, 64)]
    behind = slave.zone is None or slave.zone.serial < master.zone.serial or slave.zone.origin != master.zone.origin
    if behind:
        n_msgs = max(1, math.ceil(len(master.zone.records) / RECORDS_PER_MESSAGE))
        for i in range(n_msgs):
            chunk = min(RECORDS_PER_MESSAGE, len(master.zone.records) - i * RECORDS_PER_MESSAGE)
            packets.append(pkt(master, slave, 64 + 32 * max(chunk, 0)))
        slave.zone = master.zone.replica()
    if send is not None:
        for p in packets:
            send(p)
    return packets
