"""Lifecycle facade between controller decisions and DNS server VNFs."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable

from .dns import DnsServer, Lifecycle, ServerState
from .errors import AlreadyDown, AlreadyRequested
from .sim import Engine, EventKind, SimEvent


class Desired(enum.Enum):
    UP = "Up"
    DOWN = "Down"


@dataclass
class VnfRecord:
    server: DnsServer
    desired: Desired = Desired.DOWN
    started_at: int | None = None
    stopped_at: int | None = None
    ready_at: int | None = None
    boot_event: SimEvent | None = field(default=None, repr=False)
    probe_event: SimEvent | None = field(default=None, repr=False)

    @property
    def server_id(self) -> str:
        return self.server.server_id

    @property
    def actual(self) -> ServerState:
        return self.server.state


class VnfManager:
    """Starts, probes and stops backup servers.

    After a start request the manager pings the server every
    ``probe_interval_us``; the first ping that finds it Operational gets a
    reply one base latency later, at which point the server counts as ready.
    """

    def __init__(
        self,
        engine: Engine,
        servers: dict[str, DnsServer],
        boot_latency_us: int,
        probe_interval_us: int,
        on_boot: Callable[[str, int], None] | None = None,
        on_ready: Callable[[str, int], None] | None = None,
    ):
        self.engine = engine
        self.boot_latency_us = boot_latency_us
        self.probe_interval_us = probe_interval_us
        self.on_boot = on_boot
        self.on_ready = on_ready
        self.records = {sid: VnfRecord(s) for sid, s in servers.items()}
        # (at, server_id, "allocated" | "ready" | "deallocated")
        self.resource_log: list[tuple[int, str, str]] = []

    def is_up(self, server_id: str) -> bool:
        return self.records[server_id].desired is Desired.UP

    def is_ready(self, server_id: str) -> bool:
        rec = self.records[server_id]
        return rec.desired is Desired.UP and rec.ready_at is not None and rec.server.operational

    def request_start(self, server_id: str, now: int) -> None:
        rec = self.records[server_id]
        if rec.desired is Desired.UP:
            raise AlreadyRequested(f"{server_id} start already requested")
        rec.desired = Desired.UP
        rec.started_at = now
        rec.stopped_at = None
        rec.ready_at = None
        until = rec.server.start(now, self.boot_latency_us)
        rec.boot_event = self.engine.at(until, EventKind.BOOT_COMPLETE, lambda at: self._booted(rec, at), server_id)
        self.resource_log.append((now, server_id, "allocated"))
        self._arm_probe(rec, now + self.probe_interval_us)

    def request_stop(self, server_id: str, now: int) -> list:
        rec = self.records[server_id]
        if rec.desired is Desired.DOWN:
            raise AlreadyDown(f"{server_id} is already down")
        rec.desired = Desired.DOWN
        rec.stopped_at = now
        rec.ready_at = None
        self.engine.cancel(rec.boot_event)
        self.engine.cancel(rec.probe_event)
        rec.boot_event = rec.probe_event = None
        drained = rec.server.shutdown(now) if rec.server.phase is not Lifecycle.OFF else []
        self.resource_log.append((now, server_id, "deallocated"))
        return drained

    def still_running(self) -> list[str]:
        return [sid for sid, r in self.records.items() if r.desired is Desired.UP]

    def _booted(self, rec: VnfRecord, at: int) -> None:
        rec.boot_event = None
        rec.server.boot_complete(at)
        if self.on_boot is not None:
            self.on_boot(rec.server_id, at)

    def _arm_probe(self, rec: VnfRecord, at: int) -> None:
        rec.probe_event = self.engine.at(at, EventKind.PROBE_PING, lambda t: self._ping(rec, t), rec.server_id)

    def _ping(self, rec: VnfRecord, at: int) -> None:
        if rec.server.operational:
            rec.probe_event = self.engine.at(
                at + rec.server.base_latency_us, EventKind.PROBE_REPLY, lambda t: self._reply(rec, t), rec.server_id
            )
        else:
            self._arm_probe(rec, at + self.probe_interval_us)

    def _reply(self, rec: VnfRecord, at: int) -> None:
        rec.probe_event = None
        rec.ready_at = at
        self.resource_log.append((at, rec.server_id, "ready"))
        if self.on_ready is not None:
            self.on_ready(rec.server_id, at)
