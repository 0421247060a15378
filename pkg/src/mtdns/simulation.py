"""Builds one scenario run: engine, switch, servers, controller, workloads."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

from .controller import (
    REQUEST_RULE_ID,
    ControlAction,
    MtdController,
    derive_thresholds,
    exact,
    install_base_rules,
)
from .dataplane import DNS_PORT, Packet, PacketKind, Protocol, SelectMode, Switch
from .dns import DnsServer, DropReason, Lifecycle, ServerRole, ZoneFile, zone_transfer
from .errors import MtdnsError
from .metrics import MetricsLog, MitigationWindow, PollRow, SummaryRow
from .scenario import ScenarioConfig
from .sim import US_PER_MS, ArrivalStream, Engine, EventKind, seconds_to_us
from .vnf import VnfManager, VnfRecord
from .workloads import client_schedule, schedule_flood

DEFAULT_ID = "default"
BACKUP_ID = "backup"
DEFAULT_IP = 0x0A000035  # 10.0.0.53
BACKUP_IP = 0x0A000036


@dataclass
class SimResult:
    label: str
    config: ScenarioConfig
    metrics: MetricsLog
    windows: list[MitigationWindow]
    summary: SummaryRow
    timeline: list[tuple[int, str]]
    event_counts: dict
    resource_log: list
    still_running: list[str]
    nonoperational_completions: int
    wall_s: float

    @property
    def rows(self) -> list[PollRow]:
        return self.metrics.rows


class Simulation:
    """One scenario variant, ready to :meth:`run` (or to step via ``engine``)."""

    def __init__(self, cfg: ScenarioConfig, label: str | None = None, keep_outcomes: bool = True,
                 trace_packets: bool = False):
        if cfg.variants:
            raise MtdnsError("expand scenario variants before building a Simulation")
        self.cfg = cfg
        self.label = label or cfg.name
        self.engine = eng = Engine(cfg.seed, trace_packets=trace_packets)
        self.metrics = MetricsLog(keep_outcomes=keep_outcomes)
        self.timeline: list[tuple[int, str]] = []
        self.nonoperational_completions = 0
        self.thresholds = derive_thresholds(exact(cfg.t2_balance_pps), exact(cfg.drop_fraction))
        self.window_us = seconds_to_us(cfg.poll_window_s)
        self.control_latency_us = int(round(cfg.control_latency_ms * US_PER_MS))
        self.keep_warm_us = seconds_to_us(cfg.keep_warm_s)
        self.end_us = seconds_to_us(cfg.sim_duration_s)

        self.switch = Switch(eng.rng.stream("bucket-select").uniforms, SelectMode(cfg.select_mode))
        d, b = cfg.default_server, cfg.backup_server
        zone = ZoneFile(cfg.zone.origin, cfg.zone.records)
        self.default = DnsServer(DEFAULT_ID, ServerRole.DEFAULT, d.service_rate, d.queue_capacity,
                                 d.base_latency_us, zone, DEFAULT_IP)
        self.backup = DnsServer(BACKUP_ID, ServerRole.BACKUP, b.service_rate, b.queue_capacity,
                                b.base_latency_us, None, BACKUP_IP)
        self.servers = {DEFAULT_ID: self.default, BACKUP_ID: self.backup}
        for s in self.servers.values():
            s.on_complete = self._completion_sink(s)
            s.on_drop = self._drop_sink(s)
        zone.listeners.append(self._master_changed)

        install_base_rules(self.switch, DEFAULT_ID)
        self.vnf = VnfManager(eng, {BACKUP_ID: self.backup}, seconds_to_us(cfg.boot_latency_s),
                              int(round(cfg.probe_interval_ms * US_PER_MS)),
                              on_boot=self._backup_booted, on_ready=self._backup_ready)
        self.controller = MtdController(
            self.switch, self.thresholds, self.window_us, DEFAULT_ID, BACKUP_ID,
            backup_ready=lambda: self.vnf.is_ready(BACKUP_ID),
            backup_up=lambda: self.vnf.is_up(BACKUP_ID),
            bucket_weights=cfg.bucket_weights, enabled=cfg.mtdns_enabled,
        )
        self._pending_stop = None
        self._install_workloads()
        k = 1
        while k * self.window_us <= self.end_us:
            eng.at(k * self.window_us, EventKind.STATS_POLL, self._poll, "controller")
            k += 1
        eng.at(self.end_us, EventKind.SCENARIO_END, self._finish, self.label)

    # -- traffic ----------------------------------------------------------

    def _install_workloads(self) -> None:
        cfg, eng, m = self.cfg, self.engine, self.metrics
        process = self.switch.process
        servers = self.servers
        udp, req = Protocol.UDP, PacketKind.DNS_REQUEST
        unrouted = DropReason.UNROUTED
        self.client_schedule = None
        if cfg.client is not None:
            w = cfg.client
            sched = client_schedule(w, eng.rng.stream("workload-client"))
            self.client_schedule = sched
            who, ips = sched.client_of, sched.src_ips
            hosts = [f"client-{c}" for c in range(len(ips))]
            self.client_hosts = hosts
            size = int(w.request_size)

            def fire_client(at, i):
                c = who[i]
                ip, host = ips[c], hosts[c]
                p = Packet(at, ip, host, DEFAULT_ID, udp, DNS_PORT, size, req, i)
                m.offered += 1
                sid = process(udp, DNS_PORT, host, DEFAULT_ID, size, ip).server_id
                if sid is None:
                    m.record_drop(i, None, unrouted)
                else:
                    servers[sid].handle_query(p, at)

            eng.add_arrivals(ArrivalStream(sched.times, fire_client, "client"))

        self.flood_schedules = []
        for n, fw in enumerate(cfg.floods):
            stream = eng.rng.stream(f"workload-flood-{n}")
            sched = schedule_flood(fw, stream)
            self.flood_schedules.append(sched)
            if not sched.times:
                continue
            # flood packets are never retained, so only their header fields exist
            src_ips = stream.u32s

            def fire_flood(at, i, host=f"attacker-{n}", payload=int(fw.payload), src_ips=src_ips):
                sid = process(udp, DNS_PORT, host, DEFAULT_ID, payload, next(src_ips)).server_id
                if sid is not None:
                    servers[sid].handle_flood(at)

            eng.add_arrivals(ArrivalStream(sched.times, fire_flood, f"flood-{n}"))

    def _completion_sink(self, server: DnsServer):
        m = self.metrics
        process = self.switch.process
        sid, ip = server.server_id, server.ip
        udp = Protocol.UDP
        size = int(self.cfg.client.response_size) if self.cfg.client else 70
        operational = Lifecycle.OPERATIONAL

        def done(q, at, latency):
            if server.phase is not operational:
                self.nonoperational_completions += 1
            m.record_completion(q.qid, sid, latency)
            process(udp, None, sid, q.src_host, size, ip)

        return done

    def _drop_sink(self, server: DnsServer):
        m, sid = self.metrics, server.server_id

        def dropped(q, reason, now):
            m.record_drop(q.qid, sid, reason)

        return dropped

    # -- control loop -----------------------------------------------------

    def _poll(self, at: int) -> None:
        for s in self.servers.values():
            s.settle(at)
        ctl = self.controller
        rule = self.switch.read_stats(REQUEST_RULE_ID).packet_count
        self.metrics.record_poll(at, rule, ctl.backup_bucket_total(), ctl.take_mitigating_flag())
        actions = ctl.on_stats_poll(at)
        if actions:
            label = ",".join(a.value for a in actions)
            self.engine.at(at + self.control_latency_us, EventKind.FLOW_MOD,
                           lambda t, acts=tuple(actions): self._apply(acts, t), label)

    def _apply(self, actions, at: int) -> None:
        ctl, vnf = self.controller, self.vnf
        for a in actions:
            if a is ControlAction.START_BACKUP:
                if not vnf.is_up(BACKUP_ID):
                    vnf.request_start(BACKUP_ID, at)
                    self.timeline.append((at, "StartBackup"))
            elif a is ControlAction.ACTIVATE:
                if vnf.is_ready(BACKUP_ID) and not ctl.state.mitigating:
                    ctl.activate_mitigation(at)
                    self.timeline.append((at, "ActivateMitigation"))
                    if self._pending_stop is not None:
                        self.engine.cancel(self._pending_stop)
                        self._pending_stop = None
            elif a is ControlAction.DEACTIVATE:
                if ctl.state.mitigating:
                    ctl.deactivate_mitigation(at)
                    self.timeline.append((at, "DeactivateMitigation"))
                    if self.keep_warm_us:
                        self._pending_stop = self.engine.at(
                            at + self.keep_warm_us, EventKind.FLOW_MOD,
                            lambda t: self._apply((ControlAction.STOP_BACKUP,), t), "StopBackup")
                    else:
                        self._stop_backup(at)
            elif a is ControlAction.STOP_BACKUP:
                self._pending_stop = None
                self._stop_backup(at)

    def _stop_backup(self, at: int) -> None:
        if self.vnf.is_up(BACKUP_ID):
            self.backup.settle(at)
            self.vnf.request_stop(BACKUP_ID, at)
            self.timeline.append((at, "StopBackup"))

    def _backup_booted(self, sid: str, at: int) -> None:
        self.timeline.append((at, "BackupOperational"))
        self._sync_zone(at)

    def _backup_ready(self, sid: str, at: int) -> None:
        self.timeline.append((at, "BackupReady"))

    def _master_changed(self, zone) -> None:
        if self.backup.operational:
            self._sync_zone(self.engine.now)

    def _sync_zone(self, at: int) -> None:
        sent = zone_transfer(self.default, self.backup, at, send=self.switch.process_packet)
        self.timeline.append((at, f"ZoneTransfer serial={self.backup.zone.serial} packets={len(sent)}"))

    def _finish(self, at: int) -> None:
        for s in self.servers.values():
            s.abandon(at)

    # -- running ----------------------------------------------------------

    def client_offered_total(self) -> int:
        return len(self.client_schedule.times) if self.client_schedule else 0

    def run(self) -> SimResult:
        t0 = time.perf_counter()
        self.engine.run_until(self.end_us)
        wall = time.perf_counter() - t0
        return self.result(wall)

    def result(self, wall_s: float = 0.0) -> SimResult:
        m, cfg = self.metrics, self.cfg
        windows = m.mitigation_windows(self.thresholds.t2_balance, cfg.balance_tolerance)
        completion = m.completion_rate() if m.offered else float("nan")
        latency = m.avg_latency_ms() if m.completed else float("nan")
        summary = SummaryRow.build(self.label, cfg.offered_qps, completion, latency, len(windows))
        eng = self.engine
        counts = {
            "scheduled": eng.scheduled,
            "processed": eng.processed,
            "cancelled": eng.cancelled,
            "pending": eng.pending,
            "packets": self.switch.packets_processed,
            "client_offered": m.offered,
            "client_completed": m.completed,
            "client_dropped": m.dropped,
        }
        return SimResult(self.label, cfg, m, windows, summary, list(self.timeline), counts,
                         list(self.vnf.resource_log), self.vnf.still_running(),
                         self.nonoperational_completions, wall_s)

    @property
    def backup_record(self) -> VnfRecord:
        return self.vnf.records[BACKUP_ID]


def run_scenario(cfg: ScenarioConfig, label: str | None = None, **kw) -> SimResult:
    return Simulation(cfg, label, **kw).run()
