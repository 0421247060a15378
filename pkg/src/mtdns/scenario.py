"""Scenario files: TOML text with a fixed set of keys.

Grammar (every key optional unless marked)::

    name = "figure"                 # label used in output file names
    seed = 42
    sim_duration_s = 120            # required
    poll_window_s = 2
    t2_balance_pps = 15000
    drop_fraction = 0.4
    boot_latency_s = 5
    probe_interval_ms = 250
    control_latency_ms = 100        # poll-to-flow-mod delay
    keep_warm_s = 0                 # backup linger after revert
    balance_tolerance = 0.05        # window-end slack on blue
    bucket_weights = [50, 50]
    select_mode = "random"          # or "hash"
    mtdns_enabled = true

    [[servers]]                     # exactly one role = "default"
    role = "default"
    service_rate = 97000            # queries/s
    queue_capacity = 700
    base_latency_us = 1000

    [[servers]]                     # optional; omitted fields copy the default
    role = "backup"

    [client]
    qps = 10000
    clients = 125
    duration_s = 20
    start_s = 0
    request_size = 28
    response_size = 70
    arrivals = "even"               # or "poisson"

    [[floods]]
    qps = 50000
    start_s = 28.75
    duration_s = 10
    payload = 120
    arrivals = "even"

    [zone]
    origin = "example.com"
    records = { "www.example.com" = "192.0.2.10" }

    [variants]
    flood_qps = [50000, 100000, 150000]   # one run per value, applied to every flood

Unknown keys are rejected.
"""
from __future__ import annotations

import copy
import os
import sys
from dataclasses import asdict, dataclass, field, replace
from importlib import resources

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ParseError, ValidationError
from .workloads import ClientWorkload, FloodWorkload

SCENARIO_SUFFIX = ".scenario"

DEFAULT_ZONE = {
    "example.com": "192.0.2.1",
    "www.example.com": "192.0.2.10",
    "mail.example.com": "192.0.2.25",
    "ns1.example.com": "192.0.2.53",
}


@dataclass
class ServerConfig:
    role: str
    service_rate: float
    queue_capacity: int
    base_latency_us: int

    def __post_init__(self):
        if self.role not in ("default", "backup"):
            raise ValidationError("servers.role", f"unknown role {self.role!r}")
        if not self.service_rate > 0:
            raise ValidationError("servers.service_rate", "must be positive")
        if int(self.queue_capacity) != self.queue_capacity or self.queue_capacity < 1:
            raise ValidationError("servers.queue_capacity", "must be a positive integer")
        if self.base_latency_us < 0:
            raise ValidationError("servers.base_latency_us", "must be non-negative")


@dataclass
class ZoneConfig:
    origin: str = "example.com"
    records: dict = field(default_factory=lambda: dict(DEFAULT_ZONE))


@dataclass
class ScenarioConfig:
    sim_duration_s: float
    servers: list
    name: str = "scenario"
    seed: int = 0
    poll_window_s: float = 2.0
    t2_balance_pps: float = 15000
    drop_fraction: float = 0.40
    boot_latency_s: float = 5.0
    probe_interval_ms: float = 250.0
    control_latency_ms: float = 100.0
    keep_warm_s: float = 0.0
    balance_tolerance: float = 0.05
    bucket_weights: list = field(default_factory=lambda: [50, 50])
    select_mode: str = "random"
    mtdns_enabled: bool = True
    client: ClientWorkload | None = None
    floods: list = field(default_factory=list)
    zone: ZoneConfig = field(default_factory=ZoneConfig)
    variants: dict = field(default_factory=dict)

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        for name in ("sim_duration_s", "poll_window_s", "t2_balance_pps", "boot_latency_s", "probe_interval_ms"):
            if not getattr(self, name) > 0:
                raise ValidationError(name, "must be positive")
        for name in ("control_latency_ms", "keep_warm_s"):
            if getattr(self, name) < 0:
                raise ValidationError(name, "must be non-negative")
        if self.control_latency_ms / 1000 >= self.poll_window_s:
            raise ValidationError("control_latency_ms", "must be shorter than the poll window")
        if not 0 < self.drop_fraction < 1:
            raise ValidationError("drop_fraction", "must be in (0, 1)")
        if not 0 <= self.balance_tolerance < 1:
            raise ValidationError("balance_tolerance", "must be in [0, 1)")
        w = self.bucket_weights
        if len(w) != 2 or any(not isinstance(x, int) or x < 0 for x in w) or sum(w) == 0:
            raise ValidationError("bucket_weights", "two non-negative integer weights [default, backup], not both 0")
        if self.select_mode not in ("random", "hash"):
            raise ValidationError("select_mode", "must be 'random' or 'hash'")
        roles = [s.role for s in self.servers]
        if roles.count("default") != 1:
            raise ValidationError("servers", "exactly one default server is required")
        if roles.count("backup") > 1:
            raise ValidationError("servers", "at most one backup server is allowed")
        for key, values in self.variants.items():
            if key != "flood_qps":
                raise ValidationError(f"variants.{key}", "unknown variant key")
            if not isinstance(values, list) or not values:
                raise ValidationError(f"variants.{key}", "must be a non-empty list")
            if any(not isinstance(v, (int, float)) or v < 0 for v in values):
                raise ValidationError(f"variants.{key}", "values must be non-negative numbers")

    @property
    def default_server(self) -> ServerConfig:
        return next(s for s in self.servers if s.role == "default")

    @property
    def backup_server(self) -> ServerConfig:
        """The backup's parameters; mirrors the default server when none is configured."""
        for s in self.servers:
            if s.role == "backup":
                return s
        return replace(self.default_server, role="backup")

    @property
    def offered_qps(self) -> int:
        return int(max((f.qps for f in self.floods), default=0))

    def echo(self) -> dict:
        """Every effective parameter, defaults included."""
        d = asdict(self)
        d["servers"] = [asdict(self.default_server), asdict(self.backup_server)]
        d["client"] = asdict(self.client) if self.client else None
        d["floods"] = [asdict(f) for f in self.floods]
        return d

    def expand(self) -> list[tuple[str, "ScenarioConfig"]]:
        """One (tag, config) pair per variant value; a single ("", self) otherwise."""
        values = self.variants.get("flood_qps")
        if not values:
            return [("", self)]
        out = []
        for v in values:
            cfg = copy.deepcopy(self)
            cfg.variants = {}
            cfg.floods = [replace(f, qps=v) for f in cfg.floods]
            out.append((f"flood={_num(v)}", cfg))
        return out


def _num(v):
    return int(v) if float(v).is_integer() else v


# -- loading --------------------------------------------------------------

_TOP = {
    "name", "seed", "sim_duration_s", "poll_window_s", "t2_balance_pps", "drop_fraction", "boot_latency_s",
    "probe_interval_ms", "control_latency_ms", "keep_warm_s", "balance_tolerance", "bucket_weights",
    "select_mode", "mtdns_enabled", "servers", "client", "floods", "zone", "variants",
}
_SERVER = {"role", "service_rate", "queue_capacity", "base_latency_us"}
_CLIENT = {"qps", "clients", "duration_s", "start_s", "request_size", "response_size", "arrivals"}
_FLOOD = {"qps", "start_s", "duration_s", "payload", "src_ip_mode", "arrivals"}
_ZONE = {"origin", "records"}


def _reject_unknown(section: str, table: dict, allowed: set) -> None:
    if not isinstance(table, dict):
        raise ValidationError(section, "must be a table")
    for key in table:
        if key not in allowed:
            raise ValidationError(f"{section}.{key}" if section else key, "unknown key")


def _build(section, cls, table, allowed):
    _reject_unknown(section, table, allowed)
    try:
        return cls(**table)
    except TypeError as e:
        raise ValidationError(section, str(e)) from e


def parse_scenario(text: str) -> ScenarioConfig:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise ParseError(getattr(e, "msg", str(e)), getattr(e, "lineno", None)) from e
    _reject_unknown("", raw, _TOP)
    if "sim_duration_s" not in raw:
        raise ValidationError("sim_duration_s", "is required")
    servers_raw = raw.pop("servers", None)
    if not isinstance(servers_raw, list) or not servers_raw:
        raise ValidationError("servers", "at least one [[servers]] entry is required")
    defaults = next((s for s in servers_raw if isinstance(s, dict) and s.get("role") == "default"), None)
    if defaults is None:
        raise ValidationError("servers", "exactly one default server is required")
    servers = []
    for s in servers_raw:
        _reject_unknown("servers", s, _SERVER)
        merged = {k: v for k, v in defaults.items() if k != "role"}
        merged.update(s)
        missing = _SERVER - set(merged)
        if missing:
            raise ValidationError("servers", f"missing {sorted(missing)}")
        servers.append(_build("servers", ServerConfig, merged, _SERVER))
    kwargs = dict(raw)
    kwargs["servers"] = servers
    if "client" in raw:
        kwargs["client"] = _build("client", ClientWorkload, raw["client"], _CLIENT)
    if "floods" in raw:
        if not isinstance(raw["floods"], list):
            raise ValidationError("floods", "must be an array of tables")
        kwargs["floods"] = [_build("floods", FloodWorkload, f, _FLOOD) for f in raw["floods"]]
    if "zone" in raw:
        kwargs["zone"] = _build("zone", ZoneConfig, raw["zone"], _ZONE)
    if "variants" in raw:
        _reject_unknown("variants", raw["variants"], {"flood_qps"})
    try:
        return ScenarioConfig(**kwargs)
    except TypeError as e:
        raise ValidationError("scenario", str(e)) from e


def bundled_scenarios() -> list[str]:
    root = resources.files("mtdns") / "scenarios"
    return sorted(p.name[: -len(SCENARIO_SUFFIX)] for p in root.iterdir() if p.name.endswith(SCENARIO_SUFFIX))


def read_scenario_text(path) -> str:
    """Scenario text from a file path, or from a bundled scenario by name."""
    p = os.fspath(path)
    if os.path.exists(p):
        with open(p, encoding="utf-8") as fh:
            return fh.read()
    name = os.path.basename(p)
    if name.endswith(SCENARIO_SUFFIX):
        name = name[: -len(SCENARIO_SUFFIX)]
    bundled = resources.files("mtdns") / "scenarios" / f"{name}{SCENARIO_SUFFIX}"
    if bundled.is_file():
        return bundled.read_text(encoding="utf-8")
    raise FileNotFoundError(f"no scenario file {p!r} and no bundled scenario {name!r}")


def load_scenario(path) -> ScenarioConfig:
    return parse_scenario(read_scenario_text(path))
