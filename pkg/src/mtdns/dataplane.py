"""Virtual OpenFlow-style switch.

One priority-ordered flow table plus a SELECT group table. Every processed
packet bumps exactly one flow rule's counters and, when that rule applies a
group, exactly one bucket's counter. Lookups go through a match cache keyed on
the header fields the table can match; any table change flushes it.
"""
from __future__ import annotations

import enum
import zlib
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import NamedTuple, Union

from .errors import (
    DuplicateGroup,
    DuplicateRule,
    EmptyBuckets,
    GroupInUse,
    InvalidRule,
    InvalidWeight,
    NoMatch,
    UnknownGroup,
    UnknownTarget,
)

DNS_PORT = 53
MIN_PACKET_SIZE = 28


class Protocol(enum.Enum):
    UDP = "udp"
    TCP = "tcp"
    OTHER = "other"

    # members are singletons; the C-level identity hash keeps lookups cheap
    __hash__ = object.__hash__


class PacketKind(enum.Enum):
    DNS_REQUEST = "DnsRequest"
    DNS_RESPONSE = "DnsResponse"
    FLOOD_REQUEST = "FloodRequest"
    ZONE_TRANSFER = "ZoneTransfer"
    OTHER = "Other"

    __hash__ = object.__hash__


@dataclass(slots=True)
class Packet:
    at: int
    src_ip: int
    src_host: str
    dst_host: str
    protocol: Protocol
    dst_port: int | None
    size_bytes: int
    kind: PacketKind
    qid: int = -1


@dataclass(frozen=True)
class FlowMatch:
    protocol: Protocol | None = None
    dst_port: int | None = None
    src_host: str | None = None
    dst_host: str | None = None

    @property
    def is_wildcard(self) -> bool:
        return self.protocol is None and self.dst_port is None and self.src_host is None and self.dst_host is None

    def matches(self, protocol, dst_port, src_host, dst_host) -> bool:
        return (
            (self.protocol is None or self.protocol is protocol)
            and (self.dst_port is None or self.dst_port == dst_port)
            and (self.src_host is None or self.src_host == src_host)
            and (self.dst_host is None or self.dst_host == dst_host)
        )


@dataclass(frozen=True)
class ForwardTo:
    server_id: str


@dataclass(frozen=True)
class ApplyGroup:
    group_id: int


@dataclass(frozen=True)
class Normal:
    pass


@dataclass(frozen=True)
class Drop:
    pass


FlowAction = Union[ForwardTo, ApplyGroup, Normal, Drop]
NORMAL = Normal()
DROP = Drop()


@dataclass
class FlowRule:
    rule_id: int
    priority: int
    match: FlowMatch
    action: FlowAction
    packet_count: int = 0
    byte_count: int = 0


@dataclass
class Bucket:
    weight: int
    action: FlowAction
    packet_count: int = 0
    byte_count: int = 0


class GroupType(enum.Enum):
    SELECT = "select"


@dataclass
class GroupRule:
    group_id: int
    buckets: list[Bucket]
    kind: GroupType = GroupType.SELECT
    _cumulative: list[int] = field(default_factory=list, repr=False)
    _decisions: list = field(default_factory=list, repr=False)


class ForwardingDecision(NamedTuple):
    rule_id: int
    group_id: int | None
    bucket: int | None
    action: FlowAction
    server_id: str | None = None


def _decision(rule_id, group_id, bucket, action) -> ForwardingDecision:
    sid = action.server_id if isinstance(action, ForwardTo) else None
    return ForwardingDecision(rule_id, group_id, bucket, action, sid)


@dataclass(frozen=True)
class CounterSnapshot:
    target: int
    packet_count: int
    byte_count: int
    buckets: tuple[int, ...] = ()

    @property
    def bucket_total(self) -> int:
        return sum(self.buckets)


class SelectMode(enum.Enum):
    RANDOM = "random"
    HASH = "hash"


class Switch:
    """Flow table + group table with OpenFlow-like counters.

    ``uniforms`` is the iterator bucket selection draws from (the engine's
    "bucket-select" stream). ``select_mode=HASH`` picks buckets from a CRC of
    the source address instead, for comparison runs.
    """

    def __init__(self, uniforms=None, select_mode: SelectMode = SelectMode.RANDOM):
        self.rules: dict[int, FlowRule] = {}
        self.groups: dict[int, GroupRule] = {}
        self.select_mode = SelectMode(select_mode)
        self._hash_select = self.select_mode is SelectMode.HASH
        self.packets_processed = 0
        self._uniforms = uniforms
        self._ordered: list[FlowRule] = []
        self._cache: dict = {}

    # -- table management -------------------------------------------------

    def install_flow_rule(self, rule: FlowRule) -> int:
        if rule.rule_id in self.rules:
            raise DuplicateRule(f"rule {rule.rule_id} already installed")
        others = list(self.rules.values())
        if rule.match.is_wildcard and any(r.priority < rule.priority for r in others):
            raise InvalidRule("a wildcard match is only allowed on the lowest-priority rule")
        if any(r.match.is_wildcard and r.priority > rule.priority for r in others):
            raise InvalidRule(f"rule {rule.rule_id} would sit below a wildcard rule")
        rule.packet_count = 0
        rule.byte_count = 0
        self.rules[rule.rule_id] = rule
        self._reorder()
        return rule.rule_id

    def modify_flow_rule(self, rule_id: int, action: FlowAction) -> None:
        """Change a rule's action in place; counters are kept (OFPFC_MODIFY)."""
        rule = self._rule(rule_id)
        rule.action = action
        self._cache.clear()

    def delete_flow_rule(self, rule_id: int) -> CounterSnapshot:
        rule = self._rule(rule_id)
        snap = CounterSnapshot(rule_id, rule.packet_count, rule.byte_count)
        del self.rules[rule_id]
        self._reorder()
        return snap

    def install_group(self, group: GroupRule) -> None:
        if group.group_id in self.groups:
            raise DuplicateGroup(f"group {group.group_id} already installed")
        if not group.buckets:
            raise EmptyBuckets(f"group {group.group_id} has no buckets")
        if any(b.weight <= 0 for b in group.buckets):
            raise InvalidWeight(f"group {group.group_id}: bucket weights must be positive")
        total = 0
        group._cumulative = []
        for b in group.buckets:
            b.packet_count = 0
            b.byte_count = 0
            total += b.weight
            group._cumulative.append(total)
        self.groups[group.group_id] = group
        self._cache.clear()

    def delete_group(self, group_id: int) -> CounterSnapshot:
        group = self.groups.get(group_id)
        if group is None:
            raise UnknownGroup(f"group {group_id} not installed")
        users = [r.rule_id for r in self.rules.values() if r.action == ApplyGroup(group_id)]
        if users:
            raise GroupInUse(f"group {group_id} still referenced by rules {users}")
        del self.groups[group_id]
        self._cache.clear()
        return self._group_snapshot(group)

    def read_stats(self, target: int, *, group: bool = False) -> CounterSnapshot:
        if group:
            g = self.groups.get(target)
            if g is None:
                raise UnknownTarget(f"group {target} not installed")
            return self._group_snapshot(g)
        rule = self.rules.get(target)
        if rule is None:
            raise UnknownTarget(f"rule {target} not installed")
        return CounterSnapshot(target, rule.packet_count, rule.byte_count)

    def table(self) -> list[tuple[int, int, FlowMatch, FlowAction]]:
        """Counter-free view of the flow table, highest priority first."""
        return [(r.rule_id, r.priority, r.match, r.action) for r in self._ordered]

    # -- forwarding -------------------------------------------------------

    def process_packet(self, p: Packet) -> ForwardingDecision:
        return self.process(p.protocol, p.dst_port, p.src_host, p.dst_host, p.size_bytes, p.src_ip)

    def process(self, protocol, dst_port, src_host, dst_host, size_bytes, src_ip=0) -> ForwardingDecision:
        """:meth:`process_packet` on bare header fields (no Packet needed)."""
        key = (protocol, dst_port, src_host, dst_host)
        entry = self._cache.get(key)
        if entry is None:
            entry = self._lookup(key)
        rule, decision, group = entry
        rule.packet_count += 1
        rule.byte_count += size_bytes
        self.packets_processed += 1
        if group is None:
            return decision
        cum = group._cumulative
        if self._hash_select:
            x = zlib.crc32(src_ip.to_bytes(4, "big")) % cum[-1]
        else:
            x = next(self._uniforms) * cum[-1]
        idx = bisect_right(cum, x)
        bucket = group.buckets[idx]
        bucket.packet_count += 1
        bucket.byte_count += size_bytes
        return group._decisions[idx]

    def _lookup(self, key):
        for rule in self._ordered:
            if rule.match.matches(*key):
                break
        else:
            raise NoMatch(f"no rule matches {key}")
        action = rule.action
        if isinstance(action, ApplyGroup):
            group = self.groups.get(action.group_id)
            if group is None:
                raise UnknownGroup(f"rule {rule.rule_id} applies missing group {action.group_id}")
            group._decisions = [
                _decision(rule.rule_id, group.group_id, i, b.action) for i, b in enumerate(group.buckets)
            ]
            entry = (rule, None, group)
        else:
            entry = (rule, _decision(rule.rule_id, None, None, action), None)
        self._cache[key] = entry
        return entry

    def _rule(self, rule_id: int) -> FlowRule:
        rule = self.rules.get(rule_id)
        if rule is None:
            raise UnknownTarget(f"rule {rule_id} not installed")
        return rule

    def _reorder(self) -> None:
        # highest priority first; equal priority resolved by lower rule_id
        self._ordered = sorted(self.rules.values(), key=lambda r: (-r.priority, r.rule_id))
        self._cache.clear()

    @staticmethod
    def _group_snapshot(g: GroupRule) -> CounterSnapshot:
        counts = tuple(b.packet_count for b in g.buckets)
        return CounterSnapshot(g.group_id, sum(counts), sum(b.byte_count for b in g.buckets), counts)
