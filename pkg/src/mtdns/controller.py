"""Threshold-driven MTD controller.

The controller only sees packet counters. In flow-rule mode it reads the DNS
request rule; while a SELECT group is installed it reads the group's buckets
instead. All rate arithmetic is exact (``Fraction``) so threshold identities
and boundary comparisons hold without rounding slack.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

from .dataplane import (
    DNS_PORT,
    NORMAL,
    ApplyGroup,
    Bucket,
    CounterSnapshot,
    FlowMatch,
    FlowRule,
    ForwardTo,
    GroupRule,
    Protocol,
    Switch,
)
from .errors import (
    AlreadyMitigating,
    BackupNotReady,
    CounterRegression,
    InvalidThreshold,
    NotMitigating,
)
from .sim import US_PER_S

REQUEST_RULE_ID = 1
DEFAULT_RULE_ID = 2
RESPONSE_RULE_ID = 3
MTD_GROUP_ID = 1

REQUEST_PRIORITY = 100
RESPONSE_PRIORITY = 200
DEFAULT_PRIORITY = 0


def exact(x) -> Fraction:
    """Exact rational for ints, Fractions, decimal strings and floats (by repr)."""
    if isinstance(x, float):
        return Fraction(repr(x))
    return Fraction(x)


@dataclass(frozen=True)
class Thresholds:
    t2_balance: Fraction
    t1_startup: Fraction
    drop_fraction: Fraction


def derive_thresholds(t2, drop_fraction=Fraction(2, 5)) -> Thresholds:
    t2 = exact(t2)
    if t2 <= 0:
        raise InvalidThreshold(f"t2 must be positive, got {t2}")
    drop = exact(drop_fraction)
    if not 0 < drop < 1:
        raise InvalidThreshold(f"drop_fraction must be in (0, 1), got {drop}")
    return Thresholds(t2, t2 / 2, drop)


def compute_rate(prev_count: int, cur_count: int, window_us: int) -> Fraction:
    """Packets per second between two counter reads ``window_us`` apart."""
    if cur_count < prev_count:
        raise CounterRegression(f"counter went from {prev_count} to {cur_count}")
    if window_us <= 0:
        raise ValueError("window must be positive")
    return Fraction((cur_count - prev_count) * US_PER_S, window_us)


def should_revert(prev_rate, cur_rate, drop_fraction) -> bool:
    """True when the rate fell by at least ``drop_fraction`` of ``prev_rate``."""
    return exact(cur_rate) <= (1 - exact(drop_fraction)) * exact(prev_rate)


class ControlAction(enum.Enum):
    START_BACKUP = "StartBackup"
    ACTIVATE = "ActivateMitigation"
    DEACTIVATE = "DeactivateMitigation"
    STOP_BACKUP = "StopBackup"


class RateSource(enum.Enum):
    DEFAULT_RULE = "DefaultRule"
    DEFAULT_BUCKET = "DefaultBucket"
    BACKUP_BUCKET = "BackupBucket"


@dataclass(frozen=True)
class RateSample:
    at: int
    source: RateSource
    rate: Fraction


@dataclass
class ControllerState:
    window_us: int
    mitigating: bool = False
    prev_count_default: int = 0
    prev_counts_buckets: tuple[int, int] = (0, 0)
    prev_rate: Fraction = Fraction(0)
    last_read_at: int = 0
    history: dict = field(default_factory=lambda: {s: [] for s in RateSource})


def install_base_rules(switch: Switch, default_id: str) -> None:
    """UDP/53 requests to the resolver go to the default server; all else is normal."""
    switch.install_flow_rule(
        FlowRule(DEFAULT_RULE_ID, DEFAULT_PRIORITY, FlowMatch(), NORMAL)
    )
    switch.install_flow_rule(
        FlowRule(
            REQUEST_RULE_ID,
            REQUEST_PRIORITY,
            FlowMatch(Protocol.UDP, DNS_PORT, dst_host=default_id),
            ForwardTo(default_id),
        )
    )


class MtdController:
    """One statistics handler per mode; decisions come back as ControlActions.

    ``backup_ready`` reports probe-confirmed readiness, ``backup_up`` whether
    the backup is (or is being) brought up. With ``enabled=False`` the
    controller only monitors.
    """

    def __init__(
        self,
        switch: Switch,
        thresholds: Thresholds,
        window_us: int,
        default_id: str,
        backup_id: str,
        backup_ready: Callable[[], bool],
        backup_up: Callable[[], bool],
        bucket_weights=(50, 50),
        enabled: bool = True,
    ):
        self.switch = switch
        self.thresholds = thresholds
        self.default_id = default_id
        self.backup_id = backup_id
        self.backup_ready = backup_ready
        self.backup_up = backup_up
        self.bucket_weights = tuple(int(w) for w in bucket_weights)
        # zero-weight buckets are left out (a 0/100 weighting is a plain redirect)
        self._bucket_plan = [
            (sid, w) for sid, w in zip((default_id, backup_id), self.bucket_weights) if w > 0
        ]
        ids = [sid for sid, _ in self._bucket_plan]
        self._idx_default = ids.index(default_id) if default_id in ids else None
        self._idx_backup = ids.index(backup_id) if backup_id in ids else None
        self.enabled = enabled
        self.state = ControllerState(window_us)
        self.handler_calls = {"flow": 0, "group": 0}
        self.activations: list[int] = []
        self.deactivations: list[int] = []
        # backup-bucket packets from groups already deleted
        self.harvested_backup = 0
        self._group_seen = False

    # -- polling ----------------------------------------------------------

    def on_stats_poll(self, now: int) -> list[ControlAction]:
        if self.state.mitigating:
            actions = self._group_handler(now)
        else:
            actions = self._flow_handler(now)
        self.state.last_read_at = now
        return actions if self.enabled else []

    def _flow_handler(self, now: int) -> list[ControlAction]:
        st = self.state
        self.handler_calls["flow"] += 1
        cur = self.switch.read_stats(REQUEST_RULE_ID).packet_count
        rate = compute_rate(st.prev_count_default, cur, now - st.last_read_at)
        st.prev_count_default = cur
        st.history[RateSource.DEFAULT_RULE].append(RateSample(now, RateSource.DEFAULT_RULE, rate))
        actions = []
        th = self.thresholds
        if rate > th.t1_startup and not self.backup_up():
            actions.append(ControlAction.START_BACKUP)
        if rate > th.t2_balance and self.backup_ready():
            actions.append(ControlAction.ACTIVATE)
        st.prev_rate = rate
        return actions

    def _group_handler(self, now: int) -> list[ControlAction]:
        st = self.state
        self.handler_calls["group"] += 1
        snap = self.switch.read_stats(MTD_GROUP_ID, group=True)
        elapsed = now - st.last_read_at
        cur = (self._bucket_count(snap, self._idx_default), self._bucket_count(snap, self._idx_backup))
        r0 = compute_rate(st.prev_counts_buckets[0], cur[0], elapsed)
        r1 = compute_rate(st.prev_counts_buckets[1], cur[1], elapsed)
        st.prev_counts_buckets = cur
        st.history[RateSource.DEFAULT_BUCKET].append(RateSample(now, RateSource.DEFAULT_BUCKET, r0))
        st.history[RateSource.BACKUP_BUCKET].append(RateSample(now, RateSource.BACKUP_BUCKET, r1))
        combined = r0 + r1
        actions = []
        if should_revert(st.prev_rate, combined, self.thresholds.drop_fraction):
            actions.append(ControlAction.DEACTIVATE)
        st.prev_rate = combined
        return actions

    # -- mitigation -------------------------------------------------------

    def activate_mitigation(self, now: int) -> None:
        if self.state.mitigating:
            raise AlreadyMitigating("a mitigation group is already installed")
        if not self.backup_ready():
            raise BackupNotReady(f"{self.backup_id} is not confirmed ready")
        buckets = [Bucket(w, ForwardTo(sid)) for sid, w in self._bucket_plan]
        self.switch.install_group(GroupRule(MTD_GROUP_ID, buckets))
        self.switch.modify_flow_rule(REQUEST_RULE_ID, ApplyGroup(MTD_GROUP_ID))
        self.switch.install_flow_rule(
            FlowRule(RESPONSE_RULE_ID, RESPONSE_PRIORITY, FlowMatch(src_host=self.backup_id), NORMAL)
        )
        st = self.state
        st.mitigating = True
        st.prev_counts_buckets = (0, 0)
        st.last_read_at = now
        self._group_seen = True
        self.activations.append(now)

    def deactivate_mitigation(self, now: int) -> CounterSnapshot:
        """Restore default forwarding; returns the deleted group's final counters."""
        st = self.state
        if not st.mitigating:
            raise NotMitigating("no mitigation group installed")
        self.switch.modify_flow_rule(REQUEST_RULE_ID, ForwardTo(self.default_id))
        self.switch.delete_flow_rule(RESPONSE_RULE_ID)
        final = self.switch.delete_group(MTD_GROUP_ID)
        self.harvested_backup += self._bucket_count(final, self._idx_backup)
        st.mitigating = False
        st.prev_count_default = self.switch.read_stats(REQUEST_RULE_ID).packet_count
        st.last_read_at = now
        self.deactivations.append(now)
        return final

    # -- metrics hooks ----------------------------------------------------

    def backup_bucket_total(self) -> int:
        """Packets ever sent to the backup bucket, including deleted groups."""
        total = self.harvested_backup
        g = self.switch.groups.get(MTD_GROUP_ID)
        if g is not None and self._idx_backup is not None:
            total += g.buckets[self._idx_backup].packet_count
        return total

    @staticmethod
    def _bucket_count(snap: CounterSnapshot, idx) -> int:
        return 0 if idx is None else snap.buckets[idx]

    def take_mitigating_flag(self) -> bool:
        """Whether a group was installed at any point since the last call."""
        seen = self._group_seen
        self._group_seen = self.state.mitigating
        return seen
