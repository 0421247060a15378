"""Client query outcomes, the per-poll rate series and mitigation windows.

The blue series is the default server's rate: the request rule's rate while
no group is installed, the default bucket's rate while one is. The red series
is the backup bucket's rate. Both are derived from counter deltas over the
poll window, so blue + red always equals the request rule's rate.
"""
from __future__ import annotations

import csv
import io
import os
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction

from .dns import DropReason, QueryOutcome
from .errors import IoFailure, NoCompletions, NoQueries
from .sim import US_PER_S

TIMESERIES_HEADER = ["t_s", "default_rate_pps", "backup_rate_pps", "mitigating"]
SUMMARY_HEADER = ["scenario", "offered_qps", "completion_rate", "avg_latency_ms", "mitigation_windows"]
DEFAULT_BALANCE_TOLERANCE = 0.05


def format_seconds(t_us: int) -> str:
    s, frac = divmod(int(t_us), US_PER_S)
    if not frac:
        return str(s)
    return f"{s}.{frac:06d}".rstrip("0")


def parse_seconds(text: str) -> int:
    return int(Fraction(text) * US_PER_S)


@dataclass(frozen=True)
class PollRow:
    at: int
    default_rate_pps: int
    backup_rate_pps: int
    mitigating: int

    @property
    def t_s(self) -> float:
        return self.at / US_PER_S


@dataclass(frozen=True)
class MitigationWindow:
    spike_at: float
    balanced_at: float
    duration: float


@dataclass(frozen=True)
class SummaryRow:
    scenario: str
    offered_qps: int
    completion_rate: float
    avg_latency_ms: float
    mitigation_windows: int

    @classmethod
    def build(cls, scenario, offered_qps, completion_rate, avg_latency_ms, mitigation_windows):
        # stored at export precision so a CSV read-back compares equal
        return cls(str(scenario), int(offered_qps), round(completion_rate, 6),
                   round(avg_latency_ms, 3), int(mitigation_windows))


def detect_mitigation_windows(rows, t2, tolerance=DEFAULT_BALANCE_TOLERANCE) -> list[MitigationWindow]:
    """Spike-to-balance intervals on a poll series.

    A window opens at a poll whose blue rate exceeds ``t2`` while red is 0.
    It closes where red reaches blue, taken with a relative ``tolerance`` on
    blue (the two halves of a random split never match exactly), linearly
    interpolated between the straddling polls. Windows that never close are
    not reported.
    """
    t2 = float(t2)
    k = 1.0 - float(tolerance)
    windows = []
    spike = None
    prev = None
    for r in rows:
        t = r.at / US_PER_S
        g = r.backup_rate_pps - k * r.default_rate_pps
        if spike is None:
            if r.default_rate_pps > t2 and r.backup_rate_pps == 0:
                spike = t
                prev = (t, g)
            continue
        if g >= 0:
            t0, g0 = prev
            end = t0 + (t - t0) * (-g0) / (g - g0) if g != g0 else t
            windows.append(MitigationWindow(spike, end, end - spike))
            spike = None
        else:
            prev = (t, g)
    return windows


@dataclass
class MetricsLog:
    keep_outcomes: bool = True
    offered: int = 0
    completed: int = 0
    dropped: int = 0
    latency_sum_us: float = 0.0
    drops: Counter = field(default_factory=Counter)
    outcomes: list = field(default_factory=list)
    rows: list = field(default_factory=list)
    _prev_rule: int = 0
    _prev_backup: int = 0
    _prev_at: int = 0

    def record_completion(self, qid: int, server_id: str, latency_us: float) -> None:
        self.completed += 1
        self.latency_sum_us += latency_us
        if self.keep_outcomes:
            self.outcomes.append(QueryOutcome(qid, server_id, latency_us))

    def record_drop(self, qid: int, server_id, reason: DropReason) -> None:
        self.dropped += 1
        self.drops[reason] += 1
        if self.keep_outcomes:
            self.outcomes.append(QueryOutcome(qid, server_id, reason=reason))

    def record_poll(self, now: int, rule_count: int, backup_count: int, mitigating: bool) -> PollRow:
        """Append one timeseries row from cumulative request-rule and backup-bucket counts."""
        span = now - self._prev_at
        red_n = backup_count - self._prev_backup
        blue_n = (rule_count - self._prev_rule) - red_n
        row = PollRow(
            now,
            round(Fraction(blue_n * US_PER_S, span)),
            round(Fraction(red_n * US_PER_S, span)),
            int(bool(mitigating)),
        )
        self._prev_rule, self._prev_backup, self._prev_at = rule_count, backup_count, now
        self.rows.append(row)
        return row

    def completion_rate(self) -> float:
        if self.offered == 0:
            raise NoQueries("no client queries were offered")
        return self.completed / self.offered

    def avg_latency_ms(self) -> float:
        if self.completed == 0:
            raise NoCompletions("no client query completed")
        return self.latency_sum_us / self.completed / 1000.0

    def mitigation_windows(self, t2, tolerance=DEFAULT_BALANCE_TOLERANCE) -> list[MitigationWindow]:
        return detect_mitigation_windows(self.rows, t2, tolerance)


# -- CSV ------------------------------------------------------------------


def _open_for_write(target):
    if hasattr(target, "write"):
        return target, False
    try:
        return open(target, "w", newline="", encoding="utf-8"), True
    except OSError as e:
        raise IoFailure(f"cannot write {target}: {e}") from e


def _write(target, header, records) -> None:
    fh, owned = _open_for_write(target)
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(records)
    except OSError as e:
        raise IoFailure(f"write failed: {e}") from e
    finally:
        if owned:
            fh.close()


def export_timeseries_csv(rows, target) -> None:
    _write(target, TIMESERIES_HEADER,
           ([format_seconds(r.at), r.default_rate_pps, r.backup_rate_pps, r.mitigating] for r in rows))


def export_summary_csv(rows, target) -> None:
    _write(target, SUMMARY_HEADER, (
        [r.scenario, r.offered_qps, f"{r.completion_rate:.6f}", f"{r.avg_latency_ms:.3f}", r.mitigation_windows]
        for r in rows
    ))


def _read(source, header):
    try:
        if hasattr(source, "read"):
            text = source.read()
        else:
            with open(source, encoding="utf-8", newline="") as fh:
                text = fh.read()
    except OSError as e:
        raise IoFailure(f"cannot read {source}: {e}") from e
    reader = csv.reader(io.StringIO(text))
    got = next(reader, None)
    if got != header:
        raise IoFailure(f"unexpected header {got}, wanted {header}")
    return list(reader)


def read_timeseries_csv(source) -> list[PollRow]:
    return [PollRow(parse_seconds(t), int(b), int(r), int(m)) for t, b, r, m in _read(source, TIMESERIES_HEADER)]


def read_summary_csv(source) -> list[SummaryRow]:
    return [
        SummaryRow(s, int(q), float(c), float(lat), int(w))
        for s, q, c, lat, w in _read(source, SUMMARY_HEADER)
    ]


def ensure_dir(path) -> None:
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as e:
        raise IoFailure(f"cannot create {path}: {e}") from e
