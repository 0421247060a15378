from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from mtdns.controller import (
    DEFAULT_RULE_ID,
    MTD_GROUP_ID,
    REQUEST_RULE_ID,
    RESPONSE_RULE_ID,
    ControlAction,
    MtdController,
    RateSource,
    compute_rate,
    derive_thresholds,
    exact,
    install_base_rules,
    should_revert,
)
from mtdns.dataplane import DNS_PORT, ApplyGroup, ForwardTo, Packet, PacketKind, Protocol, Switch
from mtdns.errors import AlreadyMitigating, BackupNotReady, CounterRegression, InvalidThreshold, NotMitigating
from mtdns.sim import Stream

W = 2_000_000


def build(ready=True, up=True, weights=(50, 50), enabled=True):
    sw = Switch(Stream(1, "bucket-select").uniforms)
    install_base_rules(sw, "default")
    flags = {"ready": ready, "up": up}
    ctl = MtdController(sw, derive_thresholds(15000), W, "default", "backup",
                        backup_ready=lambda: flags["ready"], backup_up=lambda: flags["up"],
                        bucket_weights=weights, enabled=enabled)
    return sw, ctl, flags


def send(sw, n):
    for i in range(n):
        sw.process_packet(Packet(0, i, "client-0", "default", Protocol.UDP, DNS_PORT, 28, PacketKind.DNS_REQUEST, i))


def test_thresholds():
    th = derive_thresholds(15000)
    assert th.t1_startup == 7500 and th.drop_fraction == Fraction(2, 5)
    assert derive_thresholds(0.1).t1_startup == Fraction(1, 20)
    for bad in (0, -1):
        with pytest.raises(InvalidThreshold):
            derive_thresholds(bad)
    with pytest.raises(InvalidThreshold):
        derive_thresholds(10, drop_fraction=1)


def test_exact_uses_decimal_repr_of_floats():
    assert exact(0.1) == Fraction(1, 10)
    assert exact("2.5") == Fraction(5, 2)


def test_compute_rate():
    assert compute_rate(100, 20_100, W) == 10_000
    with pytest.raises(CounterRegression):
        compute_rate(5, 4, W)
    with pytest.raises(ValueError):
        compute_rate(0, 1, 0)


def test_revert_boundary_example():
    assert should_revert(16000, 9600, Fraction(2, 5))
    assert not should_revert(16000, 9601, Fraction(2, 5))


@given(prev=st.integers(0, 10**7), cur=st.integers(0, 10**7))
def test_revert_rule(prev, cur):
    assert should_revert(prev, cur, "0.4") == (5 * cur <= 3 * prev)


def test_flow_handler_starts_backup_then_activates():
    sw, ctl, flags = build(ready=False, up=False)
    send(sw, 2 * 8000)  # 8000 pps: above t1 only
    assert ctl.on_stats_poll(W) == [ControlAction.START_BACKUP]
    flags["up"] = True
    send(sw, 2 * 16000)
    assert ctl.on_stats_poll(2 * W) == []  # backup not ready yet
    flags["ready"] = True
    send(sw, 2 * 16000)
    assert ctl.on_stats_poll(3 * W) == [ControlAction.ACTIVATE]
    assert ctl.handler_calls == {"flow": 3, "group": 0}
    rates = [s.rate for s in ctl.state.history[RateSource.DEFAULT_RULE]]
    assert rates == [8000, 16000, 16000]


def test_rate_equal_to_threshold_does_not_trigger():
    sw, ctl, flags = build(ready=True, up=False)
    send(sw, 2 * 7500)
    assert ctl.on_stats_poll(W) == []
    send(sw, 2 * 15000)
    assert ctl.on_stats_poll(2 * W) == [ControlAction.START_BACKUP]


def test_activate_and_deactivate_cycle_restores_table():
    sw, ctl, _ = build()
    before = sw.table()
    ctl.activate_mitigation(0)
    assert sw.rules[REQUEST_RULE_ID].action == ApplyGroup(MTD_GROUP_ID)
    assert RESPONSE_RULE_ID in sw.rules
    with pytest.raises(AlreadyMitigating):
        ctl.activate_mitigation(1)
    send(sw, 1000)
    backup_hits = sw.read_stats(MTD_GROUP_ID, group=True).buckets[1]
    assert ctl.backup_bucket_total() == backup_hits
    ctl.deactivate_mitigation(W)
    assert sw.table() == before
    assert sw.rules[REQUEST_RULE_ID].action == ForwardTo("default")
    assert ctl.backup_bucket_total() == backup_hits
    with pytest.raises(NotMitigating):
        ctl.deactivate_mitigation(W)
    # a second cycle behaves like the first
    ctl.activate_mitigation(W)
    ctl.deactivate_mitigation(2 * W)
    assert sw.table() == before
    assert ctl.activations == [0, W] and ctl.deactivations == [W, 2 * W]


def test_activation_requires_ready_backup():
    _, ctl, _ = build(ready=False)
    with pytest.raises(BackupNotReady):
        ctl.activate_mitigation(0)


def test_group_handler_reverts_on_drop():
    sw, ctl, _ = build()
    send(sw, 2 * 16000)
    ctl.on_stats_poll(W)
    ctl.activate_mitigation(W)
    send(sw, 2 * 16000)
    assert ctl.on_stats_poll(2 * W) == []
    send(sw, 2 * 9600)
    assert ctl.on_stats_poll(3 * W) == [ControlAction.DEACTIVATE]
    assert ctl.handler_calls == {"flow": 1, "group": 2}


def test_zero_weight_bucket_is_omitted():
    sw, ctl, _ = build(weights=(0, 100))
    ctl.activate_mitigation(0)
    g = sw.groups[MTD_GROUP_ID]
    assert len(g.buckets) == 1 and g.buckets[0].action == ForwardTo("backup")
    send(sw, 10)
    assert ctl.backup_bucket_total() == 10


def test_monitor_only_returns_no_actions():
    sw, ctl, _ = build(up=False, enabled=False)
    send(sw, 2 * 50000)
    assert ctl.on_stats_poll(W) == []
    assert ctl.state.prev_rate == 50000


def test_mitigating_flag_covers_whole_window():
    sw, ctl, _ = build()
    assert not ctl.take_mitigating_flag()
    ctl.activate_mitigation(0)
    ctl.deactivate_mitigation(1)
    assert ctl.take_mitigating_flag()
    assert not ctl.take_mitigating_flag()


def test_default_rule_carries_other_traffic():
    sw, _, _ = build()
    sw.process_packet(Packet(0, 0, "default", "backup", Protocol.TCP, DNS_PORT, 64, PacketKind.ZONE_TRANSFER))
    assert sw.read_stats(DEFAULT_RULE_ID).packet_count == 1
    assert sw.read_stats(REQUEST_RULE_ID).packet_count == 0
