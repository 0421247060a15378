import pytest

from mtdns.dns import DnsServer, Lifecycle, ServerRole
from mtdns.errors import AlreadyDown, AlreadyRequested
from mtdns.sim import Engine, EventKind
from mtdns.vnf import Desired, VnfManager

S = 1_000_000


def setup(base=975, probe=250_000):
    eng = Engine()
    srv = DnsServer("backup", ServerRole.BACKUP, 1000, 10, base)
    events = []
    vnf = VnfManager(eng, {"backup": srv}, 5 * S, probe,
                     on_boot=lambda sid, t: events.append(("boot", t)),
                     on_ready=lambda sid, t: events.append(("ready", t)))
    return eng, srv, vnf, events


def test_boot_then_probe_confirms_readiness():
    eng, srv, vnf, events = setup()
    eng.at(20 * S, EventKind.FLOW_MOD, lambda t: vnf.request_start("backup", t), "start")
    eng.run_until(30 * S)
    # boot completes at 25 s; the ping due at 25 s fires after it and is answered one base latency later
    assert events == [("boot", 25 * S), ("ready", 25 * S + 975)]
    pings = [line for line in eng.log if "ProbePing" in line]
    assert len(pings) == 20 and pings[-1].startswith(f"{25 * S} ")
    assert vnf.is_ready("backup")
    assert vnf.resource_log == [(20 * S, "backup", "allocated"), (25 * S + 975, "backup", "ready")]
    rec = vnf.records["backup"]
    assert rec.desired is Desired.UP and rec.actual.phase is Lifecycle.OPERATIONAL


def test_not_ready_while_booting():
    eng, srv, vnf, _ = setup()
    vnf.request_start("backup", 0)
    eng.run_until(4 * S)
    assert vnf.is_up("backup") and not vnf.is_ready("backup")
    assert srv.state.phase is Lifecycle.BOOTING and srv.state.until == 5 * S


def test_stop_during_boot_cancels_pending_events():
    eng, srv, vnf, events = setup()
    vnf.request_start("backup", 0)
    eng.at(2 * S, EventKind.FLOW_MOD, lambda t: vnf.request_stop("backup", t), "stop")
    eng.run_until(10 * S)
    assert events == []
    assert f"{2 * S} - cancel BootComplete backup" in eng.log
    assert any("cancel ProbePing" in line for line in eng.log)
    assert srv.phase is Lifecycle.OFF
    assert vnf.still_running() == []
    assert vnf.resource_log[-1] == (2 * S, "backup", "deallocated")


def test_restart_after_stop():
    eng, srv, vnf, events = setup()
    vnf.request_start("backup", 0)
    eng.run_until(6 * S)
    vnf.request_stop("backup", 6 * S)
    vnf.request_start("backup", 6 * S)
    assert not vnf.is_ready("backup")
    eng.run_until(12 * S)
    assert [e for e, _ in events] == ["boot", "ready", "boot", "ready"]
    assert [kind for _, _, kind in vnf.resource_log] == ["allocated", "ready", "deallocated", "allocated", "ready"]


def test_duplicate_requests():
    eng, srv, vnf, _ = setup()
    with pytest.raises(AlreadyDown):
        vnf.request_stop("backup", 0)
    vnf.request_start("backup", 0)
    with pytest.raises(AlreadyRequested):
        vnf.request_start("backup", 1)
    assert vnf.still_running() == ["backup"]
