import pytest

from mtdns.errors import ParseError, ValidationError
from mtdns.scenario import bundled_scenarios, load_scenario, parse_scenario

MINIMAL = """
sim_duration_s = 10
[[servers]]
role = "default"
service_rate = 1000
queue_capacity = 10
base_latency_us = 500
"""


def test_bundled():
    assert bundled_scenarios() == ["figure", "quiescent", "tables"]


def test_tables_scenario():
    cfg = load_scenario("tables")
    assert cfg.client.qps == 10000 and cfg.client.clients == 125 and cfg.client.duration_s == 20
    assert cfg.t2_balance_pps == 15000 and cfg.drop_fraction == pytest.approx(0.4)
    assert cfg.bucket_weights == [50, 50]
    variants = cfg.expand()
    assert [tag for tag, _ in variants] == ["flood=50000", "flood=100000", "flood=150000"]
    assert [v.offered_qps for _, v in variants] == [50000, 100000, 150000]
    assert all(v.variants == {} for _, v in variants)
    assert cfg.floods[0].payload == 120


def test_figure_scenario():
    cfg = load_scenario("figure")
    assert cfg.sim_duration_s == 120 and cfg.expand() == [("", cfg)]
    assert [f.start_s for f in cfg.floods] == [28.75, 78.75]


def test_defaults_are_echoed():
    cfg = parse_scenario(MINIMAL)
    assert cfg.t2_balance_pps == 15000
    echo = cfg.echo()
    assert echo["t2_balance_pps"] == 15000
    assert echo["poll_window_s"] == 2.0
    assert echo["servers"][1]["role"] == "backup"
    assert echo["servers"][1]["service_rate"] == 1000


def test_backup_inherits_default_params():
    cfg = parse_scenario(MINIMAL + '[[servers]]\nrole = "backup"\nqueue_capacity = 20\n')
    b = cfg.backup_server
    assert (b.service_rate, b.queue_capacity, b.base_latency_us) == (1000, 20, 500)


@pytest.mark.parametrize("extra, field", [
    ("poll_window_s = -2\n", "poll_window_s"),
    ("drop_fraction = 1.5\n", "drop_fraction"),
    ("bucket_weights = [0, 0]\n", "bucket_weights"),
    ("frobnicate = 1\n", "frobnicate"),
    ("t2_balance_pps = 0\n", "t2_balance_pps"),
])
def test_invalid_top_level(extra, field):
    with pytest.raises(ValidationError) as e:
        parse_scenario(extra + MINIMAL)
    assert e.value.field == field


def test_negative_flood_duration():
    with pytest.raises(ValidationError) as e:
        parse_scenario(MINIMAL + "[[floods]]\nqps = 10\nstart_s = 0\nduration_s = -1\n")
    assert e.value.field == "flood.duration_s"


def test_unknown_nested_key():
    with pytest.raises(ValidationError) as e:
        parse_scenario(MINIMAL + "[client]\nqps = 10\nburst = 3\n")
    assert e.value.field == "client.burst"


def test_missing_duration_and_servers():
    with pytest.raises(ValidationError):
        parse_scenario("seed = 1\n")
    with pytest.raises(ValidationError):
        parse_scenario("sim_duration_s = 1\n")


def test_parse_error_reports_line():
    with pytest.raises(ParseError) as e:
        parse_scenario("seed = 1\nsim_duration_s = = 3\n")
    assert e.value.line == 2


def test_missing_file():
    with pytest.raises(FileNotFoundError):
        load_scenario("/nonexistent/x.scenario")
