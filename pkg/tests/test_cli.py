import json
import subprocess
import sys

import pytest

from mtdns import cli
from mtdns.errors import IncompatibleScenarios
from mtdns.metrics import SummaryRow, read_summary_csv, read_timeseries_csv
from mtdns.scenario import load_scenario


@pytest.fixture(scope="module")
def quiescent_out(tmp_path_factory):
    out = tmp_path_factory.mktemp("q")
    assert cli.main(["run", "--scenario", "quiescent", "--out", str(out)]) == 0
    return out


def test_run_writes_outputs(quiescent_out, capsys):
    names = sorted(p.name for p in quiescent_out.iterdir())
    assert names == ["quiescent_mtd-on_report.json", "quiescent_mtd-on_summary.csv",
                     "quiescent_mtd-on_timeseries.csv"]
    (row,) = read_summary_csv(quiescent_out / "quiescent_mtd-on_summary.csv")
    assert row.scenario == "quiescent/mtd=on" and row.completion_rate == 1.0 and row.mitigation_windows == 0
    ts = read_timeseries_csv(quiescent_out / "quiescent_mtd-on_timeseries.csv")
    assert len(ts) == 15 and {r.default_rate_pps for r in ts} == {5000}
    report = json.loads((quiescent_out / "quiescent_mtd-on_report.json").read_text())
    assert report["config"]["t2_balance_pps"] == 15000
    assert report["still_running"] == {"quiescent/mtd=on": []}


def test_compare_identical_is_zero(quiescent_out, capsys):
    p = str(quiescent_out / "quiescent_mtd-on_summary.csv")
    assert cli.main(["compare", p, p]) == 0
    out = capsys.readouterr().out
    assert "+0.00" in out and "1.000" in out


def test_compare_rows():
    a = [SummaryRow.build("x", q, 0.8, 4.0, 0) for q in (1, 2)]
    b = [SummaryRow.build("y", q, 0.99, 1.0, 1) for q in (1, 2)]
    d = cli.compare_rows(a, b)
    assert [x.offered_qps for x in d] == [1, 2]
    assert d[0].completion_gain_pp == pytest.approx(19.0)
    assert d[0].latency_ratio == pytest.approx(0.25)
    with pytest.raises(IncompatibleScenarios):
        cli.compare_rows(a, b[:1])
    with pytest.raises(IncompatibleScenarios):
        cli.compare_rows(a + a[:1], b)


def test_compare_rejects_different_shapes():
    a = cli.RunReport({}, [], shape=cli.workload_shape(load_scenario("tables")))
    b = cli.RunReport({}, [], shape=cli.workload_shape(load_scenario("figure")))
    with pytest.raises(IncompatibleScenarios):
        cli.compare(a, b)


def test_variant_label():
    cfg = load_scenario("tables")
    cfg.mtdns_enabled = False
    assert cli.variant_label(cfg, "flood=50000") == "tables/flood=50000/mtd=off"


def test_errors_exit_2(tmp_path, capsys):
    assert cli.main(["run", "--scenario", "no-such-scenario"]) == 2
    bad = tmp_path / "bad.scenario"
    bad.write_text("sim_duration_s = = 1\n")
    assert cli.main(["run", "--scenario", str(bad)]) == 2
    assert cli.main(["compare", str(tmp_path / "a.csv"), str(tmp_path / "b.csv")]) == 2
    assert "error:" in capsys.readouterr().err
    with pytest.raises(SystemExit) as e:
        cli.main([])
    assert e.value.code == 2


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "mtdns", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "compare" in r.stdout


def test_calibrate_command(capsys):
    assert cli.main(["calibrate"]) == 0
    assert "97000" in capsys.readouterr().out
