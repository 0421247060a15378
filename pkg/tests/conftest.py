import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from mtdns.cli import variant_label  # noqa: E402
from mtdns.scenario import load_scenario  # noqa: E402
from mtdns.simulation import run_scenario  # noqa: E402

CRITERIA = {}


def record_criterion(number, ok, detail):
    CRITERIA[number] = (ok, detail)
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}"
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        ok, detail = CRITERIA[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}")


def run_tables(seed=None, mtd=True):
    cfg = load_scenario("tables")
    if seed is not None:
        cfg.seed = seed
    out = {}
    for tag, vcfg in cfg.expand():
        vcfg.mtdns_enabled = mtd
        qps = vcfg.offered_qps
        out[qps] = run_scenario(vcfg, variant_label(vcfg, tag), keep_outcomes=False)
    return out


def run_named(name, seed=None, **kw):
    cfg = load_scenario(name)
    if seed is not None:
        cfg.seed = seed
    return run_scenario(cfg, variant_label(cfg), keep_outcomes=False, **kw)


@pytest.fixture(scope="session")
def tables_on():
    return run_tables(mtd=True)


@pytest.fixture(scope="session")
def tables_off():
    return run_tables(mtd=False)


@pytest.fixture(scope="session")
def figure_run():
    return run_named("figure")


@pytest.fixture(scope="session")
def quiescent_run():
    return run_named("quiescent")
