"""Command line entry point: ``mtdns run | compare | calibrate``."""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from . import calibrate
from .errors import IncompatibleScenarios, MtdnsError
from .metrics import (
    ensure_dir,
    export_summary_csv,
    export_timeseries_csv,
    read_summary_csv,
)
from .scenario import ScenarioConfig, load_scenario
from .simulation import SimResult, run_scenario


@dataclass
class RunReport:
    config: dict
    summaries: list
    paths: list = field(default_factory=list)
    event_counts: dict = field(default_factory=dict)
    runtime_s: float = 0.0
    results: list = field(default_factory=list, repr=False)
    shape: dict | None = None

    def to_json(self) -> dict:
        return {
            "config": self.config,
            "summaries": [vars(s) for s in self.summaries],
            "paths": self.paths,
            "event_counts": self.event_counts,
            "runtime_s": self.runtime_s,
            "still_running": {r.label: r.still_running for r in self.results},
        }


@dataclass(frozen=True)
class DeltaRow:
    offered_qps: int
    completion_a: float
    completion_b: float
    completion_gain_pp: float
    latency_a_ms: float
    latency_b_ms: float
    latency_ratio: float
    latency_delta_ms: float


def workload_shape(cfg: ScenarioConfig) -> dict:
    """What two runs must share to be comparable (flood rates aside)."""
    c = cfg.client
    return {
        "sim_duration_s": cfg.sim_duration_s,
        "client": None if c is None else (c.qps, c.clients, c.duration_s, c.start_s),
        "floods": [(f.start_s, f.duration_s) for f in cfg.floods],
    }


def variant_label(cfg: ScenarioConfig, tag: str = "") -> str:
    parts = [cfg.name] + ([tag] if tag else []) + [f"mtd={'on' if cfg.mtdns_enabled else 'off'}"]
    return "/".join(parts)


def _run_one(args):
    cfg, label = args
    return run_scenario(cfg, label, keep_outcomes=False)


def run(cfg: ScenarioConfig, out_dir: str | None = None, jobs: int = 1, echo: bool = True) -> RunReport:
    t0 = time.perf_counter()
    variants = [(vcfg, variant_label(vcfg, tag)) for tag, vcfg in cfg.expand()]
    if jobs > 1 and len(variants) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results: list[SimResult] = list(pool.map(_run_one, variants))
    else:
        results = [_run_one(v) for v in variants]
    mtd = "mtd-on" if cfg.mtdns_enabled else "mtd-off"
    paths = []
    if out_dir is not None:
        ensure_dir(out_dir)
        for (vcfg, label), r in zip(variants, results):
            tag = label.split("/")[1:-1]
            stem = "_".join([cfg.name] + [t.replace("=", "") for t in tag] + [mtd])
            p = os.path.join(out_dir, f"{stem}_timeseries.csv")
            export_timeseries_csv(r.rows, p)
            paths.append(p)
        p = os.path.join(out_dir, f"{cfg.name}_{mtd}_summary.csv")
        export_summary_csv([r.summary for r in results], p)
        paths.append(p)
    counts = {r.label: r.event_counts for r in results}
    report = RunReport(cfg.echo(), [r.summary for r in results], paths, counts,
                       time.perf_counter() - t0, results, workload_shape(cfg))
    if out_dir is not None:
        p = os.path.join(out_dir, f"{cfg.name}_{mtd}_report.json")
        with open(p, "w", encoding="utf-8") as fh:
            json.dump(report.to_json(), fh, indent=2, sort_keys=True, default=str)
        report.paths.append(p)
    if echo:
        print_summary(report.summaries)
    return report


def _by_qps(rows, which: str) -> dict:
    out = {}
    for r in rows:
        if r.offered_qps in out:
            raise IncompatibleScenarios(f"{which} has more than one row for offered_qps {r.offered_qps}")
        out[r.offered_qps] = r
    return out


def compare_rows(rows_a, rows_b) -> list[DeltaRow]:
    a, b = _by_qps(rows_a, "first report"), _by_qps(rows_b, "second report")
    if set(a) != set(b):
        raise IncompatibleScenarios(f"offered_qps differ: {sorted(a)} vs {sorted(b)}")
    out = []
    for q in sorted(a):
        ra, rb = a[q], b[q]
        out.append(DeltaRow(
            q, ra.completion_rate, rb.completion_rate,
            (rb.completion_rate - ra.completion_rate) * 100,
            ra.avg_latency_ms, rb.avg_latency_ms,
            rb.avg_latency_ms / ra.avg_latency_ms if ra.avg_latency_ms else float("nan"),
            rb.avg_latency_ms - ra.avg_latency_ms,
        ))
    return out


def compare(report_a: RunReport, report_b: RunReport) -> list[DeltaRow]:
    """Deltas of ``b`` relative to ``a`` (gain = b - a, ratio = b / a)."""
    if report_a.shape is not None and report_b.shape is not None and report_a.shape != report_b.shape:
        raise IncompatibleScenarios(f"workload shapes differ: {report_a.shape} vs {report_b.shape}")
    return compare_rows(report_a.summaries, report_b.summaries)


def print_summary(rows, stream=None) -> None:
    stream = stream or sys.stdout
    print(f"{'scenario':<34} {'offered_qps':>11} {'completion':>10} {'latency_ms':>10} {'windows':>7}", file=stream)
    for r in rows:
        print(f"{r.scenario:<34} {r.offered_qps:>11} {r.completion_rate * 100:>9.2f}% "
              f"{r.avg_latency_ms:>10.3f} {r.mitigation_windows:>7}", file=stream)


def print_deltas(deltas, stream=None) -> None:
    stream = stream or sys.stdout
    print(f"{'offered_qps':>11} {'completion_a':>12} {'completion_b':>12} {'gain_pp':>8} "
          f"{'latency_a':>9} {'latency_b':>9} {'ratio':>6} {'delta_ms':>8}", file=stream)
    for d in deltas:
        print(f"{d.offered_qps:>11} {d.completion_a * 100:>11.2f}% {d.completion_b * 100:>11.2f}% "
              f"{d.completion_gain_pp:>+8.2f} {d.latency_a_ms:>9.3f} {d.latency_b_ms:>9.3f} "
              f"{d.latency_ratio:>6.3f} {d.latency_delta_ms:>+8.3f}", file=stream)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mtdns", description="Moving-target DNS defence simulator")
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a scenario and write CSV results")
    r.add_argument("--scenario", required=True, help="scenario file, or a bundled name (figure, tables, quiescent)")
    r.add_argument("--seed", type=int, help="override the scenario seed")
    r.add_argument("--out", help="directory for CSV output")
    r.add_argument("--no-mtd", action="store_true", help="monitor only; never mitigate")
    r.add_argument("--jobs", type=int, default=1, help="run variants in parallel processes")

    c = sub.add_parser("compare", help="compare two summary CSVs (second relative to first)")
    c.add_argument("summary_a")
    c.add_argument("summary_b")

    sub.add_parser("calibrate", help="refit default server parameters")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            cfg = load_scenario(args.scenario)
            if args.seed is not None:
                cfg.seed = args.seed
            if args.no_mtd:
                cfg.mtdns_enabled = False
            report = run(cfg, args.out, jobs=max(1, args.jobs))
            for p in report.paths:
                print(f"wrote {p}")
            print(f"runtime {report.runtime_s:.2f} s")
        elif args.command == "compare":
            print_deltas(compare_rows(read_summary_csv(args.summary_a), read_summary_csv(args.summary_b)))
        else:
            return calibrate.main([])
    except (MtdnsError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
