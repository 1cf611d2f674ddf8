"""Single runs, paired seed sweeps and their comparison summary."""

from __future__ import annotations

import csv
import io
import logging
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .config import METHODS, ScenarioConfig, from_dict
from .metrics import MetricsReport, compute_metrics
from .simulator import run
from .trace import read_trace

log = logging.getLogger(__name__)

# metric name -> (extractor, True when larger is better)
METRICS = {
    "path_failures": (lambda r: float(r.total_path_failures), False),
    "throughput_bps": (lambda r: r.mean_throughput, True),
    "efficiency": (lambda r: r.efficiency, True),
}


class RunFailure(RuntimeError):
    def __init__(self, seed: int, method: str, cause: BaseException):
        super().__init__(f"run failed for seed={seed} method={method}: {cause!r}")
        self.seed = seed
        self.method = method


def run_scenario(cfg: ScenarioConfig, out_dir: Optional[Path] = None) -> MetricsReport:
    """Run one scenario; with ``out_dir``, write config.resolved, trace.log and metrics.csv."""
    result = run(cfg)
    text = result.trace_text
    header, records = read_trace(text)
    report = compute_metrics(records, cfg, header)
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "config.resolved").write_text(cfg.to_json())
        (out_dir / "trace.log").write_text(text)
        (out_dir / "metrics.csv").write_text(report.to_csv())
    return report


def _job(args):
    data, out_dir = args
    cfg = from_dict(data)
    try:
        return cfg.seed, cfg.method, run_scenario(cfg, out_dir), None
    except Exception as exc:  # reported back to the parent with its (seed, method)
        return cfg.seed, cfg.method, None, exc


@dataclass
class MethodStats:
    mean: Optional[float]
    stdev: Optional[float]


@dataclass
class ComparisonSummary:
    seeds: list[int]
    methods: tuple[str, ...]
    stats: dict = field(default_factory=dict)  # (method, metric) -> MethodStats
    differences: dict = field(default_factory=dict)  # metric -> per-seed first minus second
    win_fraction: dict = field(default_factory=dict)  # metric -> share of seeds first method wins

    def table(self) -> str:
        a, b = self.methods[0], self.methods[-1]
        rows = [("metric", f"{a} mean", f"{a} sd", f"{b} mean", f"{b} sd",
                 "mean diff", f"{a} wins")]
        for m in METRICS:
            sa, sb = self.stats[(a, m)], self.stats[(b, m)]
            diffs = [d for d in self.differences[m] if d is not None]
            rows.append((m, _f(sa.mean), _f(sa.stdev), _f(sb.mean), _f(sb.stdev),
                         _f(statistics.fmean(diffs) if diffs else None),
                         _f(self.win_fraction[m])))
        widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
        return "\n".join("  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in rows) + "\n"

    def to_csv(self) -> str:
        a, b = self.methods[0], self.methods[-1]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["metric", "method", "mean", "stdev", "mean_diff", "win_fraction", "seeds"])
        for m in METRICS:
            diffs = [d for d in self.differences[m] if d is not None]
            mean_diff = statistics.fmean(diffs) if diffs else None
            for method in self.methods:
                st = self.stats[(method, m)]
                w.writerow([m, method, _r(st.mean), _r(st.stdev),
                            _r(mean_diff) if method == a else "",
                            _r(self.win_fraction[m]) if method == a else "", len(self.seeds)])
        w.writerow([])
        w.writerow(["seed"] + [f"diff_{m}" for m in METRICS])
        for i, s in enumerate(self.seeds):
            w.writerow([s] + [_r(self.differences[m][i]) for m in METRICS])
        return buf.getvalue()


def _f(x) -> str:
    return "n/a" if x is None else f"{x:.4g}"


def _r(x) -> str:
    return "" if x is None else repr(float(x))


def summarize(reports: dict, seeds: Sequence[int],
              methods: Sequence[str] = METHODS) -> ComparisonSummary:
    """Paired statistics of ``methods[0]`` against ``methods[-1]`` over ``seeds``."""
    methods = tuple(methods)
    summary = ComparisonSummary(list(seeds), methods)
    a, b = methods[0], methods[-1]
    for m, (get, larger_better) in METRICS.items():
        for method in methods:
            vals = [v for v in (get(reports[(s, method)]) for s in seeds) if v is not None]
            summary.stats[(method, m)] = MethodStats(
                statistics.fmean(vals) if vals else None,
                statistics.stdev(vals) if len(vals) > 1 else (0.0 if vals else None))
        diffs, wins = [], 0
        for s in seeds:
            va, vb = get(reports[(s, a)]), get(reports[(s, b)])
            if va is None or vb is None:
                diffs.append(None)
                continue
            diffs.append(va - vb)
            if (va > vb) if larger_better else (va < vb):
                wins += 1
        summary.differences[m] = diffs
        summary.win_fraction[m] = wins / len(seeds) if seeds else None
    return summary


def run_batch(cfg: ScenarioConfig, seeds: Iterable[int], methods: Sequence[str] = METHODS,
              out_dir: Optional[Path] = None, workers: int = 1
              ) -> tuple[ComparisonSummary, dict]:
    """Simulate every (seed, method) pair and compare the methods seed by seed.

    Any failing run aborts the batch with a :class:`RunFailure` naming it.
    """
    seeds = list(seeds)
    if not seeds:
        raise ValueError("need at least one seed")
    jobs = []
    for s in seeds:
        for method in methods:
            data = cfg.to_dict()
            data["seed"], data["method"] = s, method
            run_dir = None if out_dir is None else Path(out_dir) / method / f"seed_{s}"
            jobs.append((data, run_dir))
    reports = {}
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_job, jobs))
    else:
        outcomes = map(_job, jobs)
    for seed, method, report, exc in outcomes:
        if exc is not None:
            raise RunFailure(seed, method, exc) from exc
        log.info("seed %s %s: failures=%d throughput=%.1f efficiency=%s", seed, method,
                 report.total_path_failures, report.mean_throughput, report.efficiency)
        reports[(seed, method)] = report
    summary = summarize(reports, seeds, methods)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.resolved").write_text(cfg.to_json())
        (out / "summary.csv").write_text(summary.to_csv())
        (out / "summary.txt").write_text(summary.table())
    return summary, reports
