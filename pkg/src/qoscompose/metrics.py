"""The three run metrics, computed purely from a trace.

* path failures per time bin (one per broken composition execution);
* throughput per time bin, composition payload bits delivered back to the
  initiator divided by the bin width (stage-to-stage transfers of a path
  that later breaks are not counted);
* composition efficiency, successful composite requests over attempted ones.

A request that fails, is recomposed and then succeeds contributes one path
failure and one success. Accounting identity: ``successes + giveups <=
attempts``; the difference is requests still in flight when the run ends.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .config import ScenarioConfig
from .trace import TraceRecord, header_fields, read_trace


@dataclass
class MetricsReport:
    bin_width: float
    duration: float
    path_failures: list[int]
    throughput: list[float]  # bits/s per bin
    attempts: int = 0
    successes: int = 0
    giveups: int = 0
    delivered_bits: int = 0
    seed: Optional[int] = None
    method: Optional[str] = None
    config_hash: Optional[str] = None

    @property
    def bins(self) -> list[tuple[float, float]]:
        return [(i * self.bin_width, min((i + 1) * self.bin_width, self.duration))
                for i in range(len(self.path_failures))]

    @property
    def efficiency(self) -> Optional[float]:
        return self.successes / self.attempts if self.attempts else None

    @property
    def total_path_failures(self) -> int:
        return sum(self.path_failures)

    @property
    def mean_throughput(self) -> float:
        return self.delivered_bits / self.duration if self.duration > 0 else 0.0

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["metric", "bin_start", "bin_end", "value"])
        for (lo, hi), v in zip(self.bins, self.path_failures):
            w.writerow(["path_failures", f"{lo:g}", f"{hi:g}", v])
        for (lo, hi), v in zip(self.bins, self.throughput):
            w.writerow(["throughput_bps", f"{lo:g}", f"{hi:g}", repr(v)])
        eff = "" if self.efficiency is None else repr(self.efficiency)
        for name, value in (("attempts", self.attempts), ("successes", self.successes),
                            ("giveups", self.giveups),
                            ("path_failures_total", self.total_path_failures),
                            ("delivered_bits", self.delivered_bits),
                            ("mean_throughput_bps", repr(self.mean_throughput)),
                            ("efficiency", eff)):
            w.writerow([name, "", "", value])
        return buf.getvalue()


def n_bins(duration: float, width: float) -> int:
    return math.ceil(duration / width) if duration > 0 else 0


def compute_metrics(records: Sequence[TraceRecord], cfg: ScenarioConfig,
                    header: Optional[str] = None) -> MetricsReport:
    width = float(cfg.bin_width)
    duration = float(cfg.duration)
    nb = n_bins(duration, width)
    failures = [0] * nb
    bits = [0] * nb

    def bin_of(t: float) -> int:
        return min(int(t // width), nb - 1)

    rep = MetricsReport(width, duration, failures, [], seed=cfg.seed, method=cfg.method,
                        config_hash=cfg.config_hash())
    if header is not None:
        meta = header_fields(header)
        rep.seed = int(meta.get("seed", cfg.seed))
        rep.method = meta.get("method", cfg.method)
        rep.config_hash = meta.get("config", rep.config_hash)
    for r in records:
        k = r.kind
        if k == "attempt":
            rep.attempts += 1
        elif k == "success":
            rep.successes += 1
        elif k == "giveup":
            rep.giveups += 1
        elif k == "path_fail":
            failures[bin_of(r.time)] += 1
        elif k == "deliver":
            b = r.int("bits")
            bits[bin_of(r.time)] += b
            rep.delivered_bits += b
    rep.throughput = [b / (hi - lo) if hi > lo else 0.0
                      for b, (lo, hi) in zip(bits, rep.bins)]
    return rep


def metrics_from_trace(path, cfg: ScenarioConfig) -> MetricsReport:
    header, records = read_trace(Path(path))
    return compute_metrics(records, cfg, header)
