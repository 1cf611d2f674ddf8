"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 invalid configuration, 3 run failure.
The output directory defaults to ``$QOSCOMPOSE_OUT`` when set, else ``out``.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from .config import METHODS, ConfigError, apply_overrides, default_config, load
from .experiments import run_batch, run_scenario
from .metrics import metrics_from_trace
from .trace import TraceError

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_RUN = 0, 1, 2, 3
OUT_ENV = "QOSCOMPOSE_OUT"

log = logging.getLogger("qoscompose")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def parse_seeds(text: str) -> list[int]:
    """``20`` means seeds 1..20; ``3-7`` and ``1,4,9`` are explicit lists."""
    try:
        if "," in text:
            seeds = [int(s) for s in text.split(",") if s.strip()]
        elif "-" in text.strip("-"):
            lo, hi = text.split("-", 1)
            seeds = list(range(int(lo), int(hi) + 1))
        else:
            seeds = list(range(1, int(text) + 1))
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid seed list {text!r}") from None
    if not seeds:
        raise argparse.ArgumentTypeError(f"seed list {text!r} is empty")
    return seeds


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _scenario_flags(p: argparse.ArgumentParser, seed=True, method=True):
    p.add_argument("--config", type=Path, help="scenario JSON (default: shipped defaults)")
    if seed:
        p.add_argument("--seed", type=int)
    p.add_argument("--nodes", type=int)
    p.add_argument("--duration", type=float)
    p.add_argument("--range", type=float, help="radio range in metres")
    if method:
        p.add_argument("--method", choices=METHODS)
    p.add_argument("--ttl", type=int)
    p.add_argument("--plan-size", type=int)
    p.add_argument("--out", type=Path, help=f"output directory (default: ${OUT_ENV} or ./out)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qoscompose",
                     description="QoS-constrained service composition in a simulated MANET.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("run", help="simulate one scenario")
    _scenario_flags(p)

    p = sub.add_parser("compare", help="paired comparison of both methods over seeds")
    _scenario_flags(p, seed=False, method=False)
    p.add_argument("--seeds", type=parse_seeds, default=parse_seeds("20"),
                   help="N for seeds 1..N, or A-B, or a comma list (default 20)")
    p.add_argument("--workers", type=_positive_int, default=1)

    p = sub.add_parser("replay", help="recompute metrics from a trace file")
    p.add_argument("trace", type=Path)
    p.add_argument("--config", type=Path,
                   help="config the trace was produced with "
                        "(default: config.resolved next to the trace)")
    p.add_argument("--out", type=Path, help="write metrics.csv here instead of stdout")

    p = sub.add_parser("validate", help="check a config file")
    p.add_argument("config", type=Path, nargs="?",
                   help="config to check (default: the shipped default config)")
    return parser


def _out_dir(args) -> Path:
    if args.out is not None:
        return args.out
    return Path(os.environ.get(OUT_ENV) or "out")


def _scenario(args):
    cfg = load(args.config) if args.config is not None else default_config()
    return apply_overrides(cfg, seed=getattr(args, "seed", None), nodes=args.nodes,
                           duration=args.duration, range=args.range,
                           method=getattr(args, "method", None), ttl=args.ttl,
                           plan_size=args.plan_size)


def _cmd_run(args) -> int:
    cfg = _scenario(args)
    out = _out_dir(args)
    report = run_scenario(cfg, out)
    eff = "n/a" if report.efficiency is None else f"{report.efficiency:.4f}"
    print(f"seed={cfg.seed} method={cfg.method} attempts={report.attempts} "
          f"successes={report.successes} path_failures={report.total_path_failures} "
          f"throughput_bps={report.mean_throughput:.1f} efficiency={eff}")
    print(f"wrote {out}")
    return EXIT_OK


def _cmd_compare(args) -> int:
    cfg = _scenario(args)
    out = _out_dir(args)
    summary, _ = run_batch(cfg, args.seeds, METHODS, out, workers=args.workers)
    sys.stdout.write(summary.table())
    print(f"wrote {out}")
    return EXIT_OK


def _cmd_replay(args) -> int:
    cfg_path = args.config or args.trace.parent / "config.resolved"
    if not args.trace.is_file():
        raise UsageError(f"replay: no such trace file: {args.trace}")
    if not cfg_path.is_file():
        raise UsageError(f"replay: no config given and {cfg_path} does not exist")
    report = metrics_from_trace(args.trace, load(cfg_path))
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "metrics.csv").write_text(report.to_csv())
        print(f"wrote {args.out / 'metrics.csv'}")
    else:
        sys.stdout.write(report.to_csv())
    return EXIT_OK


def _cmd_validate(args) -> int:
    cfg = load(args.config) if args.config is not None else default_config()
    print(f"ok config={cfg.config_hash()}")
    return EXIT_OK


COMMANDS = {"run": _cmd_run, "compare": _cmd_compare, "replay": _cmd_replay,
            "validate": _cmd_validate}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TraceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUN
    except KeyboardInterrupt:
        print("error: interrupted", file=sys.stderr)
        return EXIT_RUN
    except Exception as exc:  # last line of defence: report, never dump a traceback
        log.debug("run failed", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUN


if __name__ == "__main__":
    sys.exit(main())
