"""Command-line entry point: ``paintstyle <stage> [options]``."""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

from .errors import ConfigError, InputError, PaintStyleError, PipelineError
from .pipeline import render_report, run_all, run_embed, run_extract, run_topics, run_vocab
from .pipeline.config import _parse_patterns, load_config

EXIT_OK = 0
EXIT_INPUT = 3
EXIT_CONFIG = 4
EXIT_PIPELINE = 5

log = logging.getLogger("paintstyle")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML config file")
    common.add_argument("--seed", type=int, help="seed for every stochastic stage")
    common.add_argument("--out-dir", default="paintstyle-out", help="stage file directory (default: %(default)s)")
    common.add_argument("--jobs", type=int, default=1, help="worker processes/threads (default: 1)")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress")

    images = argparse.ArgumentParser(add_help=False)
    images.add_argument("images", nargs="*", help="panel images (PNG/TIFF); ids default to file stems")
    images.add_argument("--csv", action="store_true", help="also export features as CSV")

    patterns = argparse.ArgumentParser(add_help=False)
    patterns.add_argument("--patterns", action="append", metavar="LIST",
                          help="comma-separated pattern numbers for a heatmap, e.g. 6,8 (repeatable)")

    parser = argparse.ArgumentParser(prog="paintstyle", description="Painting stylometry pipeline.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("extract", parents=[common, images], help="tile panels and extract HMT features")
    sub.add_parser("vocab", parents=[common], help="build the keyword vocabulary and label patches")
    sub.add_parser("topics", parents=[common], help="fit the pattern (topic) model")
    sub.add_parser("embed", parents=[common], help="t-SNE map of sub-image pattern weights")
    sub.add_parser("report", parents=[common, patterns], help="profiles, heatmaps and scatter")
    sub.add_parser("run-all", parents=[common, images, patterns], help="run every enabled stage")
    return parser


def _config(args):
    cfg = load_config(args.config).with_overrides(seed=args.seed, images=getattr(args, "images", None))
    if getattr(args, "csv", False):
        cfg = dataclasses.replace(cfg, features=dataclasses.replace(cfg.features, csv=True))
    if getattr(args, "patterns", None):
        subsets = _parse_patterns(args.patterns)
        cfg = dataclasses.replace(cfg, report=dataclasses.replace(cfg.report, patterns=subsets))
    if args.jobs < 1:
        raise ConfigError("--jobs must be at least 1")
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config(args)
        out, jobs = args.out_dir, args.jobs
        failures = []
        if args.command == "extract":
            failures = run_extract(cfg, out, jobs).failures
        elif args.command == "vocab":
            run_vocab(cfg, out)
        elif args.command == "topics":
            run_topics(cfg, out, jobs)
        elif args.command == "embed":
            run_embed(cfg, out)
        elif args.command == "report":
            render_report(cfg, out)
        else:
            failures = run_all(cfg, out, jobs).failures
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except PipelineError as exc:
        print(f"pipeline error: {exc}", file=sys.stderr)
        return EXIT_PIPELINE
    except PaintStyleError as exc:  # pragma: no cover - every subclass is handled above
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PIPELINE
    if failures:
        for pid, msg in failures:
            print(f"input error: panel {pid} skipped: {msg}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
