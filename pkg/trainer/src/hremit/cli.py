"""Command line entry point: hremit-train.

Exit codes: 0 success, 2 configuration/usage error, 3 unreadable input,
4 training failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .errors import ConfigError, FormatError, TrainingError
from .train import TrainConfig, config_from_text, train_and_export


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="hremit-train",
        description="Train the emission network on labelled session directories "
                    "and export per-window HR distributions.",
    )
    p.add_argument("--train", action="append", required=True, metavar="DIR",
                   help="training session directory (repeatable)")
    p.add_argument("--eval", action="append", default=[], metavar="DIR",
                   help="held-out session to export emissions for (repeatable)")
    p.add_argument("--out", required=True, metavar="DIR",
                   help="directory receiving one .emissions file per session")
    p.add_argument("--config", metavar="FILE",
                   help="key=value configuration file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="single configuration override (repeatable)")
    p.add_argument("-v", "--verbose", action="store_true",
                   help="log per-epoch losses and skipped windows")
    return p


def load_config(args) -> TrainConfig:
    config = TrainConfig()
    if args.config:
        try:
            with open(args.config, "r", encoding="ascii") as fh:
                config = config_from_text(fh, config)
        except OSError as exc:
            raise FormatError(f"cannot read config {args.config}: {exc}")
    if args.set:
        config = config_from_text(args.set, config)
    return config


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(stream=sys.stderr, format="%(name)s: %(message)s",
                        level=logging.DEBUG if args.verbose else logging.INFO)
    try:
        config = load_config(args)
        written = train_and_export(args.train, args.out, config, eval_dirs=args.eval)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except TrainingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    for name in sorted(written):
        print(f"{name}\t{written[name]}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
