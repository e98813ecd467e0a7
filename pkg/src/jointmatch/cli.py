"""Command-line entry point: ``jointmatch {train,ablate,sweep,report}``.

Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.
"""

import argparse
import json
import logging
import sys

from . import harness
from .augment import AugmentConfigError
from .config import MODES, ConfigError, TrainConfig, apply_overrides, load_config
from .data import DataError

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _common(p):
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--seed", type=int, help="master seed (overrides the config)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override one config key; repeatable")
    p.add_argument("-v", "--verbose", action="store_true")


def _seed_list(text):
    try:
        if "-" in text and "," not in text:
            a, b = text.split("-")
            return list(range(int(a), int(b) + 1))
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad seed list {text!r}") from None


def build_parser():
    ap = _Parser(prog="jointmatch", description="Two-network semi-supervised training.")
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("train", help="one training run")
    _common(p)
    p.add_argument("--mode", choices=list(MODES))

    p = sub.add_parser("ablate", help="full model plus the four ablations")
    _common(p)
    p.add_argument("--seeds", type=_seed_list, help="e.g. 0-4 or 0,3,7 (default: --seed)")

    p = sub.add_parser("sweep", help="grid over one hyperparameter")
    _common(p)
    p.add_argument("--mode", choices=list(MODES))
    p.add_argument("--param", required=True, choices=list(harness.SWEEP_KEYS))
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--values", help="comma-separated values")
    g.add_argument("--standard-grid", action="store_true", help="use the standard grid")
    p.add_argument("--seeds", type=_seed_list, help="default: five seeds from --seed")

    p = sub.add_parser("report", help="summarize run directories")
    p.add_argument("runs", nargs="+", help="run directories")
    p.add_argument("--out", required=True)
    p.add_argument("-v", "--verbose", action="store_true")
    return ap


def _config(args):
    try:
        cfg = load_config(args.config) if args.config else TrainConfig()
    except OSError as exc:
        raise UsageError(f"cannot read config: {exc}") from None
    cfg = apply_overrides(cfg, args.set)
    if args.seed is not None:
        cfg = apply_overrides(cfg, [f"seed={args.seed}"])
    if getattr(args, "mode", None):
        cfg = cfg.with_mode(args.mode)
    return cfg.validate()


def _cmd_train(args):
    cfg = _config(args)
    res = harness.train(cfg, args.out)
    t = res.report["test"]["ensemble"]
    print(f"mode={res.report['mode']} test_accuracy={t['accuracy']:.4f} "
          f"macro_f1={t['macro_f1']:.4f} best_step={res.report['best_step']} -> {args.out}")


def _cmd_ablate(args):
    cfg = _config(args)
    results = harness.ablate(cfg, args.out, args.seeds)
    print(harness.markdown_table(harness.ablation_table(results)), end="")


def _cmd_sweep(args):
    cfg = _config(args)
    if args.standard_grid:
        values = harness.STANDARD_GRIDS[args.param]
    else:
        values = [v.strip() for v in args.values.split(",") if v.strip()]
        if not values:
            raise UsageError("--values is empty")
    key = harness.SWEEP_KEYS[args.param]
    # validate every grid point before spending compute
    for v in values:
        apply_overrides(cfg, [f"{key}={v}"]).validate()
    _, rows = harness.sweep(args.param, values, cfg, args.seeds, args.out)
    print(harness.markdown_table(rows), end="")


def _cmd_report(args):
    md, rows, skipped = harness.report(args.runs, args.out)
    print(md, end="")
    if not rows:
        raise RuntimeError("no readable run reports")


COMMANDS = {"train": _cmd_train, "ablate": _cmd_ablate, "sweep": _cmd_sweep,
            "report": _cmd_report}


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except (UsageError, ConfigError, AugmentConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except harness.TrainingDiverged as exc:
        print(f"error: {exc}", file=sys.stderr)
        print("last telemetry row: " + json.dumps(exc.last_row), file=sys.stderr)
        return EXIT_RUNTIME
    except (DataError, OSError, RuntimeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
