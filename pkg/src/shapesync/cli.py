"""Command-line entry point: ``shapesync {simulate,demo,analyze,sweep}``.

Exit status is 0 on success, 1 on invalid input and 2 when integration
aborts.
"""

import argparse
import logging
import sys

from .config import DEMOS, demo_config, load_config
from .errors import IntegrationError, ValidationError
from . import runner

EXIT_OK, EXIT_INVALID, EXIT_ABORT = 0, 1, 2


def build_parser():
    ap = argparse.ArgumentParser(prog="shapesync", description="Consensus shape matching of rigid polytopes")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out-dir", default=".", help="directory for output files")
    common.add_argument("--seed", type=int, default=None, help="override init.seed")
    common.add_argument("--quiet", action="store_true", help="suppress the summary")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="run a scenario file (JSON or YAML)")
    p.add_argument("config")

    p = sub.add_parser("demo", parents=[common], help="run a built-in scenario")
    p.add_argument("name", choices=sorted(DEMOS))

    p = sub.add_parser("analyze", parents=[common], help="rate fits and bound checks on a diagnostics file")
    p.add_argument("diagnostics")
    p.add_argument("--window", type=float, nargs=2, metavar=("T0", "T1"), default=None)

    p = sub.add_parser("sweep", parents=[common], help="run every scenario matching a glob")
    p.add_argument("pattern")
    p.add_argument("--workers", type=int, default=None)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "simulate":
            config = load_config(args.config)
        elif args.command == "demo":
            config = demo_config(args.name)
        if args.command in ("simulate", "demo"):
            if args.seed is not None:
                config = config.with_seed(args.seed)
            runner.run(config, args.out_dir, quiet=args.quiet)
        elif args.command == "analyze":
            runner.analyze(args.diagnostics, window=args.window, quiet=args.quiet)
        else:
            runner.sweep(args.pattern, args.out_dir, seed=args.seed, workers=args.workers, quiet=args.quiet)
    except (ValidationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except IntegrationError as exc:
        print(f"integration aborted: {exc}", file=sys.stderr)
        return EXIT_ABORT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
