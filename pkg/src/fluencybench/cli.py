"""Command line entry point.

Four subcommands, all driven by one TOML config:

    fluencybench clean    --config run.toml   normalize and correct a dataset
    fluencybench evaluate --config run.toml   score functions, write matrices
    fluencybench adapt    --config run.toml   sweep adaptive window sizes
    fluencybench report   --config run.toml   render tables and figures

Exit codes: 0 success, 2 configuration problem, 3 data problem, 4 backend
problem.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .config import BACKEND_KINDS, load_config
from .errors import FluencybenchError
from .report import render_report
from .runner import run_adapt, run_clean, run_evaluate

log = logging.getLogger(__name__)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fluencybench",
        description="Score next-item prediction functions on semantic fluency lists.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, blurb in (
        ("clean", "normalize, spell-correct, lemmatize and deduplicate a dataset"),
        ("evaluate", "score every configured function on every list"),
        ("adapt", "sweep adaptive function selection across window sizes"),
        ("report", "render report.md with tables and figures"),
    ):
        cmd = sub.add_parser(name, help=blurb)
        cmd.add_argument("--config", required=True, help="path to the run config TOML")
        cmd.add_argument("--output", help="override the output directory")
        cmd.add_argument("--jobs", type=int, help="parallel workers for scoring")
        cmd.add_argument(
            "--backend",
            choices=list(BACKEND_KINDS),
            help="override the masked-LM backend kind",
        )
        cmd.add_argument(
            "--resume",
            action="store_true",
            help="reuse cached (function, list) scores where present",
        )
        cmd.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        config = load_config(
            args.config,
            output_dir=args.output,
            jobs=args.jobs,
            backend_kind=args.backend,
            resume=args.resume,
        )
        if args.command == "clean":
            summary = run_clean(config)
            log.info(
                "cleaned %d lists (%d items, %d changed)",
                summary["lists"],
                summary["items"],
                summary["changed_items"],
            )
        elif args.command == "evaluate":
            summary = run_evaluate(config)
            log.info(
                "scored %d functions on %d lists", len(summary["functions"]), summary["lists"]
            )
        elif args.command == "adapt":
            run_adapt(config)
            log.info("adaptive sweep written to %s", config.output_dir / "adaptive")
        else:
            report_path = render_report(config.output_dir)
            log.info("report written to %s", report_path)
    except FluencybenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
