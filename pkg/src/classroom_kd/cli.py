# -*- coding: utf-8 -*-
"""
Command-line interface.

    ckd [--out ROOT] [--log-level LEVEL] pretrain <config>
    ckd ... distill <config> [--seed N]
    ckd ... ablate <suite.yaml> [--workers N]
    ckd ... report <run-dir>...
    ckd ... preset <name> [--write PATH]

``<config>`` is a YAML file or ``preset:<name>``. Exit codes: 0 success,
1 failed ablation cells, 2 configuration/usage error, 3 I/O error,
4 missing artifact, 5 numerical failure.
"""
import argparse
import logging
import sys
from pathlib import Path

from .config import settings
from .errors import ClassroomKDError, ConfigError
from .experiments import (
    PRESETS,
    get_preset,
    resolve_config,
    run_ablation,
    run_distill,
    run_pretrain,
)
from .logging_config import setup_logging
from .models import dump_model, load_suite
from .reporting import build_report, write_text

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CELLS_FAILED = 1
EXIT_USAGE = 2


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors, matching ConfigError."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _non_negative(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ckd", description="Multi-mentor classroom distillation experiments")
    parser.add_argument("--out", type=Path, default=None, help="output root (default: CKD_OUT_ROOT)")
    parser.add_argument(
        "--log-level",
        default=None,
        choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"],
        help="log level (default: CKD_LOG_LEVEL)",
    )
    commands = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    pretrain = commands.add_parser("pretrain", help="pretrain and save every mentor")
    pretrain.add_argument("config", help="YAML path or preset:<name>")

    distill = commands.add_parser("distill", help="distill a student against saved mentors")
    distill.add_argument("config", help="YAML path or preset:<name>")
    distill.add_argument("--seed", type=_non_negative, default=None, help="student init / shuffle seed")

    ablate = commands.add_parser("ablate", help="run an ablation suite")
    ablate.add_argument("suite", type=Path, help="suite YAML")
    ablate.add_argument("--workers", type=int, default=None, help="process pool size")

    report = commands.add_parser("report", help="plots and combined CSV from run directories")
    report.add_argument("run_dirs", nargs="*", type=Path)

    preset = commands.add_parser("preset", help="print or write a preset config")
    preset.add_argument("name", choices=sorted(PRESETS))
    preset.add_argument("--write", type=Path, default=None, help="write YAML here instead of stdout")
    return parser


def _cmd_pretrain(args, out_root: Path) -> int:
    outcome = run_pretrain(resolve_config(args.config), out_root)
    for model_id, top1 in outcome.test_top1.items():
        print(f"{model_id}\t{top1:.2f}")
    return EXIT_OK


def _cmd_distill(args, out_root: Path) -> int:
    outcome = run_distill(resolve_config(args.config), out_root, seed=args.seed)
    print(f"{outcome.run_dir}\t{outcome.result.final_test.top1:.2f}")
    return EXIT_OK


def _cmd_ablate(args, out_root: Path) -> int:
    if args.workers is not None and args.workers < 1:
        raise ConfigError("--workers must be >= 1")
    suite = load_suite(args.suite)
    outcome = run_ablation(suite, out_root, base_dir=args.suite.parent, workers=args.workers)
    print(outcome.aggregate.to_string(index=False))
    if outcome.failed:
        logger.error("Ablation cells failed", extra={"failed": outcome.failed})
        return EXIT_CELLS_FAILED
    return EXIT_OK


def _cmd_report(args, out_root: Path) -> int:
    if not args.run_dirs:
        raise ConfigError("report needs at least one run directory")
    result = build_report(args.run_dirs, out_root / "report")
    for path in result.files:
        print(path)
    return EXIT_OK


def _cmd_preset(args, out_root: Path) -> int:
    text = dump_model(get_preset(args.name))
    if args.write is None:
        sys.stdout.write(text)
    else:
        write_text(args.write, text)
    return EXIT_OK


COMMANDS = {
    "pretrain": _cmd_pretrain,
    "distill": _cmd_distill,
    "ablate": _cmd_ablate,
    "report": _cmd_report,
    "preset": _cmd_preset,
}


def run(argv: list[str] | None = None) -> int:
    """Parse ``argv``, run the command and map errors to exit codes."""
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)
    out_root = args.out or settings.OUT_ROOT
    try:
        return COMMANDS[args.command](args, out_root)
    except ClassroomKDError as e:
        logger.error(
            "Command failed",
            extra={"command": args.command, "error_type": type(e).__name__, "exit_code": e.exit_code},
        )
        print(f"ckd {args.command}: {e}", file=sys.stderr)
        return e.exit_code
