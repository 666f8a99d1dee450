"""Command-line entry point: ``run``, ``compare`` and ``map-stats``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path
from typing import Any, Dict, NoReturn, Sequence, TextIO

from .deps import configure_logging
from .experiment import (
    ConfigError,
    ExperimentConfig,
    dump_config,
    execute_compare,
    execute_run,
    load_config_file,
    map_paths,
    resolve_config,
)
from .grid_map import (
    DimensionMismatchError,
    MapFormatError,
    coverage_percent,
    load_map,
    map_entropy,
    rmse,
    ssim,
)
from .metrics import SUMMARY_COLUMNS, format_value

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2

_ALIASES = {"methods": ("--method",), "seeds": ("--seed",)}


class _ArgumentParser(argparse.ArgumentParser):
    """Raises :class:`ConfigError` instead of exiting on usage errors."""

    def error(self, message: str) -> NoReturn:
        raise ConfigError(f"{self.prog}: {message}")


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="Flat TOML experiment file")
    parser.add_argument(
        "--dump-config",
        metavar="PATH",
        help="Write the resolved configuration to PATH ('-' for stdout) and exit",
    )
    parser.add_argument("--progress", action="store_true", help="Show a progress bar")
    group = parser.add_argument_group("experiment")
    for name, info in ExperimentConfig.model_fields.items():
        flags = (f"--{name.replace('_', '-')}", *_ALIASES.get(name, ()))
        group.add_argument(
            *flags,
            dest=name,
            default=argparse.SUPPRESS,
            metavar=name.upper(),
            help=f"default: {info.default!r}",
        )


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="explorer", description="Frontier exploration simulator")
    parser.add_argument("--log-level", help="Override the configured log level")
    subparsers = parser.add_subparsers(dest="command", required=True)

    run_parser = subparsers.add_parser("run", help="Run one exploration")
    _add_config_flags(run_parser)
    compare_parser = subparsers.add_parser("compare", help="Run methods x seeds")
    _add_config_flags(compare_parser)

    stats = subparsers.add_parser("map-stats", help="Compare two map files")
    stats.add_argument("map_a", type=Path, help="Map (.pgm or .yaml)")
    stats.add_argument("map_b", type=Path, help="Reference map (.pgm or .yaml)")
    stats.add_argument("--window", type=int, default=7, help="SSIM window (odd)")

    return parser


def _resolve(args: argparse.Namespace) -> ExperimentConfig:
    overrides: Dict[str, Any] = {
        name: getattr(args, name)
        for name in ExperimentConfig.model_fields
        if hasattr(args, name)
    }
    file_values = load_config_file(args.config) if args.config else {}
    return resolve_config(file_values, overrides)


def _dump(config: ExperimentConfig, target: str, out: TextIO) -> None:
    text = dump_config(config)
    if target == "-":
        out.write(text)
        return
    path = Path(target)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    logger.info("Wrote resolved configuration to %s", path)


def _print_summaries(summaries, out: TextIO) -> None:
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(SUMMARY_COLUMNS)
    for summary in summaries:
        row = summary.model_dump()
        writer.writerow([format_value(row[column]) for column in SUMMARY_COLUMNS])


def cmd_run(args: argparse.Namespace, out: TextIO) -> int:
    config = _resolve(args)
    if args.dump_config:
        _dump(config, args.dump_config, out)
        return EXIT_OK
    summary = execute_run(config)
    _print_summaries([summary], out)
    return EXIT_OK


def cmd_compare(args: argparse.Namespace, out: TextIO) -> int:
    config = _resolve(args)
    if args.dump_config:
        _dump(config, args.dump_config, out)
        return EXIT_OK
    summaries = execute_compare(config, progress=args.progress)
    _print_summaries(summaries, out)
    return EXIT_OK


def cmd_map_stats(args: argparse.Namespace, out: TextIO) -> int:
    grids = []
    for path in (args.map_a, args.map_b):
        pgm, yaml_path = map_paths(path)
        for candidate in (pgm, yaml_path):
            if candidate is not None and not candidate.exists():
                raise FileNotFoundError(f"map file not found: {candidate}")
        grids.append(load_map(pgm, yaml_path))
    a, b = grids
    if args.window < 3 or args.window % 2 == 0:
        raise ConfigError("--window must be odd and at least 3")
    similarity = ssim(a, b, args.window)
    try:
        masked = ssim(a, b, args.window, mask=a.observed())
    except ValueError:
        masked = None
    row = {
        "entropy_a": map_entropy(a),
        "entropy_b": map_entropy(b),
        "ssim": similarity,
        "ssim_masked": masked,
        "rmse": rmse(a, b),
        "coverage": coverage_percent(a, b),
    }
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(row.keys())
    writer.writerow(format_value(v) for v in row.values())
    return EXIT_OK


_COMMANDS = {"run": cmd_run, "compare": cmd_compare, "map-stats": cmd_map_stats}


def main(argv: Sequence[str] | None = None, out: TextIO | None = None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    configure_logging(args.log_level)

    try:
        return _COMMANDS[args.command](args, out)
    except (ConfigError, MapFormatError, FileNotFoundError, DimensionMismatchError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception:
        logger.exception("%s failed", args.command)
        return EXIT_RUNTIME


if __name__ == "__main__":
    raise SystemExit(main())
