"""Command-line entry point.

Subcommands mirror the batch stages: ``hsi``, ``transport``, ``correlate``,
``fit``, ``predict``, ``validate-gan``. Every subcommand takes ``--config``
(an INI file with a ``[citymorph]`` section) plus a few targeted overrides.
Exit status: 0 full success, 1 partial (some cities failed), 2 failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from .errors import CityMorphError
from .pipeline import (
    PipelineConfig,
    read_config,
    run_correlate,
    run_fit,
    run_hsi,
    run_predict,
    run_transport,
    run_validate_gan,
)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, help="pipeline config INI file")
    parser.add_argument("--seed", type=int, help="override the configured seed")
    parser.add_argument("--k", type=int, help="override the profile cluster count")
    parser.add_argument("--test-fraction", type=float, help="override the test split fraction")
    parser.add_argument("--connectivity", type=int, choices=(4, 8),
                        help="override the patch neighbor rule")
    parser.add_argument("--output-dir", help="override the output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="citymorph",
        description="Settlement-morphology metrics and road-density prediction",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_text in (
        ("hsi", "settlement-index table for the corpus"),
        ("transport", "road length / area / density table"),
        ("correlate", "Pearson and Chatterjee matrices"),
        ("fit", "fit LR/RR/KRR and persist the best model"),
        ("predict", "predict density for generated scenes"),
        ("validate-gan", "compare real vs generated radial profiles"),
    ):
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
        if name == "predict":
            p.add_argument("--model", required=True, help="fitted model JSON file")
    return parser


def _apply_overrides(config: PipelineConfig, args: argparse.Namespace) -> PipelineConfig:
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.k is not None:
        updates["k"] = args.k
    if args.test_fraction is not None:
        updates["test_fraction"] = args.test_fraction
    if args.connectivity is not None:
        updates["connectivity"] = args.connectivity
    if args.output_dir is not None:
        updates["output_dir"] = args.output_dir
    return replace(config, **updates).validate() if updates else config


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        config = _apply_overrides(read_config(args.config), args)
        if args.command == "hsi":
            result = run_hsi(config)
        elif args.command == "transport":
            result = run_transport(config)
        elif args.command == "correlate":
            result = run_correlate(config)
        elif args.command == "fit":
            result = run_fit(config)
        elif args.command == "predict":
            result = run_predict(config, args.model)
        elif args.command == "validate-gan":
            result = run_validate_gan(config)
        else:  # pragma: no cover
            raise AssertionError(args.command)
    except (CityMorphError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    ok = len(result.processed)
    failed = len(result.failures)
    print(f"{result.stage}: {ok} processed, {failed} failed -> {', '.join(map(str, result.outputs))}")
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
