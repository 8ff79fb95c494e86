#!/usr/bin/env python3
"""
main.py

Command-line entry for the ehrenfest-lab experiment runner.

    ehrenfest-lab run --config cfg.json [--hbar 1e-3] [--seed 42] --out dir/
    ehrenfest-lab sweep --config cfg.json --hbar 1e-2,1e-3,1e-4
    ehrenfest-lab validate --config cfg.json

Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Any, Dict, List, Optional

from src import config
from src.errors import ConfigInvalid, LabError
from src.experiment import ExperimentConfig, run, sweep, validate

logger = logging.getLogger("ehrenfest_lab")

EXIT_OK = 0
EXIT_CONFIG = 2


def _parse_hbar(text: str):
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigInvalid("hbar", f"cannot parse '{text}'") from exc
    return values[0] if len(values) == 1 else values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ehrenfest-lab", description="Semiclassical wave-packet experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("run", "evolve one scenario and write its diagnostics"),
        ("sweep", "fit the hbar scaling of a diagnostic"),
        ("validate", "check a configuration without running it"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON configuration document")
        p.add_argument("--scenario", help="dilation, double-well, harmonic or free")
        p.add_argument("--hbar", help="one value, or a comma-separated list for sweeps")
        p.add_argument("--t-final", dest="t_final", type=float)
        p.add_argument("--seed", type=int)
        p.add_argument("--out")
        p.add_argument("--verbose", action="store_true")
    return parser


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    """Read the JSON config (if any) and apply the command-line overrides."""
    overrides: Dict[str, Any] = {
        "scenario": args.scenario,
        "t_final": args.t_final,
        "seed": args.seed,
        "out": args.out,
        "hbar": _parse_hbar(args.hbar) if args.hbar else None,
    }
    if args.config:
        return ExperimentConfig.from_json(args.config, overrides)
    return ExperimentConfig.from_dict({k: v for k, v in overrides.items() if v is not None})


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="[%(levelname)s] %(message)s",
    )
    try:
        cfg = load_config(args)
        if args.command == "validate":
            issues = validate(cfg)
            for issue in issues:
                print(issue)
            if not issues:
                print("[OK] no issues found")
            return EXIT_CONFIG if any(i.level == "error" for i in issues) else EXIT_OK
        if args.command == "sweep":
            manifest = sweep(cfg)
        else:
            manifest = run(cfg)
    except LabError as exc:
        logger.error("%s", exc)
        return exc.exit_code
    except OSError as exc:
        logger.error("I/O failure: %s", exc)
        return config.EXIT_IO
    logger.info("wrote %d artifacts to %s", len(manifest.artifacts), cfg.out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
