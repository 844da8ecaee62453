"""Command line entry point: ``micropool run|compare|attack``."""
from __future__ import annotations

import argparse
import logging
import sys
from typing import Optional

from .config import InvalidConfig, load_scenario
from .engine import ATTACK_ALIASES, ATTACKS, SimulationError, compare_modes, run_scenario

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_INVALID = 2


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("scenario", help="scenario file (key = value lines)")
    p.add_argument("--seed", type=int, help="override random_seed")
    p.add_argument("--out", help="write the report here instead of stdout")
    p.add_argument("--format", choices=("json", "csv"), default="json")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="micropool", description="micropayment pool simulator")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    _common(sub.add_parser("run", help="run one scenario"))
    _common(sub.add_parser("compare", help="run pool and channel modes on the same scenario"))
    atk = sub.add_parser("attack", help="run a prebuilt adversarial variant of a scenario")
    atk.add_argument("attack", choices=sorted(ATTACKS) + sorted(ATTACK_ALIASES))
    _common(atk)
    return ap


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_scenario(args.scenario)
        if args.seed is not None:
            cfg = cfg.with_overrides(random_seed=args.seed)
        if args.command == "compare":
            report = compare_modes(cfg)
        else:
            if args.command == "attack":
                cfg = ATTACKS[ATTACK_ALIASES.get(args.attack, args.attack)](cfg)
            report = run_scenario(cfg.validate())
    except InvalidConfig as e:
        print(f"invalid config: {e}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except SimulationError as e:
        print(f"simulation failed: {e}", file=sys.stderr)
        return EXIT_FAILED
    text = report.to_json() if args.format == "json" else report.to_csv()
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK
