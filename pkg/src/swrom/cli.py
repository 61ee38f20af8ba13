"""Command-line entry point: ``swrom <stage> --preset NAME --out DIR``."""

import argparse
import json
import logging
import sys
from pathlib import Path

from . import experiments
from .experiments import ExperimentConfig


def _config(args) -> ExperimentConfig:
    if args.config and args.preset:
        raise SystemExit("give either --config or --preset, not both")
    if args.config:
        cfg = ExperimentConfig.load(args.config)
    elif args.preset:
        cfg = experiments.preset(args.preset)
    else:
        raise SystemExit("one of --config or --preset is required")
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="swrom", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in list(experiments.STAGES) + ["all"]:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="JSON experiment configuration")
        p.add_argument("--preset", choices=sorted(experiments.PRESETS))
        p.add_argument("--out", type=Path, required=True, help="output directory")
        p.add_argument("--seed", type=int, help="seed for the synthetic recovery experiment")
        if name == "all":
            p.add_argument("--lcurve", action="store_true", help="also run the L-curve sweeps")
    show = sub.add_parser("show-preset", help="print a preset as a JSON config")
    show.add_argument("name", choices=sorted(experiments.PRESETS))

    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    if args.command == "show-preset":
        print(json.dumps(experiments.preset(args.name).to_dict(), indent=2))
        return 0

    cfg = _config(args)
    args.out.mkdir(parents=True, exist_ok=True)
    cfg.save(args.out / "config.json")
    if args.command == "all":
        result = experiments.run_all(cfg, args.out, lcurve=args.lcurve)
    else:
        result = experiments.STAGES[args.command](cfg, args.out)
    if args.command in ("evaluate", "all"):
        table = args.out / "tables" / "errors.txt"
        if table.exists():
            sys.stdout.write(table.read_text())
        else:
            print(json.dumps(result, indent=2, default=float))
    elif args.command == "lcurve":
        print(json.dumps(result, indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
