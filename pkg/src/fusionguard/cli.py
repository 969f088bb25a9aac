"""Command-line front end for the experiment runner."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ConfigError, available_presets, load_preset, parse_config
from .runner import run

_SUBCOMMANDS = ("fuse-demo", "detect", "isolate", "platoon", "montecarlo")


def _load_raw(config_arg: str) -> dict:
    if "/" not in config_arg and not config_arg.endswith(".json"):
        try:
            return load_preset(config_arg)
        except KeyError as e:
            raise ConfigError([str(e)]) from e
    try:
        text = Path(config_arg).read_text()
    except OSError as e:
        raise ConfigError([f"cannot read config file: {e}"]) from e
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError([f"config file is not valid JSON: {e}"]) from e
    if not isinstance(raw, dict):
        raise ConfigError(["config root must be a JSON object"])
    return raw


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fusionguard",
        description="Resilient sensor fusion experiments and platoon simulations.",
        epilog="--config takes a JSON file or a shipped preset name: "
        + ", ".join(available_presets()),
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _SUBCOMMANDS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", required=True, help="JSON config file or preset name")
        p.add_argument("--seed", type=int, default=None, help="override the config's master seed")
        p.add_argument("--out", default="out", help="output directory (default: ./out)")
        p.add_argument("--strict", action="store_true",
                       help="exit nonzero if any invariant is violated")
        if name == "montecarlo":
            p.add_argument("--trials", type=int, default=None,
                           help="override the config's trial count")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        raw = _load_raw(args.config)
        if args.command == "montecarlo":
            previous = raw.get("experiment")
            if previous != "montecarlo" and "inner" not in raw:
                raw["inner"] = previous
            raw["experiment"] = "montecarlo"
            if args.trials is not None:
                raw["trials"] = args.trials
        else:
            raw["experiment"] = args.command
            raw.pop("inner", None)
        if args.seed is not None:
            raw["seed"] = args.seed
        cfg = parse_config(raw)
    except ConfigError as e:
        print(e, file=sys.stderr)
        return 2

    result = run(cfg, args.out, strict=args.strict,
                 n_trials=getattr(args, "trials", None))
    print(f"{cfg.experiment}: wrote {len(result.files)} file(s) to {result.out_dir}")
    for note in result.summary["violations"]:
        print(f"violation: {note}", file=sys.stderr)
    if result.exit_code:
        print("strict mode: failing due to invariant violations", file=sys.stderr)
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
