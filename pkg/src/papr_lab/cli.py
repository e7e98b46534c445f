"""Command-line front end: ``papr-lab run|sweep-window|compare <config>``."""

from __future__ import annotations

import argparse
import sys

from .harness import ConfigError, load_config, parse_experiment, run_experiment

_SUBCOMMAND_KINDS = {
    "run": None,  # any kind
    "sweep-window": "window-sweep",
    "compare": "complexity",
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="papr-lab",
                                     description="OFDM peak-cancellation experiment runner")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, kind in _SUBCOMMAND_KINDS.items():
        p = sub.add_parser(name, help=f"run a {kind or 'configured'} experiment")
        p.add_argument("config", help="YAML experiment configuration")
        p.add_argument("--seed", type=int, default=None, help="override the master seed")
        p.add_argument("--out", default=None, help="override the output path")
        p.add_argument("--threads", type=int, default=None, help="parallel worker count")
        p.add_argument("--format", choices=["csv"], default="csv",
                       help="output format (CSV only)")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        data = load_config(args.config)
        overrides = {"seed": args.seed, "out": args.out, "threads": args.threads}
        cfg = parse_experiment(data, overrides)
        required = _SUBCOMMAND_KINDS[args.command]
        if required is not None and cfg.kind != required:
            raise ConfigError("kind", f"'{args.command}' expects kind={required}, got {cfg.kind}")
    except ConfigError as exc:
        print(f"error: invalid configuration -- {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    path = run_experiment(cfg)
    print(f"{cfg.kind}: wrote {path} (seed={cfg.seed}, config={cfg.config_hash()})")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
