"""Command-line front end.

Exit codes: 0 success, 2 configuration error, 3 data/file error,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import config as config_mod
from . import pipeline
from .errors import ConfigError, DataError, JbmirError


def _common(parser):
    parser.add_argument("--config", metavar="PATH", help="TOML configuration file")
    parser.add_argument("--example", type=int, choices=sorted(config_mod.EXAMPLES),
                        help="start from the settings of a worked example (phantom and weights)")
    parser.add_argument("--seed", type=int, help="noise seed (overrides [noise] seed)")
    parser.add_argument("--out", metavar="DIR", help="output directory (overrides [output] dir)")
    parser.add_argument("--ssim-domain", choices=("disk", "full"), help="pixels entering SSIM statistics")
    parser.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override any configuration key, e.g. params.jbmir.gamma1=0")
    parser.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jbmir", description="Joint XCT/DOT reconstruction with edge coupling")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phantom", help="write ground-truth coefficient maps")
    _common(p)
    p = sub.add_parser("simulate", help="write clean and noisy measurement data")
    _common(p)
    p = sub.add_parser("reconstruct", help="run one reconstruction")
    _common(p)
    p.add_argument("--mode", required=True, choices=pipeline.MODES)
    p = sub.add_parser("evaluate", help="SSIM and line profile of a reconstruction")
    _common(p)
    p.add_argument("reconstruction")
    p.add_argument("truth")
    p.add_argument("--profile-x", type=float, metavar="MM", help="column (mm) for a vertical line profile")
    p.add_argument("--profile-out", metavar="PATH", help="CSV file for the profile")
    p.add_argument("--report", metavar="PATH", help="also write the report as JSON")
    p = sub.add_parser("run-all", help="phantom, simulate, all reconstructions and evaluation")
    _common(p)
    p.add_argument("--reuse-data", action="store_true", help="keep existing data/g1.csv and data/g2.csv")
    p = sub.add_parser("show-config", help="print the effective configuration")
    _common(p)
    return parser


def _deep_merge(a: dict, b: dict) -> dict:
    out = dict(a)
    for k, v in b.items():
        out[k] = _deep_merge(out[k], v) if isinstance(v, dict) and isinstance(out.get(k), dict) else v
    return out


def effective_config(args) -> config_mod.RunConfig:
    overrides: dict = {}
    for text in args.set:
        overrides = _deep_merge(overrides, config_mod.parse_assignment(text))
    if args.seed is not None:
        overrides = _deep_merge(overrides, {"noise": {"seed": args.seed}})
    if args.out is not None:
        overrides = _deep_merge(overrides, {"output": {"dir": args.out}})
    if args.ssim_domain is not None:
        overrides = _deep_merge(overrides, {"output": {"ssim_domain": args.ssim_domain}})
    base = config_mod.EXAMPLES[args.example] if args.example is not None else None
    return config_mod.load(args.config, overrides, base=base)


def run(args) -> int:
    cfg = effective_config(args)
    if args.command == "show-config":
        sys.stdout.write(config_mod.dumps(cfg))
        return 0
    pipeline.echo_config(cfg)
    if args.command == "phantom":
        result = [str(p) for p in pipeline.cmd_phantom(cfg)]
    elif args.command == "simulate":
        result = [str(p) for p in pipeline.cmd_simulate(cfg)]
    elif args.command == "reconstruct":
        result = pipeline.cmd_reconstruct(cfg, args.mode)
    elif args.command == "evaluate":
        result = pipeline.cmd_evaluate(cfg, args.reconstruction, args.truth, args.profile_x, args.profile_out)
        if args.report:
            with open(args.report, "w") as fh:
                json.dump(result, fh, indent=2, sort_keys=True)
    else:
        result = pipeline.cmd_run_all(cfg, reuse_data=args.reuse_data)
    print(json.dumps(result, indent=2, sort_keys=True))
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return run(args)
    except JbmirError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DataError.exit_code
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return ConfigError.exit_code


if __name__ == "__main__":
    sys.exit(main())
