"""Command line entry point: ``ebql <subcommand> [--config PATH] [flags]``.

Exit codes: 0 success, 1 configuration error, 2 acceptance failure, 3 I/O error.
"""
from __future__ import annotations

import argparse
import logging
import sys

from . import acceptance, experiment
from .config import ExperimentConfig, load_config, validate
from .exceptions import ConfigError

log = logging.getLogger("ebql")

EXIT_OK, EXIT_CONFIG, EXIT_ACCEPTANCE, EXIT_IO = 0, 1, 2, 3

SUBCOMMANDS = {
    "estimate": "estimator-stats",
    "mse-curve": "mse-curve",
    "split-sweep": "split-sweep",
    "chain-train": "chain-train",
    "bias-trace": "bias-trace",
}


def _common(p):
    p.add_argument("--config", help="experiment config file (key = value lines)")
    p.add_argument("--seed", type=int, help="base seed (64-bit unsigned)")
    p.add_argument("--seeds", type=int, help="number of seeds, counted up from --seed")
    p.add_argument("--out", help="output directory")
    p.add_argument("--jobs", type=int, help="worker processes")
    p.add_argument("--trials", type=int, help="Monte Carlo trials")
    p.add_argument("--episodes", type=int, help="training episodes per run")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ebql", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, kind in SUBCOMMANDS.items():
        _common(sub.add_parser(name, help=f"run a {kind} experiment"))
    verify = sub.add_parser("verify", help="run the acceptance checks")
    _common(verify)
    verify.add_argument("--only", nargs="*", help="check keys to run, e.g. 1 3 8a")
    return parser


def resolve_config(args, kind: str) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    overrides = {"kind": kind}
    for flag in ("seed", "seeds", "out", "jobs", "trials", "episodes"):
        value = getattr(args, flag, None)
        if value is not None:
            overrides[flag] = value
    if args.seeds is not None:
        overrides["seed_list"] = ()
    return validate(cfg.replace(**overrides))


def _run(cfg: ExperimentConfig):
    if cfg.kind == "estimator-stats":
        return experiment.run_estimator_stats(cfg)
    if cfg.kind == "mse-curve":
        return experiment.run_mse_curve(cfg)
    if cfg.kind == "split-sweep":
        return experiment.run_split_sweep(cfg)
    if cfg.kind == "chain-train":
        return experiment.run_chain_experiment(cfg)
    return experiment.run_bias_trace(cfg)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "verify":
            results = acceptance.run_all(only=args.only)
            failed = [r.key for r in results if not r.passed]
            print(f"{len(results) - len(failed)}/{len(results)} checks passed")
            return EXIT_ACCEPTANCE if failed else EXIT_OK
        cfg = resolve_config(args, SUBCOMMANDS[args.command])
        log.info("running %s into %s", cfg.kind, cfg.out)
        _run(cfg)
        print(f"{args.command}: wrote results under {cfg.out}")
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
