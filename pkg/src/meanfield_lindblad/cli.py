"""Command-line entry point: ``meanfield-lindblad <command> --config scenario.json``."""
from __future__ import annotations

import argparse
import logging
import sys

from .errors import ConfigError, PipelineFailure

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3

log = logging.getLogger("meanfield_lindblad")


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="meanfield-lindblad",
                                     description="Mean-field Lindblad dynamics on three scales.")
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="scenario JSON file")
    common.add_argument("--out", help="output directory (overrides output_dir)")
    common.add_argument("--threads", type=int, default=1, help="worker threads for N sweeps")
    common.add_argument("--seed", type=_u64, help="seed override for random probes")
    helps = {
        "run": "all stages: macro, meso, micro and fock",
        "macro": "mean-field Bloch trajectory",
        "meso": "fluctuation covariance along the trajectory",
        "micro": "exact finite-N observables for every N in n_values",
        "fock": "single-mode stationary-state report",
    }
    for name, text in helps.items():
        sub.add_parser(name, parents=[common], help=text)
    sweep = sub.add_parser("sweep", parents=[common], help="finite-N convergence fit")
    sweep.add_argument("--target", required=True, choices=["MacroMeans", "FluctCov", "PairCorr"])
    verify = sub.add_parser("verify", help="run the acceptance suite")
    verify.add_argument("--only", type=int, nargs="*", help="criterion numbers to run")
    return parser


def _run(args) -> int:
    from . import acceptance, pipeline
    from .scenario import load_scenario

    if args.command == "verify":
        results = acceptance.run_all(args.only, echo=print)
        return EXIT_OK if all(r.passed for r in results) else EXIT_NUMERICAL
    if args.threads < 1:
        raise ConfigError("--threads must be at least 1")
    sc = load_scenario(args.config, seed=args.seed, output_dir=args.out)
    if args.command == "sweep":
        report = pipeline.convergence_sweep(sc, args.target, threads=args.threads)
        name = f"sweep_{args.target}.json"
        manifest = pipeline.write_outputs(sc, [(name, report)], sc.output_dir,
                                          manifest_name=f"manifest_sweep_{args.target}.json")
    else:
        parts = pipeline.PARTS if args.command == "run" else (args.command,)
        if args.command == "fock" and sc.fock is None:
            raise ConfigError("scenario has no fock block")
        items = pipeline.compute_scenario(sc, parts, threads=args.threads)
        suffix = "" if args.command == "run" else f"_{args.command}"
        manifest = pipeline.write_outputs(sc, items, sc.output_dir,
                                          manifest_name=f"manifest{suffix}.json")
    for f in manifest["files"]:
        print(sc.output_dir / f["path"])
    return EXIT_OK


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return _run(args)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except PipelineFailure as exc:
        log.error("numerical failure in %s: %s", exc.module, exc.cause)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
