"""
Main entry point for the survival transport toolkit.

Subcommands:
1. diagnose-ph  - Schoenfeld PH tests and unadjusted Kaplan-Meier curves per arm
2. emulate      - external sample from a summary spec and a Gaussian copula
3. transport    - every requested estimator (bootstrap inline with --boot B)
4. bootstrap    - transport with a required bootstrap

Exit codes: 0 success, 1 configuration or data error, 2 numerical failure.
"""

import argparse
import logging
import sys

from dotenv import load_dotenv

from pipeline import diagnose_ph, emulate_command, load_run_config, load_trial, run_pipeline
from survival.errors import InputError, NumericalError

EXIT_OK, EXIT_INPUT, EXIT_NUMERICAL = 0, 1, 2


def _comma_list(value):
    return [item.strip() for item in value.split(",") if item.strip()]


def _arm_pair(value):
    labels = _comma_list(value)
    if len(labels) != 2:
        raise argparse.ArgumentTypeError("--arms takes two labels: treated,control")
    return tuple(labels)


def _override(value):
    parts = _comma_list(value)
    try:
        return parts[0], parts[1], float(parts[2])
    except (IndexError, ValueError):
        raise argparse.ArgumentTypeError("--override takes var1,var2,rank_correlation")


def build_parser():
    parser = argparse.ArgumentParser(description="Transport trial survival effects to external populations")
    parser.add_argument("--verbose", action="store_true", help="Log solver iterations (DEBUG)")
    commands = parser.add_subparsers(dest="command", required=True)

    def run_options(sub, boot_required=False):
        sub.add_argument("--config", required=True, help="Run configuration (JSON)")
        sub.add_argument("--out", help="Output directory (default: config output_dir or $TRANSPORT_OUTPUT_DIR)")
        sub.add_argument("--seed", type=int, help="Bootstrap seed")
        sub.add_argument("--boot", type=int, required=boot_required, help="Bootstrap replicates B")
        sub.add_argument("--estimators", type=_comma_list, help="Comma list of estimator tags")
        sub.add_argument("--horizon", type=float, help="Landmark time t*")
        sub.add_argument("--arms", type=_arm_pair, help="Arm labels: treated,control")

    run_options(commands.add_parser("diagnose-ph", help="Proportional-hazards diagnostics"))
    run_options(commands.add_parser("transport", help="Run the transport estimators"))
    run_options(commands.add_parser("bootstrap", help="Run the estimators with bootstrap intervals"),
                boot_required=True)

    emulate = commands.add_parser("emulate", help="Emulate an external sample from summary statistics")
    emulate.add_argument("--summary", required=True, help="Built-in name (us_early, thailand, ethiopia) or JSON path")
    emulate.add_argument("--copula", default="trial", help="identity, trial or a copula JSON path (default: trial)")
    emulate.add_argument("--override", type=_override, action="append", default=[],
                         help="Pairwise rank correlation var1,var2,rho (repeatable)")
    emulate.add_argument("--override-scale", choices=("rank", "latent"), default="rank",
                         help="Read --override values as rank (Spearman) or latent Gaussian correlations")
    emulate.add_argument("--m", type=int, help="Sample size (default: the summary's size)")
    emulate.add_argument("--seed", type=int, default=0, help="Random seed (default: 0)")
    emulate.add_argument("--out", required=True, help="Output CSV path")
    emulate.add_argument("--config", help="Run configuration whose trial supplies ranges and the copula")
    emulate.add_argument("--arms", type=_arm_pair, help="Arm labels: treated,control")
    return parser


def run_command(args) -> int:
    if args.command == "emulate":
        trial = None
        if args.config:
            config = load_run_config(args.config).with_overrides(arms=args.arms)
            trial, _ = load_trial(config)
        path = emulate_command(args.summary, args.copula, args.m, args.seed, args.out,
                               trial=trial, overrides=tuple(args.override),
                               override_scale=args.override_scale)
        print(f"Emulated sample written to {path}")
        return EXIT_OK

    if args.command == "bootstrap" and args.boot < 2:
        print("Error: bootstrap needs --boot >= 2")
        return EXIT_INPUT
    config = load_run_config(args.config).with_overrides(
        out=args.out, seed=args.seed, boot=args.boot, estimators=args.estimators,
        horizon=args.horizon, arms=args.arms)
    if args.command == "diagnose-ph":
        outcome = diagnose_ph(config)
    else:
        outcome = run_pipeline(config)
        for tag, tate in outcome.result.tates.items():
            print(f"{tag:>13}: tau = {tate.tau:+.4f}  (S1 {tate.survival_treated:.4f}, "
                  f"S0 {tate.survival_control:.4f})")
        for tag, message in outcome.result.failures.items():
            print(f"{tag:>13}: failed - {message}")
    print(f"Results written to {outcome.output_dir}")
    return EXIT_OK


def main(argv=None) -> int:
    """Parse arguments, configure logging and map errors to exit codes."""
    # TRANSPORT_OUTPUT_DIR may come from .env
    load_dotenv()
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        return run_command(args)
    except (InputError, ValueError) as e:
        print(f"Error: {e}")
        return EXIT_INPUT
    except NumericalError as e:
        print(f"Numerical failure: {e}")
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
