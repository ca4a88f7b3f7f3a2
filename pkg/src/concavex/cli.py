"""Command-line entry point: ``concavex {thresholds,solve,sweep,multiplicity,verify}``.

Exit codes: 0 ok, 1 config error or refusal, 2 tolerance failure,
3 invariance violation, 4 multiplicity shortfall.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import ConfigError, RunConfig, load_config
from .grid import GridError
from .runs import RefusalError, format_thresholds, run_multiplicity, run_solve, run_sweep, run_verify, setup
from .solver import SolverError

EXIT_OK, EXIT_CONFIG, EXIT_TOLERANCE, EXIT_INVARIANCE, EXIT_SHORTFALL = 0, 1, 2, 3, 4


def _run_dir(config: RunConfig, args, command: str) -> Path:
    base = Path(args.out) if args.out else Path(config.out)
    return base / f"{command}-{config.identity(command)}"


def cmd_thresholds(config: RunConfig, args) -> int:
    text = format_thresholds(setup(config))
    out = _run_dir(config, args, "thresholds")
    out.mkdir(parents=True, exist_ok=True)
    (out / "thresholds.txt").write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_solve(config: RunConfig, args) -> int:
    lines, _ = run_solve(config, _run_dir(config, args, "solve"))
    print("\n".join(lines))
    return EXIT_OK


def cmd_sweep(config: RunConfig, args) -> int:
    csv = run_sweep(config, jobs=args.jobs)
    out = _run_dir(config, args, "sweep")
    out.mkdir(parents=True, exist_ok=True)
    (out / "sweep.csv").write_text(csv)
    sys.stdout.write(csv)
    return EXIT_TOLERANCE if ",FAIL," in csv else EXIT_OK


def cmd_multiplicity(config: RunConfig, args) -> int:
    run = run_multiplicity(config, _run_dir(config, args, "multiplicity"))
    sys.stdout.write(run.summary())
    if len(run.reports) < config.want:
        print(f"shortfall: found {len(run.reports)} of {config.want} pairs", file=sys.stderr)
        return EXIT_SHORTFALL
    return EXIT_OK


def cmd_verify(config: RunConfig, args) -> int:
    if not args.profile:
        raise ConfigError("verify needs --profile PATH")
    rep = run_verify(config, Path(args.profile), args.nonnegative)
    out = _run_dir(config, args, "verify")
    out.mkdir(parents=True, exist_ok=True)
    (out / "verify.report").write_text(rep.to_text())
    sys.stdout.write(rep.to_text())
    if not rep.in_ball:
        return EXIT_INVARIANCE
    tol = 1e-8 * (1 + rep.w2n_norm)
    if rep.residual_inf > config.verify_tol or rep.certificate_slack < -tol:
        return EXIT_TOLERANCE
    return EXIT_OK


COMMANDS = {
    "thresholds": cmd_thresholds,
    "solve": cmd_solve,
    "sweep": cmd_sweep,
    "multiplicity": cmd_multiplicity,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="concavex", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="run configuration file")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default=None, help="output root (default: [run] out)")
    parser.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps")
    parser.add_argument("--profile", default=None, help="grid-function file (verify)")
    parser.add_argument("--nonnegative", action="store_true", help="verify against the sign-constrained set")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s"
    )
    if args.jobs < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        config = load_config(args.config).with_seed(args.seed)
        return COMMANDS[args.command](config, args)
    except (ConfigError, RefusalError, GridError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
