"""
Command-line front door for hidex sweeps.

    hidex ber --snr 10 20 30 --sinr 0 --trials 200 --out results/ber
    hidex threshold --config experiments/threshold.toml

Exit codes: 0 on success, 2 on configuration or input errors, 1 on anything else.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from .config import config
from .errors import ConfigurationError, HidexError
from .experiment import load_experiment
from .harness import find_detection_knee, find_sinr_threshold, run_sweep
from .models import Scenario
from .output import render_outputs

# Subcommand name -> scenario it runs
COMMANDS: dict[str, Scenario] = {
    "ber": Scenario.UNCODED,
    "mse": Scenario.MSE,
    "detect-prob": Scenario.DETECT_PROB,
    "threshold": Scenario.THRESHOLD,
    "coded": Scenario.CODED,
    "components": Scenario.COMPONENTS,
    "schedules": Scenario.SCHEDULES,
}

FORMAT_CHOICES = {"csv": ("csv",), "svg": ("svg",), "both": ("csv", "svg")}


def _log(msg: str):
    """Log to stderr."""
    print(msg, file=sys.stderr, flush=True)


def build_parser() -> argparse.ArgumentParser:
    from . import __version__

    parser = argparse.ArgumentParser(
        prog="hidex",
        description="Two-packet collision recovery experiments",
    )
    parser.add_argument("-v", "--version", action="version", version=f"hidex {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    for name, scenario in COMMANDS.items():
        cmd = sub.add_parser(name, help=f"run the {scenario.value} sweep")
        cmd.add_argument("--config", help="TOML experiment file")
        cmd.add_argument("--snr", type=float, nargs="+", metavar="DB", help="SNR grid in dB")
        cmd.add_argument("--sinr", type=float, nargs="+", metavar="DB", help="SINR grid in dB (replaces power ratios)")
        cmd.add_argument("--trials", type=int, help="initial trials per grid point")
        cmd.add_argument("--max-trials", type=int, help="auto-extension cap per grid point")
        cmd.add_argument("--seed", type=int, help="master seed")
        cmd.add_argument("--kmax", type=int, help="mixture component budget")
        cmd.add_argument("--tau", type=float, help="preamble detection threshold in (0, 1)")
        cmd.add_argument("--out", help="output path stem (default: <HIDEX_OUTPUT_DIR>/<scenario>)")
        cmd.add_argument("--workers", type=int, help="worker processes (default: HIDEX_WORKERS)")
        cmd.add_argument("--format", choices=sorted(FORMAT_CHOICES), default="both", help="output format")
    return parser


def overrides_from(args: argparse.Namespace) -> dict:
    """ExperimentConfig fields set on the command line."""
    return {
        "snr_grid_db": args.snr,
        "sinr_db": args.sinr,
        "trials": args.trials,
        "max_trials": args.max_trials,
        "seed": args.seed,
        "k_max": args.kmax,
        "tau": args.tau,
    }


def run(args: argparse.Namespace) -> int:
    scenario = COMMANDS[args.command]
    cfg = load_experiment(args.config, scenario, overrides_from(args))
    out = Path(args.out) if args.out else Path(config.server.output_dir) / scenario.value
    if args.workers is not None and args.workers < 1:
        raise ConfigurationError(f"--workers must be at least 1, got {args.workers}")

    started = time.monotonic()
    if scenario == Scenario.THRESHOLD:
        result = find_sinr_threshold(cfg, workers=args.workers)
        rows = result.rows
        if result.in_range:
            print(f"threshold: interferer at {result.threshold_db:.2f} dB relative to the desired user")
        else:
            print(f"threshold: out of range (max BER ratio {result.max_ratio:.3g})")
    elif scenario == Scenario.DETECT_PROB:
        knee = find_detection_knee(cfg, workers=args.workers)
        rows = knee.rows
        print(knee.describe())
    else:
        rows = run_sweep(cfg, workers=args.workers)

    for path in render_outputs(rows, out, FORMAT_CHOICES[args.format]):
        print(path)
    if config.verbose:
        _log(f"[hidex] {len(rows)} rows in {time.monotonic() - started:.1f}s")
    return 0


def main(argv: list[str] | None = None) -> int:
    """Entry point for the hidex command."""
    args = build_parser().parse_args(argv)
    try:
        return run(args)
    except HidexError as e:
        _log(f"[ERROR] {e}")
        return 2
    except KeyboardInterrupt:
        _log("[ERROR] interrupted")
        return 1
    except Exception as e:
        _log(f"[ERROR] {type(e).__name__}: {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
