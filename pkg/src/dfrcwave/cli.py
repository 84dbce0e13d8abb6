"""Command-line front end.

Subcommands map one-to-one onto the harness entry points; every run reads a
JSON experiment config and writes CSVs plus rendered figures into the output
directory. Exit codes: 0 success, 2 invalid config, 3 solver failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .harness import (
    ConfigError,
    ExperimentConfig,
    Strategy,
    design_outcome,
    run_beampattern_report,
    run_ser_sweep,
    run_sqp_convergence,
    run_tradeoff_sweep,
)
from .solvers import SolverError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dfrcwave",
        description="Dual-function radar-communication waveform design and simulation",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("design", "solve the configured designs once and dump them as JSON"),
        ("ser-sweep", "symbol-error-rate and rate sweep over the SNR grid"),
        ("tradeoff-sweep", "SER and rate sweep over the trade-off factors"),
        ("beampattern", "beampatterns with NMSE and normalized-CRB tables"),
        ("sqp-trace", "convergence traces of the weight optimization"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", required=True, help="experiment config JSON")
        cmd.add_argument("--seed", type=int, default=None, help="override config seed")
        cmd.add_argument("--out", default=None, help="override output directory")
        cmd.add_argument("--threads", type=int, default=1, help="worker processes")
    return parser


def _load_config(args: argparse.Namespace) -> ExperimentConfig:
    config = ExperimentConfig.from_json(args.config)
    if args.seed is not None:
        config = dataclasses.replace(config, seed=args.seed)
    if args.out is not None:
        config = dataclasses.replace(config, output_dir=Path(args.out))
    return config


def _cmd_design(config: ExperimentConfig) -> None:
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for strategy in config.strategy:
        if strategy in (Strategy.ISI_MIN_TRADEOFF, Strategy.ARMAX_TRADEOFF):
            factors = config.tradeoff_factors
        else:
            factors = (0.0,)
        for rho in factors:
            outcome = design_outcome(config, strategy, rho)
            name = f"design_{strategy.value}_rho{rho:g}.json"
            with open(out_dir / name, "w") as fh:
                json.dump(outcome, fh, indent=2, sort_keys=True)
                fh.write("\n")


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        config = _load_config(args)
        out_dir = Path(config.output_dir)
        if args.command == "design":
            _cmd_design(config)
        elif args.command == "ser-sweep":
            from . import report

            result = run_ser_sweep(config, threads=args.threads)
            report.render_ser_vs_snr(result, out_dir / "fig1_ser.png")
            report.render_rate_vs_snr(result, out_dir / "fig2_rate.png")
        elif args.command == "tradeoff-sweep":
            from . import report

            result = run_tradeoff_sweep(config, threads=args.threads)
            report.render_ser_vs_factor(result, out_dir / "fig3_ser.png")
            report.render_rate_vs_factor(result, out_dir / "fig4_rate.png")
        elif args.command == "beampattern":
            from . import report

            bp = run_beampattern_report(config, threads=args.threads)
            report.render_beampatterns(bp, out_dir / "beampatterns.png")
        elif args.command == "sqp-trace":
            from . import report

            traces = run_sqp_convergence(config, threads=args.threads)
            report.render_sqp_traces(traces, out_dir / "sqp_traces.png")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
