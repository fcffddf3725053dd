"""CLI entry point for ewris."""

import argparse
import logging
import sys
from pathlib import Path

from . import PRESET_NAMES, ScenarioConfig, ScenarioError, load_scenario
from .experiments import (
    ANALYSIS_COLUMNS,
    analysis_records,
    analyze_popt,
    emit_analysis_csv,
    emit_csv,
    load_sweep,
    locate,
    preset,
    run_preset,
    run_sweep,
    write_table,
)
from .metrics import rayleigh_distance, upd


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ewris",
        description="Simulate element-wise RIS assisted near-field links.",
        epilog="""
Examples:
  # Spectrum efficiency versus transmit power for the four harvesting schemes
  ewris simulate --preset power-sweep --seed 7 --trials 50 \\
      --out results/power.csv

  # Custom sweep on a custom scenario, four threads
  ewris simulate --scenario scenario.json --sweep sweep.json --out sweep.csv \\
      --workers 4

  # Optimal reflective proportion for PIN-diode elements
  ewris analyze popt --nr 2500 10000 40000 --tech pin

  # Uniform-power and Rayleigh distances of the default RIS
  ewris analyze region --gamma 0.95

  # Uplink localization on a 1 m cube around the prior
  ewris locate --grid-extent 0.5 --grid-step 0.05
        """,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument(
        "--verbose",
        "-v",
        action="count",
        default=0,
        help="Log progress (-v) or debugging detail (-vv) to stderr.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    simulate = commands.add_parser(
        "simulate", help="Run a named preset or a sweep file and write CSV."
    )
    simulate.add_argument(
        "--scenario",
        type=Path,
        default=None,
        help="Scenario JSON file (default: the built-in reference scenario).",
    )
    simulate.add_argument(
        "--preset",
        default=None,
        metavar="NAME",
        help="Preset, one of: "
        + ", ".join(PRESET_NAMES)
        + " (or a figure alias fig4 ... fig13)",
    )
    simulate.add_argument(
        "--sweep", type=Path, default=None, help="Sweep JSON file."
    )
    simulate.add_argument(
        "--seed", type=int, default=None, help="Master seed (overrides the sweep's)."
    )
    simulate.add_argument(
        "--trials",
        type=int,
        default=None,
        help="Monte Carlo trials per point (overrides the sweep's).",
    )
    simulate.add_argument(
        "--workers", type=int, default=1, help="Threads for the trials (default: 1)."
    )
    simulate.add_argument(
        "--out", "-o", type=Path, required=True, help="Output CSV file."
    )

    analyze = commands.add_parser("analyze", help="Closed-form analysis.")
    analyses = analyze.add_subparsers(dest="analysis", required=True)
    popt = analyses.add_parser(
        "popt", help="Optimal reflective proportion versus the number of elements."
    )
    popt.add_argument(
        "--nr",
        type=int,
        nargs="+",
        required=True,
        metavar="N",
        help="Numbers of RIS elements (any size; panels use the squarest grid).",
    )
    popt.add_argument(
        "--tech",
        choices=("pin", "varactor"),
        required=True,
        help="Phase-shifter technology setting the per-element consumption.",
    )
    popt.add_argument("--scenario", type=Path, default=None)
    popt.add_argument("--out", "-o", type=Path, default=None, help="Write CSV here.")

    region = analyses.add_parser(
        "region", help="Uniform-power and Rayleigh distances of the RIS."
    )
    region.add_argument(
        "--gamma",
        type=float,
        default=0.95,
        help="Power-ratio threshold in (0, 1) (default: 0.95).",
    )
    region.add_argument(
        "--side",
        type=float,
        default=None,
        help="Aperture size L_R in m (default: the RIS diagonal).",
    )
    region.add_argument("--scenario", type=Path, default=None)

    loc = commands.add_parser("locate", help="Run one uplink localization.")
    loc.add_argument("--scenario", type=Path, default=None)
    loc.add_argument(
        "--grid-extent",
        type=float,
        required=True,
        help="Half-width of the cubic search grid (m).",
    )
    loc.add_argument(
        "--grid-step", type=float, required=True, help="Grid spacing (m)."
    )
    loc.add_argument("--seed", type=int, default=0, help="Seed (default: 0).")
    return parser


def _configure_logging(verbosity: int) -> None:
    level = logging.WARNING
    if verbosity == 1:
        level = logging.INFO
    elif verbosity > 1:
        level = logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def _simulate(
    args: argparse.Namespace, parser: argparse.ArgumentParser, cfg: ScenarioConfig
) -> int:
    if (args.preset is None) == (args.sweep is None):
        parser.error("simulate needs exactly one of --preset or --sweep")
    if args.trials is not None and args.trials < 1:
        parser.error("--trials must be at least 1")
    if args.seed is not None and args.seed < 0:
        parser.error("--seed must be non-negative")
    if args.workers < 1:
        parser.error("--workers must be at least 1")

    if args.preset is not None:
        try:
            preset(args.preset)
        except ValueError as e:
            parser.error(str(e))
        written = run_preset(
            args.preset,
            cfg,
            args.out,
            seed=args.seed,
            trials=args.trials,
            workers=args.workers,
        )
    else:
        try:
            spec = load_sweep(args.sweep)
        except ScenarioError as e:
            parser.error(str(e))
        except FileNotFoundError:
            print(f"Error: File not found: {args.sweep}", file=sys.stderr)
            return 1
        if args.seed is not None:
            spec.seed = args.seed
        if args.trials is not None:
            spec.trials = args.trials
        spec.workers = args.workers
        written = [emit_csv(run_sweep(spec, cfg), args.out)]

    for path in written:
        print(path)
    return 0


def _analyze(
    args: argparse.Namespace, parser: argparse.ArgumentParser, cfg: ScenarioConfig
) -> int:
    if args.analysis == "region":
        side = cfg.aperture_diagonal() if args.side is None else args.side
        try:
            near = upd(args.gamma, side)
            far = rayleigh_distance(side, cfg.wavelength)
        except ValueError as e:
            parser.error(str(e))
        print(f"upd_m={near:.6g}")
        print(f"rayleigh_m={far:.6g}")
        return 0

    try:
        rows = analyze_popt(cfg, args.nr, args.tech)
    except ValueError as e:
        parser.error(str(e))
    if args.out is not None:
        print(emit_analysis_csv(rows, args.out))
    else:
        write_table(sys.stdout, ANALYSIS_COLUMNS, analysis_records(rows))
    return 0


def _locate(
    args: argparse.Namespace, parser: argparse.ArgumentParser, cfg: ScenarioConfig
) -> int:
    if args.grid_step <= 0:
        parser.error("--grid-step must be positive")
    if args.grid_extent < 0:
        parser.error("--grid-extent must be non-negative")
    estimate, error = locate(cfg, args.grid_extent, args.grid_step, args.seed)
    x, y, z = estimate.position
    print(f"estimate=({x:.6g}, {y:.6g}, {z:.6g})")
    print(f"error_m={error:.6g}")
    print(f"indicator_w={estimate.indicator_power:.6g}")
    print(f"hypotheses={estimate.grid_size}")
    return 0


def main() -> int:
    parser = _build_parser()
    args = parser.parse_args()
    _configure_logging(args.verbose)

    # Load scenario
    try:
        cfg = load_scenario(args.scenario)
    except ScenarioError as e:
        parser.error(str(e))
    except FileNotFoundError:
        print(f"Error: File not found: {args.scenario}", file=sys.stderr)
        return 1

    # Run
    try:
        if args.command == "simulate":
            return _simulate(args, parser, cfg)
        if args.command == "analyze":
            return _analyze(args, parser, cfg)
        return _locate(args, parser, cfg)
    except OSError as e:
        print(f"Error: {e}", file=sys.stderr)
        return 1
    except ValueError as e:
        print(f"Error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
