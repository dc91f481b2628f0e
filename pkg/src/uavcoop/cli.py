"""Command line entry point (``uavcoop``)."""

from __future__ import annotations

import argparse
import logging
import sys

from .ccp import CcpSettings
from .errors import ParameterError, ScenarioParseError, UavCoopError
from .harness import (
    PROPOSED,
    ExperimentConfig,
    emit_csv,
    emit_json,
    parse_scheme,
    run_experiment,
)
from .scenario import SimParams, load_scenario

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL = 0, 1, 2

DEFAULT_UAV_SWEEP = "2,3,4"
DEFAULT_RATE_SWEEP = "400000,800000,1200000,1600000"


def _floats(text):
    return [float(v) for v in str(text).split(",") if v.strip()]


def _ints(text):
    return [int(v) for v in str(text).split(",") if v.strip()]


def _common(p: argparse.ArgumentParser, schemes_default: str):
    src = p.add_mutually_exclusive_group()
    src.add_argument("--scenario", metavar="FILE", help="scenario JSON file instead of generated layouts")
    src.add_argument("--uavs", type=int, metavar="L", help="number of UAVs")
    p.add_argument("--users", type=int, metavar="K")
    p.add_argument("--slots", type=int, metavar="T")
    p.add_argument("--blocks", type=int, metavar="B")
    p.add_argument("--bs-antennas", type=int, metavar="N")
    p.add_argument("--uav-antennas", type=int, metavar="M")
    p.add_argument("--seed", default="0", metavar="S[,S...]")
    p.add_argument("--rmin", type=float, metavar="BPS", help="per-user minimum rate in bit/s")
    p.add_argument("--beta", type=float)
    p.add_argument("--eps", type=float, help="CCP stopping tolerance in W")
    p.add_argument("--max-iters", type=int)
    p.add_argument("--scheme", default=schemes_default, metavar="NAME[,NAME...]")
    p.add_argument("--out", metavar="PATH", help="output file (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--dbm", action="store_true", help="append dBm columns")
    p.add_argument("--timing", action="store_true", help="record wall-clock seconds (breaks byte-identical output)")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uavcoop", description="Power-efficient cooperative multi-UAV downlink planning.")
    sub = parser.add_subparsers(dest="command", required=True)
    _common(sub.add_parser("plan", help="solve one block and print the plan summary"), PROPOSED)
    p = sub.add_parser("sweep-uavs", help="sweep the number of UAVs")
    _common(p, "Proposed,CoordinatedBeamforming,FixedCooperation,Hovering,FixedTrajectory")
    p.add_argument("--values", default=DEFAULT_UAV_SWEEP, metavar="L[,L...]")
    p = sub.add_parser("sweep-rate", help="sweep the users' minimum rate")
    _common(p, "Proposed,CoordinatedBeamforming,FixedCooperation,Hovering,FixedTrajectory")
    p.add_argument("--values", default=DEFAULT_RATE_SWEEP, metavar="BPS[,BPS...]")
    _common(sub.add_parser("baseline", help="run comparison schemes"), "CoordinatedBeamforming")
    p = sub.add_parser("validate-scenario", help="check a scenario file")
    p.add_argument("file")
    return parser


def _config(args, sweep="none", values=()) -> ExperimentConfig:
    over = {}
    for flag, name in (
        ("uavs", "num_uavs"), ("users", "num_users"), ("slots", "num_slots"), ("blocks", "num_blocks"),
        ("bs_antennas", "bs_antennas"), ("uav_antennas", "uav_antennas"), ("rmin", "r_min_bps"),
    ):
        v = getattr(args, flag, None)
        if v is not None:
            over[name] = v
    if args.scenario:
        s = load_scenario(args.scenario)
        over.pop("num_uavs", None)
        params = s.params.replace(**over) if over else s.params
    else:
        params = SimParams.with_equal_weights(**over)
    if args.beta is not None:
        params = params.replace(beta=args.beta)
    ccp = CcpSettings(
        epsilon=args.eps,
        max_iters=args.max_iters if args.max_iters is not None else 50,
        beta=args.beta,
    )
    schemes = tuple(parse_scheme(s) for s in args.scheme.split(",") if s.strip())
    if args.command == "plan":
        params = params.replace(num_blocks=1) if args.blocks is None else params
    return ExperimentConfig(
        params=params,
        scenario_path=args.scenario,
        schemes=schemes,
        sweep=sweep,
        sweep_values=tuple(values),
        seeds=tuple(_ints(args.seed)),
        ccp=ccp,
        output=args.out,
        timing=args.timing,
    )


def _emit(table, args):
    emit = emit_json if args.format == "json" else emit_csv
    text = emit(table, None, dbm=args.dbm)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.ERROR, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "validate-scenario":
            s = load_scenario(args.file)
            print(f"ok: L={s.L} K={s.K} T={s.T} seed={s.seed}")
            return EXIT_OK
        if args.command == "sweep-uavs":
            cfg = _config(args, "uavs", _ints(args.values))
        elif args.command == "sweep-rate":
            cfg = _config(args, "rmin", _floats(args.values))
        else:
            cfg = _config(args)
        cfg.validate()
    except (ParameterError, ScenarioParseError, ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        table = run_experiment(cfg)
    except UavCoopError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    _emit(table, args)
    if args.command == "plan" and not args.out:
        agg = [r for r in table if r.block < 0]
        for r in agg:
            print(
                f"# {r.scheme}: weighted {r.weighted_total_w:.6e} W/slot, BS {r.bs_power_w:.3e} W, "
                f"UAV tx {r.uav_tx_power_w:.3e} W, nav {r.uav_nav_power_w:.3e} W, converged={r.converged}",
                file=sys.stderr,
            )
    return EXIT_OK if all(r.converged for r in table) else EXIT_PARTIAL


if __name__ == "__main__":
    sys.exit(main())
