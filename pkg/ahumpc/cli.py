"""
Command-line entry points.

Subcommands:

- ``simulate``: run a scenario end to end into an output directory
- ``train``: train a surrogate offline on an exported sample file
- ``extract-fos``: first-order parameters of a step-response curve (CSV with ``minute,temperature``)
- ``map``: one ON-time query of the output mapping
- ``compare``: energy and tracking comparison of an MPC run and a manual run
- ``report``: CSV plot data and the training metrics table of a run

Example:
    ::

        ahumpc simulate --scenario scenarios/reference.json --seed 42 --out runs/mpc
        ahumpc simulate --scenario scenarios/reference.json --seed 42 --controller manual --out runs/manual
        ahumpc compare runs/mpc runs/manual --out runs/comparison.txt

Exit codes: 0 on success, 2 for invalid input or configuration, 1 for any other failure.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from . import __version__
from .ahu_data import Direction, FosParams, TemperatureTrace, ValidationError
from .building_hub import BuildingHub
from .dataset import SampleSet, split_samples
from .fos import extract_params
from .mapper import ProtectionPolicy, apply_protection, map_to_on_time
from .report import compare, export_run, load_run
from .scenario import load_scenario
from .surrogate import SurrogateConfig, train

_log = logging.getLogger("ahumpc")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ahumpc",
        description="Data-driven MPC of an air handling unit on a simulated building.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument(
        "--log-level",
        default="WARNING",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="Logging level (default: WARNING)",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    simulate = commands.add_parser("simulate", help="Run a scenario end to end")
    simulate.add_argument("--scenario", type=Path, required=True, help="Scenario JSON file")
    simulate.add_argument("--seed", type=int, help="Override the scenario seed")
    simulate.add_argument("--out", type=Path, help="Output directory (default: the scenario's output_dir)")
    simulate.add_argument("--controller", choices=["mpc", "manual"], help="Override the controller")
    simulate.add_argument("--days", type=int, help="Number of evaluation days")

    training = commands.add_parser("train", help="Train a surrogate on an exported sample file")
    training.add_argument("--dataset", type=Path, required=True, help="NDJSON samples of one direction")
    training.add_argument("--out", type=Path, required=True, help="Model checkpoint to write")
    training.add_argument("--scenario", type=Path, help="Take the surrogate settings from this scenario")
    training.add_argument("--seed", type=int, default=0, help="Split and training seed")

    extract = commands.add_parser("extract-fos", help="First-order parameters of a step-response curve")
    extract.add_argument("--curve", type=Path, required=True, help="CSV with minute and temperature columns")
    extract.add_argument("--direction", choices=[d.value for d in Direction], required=True)
    extract.add_argument("--delay", type=float, default=13.0, help="Dead time in minutes (default: 13)")

    mapping = commands.add_parser("map", help="Map a fractional action to an ON time")
    mapping.add_argument("--u", type=float, required=True, help="Fractional control action in [0, 1]")
    mapping.add_argument("--t-init", type=float, required=True, help="AIT at the start of the interval")
    mapping.add_argument("--inc", type=float, nargs=3, required=True, metavar=("KP", "TAU", "THETA"))
    mapping.add_argument("--dec", type=float, nargs=3, required=True, metavar=("KP", "TAU", "THETA"))
    mapping.add_argument("--sampling", type=int, default=30)
    mapping.add_argument("--epsilon", type=float, default=0.05)
    mapping.add_argument("--threshold", type=float, default=5.0, help="Motor protection threshold in minutes")

    comparison = commands.add_parser("compare", help="Compare an MPC run with a manual run")
    comparison.add_argument("run_mpc", type=Path)
    comparison.add_argument("run_manual", type=Path)
    comparison.add_argument("--out", type=Path, help="Write the report to this file")

    reporting = commands.add_parser("report", help="Export plot data and tables of a run")
    reporting.add_argument("run_dir", type=Path)
    reporting.add_argument("--out", type=Path, help="Target directory (default: <run_dir>/report)")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    """Run the command line and return the exit code."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level, format="%(asctime)s %(name)s %(levelname)s: %(message)s")
    handlers = {
        "simulate": _simulate,
        "train": _train,
        "extract-fos": _extract_fos,
        "map": _map,
        "compare": _compare,
        "report": _report,
    }
    try:
        handlers[args.command](args)
    except (ValidationError, FileNotFoundError) as e:
        print(f"ahumpc {args.command}: {e}", file=sys.stderr)
        return 2
    except Exception as e:
        _log.exception(f"ahumpc {args.command} failed: {e!r}")
        print(f"ahumpc {args.command}: {e}", file=sys.stderr)
        return 1
    return 0


# ----------------------------------------------------------------------------------------------------------------------
# Private Methods
# ----------------------------------------------------------------------------------------------------------------------


def _simulate(args: argparse.Namespace) -> None:
    scenario = load_scenario(args.scenario).with_overrides(args.seed, args.controller, args.days, args.out)
    out_dir = scenario.output_dir
    if (out_dir / "run.json").exists():
        raise ValidationError(f"{out_dir} already holds a run")
    hub = BuildingHub(scenario, out_dir=out_dir)
    try:
        hub.run()
    finally:
        hub.shutdown()
    print(out_dir)


def _train(args: argparse.Namespace) -> None:
    config = load_scenario(args.scenario).surrogate if args.scenario else SurrogateConfig()
    samples = SampleSet.from_ndjson(args.dataset)
    model, report = train(split_samples(samples, args.seed), config, "ahumpc")
    model.save(args.out)
    print(json.dumps(report.to_record(args.out.name), indent=2))


def _extract_fos(args: argparse.Namespace) -> None:
    frame = pd.read_csv(args.curve)
    if not {"minute", "temperature"} <= set(frame.columns):
        raise ValidationError(f"{args.curve} needs minute and temperature columns")
    times = frame["minute"].to_numpy(dtype=float)
    resolution = float(np.diff(times)[0]) if len(times) > 1 else 1.0
    trace = TemperatureTrace(times, frame["temperature"].to_numpy(dtype=float), resolution)
    params = extract_params(trace, Direction(args.direction), args.delay)
    print(json.dumps(params.to_record(), indent=2))


def _map(args: argparse.Namespace) -> None:
    fos_inc = FosParams(*args.inc)
    fos_dec = FosParams(*args.dec)
    result = map_to_on_time(args.u, fos_inc, fos_dec, args.t_init, args.sampling, args.epsilon)
    on_minutes = apply_protection(result.t_star, ProtectionPolicy(args.threshold), args.sampling)
    record = {
        "t_star": result.t_star,
        "exact": result.exact,
        "on_minutes": on_minutes,
        "target": round(result.target, 6),
        "end_temperature": round(result.end_temperature, 6),
    }
    print(json.dumps(record, indent=2))


def _compare(args: argparse.Namespace) -> None:
    report = compare(load_run(args.run_mpc), load_run(args.run_manual))
    if args.out:
        report.write(args.out)
    print(report.to_text(), end="")


def _report(args: argparse.Namespace) -> None:
    run = load_run(args.run_dir)
    for path in export_run(run, args.out or args.run_dir / "report"):
        print(path)
