# src/main.py
import argparse
import logging
from pathlib import Path
from typing import List, Optional

import pandas as pd
from termcolor import colored

from src import __version__
from src.config import ConfigError, load_config
from src.solver import KineticSolver
from src.tools.lattice import ModelParams, build_grid
from src.tools.oracle import validation_suite
from src.tools.spectrum import spectrum_frame
from src.tools.trajectory_writer import write_csv

logging.basicConfig(level=logging.INFO, format="%(asctime)s - %(levelname)s - %(message)s")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hubbard-boltzmann",
        description="Doublon/holon quantum Boltzmann solver for the Fermi-Hubbard model",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--verbose", "-v", action="store_true", help="Debug logging")
    sub = parser.add_subparsers(dest="command", metavar="{run,spectrum,validate}")

    run = sub.add_parser("run", help="Integrate a configured scenario")
    run.add_argument("--config", "-c", required=True, help="Path to the JSON run configuration")

    spectrum = sub.add_parser("spectrum", help="Dump per-k energies and gaps as CSV")
    spectrum.add_argument("--config", "-c", required=True, help="Path to the JSON run configuration")
    spectrum.add_argument("--out", "-o", required=True, help="Output CSV path")

    validate = sub.add_parser("validate", help="Run the reference checks")
    validate.add_argument("--quick", action="store_true", help="Only the 4x4 reference checks")
    return parser


def _print_table(frame: pd.DataFrame) -> None:
    width = max(len(c) for c in frame["check"]) + 2
    for row in frame.itertuples(index=False):
        status = colored("PASS", "green") if row.passed else colored("FAIL", "red")
        print(f"{row.check:<{width}} {row.value:>12.3e}  tol {row.tolerance:<9.3g} {status}")


def main(argv: Optional[List[str]] = None) -> None:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.verbose:
        logging.getLogger().setLevel(logging.DEBUG)
    if args.command is None:
        parser.print_usage()
        raise SystemExit(2)

    if args.command == "validate":
        frame = validation_suite(quick=args.quick)
        _print_table(frame)
        if not frame["passed"].all():
            print(f"❌ {int((~frame['passed']).sum())} contrôle(s) en échec.")
            raise SystemExit(1)
        print("\n✅ Tous les contrôles sont passés.")
        return

    try:
        config = load_config(args.config)
    except ConfigError as exc:
        print(f"❌ Error: {exc}")
        raise SystemExit(1)

    if args.command == "spectrum":
        model = config.model
        params = ModelParams(U=model.U, J=model.J, dim=model.dim)
        frame = spectrum_frame(params, build_grid(params, model.grid_sizes))
        try:
            path = write_csv(frame, args.out)
        except OSError as exc:
            print(f"❌ Error: {exc}")
            raise SystemExit(1)
        print(f"📄 Spectre écrit: {path} (gap min {frame['gap'].min():.17g})")
        return

    try:
        solver = KineticSolver(config)
    except (ValueError, OSError) as exc:
        print(f"❌ Error: {exc}")
        raise SystemExit(1)
    result = solver.run()
    if result.get("status") != "success":
        print(f"❌ Error: {result.get('message', 'Unknown error')}")
        raise SystemExit(1)

    print("\n✅ Simulation terminée.")
    print(f"📄 Trajectoire: {Path(result['trajectory']).resolve()}")
    print(f"🗂️ Snapshots: {len(result['snapshots'])}")


if __name__ == "__main__":
    main()
