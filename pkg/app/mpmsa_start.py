"""
Multi-particle MSA laboratory - Main Entry Point

Command-line runner for the laboratory subcommands:
geometry-check, spectrum, wegner, msa-run, weakint-scan, dynamics and report.
Exit codes: 0 success, 2 invalid configuration or usage, 3 numerical failure.
"""

import argparse
import json
import os
import sys
from typing import Any, Dict, List, Optional

# Add project root (for utils) and src directory to path for imports
project_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
src_path = os.path.join(project_root, 'src')
sys.path.insert(0, project_root)
sys.path.insert(0, src_path)

from lab_processor import SUBCOMMANDS, LabProcessor  # type: ignore  # noqa: E402

# Config key that each scan-axis flag sets, per subcommand. Single-valued keys take the first value.
HALF_SIDE_KEYS = {
    "geometry-check": ("geometry.half_sides_grid_units", True),
    "spectrum": ("spectrum.half_side_grid_units", False),
    "wegner": ("wegner.half_sides_grid_units", True),
    "msa-run": ("msa.L0_grid_units", False),
    "weakint-scan": ("weakint.half_side_grid_units", False),
    "dynamics": ("dynamics.half_side_grid_units", False),
}
PARTICLE_KEYS = {
    "geometry-check": ("geometry.n_values", True),
    "spectrum": ("spectrum.n", False),
    "wegner": ("wegner.n", False),
    "msa-run": ("msa.n", False),
    "weakint-scan": ("weakint.n", False),
    "dynamics": ("dynamics.n", False),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mpmsa",
        description="Numerical laboratory for the multi-particle multi-scale analysis.")
    parser.add_argument("subcommand", choices=SUBCOMMANDS, help="Experiment to run")
    parser.add_argument("--config", metavar="PATH", help="JSON or YAML experiment file")
    parser.add_argument("--seed", type=int, help="Master seed (overrides the config and MPMSA_SEED)")
    parser.add_argument("--trials", type=int, help="Monte Carlo trials per estimate")
    parser.add_argument("--out", metavar="DIR", help="Output root directory")
    parser.add_argument("--threads", type=int, help="Worker threads for the trials")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="Config override such as msa.k_max=2 (repeatable)")
    parser.add_argument("--validation-level", choices=("basic", "full", "strict"), default="full")
    parser.add_argument("--log-level", choices=("DEBUG", "INFO", "WARNING", "ERROR"))

    axes = parser.add_argument_group("scan axes")
    axes.add_argument("--half-sides", type=int, nargs="+", metavar="L", help="Cube half-sides in grid units")
    axes.add_argument("--n", type=int, nargs="+", metavar="n", help="Particle number(s)")
    axes.add_argument("--h-values", type=float, nargs="+", metavar="h", help="Interaction amplitudes (weakint-scan)")
    axes.add_argument("--energies", type=float, nargs="+", metavar="E", help="Energies (weakint-scan)")
    axes.add_argument("--k-max", type=int, help="Number of scale steps (msa-run)")
    axes.add_argument("--t-max", type=float, help="Time horizon (dynamics)")
    return parser


def _assign(target: Dict[str, Any], dotted: str, value: Any):
    node = target
    parts = dotted.split(".")
    for part in parts[:-1]:
        node = node.setdefault(part, {})
    node[parts[-1]] = value


def scan_axis_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    """Nested overrides from the scan-axis flags of the chosen subcommand."""
    overrides: Dict[str, Any] = {}
    for values, table in ((args.half_sides, HALF_SIDE_KEYS), (args.n, PARTICLE_KEYS)):
        if values and args.subcommand in table:
            key, is_list = table[args.subcommand]
            _assign(overrides, key, list(values) if is_list else values[0])
    if args.h_values:
        _assign(overrides, "weakint.h_values", list(args.h_values))
    if args.energies:
        _assign(overrides, "weakint.E_energies", list(args.energies))
    if args.k_max is not None:
        _assign(overrides, "msa.k_max", args.k_max)
    if args.t_max is not None:
        _assign(overrides, "dynamics.t_max_inverse_energy", args.t_max)
    return overrides


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    processor = LabProcessor()
    result = processor.run(
        args.subcommand,
        config_file=args.config,
        overrides=args.overrides,
        seed=args.seed,
        out_dir=args.out,
        trials=args.trials,
        threads=args.threads,
        validation_level=args.validation_level,
        extra_overrides=scan_axis_overrides(args),
        log_level=args.log_level,
    )
    if result["status"] == "success":
        print(json.dumps({k: result[k] for k in ("subcommand", "directory", "manifest_hash",
                                                  "record_counts", "failed_bounds")}, indent=2))
    else:
        for error in result["errors"]:
            print(f"error: {error}", file=sys.stderr)
    return result["exit_code"]


if __name__ == "__main__":
    sys.exit(main())
