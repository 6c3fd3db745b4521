"""
Lab Processor - Main Module

Runs one experiment subcommand end to end: resolve and validate the
configuration, compute, then write records, summaries, plot tables, the
resolved configuration and the run manifest.
"""

import logging
import math
import os
import sys
import time
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
import structlog

from config.config_manager import (
    ARTIFACT_VERSION,
    ConfigManager,
    ConfigValidationError,
    ExperimentConfig,
    config_hash,
    resolved_document,
)
from dynamics.decay_fit import localization_report
from dynamics.evolution import log_time_grid, moment_expectation, realization_moments
from geometry.cube_geometry import CubeSpec, ParticlePoint
from geometry.interactivity import PARTIALLY_INTERACTIVE, classify_interactivity
from geometry.property_suites import PropertySuiteRunner
from geometry.separability import separable_partner
from mappers.record_mapper import RecordMapper
from model.disorder import sample_disorder
from model.hamiltonian_builder import DomainSpec, HamiltonianContext, MatrixSizeError
from msa.estimators import MsaEstimator
from msa.scales import scale_sequence, variable_energy_interval
from parsers.config_parser import ConfigParser, ConfigParsingError
from spectral.eigen_solver import SpectralError, WeylParams, eigendecompose, tensor_spectrum, weyl_count
from utils.artifact_manager import ArtifactManager, read_jsonl
from validators.experiment_validator import ExperimentValidator

SUBCOMMANDS = ("geometry-check", "spectrum", "wegner", "msa-run", "weakint-scan", "dynamics", "report")
EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3
TENSOR_TOL = 1e-10

# Numerical failures are checked before the ValueError family since MatrixSizeError is a ModelError.
NUMERICAL_ERRORS = (SpectralError, MatrixSizeError, np.linalg.LinAlgError, ArithmeticError)

Outcome = Tuple[List[Dict[str, Any]], Dict[str, pd.DataFrame]]


class LabProcessor:
    """
    Orchestrates a laboratory run.

    1. Parse the configuration file and overrides
    2. Resolve against the defaults and validate (no output before this passes)
    3. Run the subcommand
    4. Write every artifact atomically under <out>/<subcommand>/
    """

    def __init__(self, config_path: Optional[str] = None):
        """
        Args:
            config_path: Directory of the default, schema and plot-table files
        """
        self.config_manager = ConfigManager(config_path)
        self.parser = ConfigParser()
        self.validator = ExperimentValidator()
        self.mapper = RecordMapper(self.config_manager)
        self.logger = structlog.get_logger(__name__)
        self._handlers: Dict[str, Callable[[ExperimentConfig, str], Outcome]] = {
            "geometry-check": self.run_geometry_check,
            "spectrum": self.run_spectrum,
            "wegner": self.run_wegner,
            "msa-run": self.run_msa,
            "weakint-scan": self.run_weakint_scan,
            "dynamics": self.run_dynamics,
            "report": self.run_report,
        }

    @staticmethod
    def _setup_logging(level: str = "INFO", log_file: Optional[str] = None):
        """Key/value structlog output to stderr and, optionally, a log file."""
        handlers: List[logging.Handler] = [logging.StreamHandler(sys.stderr)]
        if log_file:
            os.makedirs(os.path.dirname(os.path.abspath(log_file)), exist_ok=True)
            handlers.append(logging.FileHandler(log_file))
        logging.basicConfig(level=getattr(logging, level), format="%(message)s", handlers=handlers, force=True)
        structlog.configure(
            processors=[
                structlog.stdlib.filter_by_level,
                structlog.stdlib.add_logger_name,
                structlog.stdlib.add_log_level,
                structlog.processors.TimeStamper(fmt="iso"),
                structlog.processors.format_exc_info,
                structlog.processors.KeyValueRenderer(key_order=["timestamp", "level", "event"]),
            ],
            logger_factory=structlog.stdlib.LoggerFactory(),
            wrapper_class=structlog.stdlib.BoundLogger,
            cache_logger_on_first_use=False,
        )

    def run(self,
            subcommand: str,
            config_file: Optional[str] = None,
            overrides: Optional[List[str]] = None,
            seed: Optional[int] = None,
            out_dir: Optional[str] = None,
            trials: Optional[int] = None,
            threads: Optional[int] = None,
            validation_level: str = "full",
            extra_overrides: Optional[Dict[str, Any]] = None,
            log_level: Optional[str] = None) -> Dict[str, Any]:
        """
        Run one subcommand.

        Args:
            subcommand: One of SUBCOMMANDS
            config_file: JSON or YAML experiment file
            overrides: "section.key=value" assignments
            seed: Master seed (highest precedence)
            out_dir: Output root (default: output.directory of the config)
            trials: Monte Carlo trials per estimate
            threads: Worker threads for the trials
            validation_level: 'basic', 'full' or 'strict'
            extra_overrides: Nested overrides applied last (scan axes from the command line)
            log_level: Overrides logging.level of the config

        Returns:
            dict: status, exit_code and, on success, the output directory and record counts
        """
        start = time.perf_counter()
        self._setup_logging(log_level or "INFO")
        try:
            if subcommand not in SUBCOMMANDS:
                raise UnknownSubcommandError(
                    f"Unknown subcommand {subcommand!r}; choose one of {', '.join(SUBCOMMANDS)}")

            user_config = self.parser.parse_file(config_file)
            merged_overrides = self.config_manager._deep_merge(self.parser.parse_overrides(overrides),
                                                               self._flag_overrides(trials, threads))
            merged_overrides = self.config_manager._deep_merge(merged_overrides, extra_overrides or {})
            config = self.config_manager.resolve(user_config, merged_overrides, seed)

            validation = self.validator.validate(config, subcommand, validation_level)
            for warning in validation.warnings:
                self.logger.warning("validation warning", message=warning)
            if not validation.is_valid:
                for error in validation.errors:
                    self.logger.error("validation error", message=error)
                return self._error(subcommand, start, "validation failed", EXIT_INVALID, validation.errors)

            root = out_dir or config.output.directory
            directory = os.path.join(root, subcommand)
            log_file = config.logging.file
            if log_file and not os.path.isabs(log_file):
                log_file = os.path.join(directory, log_file)
            self._setup_logging(log_level or config.logging.level, log_file)

            self.logger.info("run started", subcommand=subcommand, seed=config.master_seed, directory=directory)
            records, frames = self._handlers[subcommand](config, root)
            manifest = self._write_outputs(config, subcommand, directory, records, frames, start)

        except NUMERICAL_ERRORS as e:
            self.logger.error("numerical failure", subcommand=subcommand, error=str(e))
            return self._error(subcommand, start, str(e), EXIT_NUMERICAL)
        except (ConfigValidationError, ConfigParsingError, UnknownSubcommandError, ValueError) as e:
            self.logger.error("run rejected", subcommand=subcommand, error=str(e))
            return self._error(subcommand, start, str(e), EXIT_INVALID)

        failed = sum(1 for r in records if r.get("status") == "fail")
        self.logger.info("run finished", subcommand=subcommand, records=len(records), failed_bounds=failed,
                         seconds=round(manifest["wall_clock_seconds"], 3))
        return {
            "status": "success",
            "exit_code": EXIT_OK,
            "subcommand": subcommand,
            "directory": directory,
            "manifest_hash": manifest["manifest_hash"],
            "record_counts": manifest["record_counts"],
            "failed_bounds": failed,
            "processing_time": manifest["wall_clock_seconds"],
        }

    @staticmethod
    def _flag_overrides(trials: Optional[int], threads: Optional[int]) -> Dict[str, Any]:
        msa: Dict[str, Any] = {}
        if trials is not None:
            msa["trials"] = trials
        if threads is not None:
            msa["threads"] = threads
        return {"msa": msa} if msa else {}

    def _error(self, subcommand: str, start: float, message: str, exit_code: int,
               errors: Optional[List[str]] = None) -> Dict[str, Any]:
        return {
            "status": "error",
            "exit_code": exit_code,
            "subcommand": subcommand,
            "error_message": message,
            "errors": errors or [message],
            "processing_time": time.perf_counter() - start,
        }

    def _write_outputs(self, config: ExperimentConfig, subcommand: str, directory: str,
                       records: List[Dict[str, Any]], frames: Dict[str, pd.DataFrame],
                       start: float) -> Dict[str, Any]:
        artifacts = ArtifactManager(directory, config_hash(config))
        formats = set(config.output.formats)
        artifacts.write_json("resolved_config.json", resolved_document(config))
        if "jsonl" in formats:
            artifacts.write_jsonl("records.jsonl", records)
        if "csv" in formats:
            if records:
                artifacts.write_csv("summary.csv", self.mapper.summary_frame(records))
            for filename, frame in frames.items():
                artifacts.write_csv(filename, frame)
        if "dat" in formats:
            for name, (columns, rows) in self.mapper.emit_plot_data(records).items():
                artifacts.write_table(f"plot_{name}.dat", columns, rows)
        return artifacts.write_manifest(subcommand, ARTIFACT_VERSION, time.perf_counter() - start,
                                        extra={"master_seed": config.master_seed})

    # ------------------------------------------------------------------
    # Subcommands
    # ------------------------------------------------------------------

    def _estimator(self, config: ExperimentConfig, n: Optional[int] = None) -> MsaEstimator:
        domain = config.model.domain
        return MsaEstimator(params=config.msa_params(n), disorder=config.model.disorder,
                            interaction=config.model.interaction, master_seed=config.master_seed,
                            spacing=domain.spacing_grid_units, max_dim=domain.max_dim, threads=config.msa.threads,
                            confidence=config.msa.confidence, grid_points=config.msa.grid_points)

    @staticmethod
    def _cube(config: ExperimentConfig, n: int, L: float) -> CubeSpec:
        d = config.model.domain.d
        return CubeSpec(center=ParticlePoint(n=n, d=d, coords=(0,) * (n * d)), half_side=L)

    def run_geometry_check(self, config: ExperimentConfig, root: str) -> Outcome:
        block = config.geometry
        runner = PropertySuiteRunner(seed=config.master_seed, scan_radius_factor=block.scan_radius_factor,
                                     random_trials=block.random_trials)
        results = runner.run_all(block.n_values, block.half_sides_grid_units, block.r0_grid_units)
        return self.mapper.suite_records(results, config.master_seed), {}

    def run_spectrum(self, config: ExperimentConfig, root: str) -> Outcome:
        """Eigenvalues of one realization, the tensor-sum identity at h = 0 and the Weyl count."""
        block = config.spectrum
        spacing = config.model.domain.spacing_grid_units
        cube = self._cube(config, block.n, block.half_side_grid_units)
        domain = DomainSpec(cube, spacing)
        field = sample_disorder(config.model.disorder, domain.site_window(), config.master_seed, 0)
        interaction = config.model.interaction
        max_dim = config.model.domain.max_dim

        eig = eigendecompose(HamiltonianContext(domain, field, interaction, max_dim).assemble())
        base = {"n": block.n, "L": block.half_side_grid_units, "seed": config.master_seed}
        records = [{"op": "eigenvalues", **base, "h": interaction.h, "dim": eig.dim,
                    "index": list(range(eig.count)), "eigenvalue": eig.values.tolist()}]

        free_interaction = interaction.with_amplitude(0.0)
        joint = eig.values if interaction.h == 0 else eigendecompose(
            HamiltonianContext(domain, field, free_interaction, max_dim).assemble()).values
        singles = [eigendecompose(HamiltonianContext(DomainSpec(cube.sub_cube([i]), spacing), field, None,
                                                     max_dim).assemble()).values for i in range(block.n)]
        error = float(np.max(np.abs(joint - tensor_spectrum(singles))))
        tolerance = TENSOR_TOL * max(1.0, float(np.max(np.abs(joint))))
        if error > tolerance:
            self.logger.warning("tensor-sum identity violated", error=error, tolerance=tolerance)
        records.append({"op": "tensor_identity", **base, "max_abs_error": error, "tolerance": tolerance,
                        "pass": error <= tolerance})

        weyl = weyl_count(domain, block.weyl_energy, WeylParams(C_Weyl=block.C_Weyl))
        records.append({"op": "weyl_count", **base, "E": block.weyl_energy, "exact": weyl.exact,
                        "asymptotic": weyl.asymptotic, "continuum": weyl.continuum, "j_star": weyl.j_star})
        return records, {"disorder_field.csv": field.to_frame()}

    def run_wegner(self, config: ExperimentConfig, root: str) -> Outcome:
        block = config.wegner
        estimator = self._estimator(config, block.n)
        records = []
        for L in block.half_sides_grid_units:
            cube = self._cube(config, block.n, L)
            records.append(self.mapper.estimate_record(
                estimator.estimate_wegner(cube, config.msa.trials, E=block.E_energy), estimator.params))
            if block.pair:
                partner = separable_partner(cube, config.msa.N)
                records.append(self.mapper.estimate_record(
                    estimator.estimate_wegner(cube, config.msa.trials, partner=partner), estimator.params))
        return records, {}

    def run_msa(self, config: ExperimentConfig, root: str) -> Outcome:
        """Per-scale singularity and pair estimates, the initial-scale decomposition and optionally m*."""
        block = config.msa
        estimator = self._estimator(config)
        params = estimator.params
        schedule = scale_sequence(block.L0_grid_units, block.k_max)
        interval = variable_energy_interval(params.E0_energy, params.L0, params.m, params.m1, params.N, block.n)
        records: List[Dict[str, Any]] = [{
            "op": "msa_schedule", "lengths": list(schedule.lengths), "n": block.n, "N": block.N,
            "E0": interval.E0, "delta": interval.delta, "delta_dressed": interval.delta_dressed,
            "params": params.model_dump(), "seed": config.master_seed,
        }]

        for L in schedule.lengths:
            cube = self._cube(config, block.n, L)
            records.append(self.mapper.estimate_record(
                estimator.estimate_singularity_probability(cube, block.E0_energy, block.trials), params))
            if block.pair_estimates:
                partner = separable_partner(cube, block.N)
                records.append(self.mapper.estimate_record(
                    estimator.estimate_pair_probability(cube, partner, block.trials, interval), params))

        L0 = schedule.lengths[0]
        if estimator.h == 0.0:
            decomposition = estimator.estimate_initial_bound_decomposition(
                self._cube(config, block.n, L0), block.E0_energy, block.trials)
            records.extend(self.mapper.initial_bound_records(decomposition, params))
        if block.n >= 2:
            spread = [k * (4 * L0 + int(math.ceil(estimator.r0)) + 1) for k in range(block.n)]
            pi_cube = CubeSpec.around(spread, L0, d=config.model.domain.d)
            if classify_interactivity(pi_cube, estimator.r0) == PARTIALLY_INTERACTIVE:
                records.append(self.mapper.estimate_record(
                    estimator.estimate_nonlocalized_probability(pi_cube, block.trials), params))

        if block.derive_m_star:
            curve_block = config.decay_curve
            curve = estimator.block_norm_decay_curve(curve_block.n, curve_block.half_sides_grid_units,
                                                     block.trials, E=curve_block.E_energy)
            m_star = estimator.derive_mass(curve) if curve.decaying else None
            if m_star is None:
                self.logger.warning("no positive decay rate; m* not derived", mu_hat=curve.mu_hat)
            records.extend(self.mapper.decay_curve_records(curve, config.master_seed, m_star))
        return records, {}

    def run_weakint_scan(self, config: ExperimentConfig, root: str) -> Outcome:
        block = config.weakint
        estimator = self._estimator(config, block.n)
        cube = self._cube(config, block.n, block.half_side_grid_units)
        scan = estimator.weak_interaction_scan(cube, block.h_values, block.E_energies, config.msa.trials)
        return self.mapper.scan_records(scan, estimator.params), {}

    def run_dynamics(self, config: ExperimentConfig, root: str) -> Outcome:
        """Moment series over realizations, their mean and the localization report of realization 0."""
        block = config.dynamics
        spacing = config.model.domain.spacing_grid_units
        max_dim = config.model.domain.max_dim
        interaction = config.model.interaction
        cube = self._cube(config, block.n, block.half_side_grid_units)
        domain = DomainSpec(cube, spacing)
        window = domain.site_window()
        interval = block.interval_energy or spectral_cover(config, block.n)
        K = CubeSpec(center=cube.center, half_side=block.K_half_side_grid_units)
        times = log_time_grid(block.t_max_inverse_energy, block.t_min_inverse_energy, block.points_per_decade)

        fields = [sample_disorder(config.model.disorder, window, config.master_seed, t)
                  for t in range(block.realizations)]
        moments = realization_moments(cube, fields, block.s, interval, K, times, interaction, spacing, max_dim)
        expectation = moment_expectation(moments, config.msa.confidence)
        records = self.mapper.moment_records(moments, expectation, config.master_seed)

        H = HamiltonianContext(domain, fields[0], interaction, max_dim).assemble()
        report = localization_report(H, delocalized_fraction=block.delocalized_fraction)
        records.extend(self.mapper.localization_records(report, config.master_seed))
        return records, {"localization.csv": report.to_frame()}

    def run_report(self, config: ExperimentConfig, root: str) -> Outcome:
        """Status counts per (subcommand, op) over the records already written under root."""
        records: List[Dict[str, Any]] = []
        rows: List[Dict[str, Any]] = []
        for subcommand in SUBCOMMANDS:
            path = os.path.join(root, subcommand, "records.jsonl")
            if subcommand == "report" or not os.path.isfile(path):
                continue
            source = read_jsonl(path)
            by_op: Dict[str, List[Dict[str, Any]]] = {}
            for record in source:
                by_op.setdefault(record.get("op", "record"), []).append(record)
                rows.append({"subcommand": subcommand, **record})
            for op in sorted(by_op):
                group = by_op[op]
                records.append({
                    "op": "report_entry", "subcommand": subcommand, "source_op": op, "records": len(group),
                    "pass": sum(1 for r in group if r.get("status") == "pass"),
                    "fail": sum(1 for r in group if r.get("status") == "fail"),
                    "vacuous": sum(1 for r in group if r.get("status") == "vacuous"),
                    "source_manifest_hash": group[0].get("manifest_hash"),
                })
        if not records:
            self.logger.warning("no records found to report", root=root)
        frames = {"aggregate.csv": self.mapper.summary_frame(rows)} if rows else {}
        return records, frames


def spectral_cover(config: ExperimentConfig, n: int) -> Tuple[float, float]:
    """An interval holding the whole spectrum of every realization of the n-particle operator."""
    disorder = config.model.disorder
    if disorder.distribution == "holder":
        lo, hi = 0.0, disorder.width_energy
    else:
        lo, hi = disorder.low_energy, disorder.high_energy
    interaction = config.model.interaction
    coupling = abs(interaction.h) * interaction.bound * n * (n - 1) / 2.0
    kinetic = 4.0 * config.model.domain.d / config.model.domain.spacing_grid_units ** 2
    return (n * min(lo, 0.0) - coupling, n * (kinetic + max(hi, 0.0)) + coupling)


class UnknownSubcommandError(ValueError):
    """Exception raised for a subcommand outside SUBCOMMANDS."""
    pass
