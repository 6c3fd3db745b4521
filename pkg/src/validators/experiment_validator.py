"""
Experiment Validator Module

Physical consistency checks of a resolved experiment before any compute:
grid commensurability, matrix sizes against the caps, energy-grid resolution
and the hypotheses on the disorder law.
"""

import math
from typing import List, NamedTuple, Optional, Tuple

import structlog

from config.config_manager import ExperimentConfig
from model.disorder import ModelError, validate_log_holder
from model.hamiltonian_builder import interior_point_count
from msa.scales import MsaParameterError, scale_sequence
from spectral.eigen_solver import DENSE_CAP

VALIDATION_LEVELS = ("basic", "full", "strict")
MIN_GRID_POINTS = 9


class ValidationResult(NamedTuple):
    """Result of experiment validation."""
    is_valid: bool
    errors: List[str]
    warnings: List[str]
    validated_config: Optional[ExperimentConfig]


class ExperimentValidator:
    """
    Validates a resolved ExperimentConfig for one subcommand (or all of them).
    """

    def __init__(self):
        self.logger = structlog.get_logger(__name__)

    def validate(self, config: ExperimentConfig, subcommand: Optional[str] = None,
                 validation_level: str = "full") -> ValidationResult:
        """
        Args:
            config: Resolved configuration
            subcommand: Restrict size checks to the cubes this subcommand builds
            validation_level: 'basic', 'full' or 'strict'

        Returns:
            ValidationResult with errors and warnings
        """
        if validation_level not in VALIDATION_LEVELS:
            return ValidationResult(False, [f"Unknown validation level: {validation_level}"], [], None)
        errors: List[str] = []
        warnings: List[str] = []

        cubes = self._cubes_for(config, subcommand, errors)
        basic_errors, basic_warnings = self._perform_basic_validation(config, cubes, subcommand)
        errors.extend(basic_errors)
        warnings.extend(basic_warnings)

        if validation_level in ("full", "strict"):
            full_errors, full_warnings = self._perform_size_validation(config, cubes, subcommand)
            errors.extend(full_errors)
            warnings.extend(full_warnings)

        hypothesis_notes = self._hypothesis_notes(config)
        if validation_level == "strict":
            errors.extend(hypothesis_notes)
        else:
            warnings.extend(hypothesis_notes)

        is_valid = not errors
        self.logger.info("validation completed", level=validation_level, valid=is_valid,
                         errors=len(errors), warnings=len(warnings))
        return ValidationResult(is_valid, errors, warnings, config if is_valid else None)

    def _cubes_for(self, config: ExperimentConfig, subcommand: Optional[str],
                   errors: List[str]) -> List[Tuple[str, int, int]]:
        """(label, n, L) of every cube the subcommand assembles."""
        cubes: List[Tuple[str, int, int]] = []

        def wanted(name: str) -> bool:
            return subcommand is None or subcommand == name

        if wanted("spectrum"):
            cubes.append(("spectrum", config.spectrum.n, config.spectrum.half_side_grid_units))
        if wanted("wegner"):
            cubes.extend(("wegner", config.wegner.n, L) for L in config.wegner.half_sides_grid_units)
        if wanted("msa-run"):
            try:
                schedule = scale_sequence(config.msa.L0_grid_units, config.msa.k_max)
                cubes.extend(("msa-run", config.msa.n, L) for L in schedule.lengths)
            except MsaParameterError as e:
                errors.append(str(e))
            if config.msa.derive_m_star:
                cubes.extend(("decay_curve", config.decay_curve.n, L)
                             for L in config.decay_curve.half_sides_grid_units)
        if wanted("weakint-scan"):
            cubes.append(("weakint-scan", config.weakint.n, config.weakint.half_side_grid_units))
        if wanted("dynamics"):
            cubes.append(("dynamics", config.dynamics.n, config.dynamics.half_side_grid_units))
        return cubes

    def _perform_basic_validation(self, config: ExperimentConfig, cubes: List[Tuple[str, int, int]],
                                  subcommand: Optional[str]) -> Tuple[List[str], List[str]]:
        errors, warnings = [], []
        spacing = config.model.domain.spacing_grid_units
        for label, n, L in cubes:
            try:
                interior_point_count(L, spacing)
            except ModelError as e:
                errors.append(f"{label}: {e}")

        if subcommand in (None, "msa-run") and config.msa.derive_m_star:
            if len(set(config.decay_curve.half_sides_grid_units)) < 2:
                errors.append("decay_curve needs at least two distinct half-sides to derive m*")
        if subcommand in (None, "dynamics"):
            if config.dynamics.t_min_inverse_energy > config.dynamics.t_max_inverse_energy:
                errors.append("dynamics.t_min_inverse_energy exceeds t_max_inverse_energy")
        if subcommand in (None, "weakint-scan") and 0.0 not in config.weakint.h_values:
            errors.append("weakint.h_values must contain 0")
        if subcommand in (None, "wegner", "weakint-scan", "msa-run"):
            small = [L for label, _, L in cubes if label in ("wegner", "msa-run") and L < 4]
            if small:
                warnings.append(f"Half-sides {small} are below 4; CNR then only tests the cube itself")
        return errors, warnings

    def _perform_size_validation(self, config: ExperimentConfig, cubes: List[Tuple[str, int, int]],
                                 subcommand: Optional[str]) -> Tuple[List[str], List[str]]:
        errors, warnings = [], []
        spacing = config.model.domain.spacing_grid_units
        d = config.model.domain.d
        cap = min(config.model.domain.max_dim, DENSE_CAP)
        for label, n, L in cubes:
            try:
                dimension = dimension_of(n, L, d, spacing)
            except ModelError:
                continue
            if dimension > cap:
                errors.append(f"{label}: n={n}, L={L} gives dimension {dimension}, above the cap {cap}")
            elif dimension > cap // 4:
                warnings.append(f"{label}: n={n}, L={L} gives dimension {dimension}; expect slow eigensolves")

        if subcommand in (None, "msa-run", "wegner") and config.msa.grid_points < MIN_GRID_POINTS:
            errors.append(f"msa.grid_points={config.msa.grid_points} does not resolve I_0 at spacing delta/4; "
                          f"use at least {MIN_GRID_POINTS}")
        trials = config.msa.trials
        if trials * len(cubes) > 10 ** 6:
            warnings.append(f"{trials} trials over {len(cubes)} cubes is a long run")
        return errors, warnings

    def _hypothesis_notes(self, config: ExperimentConfig) -> List[str]:
        disorder = config.model.disorder
        notes = []
        if disorder.distribution == "bernoulli":
            notes.append("Bernoulli disorder lies outside the Wegner-estimate hypotheses")
        elif disorder.distribution == "holder":
            params = config.msa_params()
            check = validate_log_holder(disorder, params.p, params.N, params.d)
            if not check.holds:
                notes.append(f"holder_A={disorder.holder_A} does not exceed the log-Hölder threshold "
                             f"{check.threshold:g}")
        return notes


def dimension_of(n: int, L: float, d: int = 1, spacing: float = 1.0) -> int:
    """Matrix dimension (2L/a - 1)^(nd) of an n-particle cube."""
    count = interior_point_count(L, spacing)
    return int(math.prod([count] * (n * d)))
