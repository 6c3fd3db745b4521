"""
Configuration Manager Module

Loads the shipped experiment defaults, schema and plot-table layout, merges user
configuration and overrides over the defaults and builds the typed
ExperimentConfig.
"""

import copy
import hashlib
import json
import os
from typing import Any, Dict, List, Literal, Optional, Tuple

import jsonschema
import structlog
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from model.disorder import DisorderSpec
from model.interaction import InteractionSpec
from msa.scales import MsaParams

SEED_ENV_VAR = "MPMSA_SEED"
ARTIFACT_VERSION = "1.0.0"
# Sections that change how a run executes but never what it computes
UNHASHED_SECTIONS = ("output", "logging")


class _Block(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class DomainBlock(_Block):
    d: int = Field(default=1, ge=1)
    spacing_grid_units: float = Field(default=1.0, gt=0)
    max_dim: int = Field(default=20000, ge=1)


class ModelBlock(_Block):
    disorder: DisorderSpec = DisorderSpec()
    interaction: InteractionSpec = InteractionSpec()
    domain: DomainBlock = DomainBlock()


class MsaBlock(_Block):
    m: float = Field(default=0.2, gt=0)
    m1: float = Field(default=0.1, gt=0)
    p: Optional[float] = None
    L0_grid_units: int = Field(default=8, ge=4)
    k_max: int = Field(default=1, ge=0)
    N: int = Field(default=2, ge=1)
    n: int = Field(default=1, ge=1)
    E0_energy: float = 0.5
    trials: int = Field(default=200, ge=1)
    threads: int = Field(default=1, ge=1)
    grid_points: int = Field(default=9, ge=1)
    confidence: float = Field(default=0.95, gt=0, lt=1)
    pair_estimates: bool = True
    derive_m_star: bool = False


class GeometryBlock(_Block):
    n_values: List[int] = [1, 2, 3]
    half_sides_grid_units: List[int] = [2, 3, 5]
    r0_grid_units: float = Field(default=1.0, ge=0)
    random_trials: int = Field(default=10000, ge=1)
    scan_radius_factor: float = Field(default=30, gt=0)


class SpectrumBlock(_Block):
    n: int = Field(default=2, ge=1)
    half_side_grid_units: int = Field(default=8, ge=1)
    weyl_energy: float = Field(default=1.0, gt=0)
    C_Weyl: float = Field(default=0.3183098861837907, gt=0)


class WegnerBlock(_Block):
    n: int = Field(default=1, ge=1)
    half_sides_grid_units: List[int] = [8, 16, 32]
    E_energy: float = 0.5
    pair: bool = False


class WeakintBlock(_Block):
    n: int = Field(default=2, ge=1)
    half_side_grid_units: int = Field(default=8, ge=4)
    h_values: List[float] = [0.0, 0.05, 0.1, 0.2]
    E_energies: List[float] = [0.5]


class DecayCurveBlock(_Block):
    n: int = Field(default=1, ge=1)
    half_sides_grid_units: List[int] = [8, 16, 32]
    E_energy: Optional[float] = None


class DynamicsBlock(_Block):
    n: int = Field(default=1, ge=1)
    half_side_grid_units: int = Field(default=32, ge=1)
    s: float = Field(default=1.0, gt=0)
    t_max_inverse_energy: float = Field(default=1000.0, gt=0)
    t_min_inverse_energy: float = Field(default=0.1, gt=0)
    points_per_decade: int = Field(default=8, ge=1)
    interval_energy: Optional[Tuple[float, float]] = None
    K_half_side_grid_units: float = Field(default=0.5, gt=0)
    realizations: int = Field(default=10, ge=1)
    delocalized_fraction: float = Field(default=0.25, gt=0, le=1)


class OutputBlock(_Block):
    directory: str = "results"
    formats: List[Literal["jsonl", "csv", "dat"]] = ["jsonl", "csv", "dat"]


class LoggingBlock(_Block):
    level: Literal["DEBUG", "INFO", "WARNING", "ERROR"] = "INFO"
    file: Optional[str] = None


class ExperimentConfig(_Block):
    """Fully resolved experiment; master_seed is always explicit here."""

    master_seed: int = Field(default=0, ge=0)
    model: ModelBlock = ModelBlock()
    msa: MsaBlock = MsaBlock()
    geometry: GeometryBlock = GeometryBlock()
    spectrum: SpectrumBlock = SpectrumBlock()
    wegner: WegnerBlock = WegnerBlock()
    weakint: WeakintBlock = WeakintBlock()
    decay_curve: DecayCurveBlock = DecayCurveBlock()
    dynamics: DynamicsBlock = DynamicsBlock()
    output: OutputBlock = OutputBlock()
    logging: LoggingBlock = LoggingBlock()

    @model_validator(mode="after")
    def _check_particles(self):
        N = self.msa.N
        for name in ("msa", "spectrum", "wegner", "weakint", "decay_curve", "dynamics"):
            n = getattr(self, name).n
            if n > N:
                raise ValueError(f"{name}.n={n} exceeds msa.N={N}")
        if self.dynamics.interval_energy is not None:
            lo, hi = self.dynamics.interval_energy
            if lo > hi:
                raise ValueError(f"dynamics.interval_energy must be ordered, got {lo} > {hi}")
        self.msa_params()
        return self

    def msa_params(self, n: Optional[int] = None) -> MsaParams:
        """MsaParams for n particles (default msa.n); raises ValueError on p <= 6Nd or m1 >= m."""
        block = self.msa
        return MsaParams(m=block.m, m1=block.m1, p=block.p, L0=block.L0_grid_units, N=block.N,
                         n=block.n if n is None else n, d=self.model.domain.d, E0_energy=block.E0_energy)


class ConfigManager:
    """
    Resolves experiment configurations against the shipped defaults and schema.
    """

    def __init__(self, config_path: Optional[str] = None):
        """
        Args:
            config_path: Directory holding default_experiment.json, experiment_schema.json
                and plot_tables.json (default: the bundled config_files directory)
        """
        self.logger = structlog.get_logger(__name__)
        if config_path is None:
            config_path = os.path.join(os.path.dirname(os.path.abspath(__file__)), "config_files")
        self.config_path = config_path
        self.defaults = self._load_json_config("default_experiment.json")
        self.schema = self._load_json_config("experiment_schema.json")
        self.plot_tables = self._load_json_config("plot_tables.json")
        self.logger.debug("configuration manager initialized", path=config_path)

    def _load_json_config(self, filename: str) -> Dict[str, Any]:
        file_path = os.path.join(self.config_path, filename)
        try:
            with open(file_path, "r") as f:
                return json.load(f)
        except FileNotFoundError as e:
            raise ConfigValidationError(f"Configuration file not found: {file_path}") from e
        except json.JSONDecodeError as e:
            raise ConfigValidationError(f"Invalid JSON in configuration file {filename}: {e}") from e

    def resolve(self, user_config: Optional[Dict[str, Any]] = None,
                overrides: Optional[Dict[str, Any]] = None,
                seed: Optional[int] = None) -> ExperimentConfig:
        """
        Merge defaults, user configuration and overrides, then validate.

        Seed precedence: seed argument, then master_seed of the merged document, then the
        MPMSA_SEED environment variable, then 0.

        Raises:
            ConfigValidationError: If the merged document violates the schema or the models
        """
        merged = self._deep_merge(self.defaults, user_config or {})
        merged = self._deep_merge(merged, overrides or {})
        merged["master_seed"] = self._resolve_seed(seed, merged.get("master_seed"))

        try:
            jsonschema.validate(instance=merged, schema=self.schema)
        except jsonschema.ValidationError as e:
            location = ".".join(str(part) for part in e.absolute_path) or "<root>"
            raise ConfigValidationError(f"Schema violation at {location}: {e.message}") from e

        try:
            config = ExperimentConfig.model_validate(merged)
        except ValidationError as e:
            raise ConfigValidationError(f"Invalid configuration: {e}") from e
        self.logger.debug("configuration resolved", seed=config.master_seed)
        return config

    def _resolve_seed(self, cli_seed: Optional[int], config_seed: Optional[int]) -> int:
        if cli_seed is not None:
            return int(cli_seed)
        if config_seed is not None:
            return config_seed
        env_seed = os.environ.get(SEED_ENV_VAR)
        if env_seed is not None:
            try:
                return int(env_seed)
            except ValueError as e:
                raise ConfigValidationError(f"{SEED_ENV_VAR}={env_seed!r} is not an integer") from e
        return 0

    def get_plot_table(self, op: str) -> Dict[str, Any]:
        """Plot-table layout for a record op, or {} when the op has no table."""
        return self.plot_tables.get(op, {})

    def _deep_merge(self, base_dict: Dict[str, Any], overlay_dict: Dict[str, Any], path: str = "") -> Dict[str, Any]:
        """
        Overlay one experiment document on another.

        Sections merge key by key. Values and scan axes (lists) are replaced whole; a
        replaced scan axis is logged with its previous value so a changed sweep shows up
        in the run log.

        Raises:
            ConfigValidationError: If a section would be replaced by a plain value
        """
        merged = copy.deepcopy(base_dict)
        for key, value in overlay_dict.items():
            dotted = f"{path}.{key}" if path else key
            current = merged.get(key)
            if isinstance(current, dict):
                if not isinstance(value, dict):
                    raise ConfigValidationError(f"{dotted} is a section and cannot be set to {value!r}")
                merged[key] = self._deep_merge(current, value, dotted)
                continue
            if isinstance(current, list) and value != current:
                self.logger.info("scan axis replaced", key=dotted, previous=current, value=value)
            merged[key] = copy.deepcopy(value)
        return merged


def resolved_document(config: ExperimentConfig) -> Dict[str, Any]:
    """JSON-ready copy of the resolved configuration, every default explicit."""
    return config.model_dump(mode="json")


def config_hash(config: ExperimentConfig) -> str:
    """SHA-256 over the canonical JSON of the resolved configuration, execution-only settings removed."""
    document = resolved_document(config)
    for section in UNHASHED_SECTIONS:
        document.pop(section, None)
    document["msa"].pop("threads", None)
    canonical = json.dumps(document, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class ConfigValidationError(ValueError):
    """Exception raised when an experiment configuration is invalid."""
    pass
