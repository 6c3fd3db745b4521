"""
Disorder Module

I.i.d. site potentials sampled with a counter-based generator: the value at a
site depends only on (master_seed, realization index, site), never on which
sites were drawn before or on how many threads are drawing.
"""

import hashlib
import math
from typing import Literal, NamedTuple, Optional, Tuple

import numpy as np
import pandas as pd
import structlog
from pydantic import BaseModel, ConfigDict, model_validator

logger = structlog.get_logger(__name__)

GOLDEN_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX_1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX_2 = np.uint64(0x94D049BB133111EB)
_UNIT_53 = 2.0 ** -53
SITE_CODE_BITS = 21


class DisorderSpec(BaseModel):
    """
    Single-site distribution of the random potential.

    uniform: values in [low_energy, high_energy)
    bernoulli: high_energy with probability `probability`, low_energy otherwise
    holder: width_energy * e * exp(-v^(-1/(2A))) with v uniform in (0, 1]; its
        concentration function is below 1/|ln eps|^(2A) whenever width_energy >= 1
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    distribution: Literal["uniform", "bernoulli", "holder"] = "uniform"
    low_energy: float = 0.0
    high_energy: float = 1.0
    probability: float = 0.5
    holder_C: float = 1.0
    holder_A: float = 400.0
    width_energy: float = 1.0

    @model_validator(mode="after")
    def _check_parameters(self):
        if self.distribution in ("uniform", "bernoulli") and not self.low_energy < self.high_energy:
            raise ValueError(f"{self.distribution} needs low_energy < high_energy, "
                             f"got {self.low_energy} >= {self.high_energy}")
        if self.distribution == "bernoulli" and not 0 < self.probability < 1:
            raise ValueError(f"bernoulli needs 0 < probability < 1, got {self.probability}")
        if self.distribution == "holder":
            if not self.holder_C > 0 or not self.holder_A > 0:
                raise ValueError(f"holder needs C > 0 and A > 0, got C={self.holder_C}, A={self.holder_A}")
            if not self.width_energy > 0:
                raise ValueError(f"holder needs width_energy > 0, got {self.width_energy}")
        return self

    @property
    def amplitude(self) -> float:
        """Length of the support of the single-site law."""
        if self.distribution == "holder":
            return self.width_energy
        return self.high_energy - self.low_energy

    @property
    def is_continuous(self) -> bool:
        return self.distribution != "bernoulli"


class SiteWindow(NamedTuple):
    """Integer box of sites, bounds inclusive on both ends."""
    lower: Tuple[int, ...]
    upper: Tuple[int, ...]

    @classmethod
    def interval(cls, lower: int, upper: int) -> "SiteWindow":
        return cls((int(lower),), (int(upper),))

    @property
    def d(self) -> int:
        return len(self.lower)

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(hi - lo + 1 for lo, hi in zip(self.lower, self.upper))

    def sites(self) -> np.ndarray:
        """All sites as an (m, d) array in C order."""
        axes = [np.arange(lo, hi + 1) for lo, hi in zip(self.lower, self.upper)]
        grid = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in grid], axis=-1).astype(np.int64)

    def contains(self, sites: np.ndarray) -> bool:
        sites = np.atleast_2d(sites)
        return bool(np.all(sites >= np.asarray(self.lower)) and np.all(sites <= np.asarray(self.upper)))

    def covers(self, other: "SiteWindow") -> bool:
        return all(lo <= o_lo and o_hi <= hi
                   for lo, hi, o_lo, o_hi in zip(self.lower, self.upper, other.lower, other.upper))


class DisorderField:
    """One realization of the potential on a window of sites."""

    def __init__(self, window: SiteWindow, values: np.ndarray,
                 master_seed: Optional[int] = None, index: Optional[int] = None):
        values = np.array(values, dtype=float)
        if values.shape != window.shape:
            raise FieldDomainMismatchError(f"Values of shape {values.shape} do not fill window {window.shape}")
        self.window = window
        self.values = values
        self.master_seed = master_seed
        self.index = index
        self.values.setflags(write=False)

    def value_at(self, sites: np.ndarray) -> np.ndarray:
        """
        Potential at integer sites.

        Args:
            sites: (m, d) integer array

        Raises:
            FieldDomainMismatchError: If a site lies outside the window
        """
        sites = np.asarray(sites, dtype=np.int64).reshape(-1, self.window.d)
        if sites.size and not self.window.contains(sites):
            raise FieldDomainMismatchError(f"Sites outside window {self.window}")
        offsets = sites - np.asarray(self.window.lower)[None, :]
        return self.values[tuple(offsets.T)]

    def shifted(self, shift: float) -> "DisorderField":
        """Same realization plus a constant."""
        return DisorderField(self.window, self.values + shift, self.master_seed, self.index)

    def to_frame(self) -> pd.DataFrame:
        """(site, value) table; multi-dimensional sites get one column per axis."""
        sites = self.window.sites()
        columns = {"site": sites[:, 0]} if self.window.d == 1 else {
            f"site_{k}": sites[:, k] for k in range(self.window.d)}
        columns["value"] = self.values.ravel()
        return pd.DataFrame(columns)

    @classmethod
    def from_function(cls, window: SiteWindow, potential) -> "DisorderField":
        """Deterministic field V(site) evaluated on every site of the window."""
        sites = window.sites()
        values = np.asarray([potential(*site) for site in sites], dtype=float).reshape(window.shape)
        return cls(window, values)


class LogHolderCheck(NamedTuple):
    """Outcome of the log-Hölder hypothesis check."""
    holds: bool
    threshold: float
    margin: float


def realization_key(master_seed: int, index: int) -> np.uint64:
    """64-bit key of one realization, hashed from the master seed and the trial index."""
    digest = hashlib.sha256(f"{int(master_seed)}:{int(index)}".encode("utf-8")).digest()
    return np.uint64(int.from_bytes(digest[:8], byteorder="little"))


def _site_codes(sites: np.ndarray) -> np.ndarray:
    zigzag = np.where(sites >= 0, 2 * sites, -2 * sites - 1).astype(np.uint64)
    codes = np.zeros(sites.shape[0], dtype=np.uint64)
    for k in range(sites.shape[1]):
        codes |= zigzag[:, k] << np.uint64(SITE_CODE_BITS * k)
    return codes


def _splitmix64(z: np.ndarray) -> np.ndarray:
    z = z + GOLDEN_GAMMA
    z = (z ^ (z >> np.uint64(30))) * _MIX_1
    z = (z ^ (z >> np.uint64(27))) * _MIX_2
    return z ^ (z >> np.uint64(31))


def site_uniforms(master_seed: int, index: int, sites: np.ndarray) -> np.ndarray:
    """Uniform [0, 1) variate per site, a pure function of (seed, index, site)."""
    sites = np.asarray(sites, dtype=np.int64)
    if np.any(np.abs(sites) >= 2 ** (SITE_CODE_BITS - 1)):
        raise DisorderSpecError("Site coordinates exceed the counter encoding range")
    key = realization_key(master_seed, index)
    with np.errstate(over="ignore"):
        mixed = _splitmix64(key + _site_codes(sites) * GOLDEN_GAMMA)
    return (mixed >> np.uint64(11)).astype(np.float64) * _UNIT_53


def transform_uniforms(spec: DisorderSpec, u: np.ndarray) -> np.ndarray:
    """Map uniform variates to the single-site law of spec."""
    if spec.distribution == "uniform":
        return spec.low_energy + (spec.high_energy - spec.low_energy) * u
    if spec.distribution == "bernoulli":
        return np.where(u < spec.probability, spec.high_energy, spec.low_energy)
    v = 1.0 - u
    return spec.width_energy * math.e * np.exp(-np.power(v, -1.0 / (2.0 * spec.holder_A)))


def sample_disorder(spec: DisorderSpec, window: SiteWindow, master_seed: int, index: int) -> DisorderField:
    """
    Draw realization `index` of the field on window.

    Args:
        spec: Single-site distribution
        window: Sites to fill
        master_seed: Run-level seed
        index: Realization (trial) index

    Returns:
        DisorderField reproducible from (spec, master_seed, index)
    """
    if not isinstance(spec, DisorderSpec):
        raise DisorderSpecError(f"Expected DisorderSpec, got {type(spec).__name__}")
    u = site_uniforms(master_seed, index, window.sites())
    values = transform_uniforms(spec, u).reshape(window.shape)
    logger.debug("disorder sampled", distribution=spec.distribution, sites=int(u.size), index=index)
    return DisorderField(window, values, master_seed=master_seed, index=index)


def concentration_function(spec: DisorderSpec, eps: float) -> float:
    """
    s(F, eps) = sup_a P(a < V <= a + eps).

    Exact for uniform and bernoulli laws; for the holder family the log-Hölder
    bound C / |ln eps|^(2A) is returned.

    Raises:
        DisorderSpecError: If eps <= 0, or eps >= 1 for the holder family
    """
    if not eps > 0:
        raise DisorderSpecError(f"Concentration needs eps > 0, got {eps}")
    if spec.distribution == "uniform":
        return min(eps / (spec.high_energy - spec.low_energy), 1.0)
    if spec.distribution == "bernoulli":
        if eps > spec.high_energy - spec.low_energy:
            return 1.0
        return max(spec.probability, 1.0 - spec.probability)
    if eps >= 1:
        raise DisorderSpecError(f"Log-Hölder bound undefined for eps={eps} >= 1")
    return spec.holder_C / abs(math.log(eps)) ** (2.0 * spec.holder_A)


def log_holder_threshold(p: float, N: int, d: int) -> float:
    """(3/2) 4^N p + 9Nd."""
    return 1.5 * 4 ** N * p + 9 * N * d


def validate_log_holder(spec: DisorderSpec, p: float, N: int, d: int) -> LogHolderCheck:
    """
    Check A > (3/2) 4^N p + 9Nd (strict).

    Uniform laws satisfy the bound for every A (margin inf); bernoulli laws
    satisfy it for none (margin -inf).
    """
    if p <= 0 or N < 1 or d < 1:
        raise DisorderSpecError(f"Need p > 0, N >= 1, d >= 1, got p={p}, N={N}, d={d}")
    threshold = log_holder_threshold(p, N, d)
    if spec.distribution == "uniform":
        return LogHolderCheck(True, threshold, math.inf)
    if spec.distribution == "bernoulli":
        return LogHolderCheck(False, threshold, -math.inf)
    margin = spec.holder_A - threshold
    return LogHolderCheck(margin > 0, threshold, margin)


class ModelError(ValueError):
    """Base exception for model construction problems."""
    pass


class DisorderSpecError(ModelError):
    """Exception raised for invalid disorder parameters."""
    pass


class FieldDomainMismatchError(ModelError):
    """Exception raised when a field does not cover the sites it is asked for."""
    pass
