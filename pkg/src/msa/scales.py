"""
Scales Module

Parameters of the multi-scale analysis, the scale sequence, the dressed decay
exponent, the variable-energy interval and the probability bounds that the
Monte Carlo estimates are compared against.
"""

import math
from typing import NamedTuple, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

ALPHA = 1.5
DEFAULT_GRID_POINTS = 9
INTEGER_WIDTH_BITS = 63


class MsaParams(BaseModel):
    """
    Decay masses, probability exponent and particle numbers of one analysis.

    p defaults to 6Nd + 1, the smallest integer above 6Nd.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    m: float = Field(default=0.2, gt=0)
    m1: float = Field(default=0.1, gt=0)
    p: float = 7.0
    L0: int = Field(default=8, ge=4)
    N: int = Field(default=1, ge=1)
    n: int = Field(default=1, ge=1)
    d: int = Field(default=1, ge=1)
    E0_energy: float = 0.5

    @model_validator(mode="before")
    @classmethod
    def _default_exponent(cls, data):
        if isinstance(data, dict) and data.get("p") is None:
            data = {**data, "p": float(6 * data.get("N", 1) * data.get("d", 1) + 1)}
        return data

    @model_validator(mode="after")
    def _check_consistency(self):
        if self.n > self.N:
            raise ValueError(f"n={self.n} exceeds N={self.N}")
        if not self.m1 < self.m:
            raise ValueError(f"Need 0 < m1 < m, got m1={self.m1}, m={self.m}")
        if not self.p > 6 * self.N * self.d:
            raise ValueError(f"Need p > 6Nd = {6 * self.N * self.d}, got p={self.p}")
        return self

    @property
    def alpha(self) -> float:
        return ALPHA

    def for_particles(self, n: int) -> "MsaParams":
        return self.model_copy(update={"n": n})

    def with_mass(self, m: float) -> "MsaParams":
        """Same parameters at another mass; m1 is rescaled to keep m1/m."""
        return self.model_copy(update={"m": m, "m1": self.m1 * m / self.m})


class ScaleSchedule(NamedTuple):
    """L_0 < L_1 < ... with L_k = floor(L_{k-1}^(3/2)) + 1."""
    lengths: Tuple[int, ...]

    def __len__(self) -> int:
        return len(self.lengths)

    def __getitem__(self, k):
        return self.lengths[k]


class EnergyInterval(NamedTuple):
    """The interval I_0 around E0, with the plain and the gamma-dressed half-widths."""
    E0: float
    delta: float
    delta_dressed: float

    @property
    def interval(self) -> Tuple[float, float]:
        return (self.E0 - self.delta, self.E0 + self.delta)

    @property
    def interval_dressed(self) -> Tuple[float, float]:
        return (self.E0 - self.delta_dressed, self.E0 + self.delta_dressed)


def scale_sequence(L0: int, k_max: int, max_bits: int = INTEGER_WIDTH_BITS) -> ScaleSchedule:
    """
    Exact integer recursion L_k = floor(L_{k-1}^(3/2)) + 1.

    Raises:
        MsaParameterError: If L0 < 2, k_max < 0 or a scale exceeds max_bits bits
    """
    if int(L0) != L0 or L0 < 2:
        raise MsaParameterError(f"Scale sequence needs an integer L0 >= 2, got {L0}")
    if k_max < 0:
        raise MsaParameterError(f"k_max must be nonnegative, got {k_max}")
    lengths = [int(L0)]
    for _ in range(k_max):
        previous = lengths[-1]
        nxt = math.isqrt(previous ** 3) + 1
        if nxt.bit_length() > max_bits:
            raise MsaParameterError(f"Scale {nxt} overflows {max_bits}-bit integers")
        lengths.append(nxt)
    return ScaleSchedule(tuple(lengths))


def gamma(m: float, L: float, n: int, N: int) -> float:
    """m (1 + L^(-1/8))^(N - n + 1)."""
    if not m > 0 or L < 1 or not 1 <= n <= N:
        raise MsaParameterError(f"gamma needs m > 0, L >= 1, 1 <= n <= N; got m={m}, L={L}, n={n}, N={N}")
    return m * (1.0 + L ** (-1.0 / 8.0)) ** (N - n + 1)


def singular_threshold(m: float, L: float, n: int, N: int) -> float:
    """e^(-gamma(m, L, n) L)."""
    return math.exp(-gamma(m, L, n, N) * L)


def resonance_threshold(L: float) -> float:
    """e^(-L^(1/2))."""
    return math.exp(-math.sqrt(L))


def localization_threshold(m: float, L: float, n: int, N: int) -> float:
    """e^(-2 gamma(m, L, n) L)."""
    return math.exp(-2.0 * gamma(m, L, n, N) * L)


def variable_energy_interval(E0: float, L0: float, m: float, m1: float, N: int, n: int) -> EnergyInterval:
    """
    delta = (1/2) e^(-2 sqrt(L0)) (e^(-m1 L0) - e^(-m L0)) and its variant with
    gamma(m1, L0, n) L0 and gamma(m, L0, n) L0 in the exponents.

    Raises:
        MsaParameterError: If not 0 < m1 < m
    """
    if not 0 < m1 < m:
        raise MsaParameterError(f"Need 0 < m1 < m, got m1={m1}, m={m}")
    prefactor = 0.5 * math.exp(-2.0 * math.sqrt(L0))
    delta = prefactor * (math.exp(-m1 * L0) - math.exp(-m * L0))
    dressed = prefactor * (math.exp(-gamma(m1, L0, n, N) * L0) - math.exp(-gamma(m, L0, n, N) * L0))
    return EnergyInterval(E0=float(E0), delta=delta, delta_dressed=dressed)


def energy_grid(interval: EnergyInterval, points: int = DEFAULT_GRID_POINTS) -> np.ndarray:
    """Equally spaced energies over I_0; 9 points give spacing delta/4."""
    if points < 2:
        return np.array([interval.E0])
    lo, hi = interval.interval
    grid = np.linspace(lo, hi, points)
    if (hi - lo) / (points - 1) > interval.delta / 4.0 * (1 + 1e-12):
        raise MsaParameterError(f"{points} grid points do not resolve I_0 at spacing delta/4")
    return grid


def derive_m_star(mu_tilde: float, N: int) -> float:
    """m* = 2^(-N-1) mu_tilde."""
    if not mu_tilde > 0:
        raise MsaParameterError(f"Single-particle decay rate must be positive, got {mu_tilde}")
    return 2.0 ** (-N - 1) * mu_tilde


def _probability_exponent(p: float, N: int, n: int) -> float:
    return p * 4.0 ** (N - n)


def _power_bound(factor: float, L: float, exponent: float) -> float:
    with np.errstate(under="ignore"):
        return float(factor * np.power(float(L), -exponent))


def singularity_bound(L: float, p: float, N: int, n: int) -> float:
    """(1/2) L^(-2p 4^(N-n))."""
    return _power_bound(0.5, L, 2.0 * _probability_exponent(p, N, n))


def pair_bound(L: float, p: float, N: int, n: int) -> float:
    """L^(-2p 4^(N-n))."""
    return _power_bound(1.0, L, 2.0 * _probability_exponent(p, N, n))


def wegner_bound(L: float, p: float, N: int, n: int) -> float:
    """L^(-p 4^(N-n))."""
    return _power_bound(1.0, L, _probability_exponent(p, N, n))


def nonlocalized_bound(L: float, p: float, N: int, n: int) -> float:
    """(1/2) L^(-4p 4^(N-n))."""
    return _power_bound(0.5, L, 4.0 * _probability_exponent(p, N, n))


class MsaParameterError(ValueError):
    """Exception raised for inconsistent analysis parameters."""
    pass
