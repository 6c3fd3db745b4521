"""
Evolution Module

Spectral time evolution e^{-itH} from an eigendecomposition and the dynamical
moment observable sup_t || |X|^s e^{-itH} P_I 1_K || on a logarithmic time grid.
"""

import math
from typing import Iterable, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
import structlog
from scipy import stats

from geometry.cube_geometry import CubeSpec
from model.disorder import DisorderField
from model.hamiltonian_builder import DEFAULT_MAX_DIM, DomainSpec, HamiltonianContext, HamiltonianMatrix
from model.interaction import InteractionSpec
from spectral.eigen_solver import EigenDecomposition, eigendecompose, spectral_projection

logger = structlog.get_logger(__name__)

DEFAULT_T_MAX = 1000.0
DEFAULT_T_MIN = 0.1
POINTS_PER_DECADE = 8

Region = Union[CubeSpec, np.ndarray, Sequence[int]]


class MomentRecord(NamedTuple):
    """Moment series of one realization; sup is taken over the recorded grid only."""
    s: float
    interval: Tuple[float, float]
    K_size: int
    times: np.ndarray
    series: np.ndarray
    sup: float
    t_max: float
    origin: Tuple[float, ...]
    empty_projection: bool


class MomentExpectation(NamedTuple):
    """Monte Carlo mean of the sup-moment and of the series, with a t-interval on the sup."""
    realizations: int
    times: np.ndarray
    mean_series: np.ndarray
    mean_sup: float
    ci_lo: float
    ci_hi: float


def _check_full(eig: EigenDecomposition):
    if eig.partial:
        raise DynamicsError("Time evolution needs a full eigendecomposition")


def evolve(eig: EigenDecomposition, psi0: np.ndarray, t: float) -> np.ndarray:
    """
    psi(t) = V e^{-it Lambda} V^T psi0.

    Args:
        eig: Full eigendecomposition of H
        psi0: State of shape (dim,) or a block of states (dim, k)
        t: Time (negative times run backwards)

    Raises:
        DynamicsError: If psi0 does not match the operator dimension
    """
    _check_full(eig)
    psi0 = np.asarray(psi0)
    if psi0.shape[0] != eig.dim:
        raise DynamicsError(f"State of length {psi0.shape[0]} does not match dimension {eig.dim}")
    if t == 0:
        return psi0.astype(complex)
    phases = np.exp(-1j * t * eig.values)
    coefficients = eig.vectors.T @ psi0
    if coefficients.ndim == 1:
        return eig.vectors @ (phases * coefficients)
    return eig.vectors @ (phases[:, None] * coefficients)


def log_time_grid(t_max: float = DEFAULT_T_MAX, t_min: float = DEFAULT_T_MIN,
                  points_per_decade: int = POINTS_PER_DECADE) -> np.ndarray:
    """
    0 followed by times 10^(k/points_per_decade) in [t_min, t_max], plus t_max itself.

    Grids for increasing t_max share their common prefix, so sups over nested
    horizons are monotone.
    """
    if not t_max > 0 or not 0 < t_min <= t_max:
        raise DynamicsError(f"Need 0 < t_min <= t_max, got t_min={t_min}, t_max={t_max}")
    first = math.ceil(points_per_decade * math.log10(t_min) - 1e-9)
    last = math.floor(points_per_decade * math.log10(t_max) + 1e-9)
    times = [0.0] + [10.0 ** (k / points_per_decade) for k in range(first, last + 1)]
    if not math.isclose(times[-1], t_max, rel_tol=1e-12):
        times.append(float(t_max))
    return np.asarray(times)


def position_weights(coords: np.ndarray, origin: Sequence[float]) -> np.ndarray:
    """|x| as the max-norm distance of every basis configuration from origin."""
    origin = np.asarray(origin, dtype=float).reshape(1, *coords.shape[1:])
    return np.max(np.abs(coords - origin).reshape(coords.shape[0], -1), axis=1)


def region_indices(K: Region, coords: np.ndarray) -> np.ndarray:
    """Basis indices of K, given as a cube, a boolean mask or an index list."""
    if isinstance(K, CubeSpec):
        indices = np.flatnonzero(K.contains_points(coords))
    else:
        K = np.asarray(K)
        indices = np.flatnonzero(K) if K.dtype == bool else K.astype(np.int64)
    if indices.size == 0:
        raise EmptyRegionError("The region K holds no grid points")
    return indices


def moment_observable(H: HamiltonianMatrix, eig: EigenDecomposition, s: float, interval: Tuple[float, float],
                      K: Region, times: Optional[np.ndarray] = None,
                      origin: Optional[Sequence[float]] = None) -> MomentRecord:
    """
    || |X|^s e^{-itH} P_I 1_K || for every t on the grid, as the largest image norm of the
    basis vectors of K.

    Args:
        H: Operator whose grid defines |X|
        eig: Full eigendecomposition of H
        s: Moment exponent (> 0)
        interval: Energy interval I of the spectral projection
        K: Region of initial sites
        times: Time grid (default log_time_grid())
        origin: Point |X| is measured from (default: the cube center)

    Raises:
        DynamicsError: If s <= 0
        EmptyRegionError: If K holds no grid points
    """
    _check_full(eig)
    if not s > 0:
        raise DynamicsError(f"Moment exponent must be positive, got {s}")
    times = log_time_grid() if times is None else np.asarray(times, dtype=float)
    origin = tuple(float(c) for c in (H.domain.cube.center.coords if origin is None else origin))
    columns = region_indices(K, H.coords)

    projection = spectral_projection(eig, interval)
    series = np.zeros(times.size)
    if projection.empty:
        logger.debug("empty spectral projection", interval=interval)
    else:
        weights = position_weights(H.coords, origin) ** s
        mask = (eig.values >= interval[0]) & (eig.values <= interval[1])
        values = eig.values[mask]
        coefficients = projection.columns[columns, :].T
        for k, t in enumerate(times):
            images = projection.columns @ (np.exp(-1j * t * values)[:, None] * coefficients)
            series[k] = float(np.max(np.linalg.norm(weights[:, None] * images, axis=0)))

    return MomentRecord(s=float(s), interval=(float(interval[0]), float(interval[1])), K_size=int(columns.size),
                        times=times, series=series, sup=float(series.max()), t_max=float(times[-1]),
                        origin=origin, empty_projection=projection.empty)


def realization_moments(cube: CubeSpec, fields: Iterable[DisorderField], s: float, interval: Tuple[float, float],
                        K: Region, times: Optional[np.ndarray] = None,
                        interaction: Optional[InteractionSpec] = None, spacing: float = 1.0,
                        max_dim: int = DEFAULT_MAX_DIM) -> List[MomentRecord]:
    """One MomentRecord per field, the decomposition of each realization shared by all of K."""
    records = []
    for field in fields:
        H = HamiltonianContext(DomainSpec(cube, spacing), field, interaction, max_dim).assemble()
        records.append(moment_observable(H, eigendecompose(H), s, interval, K, times))
    return records


def moment_expectation(records: Sequence[MomentRecord], confidence: float = 0.95) -> MomentExpectation:
    """
    Disorder average of the sup-moment over realizations.

    Raises:
        DynamicsError: If records is empty or the time grids differ
    """
    if not records:
        raise DynamicsError("No moment records to average")
    times = records[0].times
    if any(r.times.shape != times.shape or not np.allclose(r.times, times) for r in records):
        raise DynamicsError("Moment records use different time grids")
    sups = np.array([r.sup for r in records])
    mean = float(np.mean(sups))
    if sups.size > 1:
        half = float(stats.t.ppf(0.5 + confidence / 2.0, sups.size - 1)) * float(stats.sem(sups))
    else:
        half = 0.0
    return MomentExpectation(realizations=int(sups.size), times=times,
                             mean_series=np.mean([r.series for r in records], axis=0),
                             mean_sup=mean, ci_lo=mean - half, ci_hi=mean + half)


class DynamicsError(ValueError):
    """Exception raised for invalid time-evolution requests."""
    pass


class EmptyRegionError(DynamicsError):
    """Exception raised when the initial region K is empty."""
    pass
