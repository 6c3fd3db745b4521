"""
Decay Fit Module

Exponential decay fits of eigenfunctions, participation ratios and the
per-operator localization report.
"""

import math
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import structlog
from scipy import stats

from model.hamiltonian_builder import HamiltonianMatrix, grid_site
from spectral.eigen_solver import EigenDecomposition, eigendecompose
from spectral.green_function import kernel_boundary_mass, region_masks
from dynamics.evolution import DynamicsError

logger = structlog.get_logger(__name__)

AMPLITUDE_FLOOR = 1e-13
NORM_TOL = 1e-8
LOCALIZED_RATE = 0.01
DELOCALIZED_FRACTION = 0.25


class DecayFit(NamedTuple):
    """Least-squares fit log ||1_{C_1(x)} psi|| = log(prefactor) - rate |x - center|."""
    center: Tuple[int, ...]
    rate: float
    prefactor: float
    residual: float
    window: Tuple[float, float]
    cells: int
    degenerate: bool

    @property
    def localized(self) -> bool:
        return not self.degenerate and self.rate > LOCALIZED_RATE


class LocalizationReport(NamedTuple):
    fits: List[DecayFit]
    median_rate: float
    fitted_fraction: float
    participation: np.ndarray
    median_participation: float
    delocalized: bool
    mean_boundary_mass: float
    boundary_bound: float

    def to_frame(self) -> pd.DataFrame:
        """One row per eigenfunction."""
        return pd.DataFrame({
            "state": np.arange(len(self.fits)),
            "center": [" ".join(str(c) for c in f.center) for f in self.fits],
            "rate": [f.rate for f in self.fits],
            "prefactor": [f.prefactor for f in self.fits],
            "residual": [f.residual for f in self.fits],
            "window_lo": [f.window[0] for f in self.fits],
            "window_hi": [f.window[1] for f in self.fits],
            "degenerate": [f.degenerate for f in self.fits],
            "participation": self.participation,
        })


def cell_amplitudes(psi: np.ndarray, coords: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Distinct lattice cells of the grid and ||1_{C_1(x)} psi|| on each.

    Returns:
        (cells, amplitudes) with cells of shape (c, n*d)
    """
    sites = grid_site(coords).reshape(coords.shape[0], -1)
    cells, inverse = np.unique(sites, axis=0, return_inverse=True)
    mass = np.bincount(inverse.ravel(), weights=np.abs(psi) ** 2, minlength=cells.shape[0])
    return cells, np.sqrt(mass)


def decay_fit(psi: np.ndarray, coords: np.ndarray, center: Optional[Sequence[int]] = None,
              window: Optional[Tuple[float, float]] = None) -> DecayFit:
    """
    Fit the decay rate of a normalized state.

    Args:
        psi: State of shape (dim,)
        coords: Grid coordinates of shape (dim, n, d)
        center: Lattice point the distance is measured from (default: the heaviest cell)
        window: Optional (r_min, r_max) restriction of the fitted distances

    Returns:
        DecayFit; degenerate when fewer than two distances carry mass above 1e-13

    Raises:
        DynamicsError: If psi is not normalized or does not match coords
    """
    psi = np.asarray(psi)
    if psi.shape != (coords.shape[0],):
        raise DynamicsError(f"State of shape {psi.shape} does not match {coords.shape[0]} grid points")
    if abs(np.linalg.norm(psi) - 1.0) > NORM_TOL:
        raise DynamicsError(f"decay_fit needs a normalized state, got norm {np.linalg.norm(psi):.6f}")

    cells, amplitudes = cell_amplitudes(psi, coords)
    if center is None:
        center = cells[int(np.argmax(amplitudes))]
    center = np.asarray(center, dtype=np.int64).ravel()
    distances = np.max(np.abs(cells - center[None, :]), axis=1).astype(float)

    keep = amplitudes > AMPLITUDE_FLOOR
    if window is not None:
        keep &= (distances >= window[0]) & (distances <= window[1])
    r, log_amp = distances[keep], np.log(amplitudes[keep])
    center_key = tuple(int(c) for c in center)
    if np.unique(r).size < 2:
        return DecayFit(center_key, math.nan, math.nan, math.nan,
                        (float(r.min()) if r.size else 0.0, float(r.max()) if r.size else 0.0),
                        int(r.size), True)

    fit = stats.linregress(r, log_amp)
    residual = float(np.sqrt(np.mean((log_amp - (fit.intercept + fit.slope * r)) ** 2)))
    return DecayFit(center=center_key, rate=-float(fit.slope), prefactor=float(np.exp(fit.intercept)),
                    residual=residual, window=(float(r.min()), float(r.max())), cells=int(r.size),
                    degenerate=False)


def participation_ratio(eig: EigenDecomposition) -> np.ndarray:
    """(sum_x |phi(x)|^4)^(-1) for every eigenfunction; between 1 and dim."""
    return 1.0 / np.sum(np.abs(eig.vectors) ** 4, axis=0)


def localization_report(H: HamiltonianMatrix, eig: Optional[EigenDecomposition] = None,
                        delocalized_fraction: float = DELOCALIZED_FRACTION) -> LocalizationReport:
    """
    Decay fits of every eigenfunction of H.

    The summary rate is the median over non-degenerate fits. The operator is flagged
    delocalized when the median participation ratio exceeds delocalized_fraction * dim
    or the median rate is not positive. The mean boundary kernel is compared with
    e^(-rate L).
    """
    eig = eig or eigendecompose(H)
    fits = [decay_fit(eig.vectors[:, j], H.coords) for j in range(eig.count)]
    rates = np.array([f.rate for f in fits if not f.degenerate])
    median_rate = float(np.median(rates)) if rates.size else math.nan
    participation = participation_ratio(eig)
    median_pr = float(np.median(participation))
    delocalized = median_pr > delocalized_fraction * eig.dim or not median_rate > LOCALIZED_RATE

    L = H.domain.cube.half_side
    if L > 3:
        masks = region_masks(H)
        mean_boundary = float(np.mean(kernel_boundary_mass(eig, masks.shell, masks.interior)))
    else:
        mean_boundary = math.nan
    bound = math.exp(-median_rate * L) if math.isfinite(median_rate) else math.nan

    logger.info("localization report", dim=eig.dim, median_rate=median_rate,
                median_participation=median_pr, delocalized=delocalized)
    return LocalizationReport(fits=fits, median_rate=median_rate, fitted_fraction=rates.size / max(len(fits), 1),
                              participation=participation, median_participation=median_pr,
                              delocalized=delocalized, mean_boundary_mass=mean_boundary, boundary_bound=bound)
