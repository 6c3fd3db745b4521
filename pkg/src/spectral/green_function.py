"""
Green Function Module

Block norms of the finite-volume resolvent G(E) = (H - E)^{-1}, always built
from an eigendecomposition, and the numerical checks that compare resolvents
across nested cubes and across interaction amplitudes.
"""

import math
from typing import NamedTuple, Optional, Tuple, Union

import numpy as np
import scipy.linalg
import structlog
from scipy import sparse

from geometry.cube_geometry import CubeSpec, regions
from model.hamiltonian_builder import HamiltonianContext, HamiltonianMatrix
from spectral.eigen_solver import (
    EigenDecomposition,
    SpectralError,
    SpectralPreconditionError,
    eigendecompose,
)

logger = structlog.get_logger(__name__)

RESONANCE_TOL = 1e-14
NEAR_RESONANCE = 1e-6


class GreenProbe(NamedTuple):
    """One evaluation of ||1_out G(E) 1_int||."""
    E: float
    dist_to_spectrum: float
    block_norm: float
    resolvent_norm: float
    near_resonant: bool


class RegionMasks(NamedTuple):
    """Interior and boundary-shell membership of the grid points of an operator."""
    interior: np.ndarray
    shell: np.ndarray


class GriMeasurement(NamedTuple):
    ratio: float
    numerator: float
    outer_factor: float
    inner_factor: float


class EdiMeasurement(NamedTuple):
    ratio: float
    local_mass: float
    green_factor: float
    shell_mass: float


class ResolventResidual(NamedTuple):
    """Second resolvent identity check for one (H0, U, h, E)."""
    residual: float
    scale: float
    difference_norm: float
    difference_bound: float

    @property
    def within_tolerance(self) -> bool:
        return self.residual < 1e-9 * self.scale

    @property
    def difference_bounded(self) -> bool:
        return self.difference_norm <= self.difference_bound * (1 + 1e-9) + 1e-15


def region_masks(H: HamiltonianMatrix, cube: Optional[CubeSpec] = None) -> RegionMasks:
    """Interior and shell masks of cube (default: the operator's own cube) on the grid of H."""
    cube = cube or H.domain.cube
    pair = regions(cube, H.domain.spacing)
    return RegionMasks(interior=pair.interior_mask(H.coords), shell=pair.shell_mask(H.coords))


def _decomposition(H: Union[HamiltonianMatrix, EigenDecomposition, np.ndarray]) -> EigenDecomposition:
    if isinstance(H, EigenDecomposition):
        if H.partial:
            raise SpectralPreconditionError("Green-function block norms need a full eigendecomposition")
        return H
    return eigendecompose(H)


def resonance_guard(eig: EigenDecomposition, E: float) -> float:
    """dist(E, spectrum), raising ResonantEnergyError when E is numerically an eigenvalue."""
    dist = float(np.min(np.abs(eig.values - E))) if eig.values.size else math.inf
    if dist <= RESONANCE_TOL * max(1.0, eig.norm):
        raise ResonantEnergyError(f"E={E} lies in the spectrum (dist={dist:.3e})", dist_to_spectrum=dist)
    return dist


def resolvent_block(eig: EigenDecomposition, E: float, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """(1_rows G(E) 1_cols) as a dense block, G = V diag(1/(lambda - E)) V^T."""
    weights = 1.0 / (eig.values - E)
    return (eig.vectors[rows, :] * weights[None, :]) @ eig.vectors[cols, :].T


def green_block_norm(H, E: float, out_region: np.ndarray, int_region: np.ndarray) -> GreenProbe:
    """
    Largest singular value of the (out x int) block of (H - E)^{-1}.

    Args:
        H: HamiltonianMatrix, dense array or full EigenDecomposition
        E: Real energy
        out_region: Boolean mask (or index array) of the rows
        int_region: Boolean mask (or index array) of the columns

    Returns:
        GreenProbe with the block norm and the distance of E to the spectrum

    Raises:
        ResonantEnergyError: If E is within 1e-14 max(1, ||H||) of an eigenvalue
    """
    eig = _decomposition(H)
    dist = resonance_guard(eig, E)
    rows = np.flatnonzero(out_region) if np.asarray(out_region).dtype == bool else np.asarray(out_region)
    cols = np.flatnonzero(int_region) if np.asarray(int_region).dtype == bool else np.asarray(int_region)
    if rows.size == 0 or cols.size == 0:
        block_norm = 0.0
    else:
        block_norm = float(np.linalg.norm(resolvent_block(eig, E, rows, cols), 2))
    return GreenProbe(E=float(E), dist_to_spectrum=dist, block_norm=block_norm,
                      resolvent_norm=1.0 / dist, near_resonant=dist < NEAR_RESONANCE)


def shell_mass(eig: EigenDecomposition, out_region: np.ndarray) -> np.ndarray:
    """Per eigenfunction ||1_out phi||.

    Over a full eigenbasis the squares sum to the number of sites in out_region.
    """
    return np.linalg.norm(eig.vectors[np.asarray(out_region), :], axis=0)


def kernel_boundary_mass(eig: EigenDecomposition, out_region: np.ndarray, int_region: np.ndarray) -> np.ndarray:
    """Per eigenfunction ||1_out phi|| ||1_int phi||, the norm of 1_out |phi><phi| 1_int."""
    out_mass = shell_mass(eig, out_region)
    int_mass = np.linalg.norm(eig.vectors[np.asarray(int_region), :], axis=0)
    return out_mass * int_mass


def _points_inside(cube: CubeSpec, coords: np.ndarray) -> np.ndarray:
    return cube.contains_points(coords)


def gri_check(context: HamiltonianContext, inner_cube: CubeSpec, E: float,
              A_region: CubeSpec, B_region: CubeSpec) -> GriMeasurement:
    """
    Measure ||1_B G_big 1_A|| / (||1_B G_big 1_out|| ||1_out G_inner 1_A||), out being the
    boundary shell of inner_cube.

    Raises:
        SpectralPreconditionError: If A is not inside the interior of inner_cube, or B meets inner_cube
        ResonantEnergyError: If E is resonant for either operator
    """
    inner_regions = regions(inner_cube, context.domain.spacing)
    if not inner_regions.interior.contains_cube(A_region):
        raise SpectralPreconditionError("A must lie inside the interior of the inner cube")

    big = context.assemble()
    B_mask = _points_inside(B_region, big.coords)
    if not B_mask.any():
        raise SpectralPreconditionError("B contains no grid points of the big domain")
    if np.any(B_mask & _points_inside(inner_cube, big.coords)):
        raise SpectralPreconditionError("B must lie outside the inner cube")

    inner = context.sub_context(inner_cube).assemble()
    big_eig = eigendecompose(big)
    inner_eig = eigendecompose(inner)

    A_big = _points_inside(A_region, big.coords)
    A_inner = _points_inside(A_region, inner.coords)
    shell_big = inner_regions.shell_mask(big.coords)
    shell_inner = inner_regions.shell_mask(inner.coords)

    numerator = green_block_norm(big_eig, E, B_mask, A_big).block_norm
    outer_factor = green_block_norm(big_eig, E, B_mask, shell_big).block_norm
    inner_factor = green_block_norm(inner_eig, E, shell_inner, A_inner).block_norm
    ratio = _safe_ratio(numerator, outer_factor * inner_factor)
    logger.debug("gri measured", E=E, ratio=ratio)
    return GriMeasurement(ratio=ratio, numerator=numerator, outer_factor=outer_factor, inner_factor=inner_factor)


def edi_check(context: HamiltonianContext, eigenpair: Tuple[float, np.ndarray], inner_cube: CubeSpec) -> EdiMeasurement:
    """
    Measure ||1_{C_1(x)} psi|| / (||1_out G_inner(lambda) 1_int|| ||1_out psi||) for an
    eigenfunction psi of the big operator and x the inner cube center.
    """
    energy, psi = eigenpair
    big = context.assemble()
    psi = np.asarray(psi, dtype=float)
    if psi.shape != (big.dim,):
        raise SpectralPreconditionError(f"Eigenfunction has shape {psi.shape}, expected ({big.dim},)")

    inner = context.sub_context(inner_cube).assemble()
    inner_masks = region_masks(inner)
    inner_green = green_block_norm(inner, energy, inner_masks.shell, inner_masks.interior)

    inner_regions = regions(inner_cube, context.domain.spacing)
    local = CubeSpec(center=inner_cube.center, half_side=1.0)
    local_mass = float(np.linalg.norm(psi[_points_inside(local, big.coords)]))
    shell_mass = float(np.linalg.norm(psi[inner_regions.shell_mask(big.coords)]))
    ratio = _safe_ratio(local_mass, inner_green.block_norm * shell_mass)
    return EdiMeasurement(ratio=ratio, local_mass=local_mass,
                          green_factor=inner_green.block_norm, shell_mass=shell_mass)


def _safe_ratio(numerator: float, denominator: float) -> float:
    if numerator == 0.0:
        return 0.0
    if denominator == 0.0:
        return math.inf
    return numerator / denominator


def _dense_symmetric(A) -> np.ndarray:
    if isinstance(A, HamiltonianMatrix):
        A = A.matrix
    if sparse.issparse(A):
        A = A.toarray()
    return np.atleast_2d(np.asarray(A, dtype=float))


def _resolvent(A: np.ndarray, E: float) -> Tuple[np.ndarray, float]:
    values, vectors = scipy.linalg.eigh(A)
    dist = float(np.min(np.abs(values - E)))
    if dist <= RESONANCE_TOL * max(1.0, float(np.max(np.abs(values)))):
        raise ResonantEnergyError(f"E={E} lies in the spectrum (dist={dist:.3e})", dist_to_spectrum=dist)
    return (vectors / (values - E)[None, :]) @ vectors.T, 1.0 / dist


def resolvent_perturbation_residual(H0, U_diag, h: float, E: float) -> ResolventResidual:
    """
    ||G_0 - G_h - h G_0 U G_h|| for H_h = H0 + h U with U diagonal.

    Also returns ||G_0 - G_h|| and its operator-norm bound |h| ||U|| ||G_0|| ||G_h||.
    """
    A0 = _dense_symmetric(H0)
    U = np.atleast_1d(np.asarray(U_diag, dtype=float))
    if U.shape != (A0.shape[0],):
        raise SpectralPreconditionError(f"U has shape {U.shape}, expected ({A0.shape[0]},)")
    G0, norm0 = _resolvent(A0, E)
    Gh, normh = _resolvent(A0 + h * np.diag(U), E)
    difference = G0 - Gh
    residual = float(np.linalg.norm(difference - h * (G0 * U[None, :]) @ Gh, 2))
    U_norm = float(np.max(np.abs(U))) if U.size else 0.0
    return ResolventResidual(
        residual=residual,
        scale=norm0 * normh * max(1.0, abs(h) * U_norm),
        difference_norm=float(np.linalg.norm(difference, 2)),
        difference_bound=abs(h) * U_norm * norm0 * normh,
    )


class ResonantEnergyError(SpectralError):
    """Exception raised when the energy lies in the spectrum; carries the distance."""

    def __init__(self, message: str, dist_to_spectrum: float = 0.0):
        super().__init__(message)
        self.dist_to_spectrum = dist_to_spectrum
