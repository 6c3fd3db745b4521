"""
Cube Classifier Module

Evaluates the MSA predicates of one cube in one realization: resonance,
(non)singularity, complete non-resonance, localization of PI cubes and the
non-interacting NS implication.
"""

import itertools
import math
from typing import Iterable, Iterator, List, NamedTuple, Optional, Tuple

import numpy as np
import structlog

from geometry.cube_geometry import CubeSpec, ParticlePoint
from geometry.interactivity import PARTIALLY_INTERACTIVE, classify_interactivity, pi_partition
from model.disorder import DisorderField
from model.hamiltonian_builder import DEFAULT_MAX_DIM, DomainSpec, HamiltonianContext, HamiltonianMatrix
from model.interaction import InteractionSpec
from msa.scales import (
    MsaParameterError,
    MsaParams,
    localization_threshold,
    resonance_threshold,
    singular_threshold,
)
from spectral.eigen_solver import EigenDecomposition, eigendecompose
from spectral.green_function import (
    ResonantEnergyError,
    green_block_norm,
    kernel_boundary_mass,
    region_masks,
    shell_mass,
)

logger = structlog.get_logger(__name__)


class CubeVerdict(NamedTuple):
    """Classification of one cube at one energy; thresholds are recomputed on every call."""
    cube: CubeSpec
    E: float
    nonsingular: bool
    resonant: bool
    block_norm: float
    dist_to_spectrum: float
    singular_threshold: float
    resonance_threshold: float
    cnr: Optional[bool] = None
    localized: Optional[bool] = None

    @property
    def singular(self) -> bool:
        return not self.nonsingular


class CnrResult(NamedTuple):
    cnr: bool
    offender: Optional[CubeSpec]
    offender_dist: Optional[float]
    tested: int
    cube_resonant: bool


class LocalizationResult(NamedTuple):
    """m-localization of both factors of a PI cube."""
    localized: bool
    J: Tuple[int, ...]
    left_localized: bool
    right_localized: bool
    worst_left: float
    worst_right: float
    threshold_left: float
    threshold_right: float
    worst_shell_left: float = 0.0
    worst_shell_right: float = 0.0


class NsImplicationReport(NamedTuple):
    """Hypotheses and conclusion of the non-interacting NS implication on one realization."""
    status: str  # "holds", "vacuous" or "counterexample"
    nonresonant: bool
    eigenfunctions_localized: bool
    nonsingular: bool
    worst_kernel: float
    kernel_threshold: float
    verdict: CubeVerdict


def build_context(cube: CubeSpec, field: DisorderField, interaction: Optional[InteractionSpec],
                  spacing: float = 1.0, max_dim: int = DEFAULT_MAX_DIM) -> HamiltonianContext:
    return HamiltonianContext(DomainSpec(cube, spacing), field, interaction, max_dim)


def classify_operator(H: HamiltonianMatrix, eig: EigenDecomposition, E: float, params: MsaParams) -> CubeVerdict:
    """Verdict for an already decomposed cube operator."""
    cube = H.domain.cube
    L = cube.half_side
    s_threshold = singular_threshold(params.m, L, cube.n, params.N)
    r_threshold = resonance_threshold(L)
    masks = region_masks(H)
    try:
        green = green_block_norm(eig, E, masks.shell, masks.interior)
        block_norm, dist, blocked = green.block_norm, green.dist_to_spectrum, False
    except ResonantEnergyError as e:
        block_norm, dist, blocked = math.inf, e.dist_to_spectrum, True

    return CubeVerdict(
        cube=cube,
        E=float(E),
        nonsingular=(not blocked) and block_norm <= s_threshold,
        resonant=dist <= r_threshold,
        block_norm=block_norm,
        dist_to_spectrum=dist,
        singular_threshold=s_threshold,
        resonance_threshold=r_threshold,
    )


def classify_cube(cube: CubeSpec, field: DisorderField, interaction: Optional[InteractionSpec], E: float,
                  params: MsaParams, spacing: float = 1.0, max_dim: int = DEFAULT_MAX_DIM,
                  check_cnr: bool = False, check_localized: bool = False) -> CubeVerdict:
    """
    Resonance and (non)singularity of cube at energy E.

    Resonant iff dist(E, spectrum) <= e^(-sqrt(L)); nonsingular iff the resonance guard
    passes and ||1_out G(E) 1_int|| <= e^(-gamma(m, L, n) L). CNR and PI localization
    are added on request.
    """
    H = build_context(cube, field, interaction, spacing, max_dim).assemble()
    verdict = classify_operator(H, eigendecompose(H), E, params)
    updates = {}
    if check_cnr:
        updates["cnr"] = is_cnr(cube, field, interaction, E, params, spacing, max_dim).cnr
    r0 = interaction.r0_grid_units if interaction is not None else 0.0
    if check_localized and classify_interactivity(cube, r0) == PARTIALLY_INTERACTIVE:
        updates["localized"] = is_localized_pi(cube, field, interaction, params, spacing, max_dim).localized
    return verdict._replace(**updates) if updates else verdict


def cnr_sizes(L: int, size_step: int = 1) -> List[int]:
    """Integer sub-cube sizes from ceil(L^(2/3)) up to L."""
    L = int(L)
    if L < 4:
        return [L]
    smallest = max(1, round(L ** (2.0 / 3.0)))
    while smallest ** 3 < L ** 2:
        smallest += 1
    while smallest > 1 and (smallest - 1) ** 3 >= L ** 2:
        smallest -= 1
    sizes = list(range(smallest, L + 1, max(1, size_step)))
    if sizes[-1] != L:
        sizes.append(L)
    return sizes


def subcube_centers(cube: CubeSpec, size: int) -> List[ParticlePoint]:
    """Centers on cube.center + step Z^(nd), step = floor(size/3), whose size-cube fits inside cube."""
    step = max(1, size // 3)
    reach = int(math.floor(cube.half_side - size))
    offsets = [k * step for k in range(-(reach // step), reach // step + 1)]
    centers = []
    for shift in itertools.product(offsets, repeat=len(cube.center.coords)):
        coords = tuple(c + s for c, s in zip(cube.center.coords, shift))
        centers.append(ParticlePoint(n=cube.n, d=cube.d, coords=coords))
    return centers


def subcube_spectra(cube: CubeSpec, field: DisorderField, interaction: Optional[InteractionSpec],
                    spacing: float = 1.0, max_dim: int = DEFAULT_MAX_DIM,
                    size_step: int = 1) -> Iterator[Tuple[CubeSpec, np.ndarray]]:
    """
    Spectra scanned by the CNR test, lazily: the cube itself first, then sub-cubes by
    increasing size. Cubes with L < 4 only yield themselves.
    """
    context = build_context(cube, field, interaction, spacing, max_dim)
    yield cube, eigendecompose(context.assemble()).values
    L = int(cube.half_side)
    for size in cnr_sizes(L, size_step):
        if size >= L:
            continue
        for center in subcube_centers(cube, size):
            sub = CubeSpec(center=center, half_side=size)
            yield sub, eigendecompose(context.sub_context(sub).assemble()).values


def first_resonant(spectra: Iterable[Tuple[CubeSpec, np.ndarray]], E: float) -> CnrResult:
    """Scan (cube, spectrum) pairs for the first E-resonant one."""
    tested = 0
    cube_resonant = False
    for sub, values in spectra:
        dist = float(np.min(np.abs(values - E)))
        resonant = dist <= resonance_threshold(sub.half_side)
        if tested == 0:
            cube_resonant = resonant
        tested += 1
        if resonant:
            logger.debug("resonant sub-cube", size=sub.half_side, center=sub.center.coords, dist=dist)
            return CnrResult(False, sub, dist, tested, cube_resonant)
    return CnrResult(True, None, None, tested, cube_resonant)


def is_cnr(cube: CubeSpec, field: DisorderField, interaction: Optional[InteractionSpec], E: float,
           params: MsaParams, spacing: float = 1.0, max_dim: int = DEFAULT_MAX_DIM,
           size_step: int = 1) -> CnrResult:
    """
    E-complete non-resonance: no sub-cube of size >= L^(2/3) is E-resonant.

    The first resonant cube in scan order is returned as the offender. The cube itself
    is always scanned, so a CNR cube is E-NR.
    """
    if cube.half_side < 1:
        raise MsaParameterError(f"CNR needs L >= 1, got {cube.half_side}")
    return first_resonant(subcube_spectra(cube, field, interaction, spacing, max_dim, size_step), E)


class FactorMeasure(NamedTuple):
    """Worst eigenfunction kernel and worst shell mass of one factor operator."""
    kernel: float
    shell: float


def _factor_measure(cube: CubeSpec, field: DisorderField, interaction: Optional[InteractionSpec],
                    spacing: float, max_dim: int) -> FactorMeasure:
    H = build_context(cube, field, interaction, spacing, max_dim).assemble()
    masks = region_masks(H)
    eig = eigendecompose(H)
    kernels = kernel_boundary_mass(eig, masks.shell, masks.interior)
    shells = shell_mass(eig, masks.shell)
    if not kernels.size:
        return FactorMeasure(0.0, 0.0)
    return FactorMeasure(float(np.max(kernels)), float(np.max(shells)))


def is_localized_pi(cube: CubeSpec, field: DisorderField, interaction: Optional[InteractionSpec],
                    params: MsaParams, spacing: float = 1.0, max_dim: int = DEFAULT_MAX_DIM) -> LocalizationResult:
    """
    Both factor operators of a PI cube have every eigenfunction kernel
    ||1_out phi|| ||1_int phi|| below e^(-2 gamma(m, L, n') L).

    The shell mass ||1_out phi|| alone is reported in worst_shell_left/right. It is not
    the verdict: over a full eigenbasis the squared shell masses sum to the number of
    shell sites, so max ||1_out phi|| >= sqrt(|shell| / dim) for every realization.

    Raises:
        NoPartitionError: If the cube is FI
    """
    r0 = interaction.r0_grid_units if interaction is not None else 0.0
    partition = pi_partition(cube, r0)
    left, right = sorted(partition.J), sorted(partition.complement)
    L = cube.half_side

    left_measure = _factor_measure(cube.sub_cube(left), field, interaction, spacing, max_dim)
    right_measure = _factor_measure(cube.sub_cube(right), field, interaction, spacing, max_dim)
    threshold_left = localization_threshold(params.m, L, len(left), params.N)
    threshold_right = localization_threshold(params.m, L, len(right), params.N)
    left_ok = left_measure.kernel <= threshold_left
    right_ok = right_measure.kernel <= threshold_right
    return LocalizationResult(
        localized=left_ok and right_ok,
        J=tuple(left),
        left_localized=left_ok,
        right_localized=right_ok,
        worst_left=left_measure.kernel,
        worst_right=right_measure.kernel,
        threshold_left=threshold_left,
        threshold_right=threshold_right,
        worst_shell_left=left_measure.shell,
        worst_shell_right=right_measure.shell,
    )


def single_particle_kernels(cube: CubeSpec, field: DisorderField, spacing: float = 1.0,
                            max_dim: int = DEFAULT_MAX_DIM) -> List[float]:
    """Largest eigenfunction kernel of each one-particle operator on C_L(u_i)."""
    return [_factor_measure(cube.sub_cube([i]), field, None, spacing, max_dim).kernel for i in range(cube.n)]


def noninteracting_ns_implication_check(cube: CubeSpec, field: DisorderField, E: float, params: MsaParams,
                                        interaction: Optional[InteractionSpec] = None, spacing: float = 1.0,
                                        max_dim: int = DEFAULT_MAX_DIM) -> NsImplicationReport:
    """
    At h = 0: if the cube is E-NR and every single-particle eigenfunction kernel is below
    e^(-2 gamma(m, L, n) L), the cube must be (E, m)-NS. Hypothesis failures are vacuous.

    Raises:
        MsaParameterError: If an interaction with h != 0 is supplied
    """
    if interaction is not None and interaction.h != 0:
        raise MsaParameterError(f"The non-interacting implication needs h = 0, got h={interaction.h}")
    verdict = classify_cube(cube, field, None, E, params, spacing, max_dim)
    kernels = single_particle_kernels(cube, field, spacing, max_dim)
    worst = max(kernels)
    threshold = localization_threshold(params.m, cube.half_side, cube.n, params.N)
    localized = worst <= threshold
    nonresonant = not verdict.resonant

    if nonresonant and localized:
        status = "holds" if verdict.nonsingular else "counterexample"
    else:
        status = "vacuous"
    if status == "counterexample":
        logger.warning("non-interacting implication failed", center=cube.center.coords, E=E,
                       block_norm=verdict.block_norm, threshold=verdict.singular_threshold)
    return NsImplicationReport(status=status, nonresonant=nonresonant, eigenfunctions_localized=localized,
                               nonsingular=verdict.nonsingular, worst_kernel=worst,
                               kernel_threshold=threshold, verdict=verdict)
