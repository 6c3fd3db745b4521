"""
Hamiltonian Builder Module

Assembles the finite-volume operator -Laplacian + sum_i V(x_i) + h U(x) on the
interior grid of an n-particle cube with Dirichlet boundary conditions. The
kinetic part is a Kronecker sum of one-dimensional 3-point stencils, one per
(particle, axis) pair, with particle 0 as the slowest index.
"""

import math
from dataclasses import dataclass, field as dataclass_field
from typing import List, Optional, Tuple

import numpy as np
import structlog
from scipy import sparse

from geometry.cube_geometry import CubeSpec
from model.disorder import DisorderField, FieldDomainMismatchError, ModelError, SiteWindow
from model.interaction import InteractionSpec, pair_potential_sum

logger = structlog.get_logger(__name__)

DEFAULT_MAX_DIM = 20000


@dataclass(frozen=True)
class DomainSpec:
    """A cube with its grid spacing; the boundary condition is always Dirichlet."""
    cube: CubeSpec
    spacing: float = 1.0
    boundary: str = "dirichlet"

    def __post_init__(self):
        if not self.spacing > 0:
            raise ModelError(f"Grid spacing must be positive, got {self.spacing}")
        if self.boundary != "dirichlet":
            raise ModelError(f"Only Dirichlet boundary conditions are supported, got {self.boundary}")
        for side in self.cube.half_sides:
            if interior_point_count(side, self.spacing) < 1:
                raise ModelError(f"Half-side {side} leaves no interior grid points at spacing {self.spacing}")

    def axis_grids(self) -> List[np.ndarray]:
        """One coordinate array per (particle, axis), particle-major."""
        grids = []
        for i in range(self.cube.n):
            side = self.cube.half_sides[i]
            count = interior_point_count(side, self.spacing)
            for center in self.cube.center.particle(i):
                grids.append(center - side + self.spacing * np.arange(1, count + 1))
        return grids

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(g.size for g in self.axis_grids())

    @property
    def dimension(self) -> int:
        return int(np.prod(self.shape))

    def coordinates(self) -> np.ndarray:
        """Physical coordinates of every basis point, shape (dim, n, d)."""
        mesh = np.meshgrid(*self.axis_grids(), indexing="ij")
        flat = np.stack([m.ravel() for m in mesh], axis=-1)
        return flat.reshape(-1, self.cube.n, self.cube.d)

    def site_window(self) -> SiteWindow:
        """Sites whose potential the interior grid reads."""
        lower, upper = [], []
        for k in range(self.cube.d):
            lows, highs = [], []
            for i in range(self.cube.n):
                grid = self.axis_grids()[i * self.cube.d + k]
                lows.append(grid_site(grid[0]))
                highs.append(grid_site(grid[-1]))
            lower.append(int(min(lows)))
            upper.append(int(max(highs)))
        return SiteWindow(tuple(lower), tuple(upper))


@dataclass
class HamiltonianMatrix:
    """
    Sparse symmetric finite-volume operator plus the data needed to rebuild its parts.
    """
    matrix: sparse.csr_matrix
    domain: DomainSpec
    coords: np.ndarray
    potential_diag: np.ndarray
    interaction_diag: np.ndarray
    h: float = 0.0
    metadata: dict = dataclass_field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.domain.shape

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def without_interaction(self) -> sparse.csr_matrix:
        """The h = 0 operator on the same grid."""
        return (self.matrix - sparse.diags(self.h * self.interaction_diag)).tocsr()

    def norm_bound(self) -> float:
        """Gershgorin bound on ||H||."""
        return float(abs(self.matrix).sum(axis=1).max())


def interior_point_count(half_side: float, spacing: float) -> int:
    """Number of grid points strictly inside (u - L, u + L): 2L/a - 1."""
    ratio = 2.0 * half_side / spacing
    steps = int(round(ratio))
    if not math.isclose(ratio, steps, rel_tol=0, abs_tol=1e-9):
        raise ModelError(f"2L/a must be an integer, got 2*{half_side}/{spacing}")
    return steps - 1


def grid_site(x) -> np.ndarray:
    """Integer site whose unit cell holds the grid point x."""
    return np.floor(np.asarray(x) + 0.5 + 1e-12).astype(np.int64)


def stencil_1d(count: int, spacing: float) -> sparse.csr_matrix:
    """(2 psi_i - psi_{i-1} - psi_{i+1}) / a^2 with Dirichlet truncation."""
    if count == 1:
        return sparse.csr_matrix(np.array([[2.0 / spacing ** 2]]))
    ones = np.ones(count)
    return (sparse.diags([-ones[1:], 2 * ones, -ones[1:]], [-1, 0, 1], shape=(count, count)) / spacing ** 2).tocsr()


def kinetic_operator(shape: Tuple[int, ...], spacing: float) -> sparse.csr_matrix:
    """Kronecker sum of the 1D stencils, first axis slowest."""
    total = None
    for q, count in enumerate(shape):
        term = stencil_1d(count, spacing)
        before = int(np.prod(shape[:q])) if q else 1
        after = int(np.prod(shape[q + 1:])) if q + 1 < len(shape) else 1
        if before > 1:
            term = sparse.kron(sparse.identity(before, format="csr"), term, format="csr")
        if after > 1:
            term = sparse.kron(term, sparse.identity(after, format="csr"), format="csr")
        total = term if total is None else total + term
    return total.tocsr()


def dirichlet_stencil_spectrum(count: int, spacing: float = 1.0) -> np.ndarray:
    """Closed-form eigenvalues 2(1 - cos(j pi / (M + 1))) / a^2, j = 1..M."""
    j = np.arange(1, count + 1)
    return 2.0 * (1.0 - np.cos(j * np.pi / (count + 1))) / spacing ** 2


def _check_size(domain: DomainSpec, max_dim: int):
    dimension = domain.dimension
    if dimension > max_dim:
        raise MatrixSizeError(f"Matrix dimension {dimension} exceeds the configured cap {max_dim}")


def _assemble(domain: DomainSpec, field: DisorderField, interaction: Optional[InteractionSpec],
              max_dim: int) -> HamiltonianMatrix:
    _check_size(domain, max_dim)
    coords = domain.coordinates()
    sites = grid_site(coords).reshape(-1, domain.cube.d)
    if not field.window.contains(sites):
        raise FieldDomainMismatchError(
            f"Field window {field.window} does not cover domain sites {domain.site_window()}")
    potential = field.value_at(sites).reshape(coords.shape[0], domain.cube.n).sum(axis=1)

    if interaction is not None and domain.cube.n > 1:
        coupling = pair_potential_sum(coords, interaction)
        h = interaction.h
    else:
        coupling = np.zeros(coords.shape[0])
        h = 0.0

    matrix = kinetic_operator(domain.shape, domain.spacing) + sparse.diags(potential + h * coupling)
    logger.debug("hamiltonian assembled", n=domain.cube.n, dim=coords.shape[0], h=h)
    return HamiltonianMatrix(matrix=matrix.tocsr(), domain=domain, coords=coords,
                             potential_diag=potential, interaction_diag=coupling, h=h)


def assemble_single(domain: DomainSpec, field: DisorderField, max_dim: int = DEFAULT_MAX_DIM) -> HamiltonianMatrix:
    """
    One-particle operator -Laplacian + V.

    Raises:
        ModelError: If the domain cube is not a one-particle cube
        FieldDomainMismatchError: If the field does not cover the grid
    """
    if domain.cube.n != 1:
        raise ModelError(f"assemble_single needs a one-particle cube, got n={domain.cube.n}")
    return _assemble(domain, field, None, max_dim)


def assemble_multiparticle(domain: DomainSpec, field: DisorderField, interaction: InteractionSpec, n: int,
                           max_dim: int = DEFAULT_MAX_DIM) -> HamiltonianMatrix:
    """
    n-particle operator: Kronecker-sum kinetic term, sum_i V(x_i) and h U(x) on the diagonal.

    Raises:
        MatrixSizeError: If the dimension exceeds max_dim
    """
    if n < 1 or domain.cube.n != n:
        raise ModelError(f"Domain cube has n={domain.cube.n}, requested n={n}")
    return _assemble(domain, field, interaction, max_dim)


@dataclass(frozen=True)
class HamiltonianContext:
    """Everything needed to rebuild the operator on any sub-cube of a domain."""
    domain: DomainSpec
    field: DisorderField
    interaction: Optional[InteractionSpec] = None
    max_dim: int = DEFAULT_MAX_DIM

    def assemble(self) -> HamiltonianMatrix:
        return _assemble(self.domain, self.field, self.interaction, self.max_dim)

    def sub_context(self, subcube: CubeSpec) -> "HamiltonianContext":
        if not self.domain.cube.contains_cube(subcube):
            raise SubcubeContainmentError(f"Sub-cube {subcube} is not inside {self.domain.cube}")
        return HamiltonianContext(DomainSpec(subcube, self.domain.spacing), self.field, self.interaction, self.max_dim)


def restrict(context: HamiltonianContext, subcube: CubeSpec) -> HamiltonianMatrix:
    """
    Operator reassembled on subcube with the same field and Dirichlet walls at its boundary.

    Raises:
        SubcubeContainmentError: If subcube is not inside the context's domain
    """
    return context.sub_context(subcube).assemble()


class MatrixSizeError(ModelError):
    """Exception raised when a matrix would exceed the configured dimension cap."""
    pass


class SubcubeContainmentError(ModelError):
    """Exception raised when restricting to a cube outside the domain."""
    pass
