"""
Eigen Solver Module

Symmetric eigendecomposition of finite-volume operators (dense up to a cap,
shift-invert Lanczos for a few pairs beyond), tensor-product spectra, spectral
projections and Weyl counting.
"""

import math
from typing import NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg
import structlog
from scipy import sparse
from scipy.sparse.linalg import ArpackNoConvergence, eigsh
from scipy.sparse.linalg import norm as sparse_norm

from model.hamiltonian_builder import DomainSpec, HamiltonianMatrix, dirichlet_stencil_spectrum

logger = structlog.get_logger(__name__)

DENSE_CAP = 4000
SPECTRUM_CAP = 20000
RESIDUAL_TOL = 1e-8
ORTHO_TOL = 1e-8

MatrixLike = Union[HamiltonianMatrix, np.ndarray, sparse.spmatrix]


class EigenDecomposition(NamedTuple):
    """Sorted eigenvalues with orthonormal eigenvectors as columns."""
    values: np.ndarray
    vectors: np.ndarray
    dim: int
    norm: float
    partial: bool = False

    @property
    def count(self) -> int:
        return self.values.size


class SpectralProjection(NamedTuple):
    """P_I = V_I V_I^T for the eigenvalues of a decomposition inside I."""
    columns: np.ndarray
    interval: Tuple[float, float]

    @property
    def empty(self) -> bool:
        return self.columns.shape[1] == 0

    def apply(self, x: np.ndarray) -> np.ndarray:
        return self.columns @ (self.columns.T @ x)


class WeylParams(NamedTuple):
    """Counting constant; j_star = ceil(C_Weyl * volume)."""
    C_Weyl: float = 1.0 / math.pi


class WeylCount(NamedTuple):
    exact: int
    asymptotic: float
    j_star: int
    continuum: int


def _as_operator(H: MatrixLike):
    if isinstance(H, HamiltonianMatrix):
        return H.matrix
    return H


def _dense(A) -> np.ndarray:
    return A.toarray() if sparse.issparse(A) else np.asarray(A, dtype=float)


def _check_pairs(A, values: np.ndarray, vectors: np.ndarray, norm: float):
    residual = A @ vectors - vectors * values[None, :]
    worst = float(np.max(np.linalg.norm(residual, axis=0))) if values.size else 0.0
    if worst >= RESIDUAL_TOL * max(norm, 1.0):
        raise ConvergenceError(f"Eigenpair residual {worst:.3e} above tolerance for ||H||={norm:.3e}")
    gram = vectors.T @ vectors
    drift = float(np.max(np.abs(gram - np.eye(values.size)))) if values.size else 0.0
    if drift >= ORTHO_TOL:
        raise ConvergenceError(f"Eigenvectors lost orthonormality: max |V^T V - I| = {drift:.3e}")


def eigendecompose(H: MatrixLike, k: Optional[int] = None, sigma: Optional[float] = None,
                   dense_cap: int = DENSE_CAP, max_dim: int = SPECTRUM_CAP) -> EigenDecomposition:
    """
    Eigenpairs of a real symmetric operator.

    Args:
        H: Operator (HamiltonianMatrix, dense array or sparse matrix)
        k: Number of pairs nearest sigma; required above dense_cap
        sigma: Shift for the partial solve (default 0)
        dense_cap: Largest dimension solved densely
        max_dim: Largest dimension accepted at all

    Returns:
        EigenDecomposition; partial=True when only k pairs were computed

    Raises:
        SpectrumSizeError: If the dimension is above max_dim, or above dense_cap without k
        ConvergenceError: If the solver fails or the result violates the residual checks
    """
    A = _as_operator(H)
    dim = A.shape[0]
    if A.shape != (dim, dim):
        raise SpectralPreconditionError(f"Operator must be square, got shape {A.shape}")
    if dim > max_dim:
        raise SpectrumSizeError(f"Dimension {dim} exceeds the spectral cap {max_dim}")

    if k is None or k >= dim - 1:
        if dim > dense_cap:
            raise SpectrumSizeError(f"Dimension {dim} above the dense cap {dense_cap}; request k pairs near sigma")
        try:
            values, vectors = scipy.linalg.eigh(_dense(A))
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as e:
            raise ConvergenceError(f"Dense eigensolver failed: {e}") from e
        norm = float(np.max(np.abs(values))) if dim else 0.0
        partial = False
    else:
        shift = 0.0 if sigma is None else float(sigma)
        try:
            values, vectors = eigsh(sparse.csc_matrix(A), k=k, sigma=shift, which="LM")
        except ArpackNoConvergence as e:
            raise ConvergenceError(f"Shift-invert Lanczos did not converge for k={k}, sigma={shift}") from e
        order = np.argsort(values)
        values, vectors = values[order], vectors[:, order]
        norm = float(sparse_norm(sparse.csr_matrix(A), 1))
        partial = True

    _check_pairs(A, values, vectors, norm)
    logger.debug("eigendecomposition", dim=dim, pairs=int(values.size), partial=partial)
    return EigenDecomposition(values=values, vectors=vectors, dim=dim, norm=norm, partial=partial)


def tensor_spectrum(singles: Sequence[Sequence[float]], max_size: int = SPECTRUM_CAP) -> np.ndarray:
    """
    All n-fold sums lambda_1 + ... + lambda_n, sorted, multiplicities kept.

    Raises:
        SpectrumSizeError: If the product of the list sizes exceeds max_size
    """
    if not singles or any(len(s) == 0 for s in singles):
        raise SpectralPreconditionError("tensor_spectrum needs nonempty eigenvalue lists")
    size = int(np.prod([len(s) for s in singles], dtype=object))
    if size > max_size:
        raise SpectrumSizeError(f"Tensor spectrum of size {size} exceeds {max_size}")
    total = np.asarray(singles[0], dtype=float)
    for values in singles[1:]:
        total = np.add.outer(total, np.asarray(values, dtype=float)).ravel()
    return np.sort(total)


def _spectrum_of(H) -> np.ndarray:
    if isinstance(H, EigenDecomposition):
        return H.values
    if isinstance(H, HamiltonianMatrix) or sparse.issparse(H) or (isinstance(H, np.ndarray) and H.ndim == 2):
        return eigendecompose(H).values
    return np.asarray(H, dtype=float)


def dist_to_spectrum(H, E: float) -> float:
    """min |lambda - E| over the spectrum of H (operator, decomposition or eigenvalue list)."""
    values = _spectrum_of(H)
    if values.size == 0:
        return math.inf
    return float(np.min(np.abs(values - E)))


def spectral_projection(eig: EigenDecomposition, interval: Tuple[float, float]) -> SpectralProjection:
    """Projector onto the eigenvectors with eigenvalue in the closed interval."""
    lo, hi = interval
    mask = (eig.values >= lo) & (eig.values <= hi)
    if eig.partial:
        logger.warning("spectral projection from a partial decomposition", interval=interval)
    return SpectralProjection(columns=eig.vectors[:, mask], interval=(float(lo), float(hi)))


def free_spectrum(domain: DomainSpec, max_size: int = SPECTRUM_CAP) -> np.ndarray:
    """Eigenvalues of the Dirichlet Laplacian on the domain grid, from the closed form."""
    singles = [dirichlet_stencil_spectrum(count, domain.spacing) for count in domain.shape]
    return tensor_spectrum(singles, max_size=max_size)


def weyl_count(domain: DomainSpec, E: float, params: WeylParams = WeylParams()) -> WeylCount:
    """
    Exact eigenvalue count of the free Dirichlet operator below E, the count of the
    continuum Dirichlet Laplacian on the same box, the Weyl asymptotic
    omega_D vol E^(D/2) / (2 pi)^D in D = n d dimensions, and j_star.
    """
    if not E > 0:
        raise SpectralPreconditionError(f"weyl_count needs E > 0, got {E}")
    if not params.C_Weyl > 0:
        raise SpectralPreconditionError(f"C_Weyl must be positive, got {params.C_Weyl}")
    exact = int(np.count_nonzero(free_spectrum(domain) <= E))
    D = domain.cube.n * domain.cube.d
    volume = float(np.prod([(2.0 * side) ** domain.cube.d for side in domain.cube.half_sides]))
    ball = math.pi ** (D / 2.0) / math.gamma(D / 2.0 + 1.0)
    asymptotic = ball * volume * E ** (D / 2.0) / (2.0 * math.pi) ** D
    j_star = math.ceil(params.C_Weyl * volume)
    lengths = [2.0 * side for side in domain.cube.half_sides for _ in range(domain.cube.d)]
    continuum = continuum_box_count(lengths, E)
    return WeylCount(exact=exact, asymptotic=asymptotic, j_star=j_star, continuum=continuum)


def continuum_dirichlet_count(length: float, E: float) -> int:
    """#{j >= 1 : (j pi / length)^2 <= E} for the Dirichlet interval of the given length."""
    if E <= 0:
        return 0
    return int(math.floor(length * math.sqrt(E) / math.pi + 1e-9))


def continuum_box_count(lengths: Sequence[float], E: float) -> int:
    """#{j in N^D : sum_i (j_i pi / lengths_i)^2 <= E} for the Dirichlet box with the given side lengths."""
    if len(lengths) == 1:
        return continuum_dirichlet_count(lengths[0], E)
    first, rest = lengths[0], lengths[1:]
    return sum(continuum_box_count(rest, E - (j * math.pi / first) ** 2)
               for j in range(1, continuum_dirichlet_count(first, E) + 1))


class SpectralError(RuntimeError):
    """Base exception for numerical failures in the spectral layer."""
    pass


class ConvergenceError(SpectralError):
    """Exception raised when an eigensolver fails or returns inaccurate pairs."""
    pass


class SpectrumSizeError(SpectralError):
    """Exception raised when a spectral computation exceeds its size cap."""
    pass


class SpectralPreconditionError(ValueError):
    """Exception raised when a spectral operation is called outside its preconditions."""
    pass
