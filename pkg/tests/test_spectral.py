import math

import numpy as np
import pytest

from conftest import cube_at, window_for, zero_field
from geometry.cube_geometry import CubeSpec
from model.disorder import DisorderSpec, sample_disorder
from model.hamiltonian_builder import DomainSpec, HamiltonianContext, assemble_single
from spectral.eigen_solver import (
    SpectralPreconditionError,
    SpectrumSizeError,
    continuum_dirichlet_count,
    dist_to_spectrum,
    eigendecompose,
    free_spectrum,
    spectral_projection,
    tensor_spectrum,
    weyl_count,
)
from spectral.green_function import (
    ResonantEnergyError,
    edi_check,
    gri_check,
    green_block_norm,
    kernel_boundary_mass,
    resolvent_perturbation_residual,
)


def _free_operator(half_side):
    cube = cube_at([0], half_side)
    return assemble_single(DomainSpec(cube), zero_field(window_for(cube)))


class TestEigenSolver:
    def test_diagonal(self):
        eig = eigendecompose(np.diag([1.0, 3.0]))
        assert np.allclose(eig.values, [1.0, 3.0])
        assert np.allclose(np.abs(eig.vectors), np.eye(2))
        assert not eig.partial

    def test_free_stencil(self):
        eig = eigendecompose(_free_operator(2))
        assert np.allclose(eig.values, [2 - math.sqrt(2), 2, 2 + math.sqrt(2)], atol=1e-12)

    def test_orthonormal_vectors(self):
        cube = cube_at([0], 10)
        field = sample_disorder(DisorderSpec(high_energy=5.0), window_for(cube), master_seed=0, index=0)
        eig = eigendecompose(assemble_single(DomainSpec(cube), field))
        assert np.allclose(eig.vectors.T @ eig.vectors, np.eye(eig.dim), atol=1e-10)

    def test_partial_decomposition(self):
        eig = eigendecompose(_free_operator(25), k=3, sigma=0.0)
        assert eig.partial and eig.count == 3
        assert np.allclose(eig.values, free_spectrum(DomainSpec(cube_at([0], 25)))[:3], atol=1e-8)

    def test_dense_cap(self):
        with pytest.raises(SpectrumSizeError):
            eigendecompose(np.eye(10), dense_cap=5)

    def test_tensor_spectrum(self):
        assert tensor_spectrum([[1, 2], [10, 20]]).tolist() == [11, 12, 21, 22]
        assert tensor_spectrum([[3, 1, 2]]).tolist() == [1, 2, 3]

    def test_tensor_spectrum_keeps_multiplicity(self):
        assert tensor_spectrum([[1, 2], [1, 2]]).tolist() == [2, 3, 3, 4]

    def test_tensor_spectrum_cap(self):
        with pytest.raises(SpectrumSizeError):
            tensor_spectrum([range(10), range(10)], max_size=50)

    def test_dist_to_spectrum(self):
        assert dist_to_spectrum(np.array([1.0, 3.0]), 1.9) == pytest.approx(0.9)
        assert dist_to_spectrum(np.array([1.0, 3.0]), 3.0) == 0.0
        assert dist_to_spectrum(np.array([1.0]), 1 + math.exp(-10)) == pytest.approx(math.exp(-10), rel=1e-6)

    def test_spectral_projection(self):
        eig = eigendecompose(_free_operator(8))
        projection = spectral_projection(eig, (0.5, 2.5))
        P = projection.columns @ projection.columns.T
        assert np.max(np.abs(P @ P - P)) < 1e-12
        assert not projection.empty
        assert spectral_projection(eig, (10.0, 11.0)).empty

    def test_continuum_count(self):
        assert continuum_dirichlet_count(math.pi, 100.0) == 10
        assert continuum_dirichlet_count(math.pi, -1.0) == 0

    def test_weyl_reports_continuum_box_count(self):
        unit = (math.pi / 6.0) ** 2
        assert weyl_count(DomainSpec(cube_at([0], 3)), 4.5 * unit).continuum == 2
        # (1, 1), (1, 2), (2, 1)
        assert weyl_count(DomainSpec(cube_at([0, 0], 3)), 5.0 * unit).continuum == 3

    def test_weyl_count_saturates(self):
        domain = DomainSpec(cube_at([0, 0], 3))
        count = weyl_count(domain, 1e6)
        assert count.exact == domain.dimension
        assert count.j_star == math.ceil(36 / math.pi)

    def test_weyl_needs_positive_energy(self):
        with pytest.raises(SpectralPreconditionError):
            weyl_count(DomainSpec(cube_at([0], 3)), 0.0)


class TestGreenFunction:
    def test_diagonal_operator_block(self):
        H = np.diag([1.0, 3.0])
        assert green_block_norm(H, 0.0, np.array([0]), np.array([1])).block_norm == pytest.approx(0.0, abs=1e-15)

    def test_full_block_is_resolvent_norm(self):
        norms = green_block_norm(np.diag([1.0, 3.0]), 1.9, np.array([True, True]), np.array([True, True]))
        assert norms.block_norm == pytest.approx(1 / 0.9)
        assert norms.resolvent_norm == pytest.approx(1 / 0.9)

    def test_resonant_energy(self):
        with pytest.raises(ResonantEnergyError) as info:
            green_block_norm(np.diag([1.0, 3.0]), 3.0, np.array([0]), np.array([1]))
        assert info.value.dist_to_spectrum < 1e-12

    def test_partial_decomposition_refused(self):
        eig = eigendecompose(_free_operator(25), k=3, sigma=0.0)
        with pytest.raises(SpectralPreconditionError):
            green_block_norm(eig, 0.5, np.array([0]), np.array([1]))

    def test_kernel_boundary_mass(self):
        eig = eigendecompose(np.diag([1.0, 2.0, 3.0]))
        mass = kernel_boundary_mass(eig, np.array([True, False, False]), np.array([True, True, False]))
        assert np.allclose(mass, [1.0, 0.0, 0.0])

    def test_resolvent_identity_at_zero_coupling(self):
        H0 = np.diag([1.0, 2.0, 4.0])
        residual = resolvent_perturbation_residual(H0, np.array([1.0, 0.0, 1.0]), 0.0, 3.0)
        assert residual.residual == 0.0
        assert residual.difference_norm == 0.0

    def test_resolvent_identity_random(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            M = rng.normal(size=(100, 100))
            H0 = (M + M.T) / 2.0
            U = rng.uniform(0.0, 1.0, size=100)
            residual = resolvent_perturbation_residual(H0, U, float(rng.uniform(-0.5, 0.5)),
                                                       float(rng.uniform(-1.0, 1.0)))
            assert residual.within_tolerance
            assert residual.difference_bounded

    def test_resolvent_shape_mismatch(self):
        with pytest.raises(SpectralPreconditionError):
            resolvent_perturbation_residual(np.eye(3), np.ones(2), 0.1, 0.5)

    def test_edi_zero_when_psi_misses_center(self):
        big = cube_at([0], 20)
        context = HamiltonianContext(DomainSpec(big), zero_field(window_for(big)))
        psi = np.zeros(39)
        psi[34] = 1.0  # grid point x = 15
        measurement = edi_check(context, (0.123, psi), cube_at([0], 8))
        assert measurement.local_mass == 0.0
        assert measurement.ratio == 0.0

    def test_gri_preconditions(self):
        big = cube_at([0], 20)
        context = HamiltonianContext(DomainSpec(big), zero_field(window_for(big)))
        with pytest.raises(SpectralPreconditionError):
            gri_check(context, cube_at([0], 9), 0.123, CubeSpec.around([5], 1), CubeSpec.around([15], 2))
        with pytest.raises(SpectralPreconditionError):
            gri_check(context, cube_at([0], 9), 0.123, CubeSpec.around([0], 1), CubeSpec.around([5], 2))

    def test_gri_measures_positive_ratio(self):
        big = cube_at([0], 20)
        field = sample_disorder(DisorderSpec(high_energy=4.0), window_for(big), master_seed=3, index=0)
        context = HamiltonianContext(DomainSpec(big), field)
        measurement = gri_check(context, cube_at([0], 9), 0.123, CubeSpec.around([0], 1), CubeSpec.around([15], 2))
        assert math.isfinite(measurement.ratio) and measurement.ratio > 0
