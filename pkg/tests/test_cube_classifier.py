import math

import pytest

from conftest import cube_at, stark_field, window_for, zero_field
from geometry.interactivity import NoPartitionError
from model.disorder import DisorderSpec, sample_disorder
from model.hamiltonian_builder import DomainSpec, HamiltonianContext
from model.interaction import InteractionSpec
from msa.cube_classifier import (
    classify_cube,
    cnr_sizes,
    is_cnr,
    is_localized_pi,
    noninteracting_ns_implication_check,
    subcube_centers,
    subcube_spectra,
)
from msa.scales import MsaParameterError, MsaParams
from spectral.eigen_solver import eigendecompose

# Steep linear potential: eigenfunctions sit on single sites, levels near 2 + 20 x.
STARK_SLOPE = 20.0


@pytest.fixture
def params():
    return MsaParams(m=0.05, m1=0.02, N=2, n=1, L0=8)


def _stark(cube):
    return stark_field(window_for(cube), STARK_SLOPE)


class TestClassifyCube:
    def test_stark_cube_is_nonsingular(self, params):
        cube = cube_at([0], 8)
        verdict = classify_cube(cube, _stark(cube), None, 12.0, params)
        assert verdict.nonsingular and not verdict.singular
        assert not verdict.resonant
        assert verdict.block_norm < verdict.singular_threshold
        assert verdict.cnr is None and verdict.localized is None

    def test_planted_resonance(self, params):
        cube = cube_at([0], 8)
        field = _stark(cube)
        E = float(eigendecompose(HamiltonianContext(DomainSpec(cube), field).assemble()).values[3])
        verdict = classify_cube(cube, field, None, E, params)
        assert verdict.resonant and verdict.singular
        assert verdict.block_norm == float("inf")
        assert verdict.dist_to_spectrum < 1e-12

    def test_optional_predicates(self, params):
        cube = cube_at([0, 100], 8)
        interaction = InteractionSpec(h=0.5, r0_grid_units=1.0)
        verdict = classify_cube(cube, _stark(cube), interaction, 12.0, params.for_particles(2),
                                check_cnr=True, check_localized=True)
        assert verdict.cnr is True
        assert verdict.localized is True


class TestCompleteNonResonance:
    def test_sizes(self):
        assert cnr_sizes(8) == [4, 5, 6, 7, 8]
        assert cnr_sizes(27)[0] == 9
        assert cnr_sizes(3) == [3]

    def test_centers_fit_inside(self):
        cube = cube_at([0], 8)
        for center in subcube_centers(cube, 4):
            assert abs(center.coords[0]) + 4 <= 8

    def test_small_cube_scans_only_itself(self):
        cube = cube_at([0], 3)
        scanned = [sub for sub, _ in subcube_spectra(cube, _stark(cube), None)]
        assert scanned == [cube]

    def test_stark_cube_is_cnr(self, params):
        cube = cube_at([0], 8)
        result = is_cnr(cube, _stark(cube), None, 12.0, params)
        assert result.cnr and result.offender is None
        assert result.tested > 1 and not result.cube_resonant

    def test_resonant_cube_is_its_own_offender(self, params):
        cube = cube_at([0], 8)
        field = _stark(cube)
        E = float(eigendecompose(HamiltonianContext(DomainSpec(cube), field).assemble()).values[0])
        result = is_cnr(cube, field, None, E, params)
        assert not result.cnr
        assert result.offender == cube
        assert result.tested == 1 and result.cube_resonant


class TestLocalization:
    def test_pi_cube_localized(self, params):
        cube = cube_at([0, 100], 8)
        result = is_localized_pi(cube, _stark(cube), InteractionSpec(h=0.5, r0_grid_units=1.0), params)
        assert result.localized
        assert result.J == (0,)
        assert result.worst_left < result.threshold_left
        assert result.worst_right < result.threshold_right

    def test_shell_mass_is_reported_not_decisive(self, params):
        cube = cube_at([0, 100], 8)
        result = is_localized_pi(cube, _stark(cube), InteractionSpec(h=0.5, r0_grid_units=1.0), params)
        # 15 sites, shell {-7, -6, 6, 7}: the squared shell masses of the eigenbasis sum to 4
        assert result.worst_shell_left >= math.sqrt(4 / 15) - 1e-12
        assert result.worst_shell_left > result.threshold_left
        assert result.localized

    def test_flat_factors_not_localized(self, params):
        cube = cube_at([0, 100], 5)
        result = is_localized_pi(cube, zero_field(window_for(cube)), None, params)
        assert not result.localized
        assert not result.left_localized and not result.right_localized
        assert result.worst_left > result.threshold_left

    @pytest.mark.slow
    def test_strong_disorder_localized_in_most_realizations(self, params):
        cube = cube_at([0, 100], 16)
        window = window_for(cube)
        spec = DisorderSpec(low_energy=0.0, high_energy=50.0)
        localized = sum(is_localized_pi(cube, sample_disorder(spec, window, master_seed=11, index=t),
                                        None, params).localized for t in range(200))
        assert localized >= 160

    def test_fi_cube_has_no_partition(self, params):
        cube = cube_at([0, 0], 4)
        with pytest.raises(NoPartitionError):
            is_localized_pi(cube, _stark(cube), InteractionSpec(r0_grid_units=1.0), params)


class TestNoninteractingImplication:
    def test_holds_for_stark_pair(self, params):
        cube = cube_at([0, 0], 8)
        report = noninteracting_ns_implication_check(cube, _stark(cube), 14.0, params.for_particles(2))
        assert report.status == "holds"
        assert report.nonresonant and report.eigenfunctions_localized and report.nonsingular

    def test_resonant_energy_is_vacuous(self, params):
        cube = cube_at([0], 8)
        field = _stark(cube)
        E = float(eigendecompose(HamiltonianContext(DomainSpec(cube), field).assemble()).values[5])
        report = noninteracting_ns_implication_check(cube, field, E, params)
        assert report.status == "vacuous"
        assert not report.nonresonant

    def test_needs_zero_coupling(self, params):
        cube = cube_at([0], 8)
        with pytest.raises(MsaParameterError):
            noninteracting_ns_implication_check(cube, _stark(cube), 12.0, params,
                                                interaction=InteractionSpec(h=0.1))
