import math

import numpy as np
import pytest

from conftest import cube_at, stark_field, window_for, zero_field
from model.disorder import DisorderSpec, sample_disorder
from model.hamiltonian_builder import DomainSpec, HamiltonianContext
from spectral.eigen_solver import eigendecompose
from dynamics.decay_fit import decay_fit, localization_report, participation_ratio
from dynamics.evolution import (
    DynamicsError,
    EmptyRegionError,
    evolve,
    log_time_grid,
    moment_expectation,
    moment_observable,
    realization_moments,
)


def _operator(cube, field):
    H = HamiltonianContext(DomainSpec(cube), field).assemble()
    return H, eigendecompose(H)


@pytest.fixture
def random_operator():
    cube = cube_at([0], 10)
    return _operator(cube, sample_disorder(DisorderSpec(high_energy=3.0), window_for(cube), master_seed=4, index=0))


class TestEvolve:
    def test_time_zero(self, random_operator):
        _, eig = random_operator
        psi = np.zeros(eig.dim)
        psi[3] = 1.0
        assert np.array_equal(evolve(eig, psi, 0.0), psi)

    def test_unitary(self, random_operator):
        _, eig = random_operator
        psi = np.random.default_rng(0).normal(size=eig.dim)
        psi /= np.linalg.norm(psi)
        assert np.linalg.norm(evolve(eig, psi, 3.7)) == pytest.approx(1.0, abs=1e-12)

    def test_time_reversal(self, random_operator):
        _, eig = random_operator
        psi = np.random.default_rng(1).normal(size=eig.dim)
        assert np.allclose(evolve(eig, evolve(eig, psi, 2.5), -2.5), psi, atol=1e-12)

    def test_diagonal_phase(self):
        eig = eigendecompose(np.diag([1.0, 2.0]))
        assert np.allclose(evolve(eig, np.array([1.0, 0.0]), 0.3), [np.exp(-0.3j), 0.0])

    def test_block_of_states(self, random_operator):
        _, eig = random_operator
        block = np.eye(eig.dim)[:, :3]
        evolved = evolve(eig, block, 1.0)
        assert evolved.shape == (eig.dim, 3)
        assert np.allclose(evolved[:, 1], evolve(eig, block[:, 1], 1.0))

    def test_dimension_mismatch(self, random_operator):
        _, eig = random_operator
        with pytest.raises(DynamicsError):
            evolve(eig, np.ones(3), 1.0)


class TestTimeGrid:
    def test_default_grid(self):
        times = log_time_grid()
        assert times[0] == 0.0
        assert times[1] == pytest.approx(0.1)
        assert times[-1] == pytest.approx(1000.0)
        assert len(times) == 34

    def test_nested_horizons(self):
        short, long = log_time_grid(100.0), log_time_grid(1000.0)
        assert np.array_equal(short, long[:short.size])

    def test_horizon_appended(self):
        assert log_time_grid(50.0)[-1] == 50.0

    def test_invalid(self):
        with pytest.raises(DynamicsError):
            log_time_grid(0.0)


class TestMomentObservable:
    def test_empty_projection(self, random_operator):
        H, eig = random_operator
        record = moment_observable(H, eig, 1.0, (100.0, 200.0), [9])
        assert record.empty_projection
        assert record.sup == 0.0 and not record.series.any()

    def test_empty_region(self, random_operator):
        H, eig = random_operator
        with pytest.raises(EmptyRegionError):
            moment_observable(H, eig, 1.0, (0.0, 4.0), np.zeros(eig.dim, dtype=bool))

    def test_positive_exponent(self, random_operator):
        H, eig = random_operator
        with pytest.raises(DynamicsError):
            moment_observable(H, eig, 0.0, (0.0, 4.0), [9])

    def test_free_particle_spreads(self):
        cube = cube_at([0], 40)
        H, eig = _operator(cube, zero_field(window_for(cube)))
        times = np.array([0.0, 1.0, 10.0])
        record = moment_observable(H, eig, 1.0, (-1.0, 5.0), cube_at([0], 1), times)
        assert record.K_size == 1
        assert record.series[0] == pytest.approx(0.0, abs=1e-10)
        # ballistic: || |X| psi(t) || is close to sqrt(2) t
        assert record.series[2] > 10.0
        assert record.series[2] > 2 * record.series[1]

    def test_stark_stays_bounded(self):
        cube = cube_at([0], 20)
        H, eig = _operator(cube, stark_field(window_for(cube), 20.0))
        short = moment_observable(H, eig, 1.0, (-500.0, 500.0), cube_at([0], 1), log_time_grid(100.0))
        long = moment_observable(H, eig, 1.0, (-500.0, 500.0), cube_at([0], 1), log_time_grid(1000.0))
        assert long.sup < 0.5
        assert long.sup >= short.sup


class TestMomentExpectation:
    def test_average(self):
        cube = cube_at([0], 6)
        window = window_for(cube)
        fields = [sample_disorder(DisorderSpec(), window, master_seed=0, index=t) for t in range(3)]
        times = log_time_grid(10.0)
        records = realization_moments(cube, fields, 1.0, (-1.0, 6.0), cube_at([0], 1), times)
        assert len(records) == 3
        expectation = moment_expectation(records)
        assert expectation.realizations == 3
        assert expectation.mean_sup == pytest.approx(np.mean([r.sup for r in records]))
        assert expectation.ci_lo <= expectation.mean_sup <= expectation.ci_hi
        assert expectation.mean_series.shape == times.shape

    def test_mismatched_grids(self):
        cube = cube_at([0], 6)
        field = zero_field(window_for(cube))
        a = realization_moments(cube, [field], 1.0, (-1.0, 6.0), cube_at([0], 1), log_time_grid(10.0))
        b = realization_moments(cube, [field], 1.0, (-1.0, 6.0), cube_at([0], 1), log_time_grid(100.0))
        with pytest.raises(DynamicsError):
            moment_expectation(a + b)

    def test_no_records(self):
        with pytest.raises(DynamicsError):
            moment_expectation([])


class TestDecayFit:
    @pytest.fixture
    def coords(self):
        cube = cube_at([0], 40)
        H, _ = _operator(cube, zero_field(window_for(cube)))
        return H.coords

    def test_exponential_profile(self, coords):
        x = coords[:, 0, 0]
        psi = np.exp(-0.7 * np.abs(x))
        psi /= np.linalg.norm(psi)
        fit = decay_fit(psi, coords)
        assert fit.center == (0,)
        assert fit.rate == pytest.approx(0.70, abs=0.02)
        assert fit.residual < 1e-6
        assert fit.localized

    def test_delta_is_degenerate(self, coords):
        psi = np.zeros(coords.shape[0])
        psi[10] = 1.0
        fit = decay_fit(psi, coords)
        assert fit.degenerate and math.isnan(fit.rate)
        assert not fit.localized

    def test_needs_normalized_state(self, coords):
        with pytest.raises(DynamicsError):
            decay_fit(np.full(coords.shape[0], 1.0), coords)


class TestLocalizationReport:
    def test_participation_bounds(self):
        assert np.allclose(participation_ratio(eigendecompose(np.diag([1.0, 2.0, 3.0]))), 1.0)

    def test_free_operator_delocalized(self):
        cube = cube_at([0], 40)
        H, eig = _operator(cube, zero_field(window_for(cube)))
        report = localization_report(H, eig)
        assert report.delocalized
        assert report.median_participation > 0.25 * eig.dim

    def test_stark_operator_localized(self):
        cube = cube_at([0], 10)
        H, eig = _operator(cube, stark_field(window_for(cube), 20.0))
        report = localization_report(H, eig)
        assert not report.delocalized
        assert report.median_rate > 1.0
        assert math.isfinite(report.mean_boundary_mass)
        frame = report.to_frame()
        assert len(frame) == eig.dim
        assert "participation" in frame.columns
