import math

import numpy as np
import pytest
from pydantic import ValidationError

from msa.scales import (
    MsaParameterError,
    MsaParams,
    derive_m_star,
    energy_grid,
    gamma,
    nonlocalized_bound,
    pair_bound,
    scale_sequence,
    singularity_bound,
    variable_energy_interval,
    wegner_bound,
)


class TestScaleSequence:
    @pytest.mark.parametrize("L0, expected", [(4, (4, 9, 28, 149)), (2, (2, 3, 6, 15))])
    def test_known_sequences(self, L0, expected):
        assert scale_sequence(L0, 3).lengths == expected

    def test_zero_steps(self):
        assert scale_sequence(8, 0).lengths == (8,)

    def test_strictly_increasing(self):
        lengths = scale_sequence(5, 6).lengths
        assert all(a < b for a, b in zip(lengths, lengths[1:]))

    def test_overflow(self):
        with pytest.raises(MsaParameterError):
            scale_sequence(4, 20)

    @pytest.mark.parametrize("L0, k_max", [(1, 3), (2.5, 2), (4, -1)])
    def test_bad_arguments(self, L0, k_max):
        with pytest.raises(MsaParameterError):
            scale_sequence(L0, k_max)


class TestExponents:
    def test_gamma(self):
        assert gamma(2.0, 256, 1, 1) == pytest.approx(3.0)
        assert gamma(1.0, 256, 1, 2) == pytest.approx(2.25)

    def test_gamma_grows_with_missing_particles(self):
        assert gamma(0.5, 16, 1, 3) > gamma(0.5, 16, 2, 3) > gamma(0.5, 16, 3, 3) > 0.5

    def test_gamma_rejects_bad_particle_count(self):
        with pytest.raises(MsaParameterError):
            gamma(1.0, 16, 3, 2)

    def test_bounds(self):
        assert singularity_bound(2, 1, 1, 1) == pytest.approx(0.125)
        assert pair_bound(2, 1, 1, 1) == pytest.approx(0.25)
        assert wegner_bound(2, 1, 1, 1) == pytest.approx(0.5)
        assert nonlocalized_bound(2, 1, 1, 1) == pytest.approx(1 / 32)
        assert wegner_bound(2, 1, 2, 1) == pytest.approx(2.0 ** -4)

    def test_bounds_underflow_to_zero(self):
        assert singularity_bound(1819, 13, 2, 1) == 0.0


class TestEnergyInterval:
    def test_delta(self):
        interval = variable_energy_interval(0.5, 4, 0.2, 0.1, 1, 1)
        expected = 0.5 * math.exp(-4.0) * (math.exp(-0.4) - math.exp(-0.8))
        assert interval.delta == pytest.approx(expected)
        assert interval.interval == pytest.approx((0.5 - expected, 0.5 + expected))
        assert 0 < interval.delta_dressed

    def test_needs_ordered_masses(self):
        with pytest.raises(MsaParameterError):
            variable_energy_interval(0.5, 4, 0.1, 0.2, 1, 1)

    def test_grid_spacing(self):
        interval = variable_energy_interval(0.5, 4, 0.2, 0.1, 1, 1)
        grid = energy_grid(interval)
        assert len(grid) == 9
        assert np.allclose(np.diff(grid), interval.delta / 4)
        assert energy_grid(interval, 1).tolist() == [0.5]

    def test_coarse_grid_rejected(self):
        with pytest.raises(MsaParameterError):
            energy_grid(variable_energy_interval(0.5, 4, 0.2, 0.1, 1, 1), 5)

    def test_m_star(self):
        assert derive_m_star(1.0, 1) == pytest.approx(0.25)
        assert derive_m_star(0.8, 2) == pytest.approx(0.1)
        with pytest.raises(MsaParameterError):
            derive_m_star(0.0, 1)


class TestMsaParams:
    def test_default_exponent(self):
        assert MsaParams().p == 7.0
        assert MsaParams(N=2, n=2).p == 13.0
        assert MsaParams(N=2, d=2, n=1).p == 25.0

    def test_with_mass_keeps_ratio(self):
        relaxed = MsaParams(m=0.2, m1=0.1).with_mass(0.1)
        assert relaxed.m == pytest.approx(0.1)
        assert relaxed.m1 == pytest.approx(0.05)

    def test_for_particles(self):
        assert MsaParams(N=3).for_particles(2).n == 2

    @pytest.mark.parametrize("kwargs", [
        {"n": 3, "N": 2},
        {"m": 0.1, "m1": 0.1},
        {"p": 6.0, "N": 1},
        {"L0": 3},
        {"unknown": 1},
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ValidationError):
            MsaParams(**kwargs)
