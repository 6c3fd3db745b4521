import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import cube_at
from geometry.cube_geometry import (
    DegenerateCubeError,
    DimensionMismatchError,
    ParticlePoint,
    decompose_clusters,
    max_norm,
    projection,
    regions,
)
from geometry.interactivity import (
    FULLY_INTERACTIVE,
    PARTIALLY_INTERACTIVE,
    NoPartitionError,
    classify_interactivity,
    count_singular,
    pi_partition,
    projections_disjoint,
)
from geometry.property_suites import PropertySuiteRunner
from geometry.separability import (
    EmptyIndexSetError,
    find_separating_set,
    is_J_separable,
    is_separable_pair,
    min_separation_radius,
    separability_covering,
    separable_partner,
)

coordinates = st.integers(min_value=-40, max_value=40)


class TestCubeGeometry:
    def test_max_norm(self):
        assert max_norm(ParticlePoint.of([0, 0]), ParticlePoint.of([3, -5])) == 5
        assert max_norm(ParticlePoint.of([0, 0, 0]), ParticlePoint.of([7, 7, 7])) == 7
        x = ParticlePoint.of([4, -2])
        assert max_norm(x, x) == 0

    def test_max_norm_shape_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            max_norm(ParticlePoint.of([0]), ParticlePoint.of([0, 1]))

    def test_projection(self):
        boxes = projection(cube_at([0, 10], 2))
        assert [(b.lower, b.upper) for b in boxes] == [((-2,), (2,)), ((8,), (12,))]
        coincident = projection(cube_at([0, 0], 1))
        assert coincident[0] == coincident[1]
        assert [(b.lower, b.upper) for b in projection(cube_at([5], 3))] == [((2,), (8,))]

    @pytest.mark.parametrize("L, interior, inner", [(9, 3, 7), (28, 9, 26), (4, 1, 2)])
    def test_regions(self, L, interior, inner):
        pair = regions(cube_at([0], L))
        assert pair.interior.half_side == interior
        assert pair.shell_inner.half_side == inner
        assert pair.shell_outer.half_side == L

    def test_regions_too_small(self):
        with pytest.raises(DegenerateCubeError):
            regions(cube_at([0], 3))

    def test_decompose_clusters(self):
        assert decompose_clusters(ParticlePoint.of([0, 3, 100]), 2).blocks == ((0, 1), (2,))
        assert decompose_clusters(ParticlePoint.of([0]), 5).blocks == ((0,),)
        assert decompose_clusters(ParticlePoint.of([0, 10, 20, 30]), 6).blocks == ((0, 1, 2, 3),)

    def test_degenerate_cube(self):
        with pytest.raises(DegenerateCubeError):
            cube_at([0], 0)

    @given(st.lists(coordinates, min_size=1, max_size=3), st.lists(coordinates, min_size=1, max_size=3),
           st.lists(coordinates, min_size=1, max_size=3))
    def test_max_norm_is_a_metric(self, a, b, c):
        n = min(len(a), len(b), len(c))
        x, y, z = (ParticlePoint.of(v[:n]) for v in (a, b, c))
        assert max_norm(x, y) == max_norm(y, x)
        assert max_norm(x, z) <= max_norm(x, y) + max_norm(y, z)


class TestSeparability:
    def test_J_separable(self):
        assert is_J_separable(cube_at([100, 0], 5), cube_at([0, 0], 5), {0})
        assert not any(is_J_separable(cube_at([0, 0], 5), cube_at([0, 0], 5), J) for J in ({0}, {1}, {0, 1}))
        assert is_J_separable(cube_at([0], 5), cube_at([20], 5), {0})

    def test_empty_index_set(self):
        with pytest.raises(EmptyIndexSetError):
            is_J_separable(cube_at([0], 5), cube_at([20], 5), set())

    def test_separable_pair_witness_on_second_side(self):
        result = is_separable_pair(cube_at([0, 0], 5), cube_at([100, 0], 5), N=2)
        assert result.separable
        assert result.witness_side == "second"
        assert result.witness_J == frozenset({0})

    def test_distance_gate(self):
        result = is_separable_pair(cube_at([0, 0], 5), cube_at([30, 0], 5), N=2)
        assert not result.separable
        assert result.distance == 30

    def test_single_particle_pair(self):
        assert is_separable_pair(cube_at([0], 1), cube_at([8], 1), N=1).separable

    def test_covering(self):
        single = separability_covering(ParticlePoint.of([0]), 3)
        assert len(single) == 1 and single[0].half_side == 6
        coincident = separability_covering(ParticlePoint.of([0, 0]), 5)
        assert len(coincident) == 1 and coincident[0].half_side == 20
        spread = separability_covering(ParticlePoint.of([0, 100]), 2)
        assert {c.center.coords for c in spread} == {(0, 0), (0, 100), (100, 0), (100, 100)}

    def test_min_separation_radius(self):
        assert min_separation_radius(ParticlePoint.of([0, 0]), 2, 2) == 20
        assert min_separation_radius(ParticlePoint.of([0, 6]), 1, 2) == 16
        assert min_separation_radius(ParticlePoint.of([0]), 3, 1) == 15

    @settings(max_examples=200, deadline=None)
    @given(st.lists(coordinates, min_size=1, max_size=3), st.integers(min_value=1, max_value=6),
           st.integers(min_value=0, max_value=2))
    def test_partner_is_separable(self, coords, L, extra):
        cube = cube_at(coords, L)
        N = len(coords) + extra
        assert is_separable_pair(cube, separable_partner(cube, N), N).separable

    @settings(max_examples=300, deadline=None)
    @given(st.lists(coordinates, min_size=2, max_size=2), st.lists(coordinates, min_size=2, max_size=2),
           st.integers(min_value=1, max_value=3))
    def test_outside_covering_is_separable_from_a_cluster(self, x, y, L):
        x_point, y_point = ParticlePoint.of(x), ParticlePoint.of(y)
        covering = separability_covering(x_point, L)
        outside = not any(max_norm(c.center, y_point) < c.half_side for c in covering)
        if outside:
            assert find_separating_set(cube_at(y, L), cube_at(x, L)) is not None


class TestInteractivity:
    @pytest.mark.parametrize("coords, L, r0, expected", [
        ([0, 15], 10, 1, FULLY_INTERACTIVE),
        ([0, 100], 10, 1, PARTIALLY_INTERACTIVE),
        ([0, 10, 29], 5, 0, FULLY_INTERACTIVE),
    ])
    def test_classify(self, coords, L, r0, expected):
        assert classify_interactivity(cube_at(coords, L), r0) == expected

    def test_pi_partition(self):
        partition = pi_partition(cube_at([0, 100], 10), 1)
        assert partition.J == frozenset({0})
        assert partition.complement == frozenset({1})
        assert partition.gap == 80
        assert pi_partition(cube_at([0, 1, 50], 2), 0).J == frozenset({0, 1})

    def test_pi_partition_refuses_fi(self):
        with pytest.raises(NoPartitionError):
            pi_partition(cube_at([0, 15], 10), 1)

    def test_projections_disjoint(self):
        assert projections_disjoint(cube_at([0, 0], 5), cube_at([100, 100], 5))
        assert not projections_disjoint(cube_at([0, 0], 5), cube_at([100, 0], 5))

    def test_count_singular_empty(self):
        counts = count_singular([], [], N=2)
        assert (counts.M, counts.M_sep, counts.M_PI, counts.M_FI) == (0, 0, 0, 0)

    def test_count_two_separable_fi_cubes(self):
        cubes = [cube_at([0, 0], 5), cube_at([100, 100], 5)]
        counts = count_singular(cubes, [True, True], N=2)
        assert counts.M == 2 and counts.M_sep == 2 and counts.M_FI == 2
        assert counts.M_PI == 0

    def test_count_beyond_small_families(self):
        cubes = [cube_at([100 * k, 100 * k], 2) for k in range(14)]
        counts = count_singular(cubes, [True] * 14, N=2)
        assert counts.M == 14 and counts.M_FI == 14

    def test_unflagged_cubes_are_ignored(self):
        counts = count_singular([cube_at([0, 0], 5), cube_at([100, 100], 5)], [True, False], N=2)
        assert counts.M == 1


class TestPropertySuites:
    def test_small_suites_pass(self):
        runner = PropertySuiteRunner(seed=3, scan_radius_factor=16, random_trials=200)
        results = runner.run_all(n_values=(1, 2), L_values=(2, 3), r0=1)
        assert results
        failed = [(r.name, r.n, r.L, r.failures) for r in results if not r.passed]
        assert failed == []

    def test_three_particle_counting_is_exhaustive(self):
        result = PropertySuiteRunner(seed=3).counting_suite(3, 2, configurations=5)
        assert result.n == 3 and result.checked == 5
        assert result.passed, result.failures

    @pytest.mark.slow
    def test_default_suites_pass(self):
        results = PropertySuiteRunner(seed=0).run_all()
        assert all(r.passed for r in results)
