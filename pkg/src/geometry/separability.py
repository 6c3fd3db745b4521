"""
Separability Module

J-separability of n-particle cubes, the separable-pair predicate and the two
constructions that make separability checkable at scale: the covering of the
non-separable set around a configuration and the separation radius.
"""

import itertools
from typing import FrozenSet, Iterable, List, NamedTuple, Optional, Sequence

import structlog

from geometry.cube_geometry import (
    Box,
    CubeSpec,
    DimensionMismatchError,
    GeometryError,
    ParticlePoint,
    decompose_clusters,
    max_norm,
    projection,
)

logger = structlog.get_logger(__name__)

SEPARATION_FACTOR = 7
RADIUS_FACTOR = 5


class SeparabilityResult(NamedTuple):
    """Outcome of is_separable_pair with a re-checkable witness."""
    separable: bool
    witness_side: str  # "first", "second" or "none"
    witness_J: FrozenSet[int]
    distance: int


def _check_same_shape(a: CubeSpec, b: CubeSpec):
    if a.n != b.n or a.d != b.d:
        raise DimensionMismatchError(f"Cubes differ in shape: n={a.n}/{b.n}, d={a.d}/{b.d}")


def _disjoint_from_all(boxes: Iterable[Box], others: Sequence[Box]) -> bool:
    return not any(box.overlaps(other) for box in boxes for other in others)


def is_J_separable(a: CubeSpec, b: CubeSpec, J: Iterable[int]) -> bool:
    """
    Check whether the J-projection of a is disjoint from the rest of a and all of b.

    Args:
        a: Cube supplying the index set J
        b: Partner cube
        J: Nonempty set of 0-based particle indices

    Returns:
        True iff union_{j in J} C_L(a_j) misses union_{j not in J} C_L(a_j) and union_j C_L(b_j)

    Raises:
        EmptyIndexSetError: If J is empty
    """
    _check_same_shape(a, b)
    J = frozenset(J)
    if not J:
        raise EmptyIndexSetError("J-separability needs a nonempty index set")
    if any(j < 0 or j >= a.n for j in J):
        raise GeometryError(f"Index set {sorted(J)} out of range for n={a.n}")

    a_boxes = projection(a)
    inside = [a_boxes[j] for j in sorted(J)]
    outside = [a_boxes[j] for j in range(a.n) if j not in J] + projection(b)
    return _disjoint_from_all(inside, outside)


def nonempty_subsets(n: int) -> List[FrozenSet[int]]:
    """All 2^n - 1 nonempty subsets of {0..n-1}, smallest first."""
    return [frozenset(c) for size in range(1, n + 1) for c in itertools.combinations(range(n), size)]


def find_separating_set(a: CubeSpec, b: CubeSpec) -> Optional[FrozenSet[int]]:
    """First J (in nonempty_subsets order) for which a is J-separable from b, if any."""
    for J in nonempty_subsets(a.n):
        if is_J_separable(a, b, J):
            return J
    return None


def is_separable_pair(a: CubeSpec, b: CubeSpec, N: int) -> SeparabilityResult:
    """
    Pair separability: distance above 7NL plus a J-witness on either side.

    The witness is searched on a first, then on b.
    """
    _check_same_shape(a, b)
    distance = max_norm(a.center, b.center)
    if distance <= SEPARATION_FACTOR * N * a.half_side:
        return SeparabilityResult(False, "none", frozenset(), distance)

    J = find_separating_set(a, b)
    if J is not None:
        return SeparabilityResult(True, "first", J, distance)
    J = find_separating_set(b, a)
    if J is not None:
        return SeparabilityResult(True, "second", J, distance)
    return SeparabilityResult(False, "none", frozenset(), distance)


def separability_covering(x: ParticlePoint, L: float) -> List[CubeSpec]:
    """
    Cubes of half-side 2nL around every particle relabelling of x.

    For each map s: {0..n-1} -> {0..n-1} the center (x_s(0), ..., x_s(n-1)) is
    emitted, duplicates removed, so at most n^n cubes. If y lies outside all of
    them then y is J-separable from x for one of its own L-clusters J: a cluster
    of y whose intervals meet some x_k sits within 2nL of x_k.
    """
    if L <= 0:
        raise GeometryError(f"Covering radius must be positive, got {L}")
    particles = x.particles()
    half_side = 2 * x.n * L
    seen = set()
    cubes = []
    for assignment in itertools.product(range(x.n), repeat=x.n):
        coords = tuple(c for k in assignment for c in particles[k])
        if coords in seen:
            continue
        seen.add(coords)
        cubes.append(CubeSpec(center=ParticlePoint(n=x.n, d=x.d, coords=coords), half_side=half_side))
    logger.debug("covering built", n=x.n, L=L, cubes=len(cubes))
    return cubes


def min_separation_radius(y: ParticlePoint, L: float, N: int) -> float:
    """Diameter of y plus 5NL."""
    particles = y.particles()
    diameter = 0
    for p, q in itertools.combinations(particles, 2):
        diameter = max(diameter, max(abs(s - t) for s, t in zip(p, q)))
    return diameter + RADIUS_FACTOR * N * L


def farthest_cluster(x: ParticlePoint, y: ParticlePoint, L: float) -> FrozenSet[int]:
    """
    The L-cluster of x holding the particle farthest from its y counterpart.

    Beyond min_separation_radius(y) this cluster is a J-witness for x against y.
    """
    if x.n != y.n or x.d != y.d:
        raise DimensionMismatchError(f"Cannot pair n={x.n}, d={x.d} with n={y.n}, d={y.d}")
    gaps = [max(abs(s - t) for s, t in zip(x.particle(i), y.particle(i))) for i in range(x.n)]
    farthest = max(range(x.n), key=lambda i: gaps[i])
    return frozenset(decompose_clusters(x, L).block_of(farthest))


def separable_partner(cube: CubeSpec, N: int) -> CubeSpec:
    """
    Companion cube shifted along the diagonal far enough that the pair is separable.

    The shift diam(u) + 7NL + 2L + 1 puts every partner interval strictly beyond
    every interval of cube, so J = {0..n-1} on the first side is a witness.
    """
    L = cube.half_side
    shift = int(min_separation_radius(cube.center, 0, N) + SEPARATION_FACTOR * N * L + 2 * L + 1)
    return CubeSpec(center=cube.center.shifted(shift), half_side=L, per_particle_sides=cube.per_particle_sides)


class EmptyIndexSetError(GeometryError):
    """Exception raised when an index set must be nonempty."""
    pass
