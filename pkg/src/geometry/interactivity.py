"""
Interactivity Module

Fully/partially interactive cubes, the PI decomposition and the counting of
singular cubes used by the scale induction.
"""

import itertools
from typing import Callable, FrozenSet, NamedTuple, Sequence

import networkx as nx
import structlog

from geometry.cube_geometry import CubeSpec, GeometryError, max_norm, projection
from geometry.separability import SEPARATION_FACTOR, is_separable_pair

logger = structlog.get_logger(__name__)

FULLY_INTERACTIVE = "FI"
PARTIALLY_INTERACTIVE = "PI"


class PiPartition(NamedTuple):
    """Split of a PI cube into J and its complement with the projection gap."""
    J: FrozenSet[int]
    complement: FrozenSet[int]
    gap: float


class SingularCounts(NamedTuple):
    """Counting functions over a family of flagged cubes."""
    M: int
    M_sep: int
    M_PI: int
    M_FI: int
    M_sep_PI: int
    M_sep_FI: int


def _particle_distance(cube: CubeSpec, i: int, j: int) -> int:
    return max(abs(s - t) for s, t in zip(cube.center.particle(i), cube.center.particle(j)))


def projection_diameter(cube: CubeSpec) -> int:
    """max_{i != j} |u_i - u_j|; 0 for a single particle."""
    return max((_particle_distance(cube, i, j) for i, j in itertools.combinations(range(cube.n), 2)), default=0)


def classify_interactivity(cube: CubeSpec, r0: float) -> str:
    """
    FI iff diam(u) <= n(2L + r0), PI otherwise.

    Raises:
        GeometryError: If r0 is negative
    """
    if r0 < 0:
        raise GeometryError(f"Interaction range must be nonnegative, got {r0}")
    if projection_diameter(cube) <= cube.n * (2 * cube.half_side + r0):
        return FULLY_INTERACTIVE
    return PARTIALLY_INTERACTIVE


def pi_partition(cube: CubeSpec, r0: float) -> PiPartition:
    """
    Decompose a PI cube into two groups whose projections are more than r0 apart.

    Particles i, j are linked when |u_i - u_j| <= 2L + r0; J is the component of
    particle 0. A PI cube is never connected in this graph, so J is proper.

    Raises:
        NoPartitionError: If the cube is FI
    """
    if classify_interactivity(cube, r0) == FULLY_INTERACTIVE:
        raise NoPartitionError(f"Cube with diameter {projection_diameter(cube)} is FI for L={cube.half_side}, r0={r0}")

    link = 2 * cube.half_side + r0
    component = {0}
    frontier = [0]
    while frontier:
        i = frontier.pop()
        for j in range(cube.n):
            if j not in component and _particle_distance(cube, i, j) <= link:
                component.add(j)
                frontier.append(j)

    J = frozenset(component)
    complement = frozenset(range(cube.n)) - J
    boxes = projection(cube)
    gap = min(boxes[i].gap(boxes[j]) for i in J for j in complement)
    if not gap > r0:
        raise NoPartitionError(f"Projection gap {gap} does not exceed r0={r0}")
    return PiPartition(J=J, complement=complement, gap=gap)


def projections_disjoint(a: CubeSpec, b: CubeSpec) -> bool:
    """True iff no interval of the projection of a meets an interval of the projection of b."""
    return not any(p.overlaps(q) for p in projection(a) for q in projection(b))


def _max_clique(size: int, compatible: Callable[[int, int], bool]) -> int:
    """Size of the largest pairwise-compatible subset, found by exact branch and bound."""
    if size == 0:
        return 0
    graph = nx.Graph()
    graph.add_nodes_from(range(size))
    graph.add_edges_from((i, j) for i, j in itertools.combinations(range(size), 2) if compatible(i, j))
    clique, _ = nx.max_weight_clique(graph, weight=None)
    return len(clique)


def count_singular(cubes: Sequence[CubeSpec], flags: Sequence[bool], N: int, r0: float = 0) -> SingularCounts:
    """
    Count singular cubes the way the scale induction does.

    Args:
        cubes: Cubes of a common n and L
        flags: Singularity flag per cube
        N: Total particle number (sets the 7NL spacing)
        r0: Interaction range for the PI/FI split

    Returns:
        SingularCounts with M (pairwise > 7NL apart), M_sep (pairwise separable)
        and their PI/FI restrictions
    """
    if len(cubes) != len(flags):
        raise GeometryError(f"{len(cubes)} cubes but {len(flags)} flags")
    singular = [c for c, flag in zip(cubes, flags) if flag]
    if singular and len({(c.n, c.half_side) for c in singular}) > 1:
        raise GeometryError("count_singular needs cubes of a common n and L")

    def far(group):
        return lambda i, j: max_norm(group[i].center, group[j].center) > SEPARATION_FACTOR * N * group[i].half_side

    def separable(group):
        return lambda i, j: is_separable_pair(group[i], group[j], N).separable

    pi = [c for c in singular if classify_interactivity(c, r0) == PARTIALLY_INTERACTIVE]
    fi = [c for c in singular if classify_interactivity(c, r0) == FULLY_INTERACTIVE]

    results = {}
    for name, group, rule in [("M", singular, far), ("M_sep", singular, separable),
                              ("M_PI", pi, far), ("M_FI", fi, far),
                              ("M_sep_PI", pi, separable), ("M_sep_FI", fi, separable)]:
        results[name] = _max_clique(len(group), rule(group))

    logger.debug("singular cubes counted", total=len(cubes), flagged=len(singular), **results)
    return SingularCounts(**results)


class NoPartitionError(GeometryError):
    """Exception raised when a cube admits no PI decomposition."""
    pass
