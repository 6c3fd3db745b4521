"""
Cube Geometry Module

Lattice points, n-particle cubes and the boxes, regions and clusters derived
from them. Cubes are open: C_L(u) = {x : |x - u| < L} in the max-norm, so two
boxes that only touch at a face are disjoint.
"""

import math
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np


@dataclass(frozen=True)
class ParticlePoint:
    """
    A configuration of n particles in Z^d, stored as n*d integer coordinates.

    Coordinates are grouped per particle: (x_1^1..x_1^d, x_2^1..x_2^d, ...).
    """

    n: int
    d: int
    coords: Tuple[int, ...]

    def __post_init__(self):
        if self.n < 1 or self.d < 1:
            raise GeometryError(f"Particle point needs n >= 1 and d >= 1, got n={self.n}, d={self.d}")
        if len(self.coords) != self.n * self.d:
            raise DimensionMismatchError(
                f"Expected {self.n * self.d} coordinates for n={self.n}, d={self.d}, got {len(self.coords)}"
            )

    @classmethod
    def of(cls, coords: Sequence[int], d: int = 1) -> "ParticlePoint":
        """Build a point from a flat coordinate sequence."""
        coords = tuple(int(c) for c in coords)
        if d < 1 or len(coords) % d:
            raise DimensionMismatchError(f"{len(coords)} coordinates cannot be split into d={d} blocks")
        return cls(n=len(coords) // d, d=d, coords=coords)

    def particle(self, i: int) -> Tuple[int, ...]:
        """Coordinates of particle i (0-based)."""
        return self.coords[i * self.d:(i + 1) * self.d]

    def particles(self) -> List[Tuple[int, ...]]:
        return [self.particle(i) for i in range(self.n)]

    def as_array(self) -> np.ndarray:
        """Coordinates as an (n, d) integer array."""
        return np.asarray(self.coords, dtype=np.int64).reshape(self.n, self.d)

    def sub_point(self, indices: Sequence[int]) -> "ParticlePoint":
        """The configuration of the particles listed in indices."""
        coords = []
        for i in indices:
            coords.extend(self.particle(i))
        return ParticlePoint(n=len(indices), d=self.d, coords=tuple(coords))

    def shifted(self, offset: int) -> "ParticlePoint":
        """Every coordinate moved by the same offset."""
        return ParticlePoint(n=self.n, d=self.d, coords=tuple(c + offset for c in self.coords))


class Box(NamedTuple):
    """Open axis-parallel box (lower, upper) in R^d."""
    lower: Tuple[float, ...]
    upper: Tuple[float, ...]

    def overlaps(self, other: "Box") -> bool:
        """True iff the open boxes share a point (touching faces do not count)."""
        return all(lo < o_hi and o_lo < hi
                   for lo, hi, o_lo, o_hi in zip(self.lower, self.upper, other.lower, other.upper))

    def gap(self, other: "Box") -> float:
        """Max-norm distance between the two boxes (0 when they overlap or touch)."""
        gaps = [max(o_lo - hi, lo - o_hi, 0.0)
                for lo, hi, o_lo, o_hi in zip(self.lower, self.upper, other.lower, other.upper)]
        return max(gaps)


@dataclass(frozen=True)
class CubeSpec:
    """
    An n-particle cube C_L(u) or, with per_particle_sides, the rectangle
    prod_i C_{L_i}(u_i).
    """

    center: ParticlePoint
    half_side: float
    per_particle_sides: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        if not self.half_side > 0:
            raise DegenerateCubeError(f"Cube half-side must be positive, got {self.half_side}")
        if self.per_particle_sides is not None:
            if len(self.per_particle_sides) != self.center.n:
                raise DimensionMismatchError(
                    f"per_particle_sides has {len(self.per_particle_sides)} entries for n={self.center.n}"
                )
            if any(not side > 0 for side in self.per_particle_sides):
                raise DegenerateCubeError(f"All per-particle half-sides must be positive: {self.per_particle_sides}")

    @classmethod
    def around(cls, coords: Sequence[int], half_side: float, d: int = 1,
               per_particle_sides: Optional[Sequence[float]] = None) -> "CubeSpec":
        sides = tuple(per_particle_sides) if per_particle_sides is not None else None
        return cls(center=ParticlePoint.of(coords, d=d), half_side=half_side, per_particle_sides=sides)

    @property
    def n(self) -> int:
        return self.center.n

    @property
    def d(self) -> int:
        return self.center.d

    @property
    def half_sides(self) -> Tuple[float, ...]:
        if self.per_particle_sides is not None:
            return self.per_particle_sides
        return (self.half_side,) * self.center.n

    def particle_box(self, i: int) -> Box:
        u = self.center.particle(i)
        side = self.half_sides[i]
        return Box(tuple(c - side for c in u), tuple(c + side for c in u))

    def with_half_side(self, half_side: float) -> "CubeSpec":
        """Same center, new (uniform) half-side."""
        return CubeSpec(center=self.center, half_side=half_side)

    def sub_cube(self, indices: Sequence[int]) -> "CubeSpec":
        """The factor cube of the particles in indices."""
        sides = None
        if self.per_particle_sides is not None:
            sides = tuple(self.per_particle_sides[i] for i in indices)
        return CubeSpec(center=self.center.sub_point(indices), half_side=self.half_side, per_particle_sides=sides)

    def contains_points(self, points: np.ndarray) -> np.ndarray:
        """
        Membership mask for configurations.

        Args:
            points: array of shape (m, n, d) with physical coordinates

        Returns:
            Boolean array of shape (m,)
        """
        centers = self.center.as_array()[None, :, :]
        sides = np.asarray(self.half_sides, dtype=float)[None, :, None]
        return np.all(np.abs(points - centers) < sides, axis=(1, 2))

    def contains_cube(self, other: "CubeSpec") -> bool:
        """True iff the open cube other lies inside this open cube."""
        if other.n != self.n or other.d != self.d:
            return False
        for i in range(self.n):
            outer, inner = self.particle_box(i), other.particle_box(i)
            if any(lo < o_lo - 1e-12 for lo, o_lo in zip(inner.lower, outer.lower)):
                return False
            if any(hi > o_hi + 1e-12 for hi, o_hi in zip(inner.upper, outer.upper)):
                return False
        return True


class RegionPair(NamedTuple):
    """Interior sub-cube and boundary shell (cube minus the cube of half-side L - 2)."""
    interior: CubeSpec
    shell_outer: CubeSpec
    shell_inner: CubeSpec

    def interior_mask(self, points: np.ndarray) -> np.ndarray:
        return self.interior.contains_points(points)

    def shell_mask(self, points: np.ndarray) -> np.ndarray:
        return self.shell_outer.contains_points(points) & ~self.shell_inner.contains_points(points)


class ClusterPartition(NamedTuple):
    """Maximal L-clusters of a configuration, as sorted tuples of particle indices."""
    blocks: Tuple[Tuple[int, ...], ...]
    radius: float

    def block_of(self, i: int) -> Tuple[int, ...]:
        for block in self.blocks:
            if i in block:
                return block
        raise GeometryError(f"Particle {i} not in partition")


SHELL_WIDTH = 2


def max_norm(a: ParticlePoint, b: ParticlePoint) -> int:
    """
    Max-norm distance between two configurations.

    Raises:
        DimensionMismatchError: If the points have different n or d
    """
    if a.n != b.n or a.d != b.d:
        raise DimensionMismatchError(f"Cannot compare n={a.n}, d={a.d} with n={b.n}, d={b.d}")
    return max(abs(x - y) for x, y in zip(a.coords, b.coords))


def projection(cube: CubeSpec) -> List[Box]:
    """The n single-particle boxes C_{L_i}(u_i), unmerged and in particle order."""
    return [cube.particle_box(i) for i in range(cube.n)]


def _floor_to_grid(value: float, spacing: float) -> float:
    steps = math.floor(value / spacing + 1e-12)
    return steps * spacing


def regions(cube: CubeSpec, spacing: float = 1.0) -> RegionPair:
    """
    Interior C_{L/3} (half-side floored to the grid) and boundary shell C_L minus C_{L-2}.

    Raises:
        DegenerateCubeError: If some half-side is <= 3
    """
    sides = cube.half_sides
    if any(side <= 3 for side in sides):
        raise DegenerateCubeError(f"Regions need every half-side > 3, got {sides}")

    interior_sides = tuple(_floor_to_grid(side / 3.0, spacing) for side in sides)
    inner_sides = tuple(side - SHELL_WIDTH for side in sides)
    if cube.per_particle_sides is None:
        interior = CubeSpec(cube.center, interior_sides[0])
        inner = CubeSpec(cube.center, inner_sides[0])
    else:
        interior = CubeSpec(cube.center, interior_sides[0], interior_sides)
        inner = CubeSpec(cube.center, inner_sides[0], inner_sides)
    return RegionPair(interior=interior, shell_outer=cube, shell_inner=inner)


def decompose_clusters(y: ParticlePoint, radius: float) -> ClusterPartition:
    """
    Split a configuration into maximal L-clusters.

    Two particles are linked when their open boxes of half-side radius overlap,
    i.e. |y_i - y_j| < 2*radius; clusters are the connected components.
    """
    parent = list(range(y.n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    particles = y.particles()
    for i in range(y.n):
        for j in range(i + 1, y.n):
            dist = max(abs(a - b) for a, b in zip(particles[i], particles[j]))
            if dist < 2 * radius:
                parent[find(i)] = find(j)

    groups = {}
    for i in range(y.n):
        groups.setdefault(find(i), []).append(i)
    blocks = tuple(sorted(tuple(sorted(g)) for g in groups.values()))
    return ClusterPartition(blocks=blocks, radius=radius)


class GeometryError(ValueError):
    """Exception raised for invalid geometric input."""
    pass


class DimensionMismatchError(GeometryError):
    """Exception raised when particle counts or dimensions disagree."""
    pass


class DegenerateCubeError(GeometryError):
    """Exception raised when a cube is too small for the requested construction."""
    pass
