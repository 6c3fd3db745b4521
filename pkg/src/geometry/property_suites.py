"""
Property Suites Module

Exhaustive and randomised oracle checks of the cube combinatorics: the
separability covering, the separation radius, the PI decomposition, projection
disjointness of far FI cubes and the two-separable-cubes counting bound. Each
suite returns a SuiteResult; a suite passes only with zero exceptions.
"""

from typing import Any, Dict, List, NamedTuple, Optional, Sequence

import numpy as np
import structlog

from geometry.cube_geometry import CubeSpec, ParticlePoint
from geometry.interactivity import (
    FULLY_INTERACTIVE,
    NoPartitionError,
    classify_interactivity,
    count_singular,
    pi_partition,
    projections_disjoint,
)
from geometry.separability import (
    SEPARATION_FACTOR,
    farthest_cluster,
    is_J_separable,
    is_separable_pair,
    min_separation_radius,
    nonempty_subsets,
    separability_covering,
)


class SuiteResult(NamedTuple):
    """Outcome of one property suite."""
    name: str
    n: int
    L: float
    checked: int
    exceptions: int
    failures: List[Dict[str, Any]]

    @property
    def passed(self) -> bool:
        return self.exceptions == 0 and self.checked > 0


class PropertySuiteRunner:
    """
    Runs the geometry oracle suites for small particle numbers in d=1.
    """

    def __init__(self,
                 seed: int = 0,
                 scan_radius_factor: float = 30,
                 random_trials: int = 10000,
                 chunk_size: int = 200000,
                 max_failures_kept: int = 5):
        """
        Args:
            seed: Seed for the randomised suites
            scan_radius_factor: Exhaustive scans cover |y - x| <= factor * L
            random_trials: Trials per randomised suite
            chunk_size: Lattice points processed per vectorised batch
            max_failures_kept: Counterexamples retained per suite
        """
        self.seed = seed
        self.scan_radius_factor = scan_radius_factor
        self.random_trials = random_trials
        self.chunk_size = chunk_size
        self.max_failures_kept = max_failures_kept
        self.logger = structlog.get_logger(__name__)

    def run_all(self, n_values: Sequence[int] = (1, 2, 3),
                L_values: Sequence[int] = (2, 3, 5), r0: float = 1) -> List[SuiteResult]:
        """Every suite for every (n, L) combination."""
        results = []
        for n in n_values:
            for L in L_values:
                results.append(self.covering_suite(n, L))
                results.append(self.separation_radius_suite(n, L))
                results.append(self.pi_partition_suite(n, L, r0))
                if L > 2 * r0:
                    results.append(self.fi_projection_suite(n, L, r0))
            if n >= 2:
                results.append(self.counting_suite(n, L_values[0]))
        failed = [r.name for r in results if not r.passed]
        self.logger.info("geometry suites finished", suites=len(results), failed=len(failed))
        return results

    def _rng(self, *salt: int) -> np.random.Generator:
        return np.random.default_rng([self.seed, *salt])

    def _record_failure(self, failures: List[Dict[str, Any]], **details):
        if len(failures) < self.max_failures_kept:
            failures.append(details)

    # ------------------------------------------------------------------
    # Covering of the non-separable set (exhaustive lattice scan)
    # ------------------------------------------------------------------

    def base_configurations(self, n: int, L: int) -> List[ParticlePoint]:
        """Coincident, spread and mixed configurations around the origin."""
        configs = [ParticlePoint.of([0] * n)]
        if n >= 2:
            configs.append(ParticlePoint.of([k * 4 * L for k in range(n)]))
            configs.append(ParticlePoint.of([0] * (n - 1) + [3 * L]))
        rng = self._rng(n, L, 17)
        configs.append(ParticlePoint.of(rng.integers(-3 * n * L, 3 * n * L + 1, size=n).tolist()))
        unique = []
        for config in configs:
            if config not in unique:
                unique.append(config)
        return unique

    def _lattice_chunks(self, x: np.ndarray, radius: int):
        """Yield (m, n) arrays of all lattice y with |y - x| <= radius."""
        n = x.size
        offsets = np.arange(-radius, radius + 1)
        if n == 1:
            yield (x[0] + offsets)[:, None]
            return
        rest = np.stack(np.meshgrid(*([offsets] * (n - 1)), indexing="ij"), axis=-1).reshape(-1, n - 1)
        for first in offsets:
            block = np.empty((rest.shape[0], n), dtype=np.int64)
            block[:, 0] = first
            block[:, 1:] = rest
            for start in range(0, block.shape[0], self.chunk_size):
                yield block[start:start + self.chunk_size] + x[None, :]

    @staticmethod
    def separable_mask(x: np.ndarray, ys: np.ndarray, L: float, N: int) -> np.ndarray:
        """
        Vectorised is_separable_pair for one x against many y (d=1, common L).

        A J-witness on the y side needs |y_j - y_k| >= 2L for j in J, k not in J
        and |y_j - x_k| >= 2L for j in J and every k; the x side mirrors it.
        """
        n = x.size
        far_gate = np.max(np.abs(ys - x[None, :]), axis=1) > SEPARATION_FACTOR * N * L
        yy = np.abs(ys[:, :, None] - ys[:, None, :]) >= 2 * L
        yx = np.abs(ys[:, :, None] - x[None, None, :]) >= 2 * L
        xx = np.abs(x[:, None] - x[None, :]) >= 2 * L

        witness = np.zeros(ys.shape[0], dtype=bool)
        for J in nonempty_subsets(n):
            inside = sorted(J)
            outside = [k for k in range(n) if k not in J]
            y_side = np.all(yx[:, inside, :], axis=(1, 2))
            x_side = np.all(yx[:, :, inside], axis=(1, 2))
            if outside:
                y_side &= np.all(yy[:, inside][:, :, outside], axis=(1, 2))
                x_side &= bool(np.all(xx[np.ix_(inside, outside)]))
            witness |= y_side | x_side
        return far_gate & witness

    def covering_suite(self, n: int, L: int, N: Optional[int] = None) -> SuiteResult:
        """
        Every lattice y with 7NL < |y - x| <= factor * L outside the covering
        cubes of x must form a separable pair with x.
        """
        N = N or n
        radius = int(self.scan_radius_factor * L)
        checked = 0
        exceptions = 0
        failures: List[Dict[str, Any]] = []
        rng = self._rng(n, L, 23)

        for config in self.base_configurations(n, L):
            x = np.asarray(config.coords, dtype=np.int64)
            covering = separability_covering(config, L)
            centers = np.asarray([c.center.coords for c in covering], dtype=np.int64)
            half_side = covering[0].half_side
            x_cube = CubeSpec(config, L)

            for ys in self._lattice_chunks(x, radius):
                in_scope = np.max(np.abs(ys - x[None, :]), axis=1) > SEPARATION_FACTOR * N * L
                ys = ys[in_scope]
                if ys.size == 0:
                    continue
                inside_cover = np.zeros(ys.shape[0], dtype=bool)
                for center in centers:
                    inside_cover |= np.max(np.abs(ys - center[None, :]), axis=1) < half_side
                ys = ys[~inside_cover]
                if ys.size == 0:
                    continue
                separable = self.separable_mask(x, ys, L, N)
                checked += ys.shape[0]
                exceptions += int(np.count_nonzero(~separable))
                for y in ys[~separable][: self.max_failures_kept]:
                    self._record_failure(failures, x=config.coords, y=tuple(int(v) for v in y))

                # spot-check the vectorised predicate against the scalar one
                sample = rng.choice(ys.shape[0], size=min(3, ys.shape[0]), replace=False)
                for idx in sample:
                    y_cube = CubeSpec(ParticlePoint.of(ys[idx].tolist()), L)
                    if is_separable_pair(x_cube, y_cube, N).separable != bool(separable[idx]):
                        exceptions += 1
                        self._record_failure(failures, x=config.coords, y=tuple(int(v) for v in ys[idx]),
                                             reason="vectorised and scalar predicates disagree")

        self.logger.info("covering suite", n=n, L=L, checked=checked, exceptions=exceptions)
        return SuiteResult("separability_covering", n, L, checked, exceptions, failures)

    # ------------------------------------------------------------------
    # Randomised suites
    # ------------------------------------------------------------------

    def separation_radius_suite(self, n: int, L: int, N: Optional[int] = None) -> SuiteResult:
        """Beyond min_separation_radius(y) the farthest x-cluster is a J-witness."""
        N = N or n
        rng = self._rng(n, L, 31)
        exceptions = 0
        failures: List[Dict[str, Any]] = []
        for _ in range(self.random_trials):
            y = ParticlePoint.of(rng.integers(-4 * n * L, 4 * n * L + 1, size=n).tolist())
            radius = min_separation_radius(y, L, N)
            offset = rng.integers(-2 * int(radius), 2 * int(radius) + 1, size=n)
            k = int(rng.integers(n))
            offset[k] = int(rng.choice([-1, 1])) * (int(radius) + 1 + int(rng.integers(0, int(radius) + 1)))
            x = ParticlePoint.of((np.asarray(y.coords) + offset).tolist())
            J = farthest_cluster(x, y, L)
            if not is_J_separable(CubeSpec(x, L), CubeSpec(y, L), J):
                exceptions += 1
                self._record_failure(failures, x=x.coords, y=y.coords, J=sorted(J))
        self.logger.info("separation radius suite", n=n, L=L, exceptions=exceptions)
        return SuiteResult("min_separation_radius", n, L, self.random_trials, exceptions, failures)

    def pi_partition_suite(self, n: int, L: int, r0: float) -> SuiteResult:
        """PI cubes decompose with gap > r0; FI cubes refuse."""
        rng = self._rng(n, L, 41)
        exceptions = 0
        failures: List[Dict[str, Any]] = []
        spread = 2 * n * (2 * L + int(r0) + 1)
        for _ in range(self.random_trials):
            cube = CubeSpec(ParticlePoint.of(rng.integers(-spread, spread + 1, size=n).tolist()), L)
            kind = classify_interactivity(cube, r0)
            try:
                partition = pi_partition(cube, r0)
                ok = kind != FULLY_INTERACTIVE and partition.gap > r0 and 0 < len(partition.J) < n
            except NoPartitionError:
                ok = kind == FULLY_INTERACTIVE
            if not ok:
                exceptions += 1
                self._record_failure(failures, center=cube.center.coords, kind=kind)
        return SuiteResult("pi_partition", n, L, self.random_trials, exceptions, failures)

    def _random_fi_center(self, rng: np.random.Generator, n: int, L: int, r0: float) -> np.ndarray:
        reach = int(n * (2 * L + r0)) // 2
        return rng.integers(-reach, reach + 1, size=n)

    def fi_projection_suite(self, n: int, L: int, r0: float) -> SuiteResult:
        """Far FI pairs (|x - y| > 7nL, L > 2r0) have disjoint projections."""
        rng = self._rng(n, L, 53)
        exceptions = 0
        failures: List[Dict[str, Any]] = []
        gate = SEPARATION_FACTOR * n * L
        for _ in range(self.random_trials):
            x = self._random_fi_center(rng, n, L, r0)
            y = self._random_fi_center(rng, n, L, r0)
            k = int(rng.integers(n))
            shift = int(rng.choice([-1, 1])) * (gate + 1 + int(rng.integers(0, gate)))
            y = y - y[k] + x[k] + shift
            a = CubeSpec(ParticlePoint.of(x.tolist()), L)
            b = CubeSpec(ParticlePoint.of(y.tolist()), L)
            if classify_interactivity(a, r0) != FULLY_INTERACTIVE or classify_interactivity(b, r0) != FULLY_INTERACTIVE:
                continue
            if not projections_disjoint(a, b):
                exceptions += 1
                self._record_failure(failures, x=a.center.coords, y=b.center.coords)
        return SuiteResult("fi_projections_disjoint", n, L, self.random_trials, exceptions, failures)

    def counting_suite(self, n: int, L: int, configurations: int = 50) -> SuiteResult:
        """n^n + 2 singular cubes pairwise more than 7NL apart contain a separable pair."""
        rng = self._rng(n, L, 67)
        count = n ** n + 2
        gate = SEPARATION_FACTOR * n * L
        width = 4 * gate
        exceptions = 0
        failures: List[Dict[str, Any]] = []
        for _ in range(configurations):
            centers: List[np.ndarray] = []
            while len(centers) < count:
                candidate = rng.integers(-width, width + 1, size=n)
                if all(np.max(np.abs(candidate - c)) > gate for c in centers):
                    centers.append(candidate)
            cubes = [CubeSpec(ParticlePoint.of(c.tolist()), L) for c in centers]
            counts = count_singular(cubes, [True] * count, N=n)
            if counts.M < count or counts.M_sep < 2:
                exceptions += 1
                self._record_failure(failures, centers=[c.tolist() for c in centers], M_sep=counts.M_sep)
        return SuiteResult("two_separable_singular_cubes", n, L, configurations, exceptions, failures)
