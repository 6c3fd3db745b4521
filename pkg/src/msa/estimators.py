"""
Estimators Module

Monte Carlo estimates of the MSA event probabilities, each compared against its
polynomial bound. Realization t always reads the field sampled from
(master_seed, t), so estimates depend only on the seed and never on how the
trials are scheduled across threads.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import structlog
from scipy import stats

from geometry.cube_geometry import CubeSpec, ParticlePoint
from geometry.interactivity import (
    FULLY_INTERACTIVE,
    PARTIALLY_INTERACTIVE,
    classify_interactivity,
    pi_partition,
)
from geometry.separability import is_separable_pair
from model.disorder import DisorderField, DisorderSpec, SiteWindow, sample_disorder
from model.hamiltonian_builder import DEFAULT_MAX_DIM, DomainSpec
from model.interaction import InteractionSpec
from msa.cube_classifier import (
    build_context,
    classify_cube,
    classify_operator,
    first_resonant,
    is_cnr,
    is_localized_pi,
    noninteracting_ns_implication_check,
    subcube_spectra,
)
from msa.scales import (
    DEFAULT_GRID_POINTS,
    EnergyInterval,
    MsaParameterError,
    MsaParams,
    derive_m_star,
    energy_grid,
    nonlocalized_bound,
    pair_bound,
    singularity_bound,
    variable_energy_interval,
    wegner_bound,
)
from spectral.eigen_solver import eigendecompose
from spectral.green_function import ResonantEnergyError, green_block_norm, region_masks, resolvent_perturbation_residual

logger = structlog.get_logger(__name__)

PASS = "pass"
FAIL = "fail"
VACUOUS = "vacuous"
DECAY_RATE_FLOOR = 0.01
GRID_NOTE = "finite energy grid over I_0 under-detects events quantified over all E"
HYPOTHESIS_NOTE = "distribution outside the Wegner-estimate hypotheses"

FieldSource = Callable[[SiteWindow, int], DisorderField]


class ProbabilityEstimate(NamedTuple):
    """Empirical event frequency with its Wilson interval and the bound it is checked against."""
    op: str
    trials: int
    successes: int
    point: float
    ci_lo: float
    ci_hi: float
    bound: float
    status: str
    seed: int
    L: Optional[float] = None
    n: Optional[int] = None
    N: Optional[int] = None
    h: float = 0.0
    E: Optional[float] = None
    interval: Optional[Tuple[float, float]] = None
    details: Dict[str, Any] = {}

    @property
    def passed(self) -> bool:
        return self.status in (PASS, VACUOUS)

    @property
    def ci_width(self) -> float:
        return self.ci_hi - self.ci_lo


class ScanRow(NamedTuple):
    """One (h, E) cell of the weak-interaction scan, at m and at m/2."""
    h: float
    E: float
    estimate: ProbabilityEstimate
    relaxed: ProbabilityEstimate


class WeakInteractionScan(NamedTuple):
    rows: List[ScanRow]
    h_star_bound: Optional[float]
    h_star_stable: Optional[float]
    resolvent_checks: int
    resolvent_violations: int
    resolvent_skipped: int
    worst_relative_residual: float


class InitialBoundDecomposition(NamedTuple):
    """Frequencies of the singular (S), non-localized (N) and resonant (R) events at h = 0."""
    singular: ProbabilityEstimate
    nonlocalized_frequency: float
    resonant_frequency: float
    counterexamples: int
    vacuous: int
    holds: int


class DecayRow(NamedTuple):
    L: int
    mean_norm: float
    ci_lo: float
    ci_hi: float
    mean_log_norm: float
    used_trials: int
    resonant_trials: int


class DecayCurve(NamedTuple):
    """Mean block norms against L with the fitted exponential rate."""
    n: int
    E: float
    rows: List[DecayRow]
    mu_hat: float
    mu_ci: Tuple[float, float]
    decaying: bool


def wilson_interval(successes: int, trials: int, confidence: float = 0.95) -> Tuple[float, float]:
    """
    Wilson score interval for a binomial proportion.

    Raises:
        EstimatorError: If trials < 1 or successes is outside [0, trials]
    """
    if trials < 1:
        raise EstimatorError(f"Need at least one trial, got {trials}")
    if not 0 <= successes <= trials:
        raise EstimatorError(f"successes={successes} outside [0, {trials}]")
    z = float(stats.norm.ppf(0.5 + confidence / 2.0))
    point = successes / trials
    scale = 1.0 + z * z / trials
    center = (point + z * z / (2.0 * trials)) / scale
    half = z / scale * math.sqrt(point * (1.0 - point) / trials + z * z / (4.0 * trials * trials))
    return max(0.0, min(center - half, point)), min(1.0, max(center + half, point))


def bound_status(ci_hi: float, bound: float) -> str:
    """vacuous when the bound exceeds 1, otherwise pass iff the upper Wilson bound is below it."""
    if bound > 1.0:
        return VACUOUS
    return PASS if ci_hi <= bound else FAIL


def run_trials(task: Callable[[int], Any], trials: int, threads: int = 1) -> List[Any]:
    """Results of task(0..trials-1) in trial order."""
    if trials < 1:
        raise EstimatorError(f"Need at least one trial, got {trials}")
    if threads <= 1:
        return [task(t) for t in range(trials)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(task, range(trials)))


def make_estimate(op: str, successes: int, trials: int, bound: float, seed: int,
                  confidence: float = 0.95, **fields) -> ProbabilityEstimate:
    ci_lo, ci_hi = wilson_interval(successes, trials, confidence)
    return ProbabilityEstimate(op=op, trials=trials, successes=int(successes), point=successes / trials,
                               ci_lo=ci_lo, ci_hi=ci_hi, bound=bound, status=bound_status(ci_hi, bound),
                               seed=seed, **fields)


def estimate_probability(event_fn: Callable[[int], bool], trials: int, bound: float = 1.0,
                         op: str = "event", seed: int = 0, threads: int = 1,
                         confidence: float = 0.95, **fields) -> ProbabilityEstimate:
    """
    Frequency of event_fn(t) over t = 0..trials-1.

    Args:
        event_fn: Pure function of the trial index
        trials: Number of realizations (>= 1)
        bound: Value the upper Wilson bound is compared against

    Raises:
        EstimatorError: If trials < 1
    """
    outcomes = run_trials(lambda t: bool(event_fn(t)), trials, threads)
    return make_estimate(op, sum(outcomes), trials, bound, seed, confidence, **fields)


def union_window(windows: Sequence[SiteWindow]) -> SiteWindow:
    lower = tuple(min(w.lower[k] for w in windows) for k in range(windows[0].d))
    upper = tuple(max(w.upper[k] for w in windows) for k in range(windows[0].d))
    return SiteWindow(lower, upper)


class MsaEstimator:
    """
    Monte Carlo estimator of the singularity, pair, Wegner and localization events.

    Attributes:
        params: Masses, exponent and particle numbers
        disorder: Single-site law of the potential
        interaction: Pair interaction (None means no interaction)
        master_seed: Seed from which realization t is derived
    """

    def __init__(self,
                 params: MsaParams,
                 disorder: Optional[DisorderSpec] = None,
                 interaction: Optional[InteractionSpec] = None,
                 master_seed: int = 0,
                 spacing: float = 1.0,
                 max_dim: int = DEFAULT_MAX_DIM,
                 threads: int = 1,
                 confidence: float = 0.95,
                 grid_points: int = DEFAULT_GRID_POINTS,
                 field_source: Optional[FieldSource] = None):
        self.params = params
        self.disorder = disorder or DisorderSpec()
        self.interaction = interaction
        self.master_seed = int(master_seed)
        self.spacing = spacing
        self.max_dim = max_dim
        self.threads = threads
        self.confidence = confidence
        self.grid_points = grid_points
        self.field_source = field_source
        self.logger = structlog.get_logger(__name__)

    # Realizations

    def field(self, window: SiteWindow, index: int) -> DisorderField:
        if self.field_source is not None:
            return self.field_source(window, index)
        return sample_disorder(self.disorder, window, self.master_seed, index)

    def window_for(self, *cubes: CubeSpec) -> SiteWindow:
        return union_window([DomainSpec(c, self.spacing).site_window() for c in cubes])

    def energy_interval(self, n: int) -> EnergyInterval:
        p = self.params
        return variable_energy_interval(p.E0_energy, p.L0, p.m, p.m1, p.N, n)

    @property
    def h(self) -> float:
        return self.interaction.h if self.interaction is not None else 0.0

    @property
    def r0(self) -> float:
        return self.interaction.r0_grid_units if self.interaction is not None else 0.0

    def _check_cube(self, cube: CubeSpec):
        if cube.n > self.params.N:
            raise MsaParameterError(f"Cube has n={cube.n} particles, above N={self.params.N}")

    def _fields(self, cube: CubeSpec, **extra) -> Dict[str, Any]:
        fields = {"L": cube.half_side, "n": cube.n, "N": self.params.N, "h": self.h,
                  "details": {"m": self.params.m, "p": self.params.p, **extra.pop("details", {})}}
        fields.update(extra)
        return fields

    def _singular_over_grid(self, cube: CubeSpec, field: DisorderField, grid: np.ndarray,
                            params: MsaParams) -> np.ndarray:
        H = build_context(cube, field, self.interaction, self.spacing, self.max_dim).assemble()
        eig = eigendecompose(H)
        return np.array([classify_operator(H, eig, E, params).singular for E in grid])

    # Estimates

    def estimate_singularity_probability(self, cube: CubeSpec, E: float, trials: int) -> ProbabilityEstimate:
        """
        Frequency of (E, m)-singular realizations of cube, against (1/2) L^(-2p 4^(N-n)).
        """
        self._check_cube(cube)
        window = self.window_for(cube)
        bound = singularity_bound(cube.half_side, self.params.p, self.params.N, cube.n)

        def event(t: int) -> bool:
            field = self.field(window, t)
            return classify_cube(cube, field, self.interaction, E, self.params, self.spacing, self.max_dim).singular

        estimate = estimate_probability(event, trials, bound, op="singularity", seed=self.master_seed,
                                        threads=self.threads, confidence=self.confidence,
                                        **self._fields(cube, E=float(E)))
        self.logger.info("estimate finished", op="singularity", L=cube.half_side, n=cube.n,
                         successes=estimate.successes, trials=trials, status=estimate.status)
        return estimate

    def pair_tag(self, cube_a: CubeSpec, cube_b: CubeSpec) -> str:
        kinds = {classify_interactivity(cube_a, self.r0), classify_interactivity(cube_b, self.r0)}
        if kinds == {PARTIALLY_INTERACTIVE}:
            return "PI"
        if kinds == {FULLY_INTERACTIVE}:
            return "FI"
        return "MI"

    def _require_separable(self, cube_a: CubeSpec, cube_b: CubeSpec):
        separation = is_separable_pair(cube_a, cube_b, self.params.N)
        if not separation.separable:
            raise PairPreconditionError(
                f"Cubes at {cube_a.center.coords} and {cube_b.center.coords} are not separable")
        return separation

    def estimate_pair_probability(self, cube_a: CubeSpec, cube_b: CubeSpec, trials: int,
                                  interval: Optional[EnergyInterval] = None) -> ProbabilityEstimate:
        """
        Frequency of realizations in which some energy of the grid over I_0 makes both cubes
        singular, against L^(-2p 4^(N-n)).

        Raises:
            PairPreconditionError: If the pair is not separable
        """
        self._check_cube(cube_a)
        separation = self._require_separable(cube_a, cube_b)
        interval = interval or self.energy_interval(cube_a.n)
        grid = energy_grid(interval, self.grid_points)
        window = self.window_for(cube_a, cube_b)

        def outcome(t: int) -> Tuple[bool, bool, bool, bool]:
            field = self.field(window, t)
            flags_a = self._singular_over_grid(cube_a, field, grid, self.params)
            flags_b = self._singular_over_grid(cube_b, field, grid, self.params)
            any_a, any_b = bool(flags_a.any()), bool(flags_b.any())
            return bool(np.any(flags_a & flags_b)), any_a, any_b, any_a and any_b

        outcomes = np.array(run_trials(outcome, trials, self.threads), dtype=bool).reshape(trials, 4)
        joint, count_a, count_b, count_ab = (int(c) for c in outcomes.sum(axis=0))
        p_a, p_b, p_ab = count_a / trials, count_b / trials, count_ab / trials
        product = p_a * p_b
        spread = math.sqrt(product * (1.0 - product) / trials)
        independence_z = (p_ab - product) / spread if spread > 0 else 0.0

        bound = pair_bound(cube_a.half_side, self.params.p, self.params.N, cube_a.n)
        details = {
            "tag": self.pair_tag(cube_a, cube_b),
            "witness_side": separation.witness_side,
            "witness_J": sorted(separation.witness_J),
            "energy_grid": [float(E) for E in grid],
            "grid_spacing": float(grid[1] - grid[0]) if grid.size > 1 else 0.0,
            "delta": interval.delta,
            "delta_dressed": interval.delta_dressed,
            "marginal_a": p_a,
            "marginal_b": p_b,
            "joint_any": p_ab,
            "independence_z": independence_z,
            "note": GRID_NOTE,
        }
        estimate = make_estimate("pair_singularity", joint, trials, bound, self.master_seed, self.confidence,
                                 **self._fields(cube_a, interval=interval.interval, details=details))
        self.logger.info("estimate finished", op="pair_singularity", L=cube_a.half_side, tag=details["tag"],
                         successes=joint, trials=trials, status=estimate.status)
        return estimate

    def estimate_wegner(self, cube: CubeSpec, trials: int, E: Optional[float] = None,
                        partner: Optional[CubeSpec] = None,
                        interval: Optional[EnergyInterval] = None) -> ProbabilityEstimate:
        """
        Frequency of the not-E-CNR event, or with a partner cube of the event that for some
        energy of the grid over I_0 neither cube is E-CNR; compared to L^(-p 4^(N-n)).
        """
        self._check_cube(cube)
        bound = wegner_bound(cube.half_side, self.params.p, self.params.N, cube.n)
        outside = not self.disorder.is_continuous
        details: Dict[str, Any] = {"outside_hypotheses": outside}
        if outside:
            details["flag"] = HYPOTHESIS_NOTE
            self.logger.warning("wegner estimate outside hypotheses", distribution=self.disorder.distribution)

        if partner is None:
            if E is None:
                raise EstimatorError("Single-cube Wegner estimate needs an energy")
            window = self.window_for(cube)

            def event(t: int) -> bool:
                field = self.field(window, t)
                return not is_cnr(cube, field, self.interaction, E, self.params, self.spacing, self.max_dim).cnr

            return estimate_probability(event, trials, bound, op="wegner", seed=self.master_seed,
                                        threads=self.threads, confidence=self.confidence,
                                        **self._fields(cube, E=float(E), details=details))

        separation = self._require_separable(cube, partner)
        interval = interval or self.energy_interval(cube.n)
        grid = energy_grid(interval, self.grid_points)
        window = self.window_for(cube, partner)

        def pair_event(t: int) -> bool:
            field = self.field(window, t)
            spectra_a = list(subcube_spectra(cube, field, self.interaction, self.spacing, self.max_dim))
            spectra_b = list(subcube_spectra(partner, field, self.interaction, self.spacing, self.max_dim))
            return any(not first_resonant(spectra_a, E_k).cnr and not first_resonant(spectra_b, E_k).cnr
                       for E_k in grid)

        details.update({"tag": self.pair_tag(cube, partner), "witness_side": separation.witness_side,
                        "energy_grid": [float(E_k) for E_k in grid], "note": GRID_NOTE})
        return estimate_probability(pair_event, trials, bound, op="wegner_pair", seed=self.master_seed,
                                    threads=self.threads, confidence=self.confidence,
                                    **self._fields(cube, interval=interval.interval, details=details))

    def weak_interaction_scan(self, cube: CubeSpec, h_grid: Sequence[float], E_grid: Sequence[float],
                              trials: int) -> WeakInteractionScan:
        """
        Singularity estimates for every (h, E) on common realizations, at m and at m/2.

        h* (bound) is the largest grid h up to which every relaxed (m/2) row still meets the
        h = 0 bound; h* (stable) is the largest h up to which every row stays within its CI
        width of the h = 0 row. Each realization also checks the second resolvent identity
        and ||G_0 - G_h|| <= |h| ||U|| ||G_0|| ||G_h||.

        Raises:
            MsaParameterError: If h_grid does not contain 0
        """
        self._check_cube(cube)
        hs = sorted({float(h) for h in h_grid}, key=lambda h: (abs(h), h))
        if 0.0 not in hs:
            raise MsaParameterError("weak_interaction_scan needs h = 0 in the grid")
        energies = [float(E) for E in E_grid]
        base = self.interaction or InteractionSpec()
        relaxed_params = self.params.with_mass(self.params.m / 2.0)
        window = self.window_for(cube)

        def outcome(t: int):
            field = self.field(window, t)
            flags = np.zeros((len(hs), len(energies), 2), dtype=bool)
            checks = violations = skipped = 0
            worst = 0.0
            H0 = None
            for i, h in enumerate(hs):
                H = build_context(cube, field, base.with_amplitude(h), self.spacing, self.max_dim).assemble()
                if h == 0.0:
                    H0 = H
                eig = eigendecompose(H)
                for k, E in enumerate(energies):
                    flags[i, k, 0] = classify_operator(H, eig, E, self.params).singular
                    flags[i, k, 1] = classify_operator(H, eig, E, relaxed_params).singular
            for h in hs:
                if h == 0.0:
                    continue
                for E in energies:
                    try:
                        residual = resolvent_perturbation_residual(H0, H0.interaction_diag, h, E)
                    except ResonantEnergyError:
                        skipped += 1
                        continue
                    checks += 1
                    worst = max(worst, residual.residual / residual.scale)
                    if not (residual.within_tolerance and residual.difference_bounded):
                        violations += 1
            return flags, checks, violations, skipped, worst

        results = run_trials(outcome, trials, self.threads)
        counts = np.sum([r[0] for r in results], axis=0)
        checks = sum(r[1] for r in results)
        violations = sum(r[2] for r in results)
        skipped = sum(r[3] for r in results)
        worst = max((r[4] for r in results), default=0.0)

        bound = singularity_bound(cube.half_side, self.params.p, self.params.N, cube.n)
        rows = []
        for i, h in enumerate(hs):
            for k, E in enumerate(energies):
                fields = self._fields(cube, E=E)
                fields["h"] = h
                estimate = make_estimate("weakint", int(counts[i, k, 0]), trials, bound, self.master_seed,
                                         self.confidence, **fields)
                relaxed = make_estimate("weakint_relaxed", int(counts[i, k, 1]), trials, bound, self.master_seed,
                                        self.confidence, **fields)
                rows.append(ScanRow(h=h, E=E, estimate=estimate, relaxed=relaxed))

        h_star_bound = self._largest_prefix(hs, rows, lambda row, _: row.relaxed.passed)
        h_star_stable = self._largest_prefix(
            hs, rows, lambda row, zero: abs(row.estimate.point - zero.estimate.point) <= row.estimate.ci_width)
        if violations:
            self.logger.warning("resolvent identity violated", violations=violations, checks=checks)
        self.logger.info("weak-interaction scan finished", L=cube.half_side, n=cube.n, h_values=len(hs),
                         h_star_bound=h_star_bound, h_star_stable=h_star_stable)
        return WeakInteractionScan(rows=rows, h_star_bound=h_star_bound, h_star_stable=h_star_stable,
                                   resolvent_checks=checks, resolvent_violations=violations,
                                   resolvent_skipped=skipped, worst_relative_residual=worst)

    @staticmethod
    def _largest_prefix(hs: List[float], rows: List[ScanRow], accept) -> Optional[float]:
        zero_rows = {row.E: row for row in rows if row.h == 0.0}
        best = None
        for h in hs:
            if not all(accept(row, zero_rows[row.E]) for row in rows if row.h == h):
                break
            best = h
        return best

    def estimate_nonlocalized_probability(self, cube: CubeSpec, trials: int) -> ProbabilityEstimate:
        """
        Frequency of m-non-localized realizations of a PI cube, against (1/2) L^(-4p 4^(N-n)).

        Raises:
            NoPartitionError: If the cube is FI
        """
        self._check_cube(cube)
        partition = pi_partition(cube, self.r0)
        window = self.window_for(cube)
        bound = nonlocalized_bound(cube.half_side, self.params.p, self.params.N, cube.n)

        def event(t: int) -> bool:
            field = self.field(window, t)
            return not is_localized_pi(cube, field, self.interaction, self.params, self.spacing, self.max_dim).localized

        return estimate_probability(event, trials, bound, op="nonlocalized", seed=self.master_seed,
                                    threads=self.threads, confidence=self.confidence,
                                    **self._fields(cube, details={"J": sorted(partition.J)}))

    def estimate_initial_bound_decomposition(self, cube: CubeSpec, E: float, trials: int) -> InitialBoundDecomposition:
        """Split the h = 0 singular event into its non-localized and resonant causes."""
        self._check_cube(cube)
        window = self.window_for(cube)

        def outcome(t: int):
            field = self.field(window, t)
            report = noninteracting_ns_implication_check(cube, field, E, self.params, self.interaction,
                                                         self.spacing, self.max_dim)
            return (not report.nonsingular, not report.eigenfunctions_localized,
                    not report.nonresonant, report.status)

        results = run_trials(outcome, trials, self.threads)
        singular = sum(r[0] for r in results)
        counterexamples = sum(1 for r in results if r[0] and not r[1] and not r[2])
        bound = singularity_bound(cube.half_side, self.params.p, self.params.N, cube.n)
        estimate = make_estimate("initial_bound", singular, trials, bound, self.master_seed, self.confidence,
                                 **self._fields(cube, E=float(E), details={"counterexamples": counterexamples}))
        if counterexamples:
            self.logger.warning("non-interacting implication counterexamples", count=counterexamples)
        return InitialBoundDecomposition(
            singular=estimate,
            nonlocalized_frequency=sum(r[1] for r in results) / trials,
            resonant_frequency=sum(r[2] for r in results) / trials,
            counterexamples=counterexamples,
            vacuous=sum(1 for r in results if r[3] == "vacuous"),
            holds=sum(1 for r in results if r[3] == "holds"),
        )

    def block_norm_decay_curve(self, n_prime: int, L_list: Sequence[int], trials: int,
                               E: Optional[float] = None, center: Optional[ParticlePoint] = None) -> DecayCurve:
        """
        Mean ||1_out G(E) 1_int|| against L, with the least-squares rate mu_hat of
        log(mean) = c - mu_hat L and its CI.

        Raises:
            EstimatorError: If L_list holds fewer than two distinct scales
        """
        lengths = sorted({int(L) for L in L_list})
        if len(lengths) < 2:
            raise EstimatorError("A decay rate needs at least two distinct scales")
        if not 1 <= n_prime <= self.params.N:
            raise MsaParameterError(f"n'={n_prime} outside 1..N={self.params.N}")
        E = self.params.E0_energy if E is None else float(E)
        center = center or ParticlePoint(n=n_prime, d=self.params.d, coords=(0,) * (n_prime * self.params.d))
        cubes = [CubeSpec(center=center, half_side=L) for L in lengths]
        windows = [self.window_for(c) for c in cubes]

        def outcome(t: int) -> List[Optional[float]]:
            norms = []
            for cube, window in zip(cubes, windows):
                H = build_context(cube, self.field(window, t), self.interaction, self.spacing, self.max_dim).assemble()
                masks = region_masks(H)
                try:
                    norms.append(green_block_norm(eigendecompose(H), E, masks.shell, masks.interior).block_norm)
                except ResonantEnergyError:
                    norms.append(None)
            return norms

        results = run_trials(outcome, trials, self.threads)
        rows = []
        for j, L in enumerate(lengths):
            values = np.array([r[j] for r in results if r[j] is not None], dtype=float)
            rows.append(self._decay_row(L, values, trials))

        usable = [row for row in rows if row.used_trials > 0]
        if len(usable) < 2:
            raise EstimatorError("Fewer than two scales had non-resonant realizations")
        fit = stats.linregress([row.L for row in usable], [math.log(max(row.mean_norm, 1e-300)) for row in usable])
        mu_hat = -float(fit.slope)
        if len(usable) > 2:
            spread = float(stats.t.ppf(0.5 + self.confidence / 2.0, len(usable) - 2)) * float(fit.stderr)
        else:
            spread = 0.0
        curve = DecayCurve(n=n_prime, E=E, rows=rows, mu_hat=mu_hat, mu_ci=(mu_hat - spread, mu_hat + spread),
                           decaying=mu_hat > DECAY_RATE_FLOOR)
        self.logger.info("decay curve fitted", n=n_prime, scales=lengths, mu_hat=mu_hat, decaying=curve.decaying)
        return curve

    def _decay_row(self, L: int, values: np.ndarray, trials: int) -> DecayRow:
        used = int(values.size)
        if used == 0:
            return DecayRow(L, math.nan, math.nan, math.nan, math.nan, 0, trials)
        mean = float(np.mean(values))
        if used > 1:
            half = float(stats.t.ppf(0.5 + self.confidence / 2.0, used - 1)) * float(stats.sem(values))
        else:
            half = 0.0
        logs = np.log(np.maximum(values, 1e-300))
        return DecayRow(L=L, mean_norm=mean, ci_lo=mean - half, ci_hi=mean + half,
                        mean_log_norm=float(np.mean(logs)), used_trials=used, resonant_trials=trials - used)

    def derive_mass(self, curve: DecayCurve) -> float:
        """m* = 2^(-N-1) mu_hat from a single-particle decay curve."""
        return derive_m_star(curve.mu_hat, self.params.N)


class EstimatorError(ValueError):
    """Exception raised for invalid estimator requests."""
    pass


class PairPreconditionError(EstimatorError):
    """Exception raised when a pair estimate is requested for a non-separable pair."""
    pass
