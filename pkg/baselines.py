"""Independent reference solvers and the scaling benchmark.

* ``barrier_solve``: log-det barrier interior point method on the dual
  problem ``min Tr Z`` subject to ``Z >= p_i rho_i``.
* ``helstrom_two_state``: closed-form optimum for two states.
* ``exhaustive_search``: brute force over projective measurements (tiny n).
* ``bench_scaling``: wall-time comparison of the solvers.
"""
from concurrent.futures import ThreadPoolExecutor
import csv
from dataclasses import dataclass, field
import logging
import statistics
import time
from typing import Dict, Iterator, List, Optional, Sequence, TextIO, Tuple

import numpy as np
import scipy.linalg
from scipy.stats import unitary_group

try:
    from .certificates import check_optimal
    from .complex_linalg import ComplexMatrix, RankProfile, hermitian_basis, hermitian_eig, hunvec, hvec, inverse_sqrt
    from .config import (
        BARRIER_DECAY,
        BARRIER_INNER_TOL,
        BARRIER_MAX_INNER,
        BARRIER_MAX_OUTER,
        BARRIER_OUTER_TOL,
        BARRIER_START_SHIFT,
        BARRIER_WEIGHT,
        BENCH_WORKERS,
        GRID_POINT_LIMIT,
        HAAR_BATCH,
        HAAR_REFINE_SCALES,
        HAAR_SAMPLES,
    )
    from .ensemble import Ensemble, Povm, SeedLike, as_generator, random_ensemble, success_probability
    from .exceptions import LidmedError, MaxIterationsExceeded, ProfileMismatch
    from .med_solver import MedSolver, SolveResult, SolverConfig, solve_ensemble
except ImportError:
    from certificates import check_optimal
    from complex_linalg import ComplexMatrix, RankProfile, hermitian_basis, hermitian_eig, hunvec, hvec, inverse_sqrt
    from config import (
        BARRIER_DECAY,
        BARRIER_INNER_TOL,
        BARRIER_MAX_INNER,
        BARRIER_MAX_OUTER,
        BARRIER_OUTER_TOL,
        BARRIER_START_SHIFT,
        BARRIER_WEIGHT,
        BENCH_WORKERS,
        GRID_POINT_LIMIT,
        HAAR_BATCH,
        HAAR_REFINE_SCALES,
        HAAR_SAMPLES,
    )
    from ensemble import Ensemble, Povm, SeedLike, as_generator, random_ensemble, success_probability
    from exceptions import LidmedError, MaxIterationsExceeded, ProfileMismatch
    from med_solver import MedSolver, SolveResult, SolverConfig, solve_ensemble

logger = logging.getLogger(__name__)

_ARMIJO = 1e-4


@dataclass(frozen=True)
class BarrierConfig:
    """Schedule of the barrier method.

    Attributes:
        weight: Initial barrier weight ``w_i`` (same for every constraint).
        weight_decay: Factor applied to the weight after each outer loop.
        inner_tol: Stop an inner Newton loop when half the squared decrement is below this.
        outer_tol: Stop when the duality gap bound ``m n w`` is below this.
        max_outer: Maximum number of outer loops.
        max_inner: Maximum Newton steps per outer loop.
        start_shift: ``eps`` in the starting point ``sum_i p_i rho_i + eps I``.
    """

    weight: float = BARRIER_WEIGHT
    weight_decay: float = BARRIER_DECAY
    inner_tol: float = BARRIER_INNER_TOL
    outer_tol: float = BARRIER_OUTER_TOL
    max_outer: int = BARRIER_MAX_OUTER
    max_inner: int = BARRIER_MAX_INNER
    start_shift: float = BARRIER_START_SHIFT

    def __post_init__(self):
        for name in ("weight", "inner_tol", "outer_tol", "start_shift"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if not 0 < self.weight_decay < 1:
            raise ValueError(f"weight_decay must lie in (0, 1), got {self.weight_decay}")
        if self.max_outer < 1 or self.max_inner < 1:
            raise ValueError("max_outer and max_inner must be at least 1")


@dataclass
class BarrierResult:
    """Dual point found by the barrier method. Unpacks as ``(Z, p_success_upper)``."""

    Z: ComplexMatrix
    p_success_upper: float
    margin: float
    outer_iterations: int
    inner_iterations: int
    history: List[float] = field(default_factory=list)

    def __iter__(self) -> Iterator:
        return iter((self.Z, self.p_success_upper))


def _slacks_cholesky(Z: ComplexMatrix, A: Sequence[ComplexMatrix]) -> Optional[List[ComplexMatrix]]:
    try:
        return [scipy.linalg.cholesky(Z - Ai, lower=True) for Ai in A]
    except np.linalg.LinAlgError:
        return None


def _barrier_value(Z: ComplexMatrix, chols: Sequence[ComplexMatrix], weight: float) -> float:
    logdet = sum(2.0 * np.sum(np.log(np.diag(L).real)) for L in chols)
    return float(np.trace(Z).real - weight * logdet)


def _barrier_hessian(S_inv: Sequence[ComplexMatrix], basis: Sequence[ComplexMatrix], weight: float) -> np.ndarray:
    """Second directional derivatives ``w sum_i Tr(S_i E_k S_i E_l)`` over all pairs of basis directions."""
    size = len(basis)
    H = np.empty((size, size))
    for k, Ek in enumerate(basis):
        pushed = weight * sum(Si @ Ek @ Si for Si in S_inv)
        for l in range(k, size):
            H[k, l] = H[l, k] = np.trace(pushed @ basis[l]).real
    return H


def barrier_solve(e: Ensemble, cfg: BarrierConfig = BarrierConfig()) -> BarrierResult:
    """Minimize ``Tr Z - w sum_i log det(Z - p_i rho_i)`` for decreasing ``w``.

    The ``n^2 x n^2`` Hessian in Hermitian coordinates is assembled entry by
    entry from dense directional derivatives at every Newton step, so one
    step costs on the order of ``n^7`` operations.

    Raises:
        MaxIterationsExceeded: If an inner loop does not converge.
    """
    n = e.n
    A = e.weighted_states()
    basis = hermitian_basis(n)
    Z = sum(A) + cfg.start_shift * np.eye(n)
    weight = cfg.weight
    history = []
    inner_total = 0
    outer = 0

    for outer in range(1, cfg.max_outer + 1):
        for inner in range(cfg.max_inner + 1):
            if inner == cfg.max_inner:
                logger.error(f"Barrier inner loop did not converge (outer {outer}, weight {weight:.1e})")
                raise MaxIterationsExceeded(f"Barrier Newton exceeded {cfg.max_inner} steps at weight {weight:.1e}")
            S_inv = [np.linalg.inv(Z - Ai) for Ai in A]
            grad = hvec(np.eye(n) - weight * sum(S_inv))
            H = _barrier_hessian(S_inv, basis, weight)
            try:
                dx = scipy.linalg.solve(H, -grad, assume_a="pos")
            except np.linalg.LinAlgError:
                dx = np.linalg.solve(H, -grad)
            decrement = float(-grad @ dx)
            if decrement / 2.0 <= cfg.inner_tol:
                break
            value = _barrier_value(Z, _slacks_cholesky(Z, A), weight)
            dZ = hunvec(dx, n)
            step = 1.0
            accepted = False
            while step > 1e-12:
                trial = Z + step * dZ
                trial_chols = _slacks_cholesky(trial, A)
                if trial_chols is not None and _barrier_value(trial, trial_chols, weight) <= value - _ARMIJO * step * decrement:
                    accepted = True
                    break
                step *= 0.5
            if not accepted:
                logger.debug(f"Barrier line search exhausted at decrement {decrement:.3e}")
                break
            Z = trial
            Z = 0.5 * (Z + Z.conj().T)
            inner_total += 1
        trace = float(np.trace(Z).real)
        history.append(trace)
        logger.info(f"Barrier outer loop {outer}: weight={weight:.1e}, Tr Z={trace:.12f}")
        if e.m * n * weight <= cfg.outer_tol:
            break
        weight *= cfg.weight_decay

    margin = min(float(scipy.linalg.eigvalsh(Z - Ai)[0]) for Ai in A)
    return BarrierResult(Z, float(np.trace(Z).real), margin, outer, inner_total, history)


def povm_from_dual(e: Ensemble, Z: ComplexMatrix) -> Povm:
    """Projective measurement read off the near-kernels of ``Z - p_i rho_i``.

    The ``r_i`` eigenvectors with smallest eigenvalues of each slack are
    stacked and orthonormalized symmetrically. Only meaningful near the
    optimum of a non-degenerate instance.
    """
    columns = []
    for i in range(e.m):
        _, V = hermitian_eig(0.5 * (Z - e.weighted(i) + (Z - e.weighted(i)).conj().T))
        columns.append(V[:, : e.profile.ranks[i]])
    V = np.hstack(columns)
    V = V @ inverse_sqrt(V.conj().T @ V)
    elements = []
    for i in range(e.m):
        Vi = V[:, e.profile.block_slice(i)]
        elements.append(Vi @ Vi.conj().T)
    return Povm(e.profile, tuple(elements))


class BarrierSolver(MedSolver):
    """Barrier method on the dual, with the measurement recovered from ``Z``."""

    name = "barrier"

    def __init__(self, cfg: Optional[SolverConfig] = None, barrier_cfg: Optional[BarrierConfig] = None):
        super().__init__(cfg)
        self.barrier_cfg = barrier_cfg or BarrierConfig()

    def solve(self, e: Ensemble) -> SolveResult:
        result = barrier_solve(e, self.barrier_cfg)
        povm = povm_from_dual(e, result.Z)
        p_success = success_probability(e, povm)
        logger.info(f"barrier solve: n={e.n}, Tr Z={result.p_success_upper:.12f}, P_s={p_success:.12f}")
        return SolveResult(
            e, povm, p_success, "barrier",
            residual=abs(result.p_success_upper - p_success),
            iterations=result.inner_iterations,
        )


def helstrom_two_state(e: Ensemble) -> Tuple[Povm, float]:
    """Optimal measurement of a two-state ensemble.

    ``Pi_1`` projects onto the non-negative eigenspace of ``p_1 rho_1 - p_2 rho_2``
    (zero eigenvalues go to the first element) and ``Pi_2 = I - Pi_1``.

    Raises:
        ProfileMismatch: If the ensemble does not have exactly two states.
    """
    if e.m != 2:
        raise ProfileMismatch(f"Helstrom measurement needs two states, got {e.m}")
    w, V = hermitian_eig(e.weighted(0) - e.weighted(1))
    Vp = V[:, w >= 0]
    P1 = Vp @ Vp.conj().T
    P2 = np.eye(e.n) - P1
    p_success = 0.5 * (float(e.priors.sum()) + float(np.sum(np.abs(w))))
    return Povm(e.profile, (P1, P2)), p_success


def _rank_one_grid(e: Ensemble, grid: int) -> Tuple[Povm, float]:
    # Last element rank one: P_s = Tr(A_1) + <v|(A_2 - A_1)|v> over unit v up to phase.
    n = e.n
    k = 2 * (n - 1)
    A1, A2 = e.weighted(0), e.weighted(1)
    delta = A2 - A1
    base = float(np.trace(A1).real)
    thetas = np.linspace(0.0, np.pi / 2, grid)
    phases = np.linspace(0.0, 2 * np.pi, grid, endpoint=False)
    total = grid ** k
    chunk = 200_000
    best_value, best_v = -np.inf, None
    for start in range(0, total, chunk):
        idx = np.unravel_index(np.arange(start, min(total, start + chunk)), (grid,) * k)
        theta = np.stack([thetas[i] for i in idx[: n - 1]], axis=1)
        phi = np.stack([phases[i] for i in idx[n - 1:]], axis=1)
        mags = np.ones((theta.shape[0], n))
        for j in range(n - 1):
            mags[:, j] *= np.cos(theta[:, j])
            mags[:, j + 1:] *= np.sin(theta[:, j])[:, None]
        v = mags.astype(complex)
        v[:, 1:] *= np.exp(1j * phi)
        values = base + np.einsum("ba,ac,bc->b", v.conj(), delta, v).real
        b = int(np.argmax(values))
        if values[b] > best_value:
            best_value, best_v = float(values[b]), v[b]
    P2 = np.outer(best_v, best_v.conj())
    return Povm(e.profile, (np.eye(n) - P2, P2)), best_value


def _projective_scores(U: np.ndarray, A_col: np.ndarray) -> np.ndarray:
    # Column c of U belongs to the state that owns A_col[c].
    return np.einsum("bac,cad,bdc->b", U.conj(), A_col, U).real


def _refine(U: ComplexMatrix, value: float, A_col: np.ndarray, rng: np.random.Generator):
    """Random local search around ``U`` with shrinking radii."""
    n = U.shape[0]
    batch = max(1, HAAR_BATCH // 10)
    for radius in np.geomspace(0.3, 1e-6, HAAR_REFINE_SCALES):
        for _ in range(3):
            X = rng.standard_normal((batch, n, n)) + 1j * rng.standard_normal((batch, n, n))
            H = 0.5 * (X + np.conj(np.swapaxes(X, 1, 2)))
            w, V = np.linalg.eigh(H)
            step = np.einsum("bij,bj,bkj->bik", V, np.exp(1j * radius * w), V.conj())
            trial = U @ step
            scores = _projective_scores(trial, A_col)
            b = int(np.argmax(scores))
            if scores[b] > value:
                U, value = trial[b], float(scores[b])
    return U, value


def _haar_search(e: Ensemble, samples: int, seed: SeedLike) -> Tuple[Povm, float]:
    rng = as_generator(seed)
    n = e.n
    owner = np.repeat(np.arange(e.m), e.profile.ranks)
    A_col = np.stack([e.weighted(i) for i in owner])
    best_value, best_U = -np.inf, None
    remaining = max(1, samples)
    while remaining > 0:
        size = min(HAAR_BATCH, remaining)
        U = np.reshape(unitary_group.rvs(n, size=size, random_state=rng), (-1, n, n))
        values = _projective_scores(U, A_col)
        b = int(np.argmax(values))
        if values[b] > best_value:
            best_value, best_U = float(values[b]), U[b]
        remaining -= size
    best_U, best_value = _refine(best_U, best_value, A_col, rng)
    elements = []
    for i in range(e.m):
        Ui = best_U[:, e.profile.block_slice(i)]
        elements.append(Ui @ Ui.conj().T)
    return Povm(e.profile, tuple(elements)), best_value


def exhaustive_search(e: Ensemble, grid: int, samples: Optional[int] = None, seed: SeedLike = 0) -> Tuple[Povm, float]:
    """Best projective measurement with the ensemble's rank profile by brute force.

    Two-state ensembles whose second state is pure are swept on a rectangular
    grid over the unit vector of the rank-one element when its ``2(n - 1)``
    parameters number at most five and ``grid**k`` stays below
    ``GRID_POINT_LIMIT``. Everything else uses Haar-random unitaries, with
    the best sample refined by a local random search.

    Args:
        e: Ensemble, intended for ``n <= 3``.
        grid: Points per parameter.
        samples: Number of Haar samples; defaults to ``min(grid**k, HAAR_SAMPLES)``
            with ``k = n^2 - sum r_i^2``.
        seed: Seed for the Haar sampler.

    Returns:
        Tuple of (best measurement found, its success probability).
    """
    if e.n > 3:
        logger.warning(f"Exhaustive search on n={e.n} will be coarse")
    if e.m == 2 and e.profile.ranks[1] == 1:
        k = 2 * (e.n - 1)
        if k <= 5 and grid ** k <= GRID_POINT_LIMIT:
            return _rank_one_grid(e, grid)
        logger.warning(f"Grid of {grid}^{k} points too large, switching to Haar sampling")
    if samples is None:
        k = e.n ** 2 - sum(r * r for r in e.profile.ranks)
        samples = int(min(grid ** k, HAAR_SAMPLES))
    return _haar_search(e, samples, seed)


def balanced_profile(n: int) -> RankProfile:
    """Default benchmark profile ``(2, 2, ..., 1)`` of dimension ``n``."""
    return RankProfile((2,) * (n // 2) + (1,) * (n % 2))


def bench_instances(
    profiles: Optional[Sequence[RankProfile]], sizes: Sequence[int], repeats: int, seed: int
) -> Dict[Tuple[int, RankProfile], List[Ensemble]]:
    """Random instances keyed by ``(n, profile)``, reproducible from ``seed``."""
    instances = {}
    for n in sizes:
        chosen = [p for p in profiles if p.dim == n] if profiles else [balanced_profile(n)]
        if not chosen:
            logger.warning(f"No profile of dimension {n}, using the balanced one")
            chosen = [balanced_profile(n)]
        for k, profile in enumerate(chosen):
            instances[(n, profile)] = [
                random_ensemble(profile, np.random.default_rng([seed, n, k, rep])) for rep in range(repeats)
            ]
    return instances


@dataclass
class ScalingRow:
    solver: str
    n: int
    profile: RankProfile
    median_seconds: float
    p_success: float
    failures: int = 0


@dataclass
class ScalingReport:
    """Median wall time per solver and size, with fitted log-log slopes."""

    rows: List[ScalingRow] = field(default_factory=list)
    slopes: Dict[str, float] = field(default_factory=dict)

    COLUMNS = ("solver", "n", "profile", "median_seconds", "p_success")

    def to_csv(self, stream: TextIO) -> None:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(self.COLUMNS)
        for row in self.rows:
            writer.writerow([row.solver, row.n, str(row.profile), repr(row.median_seconds), repr(row.p_success)])

    def rows_for(self, solver: str) -> List[ScalingRow]:
        return [row for row in self.rows if row.solver == solver]


def _timed_solve(task: Tuple[str, Ensemble, SolverConfig]) -> Tuple[float, float]:
    method, e, cfg = task
    start = time.perf_counter()
    try:
        result = solve_ensemble(e, method, cfg)
    except LidmedError as err:
        logger.warning(f"{method} failed on an n={e.n} benchmark instance: {err}")
        return time.perf_counter() - start, float("nan")
    return time.perf_counter() - start, result.p_success


def bench_scaling(
    profiles: Optional[Sequence[RankProfile]],
    sizes: Sequence[int],
    repeats: int,
    seed: int = 0,
    solvers: Sequence[str] = ("newton", "homotopy", "barrier"),
    workers: int = BENCH_WORKERS,
    cfg: Optional[SolverConfig] = None,
) -> ScalingReport:
    """Time each solver on identical random instances.

    Args:
        profiles: Profiles to benchmark; ``None`` uses :func:`balanced_profile` per size.
        sizes: Dimensions ``n``.
        repeats: Instances per ``(n, profile)``.
        seed: Base seed shared by every solver.
        solvers: Solver names.
        workers: Worker threads; each task owns its instance.
        cfg: Solver configuration.

    Returns:
        One row per ``(solver, n, profile)`` and a slope per solver.
    """
    cfg = cfg or SolverConfig()
    instances = bench_instances(profiles, sizes, repeats, seed)
    keys = list(instances)
    tasks = [(method, e, cfg) for method in solvers for key in keys for e in instances[key]]
    logger.info(f"Benchmarking {len(tasks)} solves with {workers} worker(s)")
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        outcomes = list(pool.map(_timed_solve, tasks))

    report = ScalingReport()
    cursor = 0
    for method in solvers:
        for n, profile in keys:
            chunk = outcomes[cursor:cursor + repeats]
            cursor += repeats
            seconds = [s for s, _ in chunk]
            scores = [p for _, p in chunk if np.isfinite(p)]
            report.rows.append(ScalingRow(
                method, n, profile,
                float(statistics.median(seconds)),
                float(np.mean(scores)) if scores else float("nan"),
                failures=repeats - len(scores),
            ))
        rows = report.rows_for(method)
        ns = sorted({row.n for row in rows})
        if len(ns) >= 2:
            medians = [statistics.median(r.median_seconds for r in rows if r.n == n) for n in ns]
            report.slopes[method] = float(np.polyfit(np.log(ns), np.log(medians), 1)[0])
        else:
            report.slopes[method] = float("nan")
        logger.info(f"{method}: log-log slope {report.slopes[method]:.3f}")
    return report


@dataclass
class SurveyReport:
    """Counts from solving many random instances with the Newton pipeline."""

    attempted: int = 0
    certified: int = 0
    fallbacks: int = 0
    failures: Dict[str, int] = field(default_factory=dict)


def newton_survey(
    profiles: Sequence[RankProfile], count: int = 1000, seed: int = 0, cfg: Optional[SolverConfig] = None
) -> SurveyReport:
    """Solve ``count`` random instances cycling through ``profiles`` and tally outcomes."""
    report = SurveyReport()
    rng = np.random.default_rng(seed)
    for k in range(count):
        e = random_ensemble(profiles[k % len(profiles)], rng)
        report.attempted += 1
        try:
            result = solve_ensemble(e, "newton", cfg)
        except LidmedError as err:
            report.failures[err.kind] = report.failures.get(err.kind, 0) + 1
            continue
        if result.method != "newton":
            report.fallbacks += 1
        if check_optimal(e, result.povm).passed:
            report.certified += 1
        else:
            report.failures["Certificate"] = report.failures.get("Certificate", 0) + 1
    logger.info(f"Survey: {report.certified}/{report.attempted} certified, {report.fallbacks} fallbacks")
    return report
