"""Solvers for the block-diagonal fixed-point equation behind optimal measurements.

Given the Gram matrix ``G`` of a pure decomposition, the optimal measurement is
encoded by a block-diagonal positive definite ``D`` such that the diagonal
blocks of ``M = sqrt(D G D)`` (positive root) equal ``D^2``. Two solvers are
provided: damped Newton on the entries of ``D`` and Taylor-series continuation
along the linear path from the block-diagonal part of ``G``.
"""
from abc import ABC, abstractmethod
from dataclasses import dataclass, replace
import logging
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
from numpy.typing import NDArray

try:
    from .complex_linalg import (
        ComplexMatrix,
        RankProfile,
        block_diagonal_part,
        block_hunvec,
        block_hvec,
        diagonal_blocks,
        hermitian_eig,
        hunvec,
        hvec,
        is_block_diagonal,
        principal_sqrt,
    )
    from .config import (
        BACKTRACK_FACTOR,
        DAMPING,
        DEFAULT_TOL,
        FD_EPS,
        MAX_HALVINGS,
        MAX_ITERS,
        MIN_STEP,
        NEWTON_FALLBACK,
        SOLVER_TOL,
        TAYLOR_BLOWUP,
        TAYLOR_ORDER,
    )
    from .ensemble import Ensemble, Povm, PureDecomposition, decompose, success_probability
    from .exceptions import (
        MaxIterationsExceeded,
        NonPositiveIterate,
        NotPositiveDefinite,
        PathBreakdown,
        ShapeMismatch,
        SingularLinearSystem,
    )
    from .gram import DualBasis, GramMatrix, build_gram, dual_basis, homotopy_path, interval_count
except ImportError:
    from complex_linalg import (
        ComplexMatrix,
        RankProfile,
        block_diagonal_part,
        block_hunvec,
        block_hvec,
        diagonal_blocks,
        hermitian_eig,
        hunvec,
        hvec,
        is_block_diagonal,
        principal_sqrt,
    )
    from config import (
        BACKTRACK_FACTOR,
        DAMPING,
        DEFAULT_TOL,
        FD_EPS,
        MAX_HALVINGS,
        MAX_ITERS,
        MIN_STEP,
        NEWTON_FALLBACK,
        SOLVER_TOL,
        TAYLOR_BLOWUP,
        TAYLOR_ORDER,
    )
    from ensemble import Ensemble, Povm, PureDecomposition, decompose, success_probability
    from exceptions import (
        MaxIterationsExceeded,
        NonPositiveIterate,
        NotPositiveDefinite,
        PathBreakdown,
        ShapeMismatch,
        SingularLinearSystem,
    )
    from gram import DualBasis, GramMatrix, build_gram, dual_basis, homotopy_path, interval_count

logger = logging.getLogger(__name__)

_ARMIJO = 1e-4
_MAX_CONDITION = 1e12


@dataclass(frozen=True)
class SolverConfig:
    """Tuning knobs shared by the Newton and continuation solvers.

    Attributes:
        tol: Residual threshold on ``||blockdiag(M) - D^2||_F``.
        max_iters: Newton iteration cap.
        damping: Initial Newton step length in ``(0, 1]``.
        taylor_order: Highest derivative used per continuation step.
        intervals_override: Fixed number of continuation intervals.
        jacobian: ``"analytic"`` or ``"finite"`` (forward differences).
        fallback: Retry with continuation when Newton fails.
    """

    tol: float = SOLVER_TOL
    max_iters: int = MAX_ITERS
    damping: float = DAMPING
    taylor_order: int = TAYLOR_ORDER
    intervals_override: Optional[int] = None
    jacobian: str = "analytic"
    fallback: bool = NEWTON_FALLBACK

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be at least 1, got {self.max_iters}")
        if not 0 < self.damping <= 1:
            raise ValueError(f"damping must lie in (0, 1], got {self.damping}")
        if self.taylor_order < 1:
            raise ValueError(f"taylor_order must be at least 1, got {self.taylor_order}")
        if self.intervals_override is not None and self.intervals_override < 1:
            raise ValueError(f"intervals_override must be at least 1, got {self.intervals_override}")
        if self.jacobian not in ("analytic", "finite"):
            raise ValueError(f"jacobian must be 'analytic' or 'finite', got '{self.jacobian}'")


@dataclass(frozen=True, eq=False)
class SolverSolution:
    """Block-diagonal ``D`` and ``M = sqrt(D G D)`` solving the fixed-point equation."""

    profile: RankProfile
    D: ComplexMatrix
    M: ComplexMatrix
    residual: float
    iterations: int
    method: str = "newton"
    taylor_steps: int = 0

    @property
    def blocks(self) -> List[ComplexMatrix]:
        """The diagonal blocks ``X^(ii)`` of ``D``."""
        return diagonal_blocks(self.D, self.profile)

    def rotation(self, g: GramMatrix) -> ComplexMatrix:
        """The unitary ``W = G^-1/2 D^-1 M``."""
        return scipy.linalg.solve(self.D @ principal_sqrt(g.matrix), self.M)


@dataclass
class _Evaluation:
    value: float
    M: ComplexMatrix
    eigenvalues: NDArray[np.float64]
    eigenvectors: ComplexMatrix
    defect: ComplexMatrix


def _evaluate(D: ComplexMatrix, G: ComplexMatrix, profile: RankProfile) -> _Evaluation:
    DGD = D @ G @ D
    w, V = hermitian_eig(0.5 * (DGD + DGD.conj().T), DEFAULT_TOL)
    if w[0] <= DEFAULT_TOL * max(1.0, w[-1]):
        raise NotPositiveDefinite(f"DGD has smallest eigenvalue {w[0]:.3e}")
    s = np.sqrt(w)
    M = (V * s) @ V.conj().T
    defect = block_diagonal_part(M, profile) - D @ D
    return _Evaluation(float(np.linalg.norm(defect)), M, s, V, defect)


def residual(D: ComplexMatrix, g: GramMatrix) -> Tuple[float, ComplexMatrix]:
    """Residual ``||blockdiag(sqrt(DGD)) - D^2||_F`` and the root itself.

    Raises:
        NotPositiveDefinite: If ``D G D`` is not positive definite.
    """
    ev = _evaluate(np.asarray(D, dtype=complex), g.matrix, g.profile)
    return ev.value, ev.M


def closed_form_start(g: GramMatrix) -> ComplexMatrix:
    """``D0`` built from the diagonal blocks of ``G^1/2``.

    Exact when ``G`` is block diagonal and when every diagonal block of
    ``G^1/2`` is a multiple of the same identity.
    """
    return block_diagonal_part(g.sqrt(), g.profile)


def _blocks_positive(D: ComplexMatrix, profile: RankProfile, tol: float) -> bool:
    return all(np.linalg.eigvalsh(b)[0] > tol for b in diagonal_blocks(D, profile))


def _analytic_jacobian(D: ComplexMatrix, G: ComplexMatrix, ev: _Evaluation, profile: RankProfile) -> NDArray:
    # Frechet derivative of the square root in the eigenbasis of DGD.
    V, s = ev.eigenvectors, ev.eigenvalues
    denom = s[:, None] + s[None, :]
    size = sum(r * r for r in profile.ranks)
    J = np.empty((size, size))
    eye = np.eye(size)
    for k in range(size):
        E = block_hunvec(eye[k], profile)
        R = E @ G @ D + D @ G @ E
        dM = V @ ((V.conj().T @ R @ V) / denom) @ V.conj().T
        J[:, k] = block_hvec(dM - (E @ D + D @ E), profile)
    return J


def _finite_jacobian(D: ComplexMatrix, G: ComplexMatrix, ev: _Evaluation, profile: RankProfile) -> NDArray:
    x = block_hvec(D, profile)
    f0 = block_hvec(ev.defect, profile)
    J = np.empty((x.size, x.size))
    for k in range(x.size):
        xk = x.copy()
        xk[k] += FD_EPS
        J[:, k] = (block_hvec(_evaluate(block_hunvec(xk, profile), G, profile).defect, profile) - f0) / FD_EPS
    return J


def newton_solve(g: GramMatrix, cfg: SolverConfig = SolverConfig(), init: Optional[ComplexMatrix] = None) -> SolverSolution:
    """Damped Newton iteration on the Hermitian entries of the blocks of ``D``.

    Args:
        g: Positive definite Gram matrix.
        cfg: Solver configuration.
        init: Starting block-diagonal ``D``; defaults to :func:`closed_form_start`.

    Returns:
        Solution with ``residual <= cfg.tol``.

    Raises:
        NonPositiveIterate: If no step length keeps ``D`` positive definite.
        MaxIterationsExceeded: If the iteration cap is hit or the line search stalls.
    """
    profile = g.profile
    G = g.matrix
    D = closed_form_start(g) if init is None else block_diagonal_part(np.asarray(init, dtype=complex), profile)
    D = 0.5 * (D + D.conj().T)
    if not _blocks_positive(D, profile, DEFAULT_TOL):
        raise NonPositiveIterate("Initial D is not positive definite")
    ev = _evaluate(D, G, profile)
    jacobian = _analytic_jacobian if cfg.jacobian == "analytic" else _finite_jacobian
    logger.debug(f"Newton start: n={g.n}, profile={profile}, residual={ev.value:.3e}")

    for iteration in range(cfg.max_iters + 1):
        if ev.value <= cfg.tol:
            logger.info(f"Newton converged in {iteration} iterations (residual {ev.value:.3e})")
            return SolverSolution(profile, D, ev.M, ev.value, iteration)
        if iteration == cfg.max_iters:
            break

        J = jacobian(D, G, ev, profile)
        f = block_hvec(ev.defect, profile)
        try:
            step = np.linalg.solve(J, -f)
        except np.linalg.LinAlgError:
            logger.debug("Singular Newton Jacobian, using least squares step")
            step = np.linalg.lstsq(J, -f, rcond=None)[0]

        x = block_hvec(D, profile)
        alpha = cfg.damping
        found_positive = False
        accepted = None
        while alpha >= MIN_STEP:
            D_try = block_hunvec(x + alpha * step, profile)
            if _blocks_positive(D_try, profile, DEFAULT_TOL):
                try:
                    ev_try = _evaluate(D_try, G, profile)
                except NotPositiveDefinite:
                    ev_try = None
                if ev_try is not None:
                    found_positive = True
                    if ev_try.value <= (1.0 - _ARMIJO * alpha) * ev.value:
                        accepted = (D_try, ev_try)
                        break
            alpha *= BACKTRACK_FACTOR

        if accepted is None:
            if not found_positive:
                logger.error(f"Newton iteration {iteration}: every trial step left the positive cone")
                raise NonPositiveIterate(f"Line search could not keep D positive definite (iteration {iteration})")
            logger.error(f"Newton stalled at iteration {iteration} with residual {ev.value:.3e}")
            raise MaxIterationsExceeded(
                f"Line search stalled at residual {ev.value:.3e} (tol {cfg.tol:.1e}) after {iteration} iterations"
            )
        D, ev = accepted
        logger.debug(f"Newton iteration {iteration + 1}: step={alpha:.3e}, residual={ev.value:.3e}")

    raise MaxIterationsExceeded(
        f"Newton did not reach tol {cfg.tol:.1e} in {cfg.max_iters} iterations (residual {ev.value:.3e})"
    )


def _derivative_operator(D: ComplexMatrix, G: ComplexMatrix, M: ComplexMatrix, profile: RankProfile) -> NDArray:
    """Matrix of the linear map taking an order-k unknown to its equation residual."""
    n = profile.dim
    eye = np.eye(n * n)
    A = np.empty((n * n, n * n))
    for k in range(n * n):
        N = hunvec(eye[k], n)
        dD = block_diagonal_part(N, profile)
        dM = (N - dD) + dD @ D + D @ dD
        A[:, k] = hvec(dM @ M + M @ dM - dD @ G @ D - D @ G @ dD)
    return A


def taylor_derivatives(
    g_path: Tuple[GramMatrix, GramMatrix],
    D_at_t: ComplexMatrix,
    order: int,
    t: float = 0.0,
) -> List[NDArray[np.float64]]:
    """Derivatives of the solution along ``G(t) = (1 - t) G0 + t G1``.

    Differentiating ``M^2 = D G D`` k times gives ``n^2`` real linear
    equations in the k-th derivatives. The diagonal blocks of the unknown hold
    the derivative of ``D`` and the off-diagonal blocks hold that of ``M``.
    The system matrix is the same for every order and is factorised once.

    Args:
        g_path: Endpoints ``(G0, G1)``.
        D_at_t: Solution at ``t``.
        order: Number of derivatives.
        t: Path parameter at which ``D_at_t`` solves the equation.

    Returns:
        List of ``order`` vectors of Hermitian coordinates (see ``hvec``).

    Raises:
        SingularLinearSystem: If the system matrix is numerically singular.
    """
    g0, g1 = g_path
    profile = g0.profile
    n = profile.dim
    G = homotopy_path(g0, g1, t).matrix
    G_dot = g1.matrix - g0.matrix
    D = np.asarray(D_at_t, dtype=complex)
    M = principal_sqrt(D @ G @ D)

    A = _derivative_operator(D, G, M, profile)
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > _MAX_CONDITION:
        raise SingularLinearSystem(f"Derivative system is singular at t={t:.6f} (condition {cond:.3e})")
    lu = scipy.linalg.lu_factor(A)

    Ds = [D]
    Ms = [M]
    Gs = [G, G_dot]
    out = []
    for k in range(1, order + 1):
        rhs = np.zeros((n, n), dtype=complex)
        for a in range(k + 1):
            for b in range(min(1, k - a) + 1):
                c = k - a - b
                if (a, b, c) in ((k, 0, 0), (0, 0, k)):
                    continue
                coeff = math.factorial(k) / (math.factorial(a) * math.factorial(b) * math.factorial(c))
                rhs += coeff * Ds[a] @ Gs[b] @ Ds[c]
        L_k = np.zeros((n, n), dtype=complex)
        for a in range(1, k):
            rhs -= math.comb(k, a) * Ms[a] @ Ms[k - a]
            L_k += math.comb(k, a) * Ds[a] @ Ds[k - a]
        rhs -= L_k @ M + M @ L_k

        x = scipy.linalg.lu_solve(lu, hvec(0.5 * (rhs + rhs.conj().T)))
        N = hunvec(x, n)
        dD = block_diagonal_part(N, profile)
        Ds.append(dD)
        Ms.append((N - dD) + dD @ D + D @ dD + L_k)
        out.append(x)
    return out


def derivative_of_D(x: NDArray[np.float64], profile: RankProfile) -> ComplexMatrix:
    """The ``D`` part (diagonal blocks) of a Taylor coordinate vector."""
    return block_diagonal_part(hunvec(x, profile.dim), profile)


def homotopy_solve(g_target: GramMatrix, cfg: SolverConfig = SolverConfig()) -> SolverSolution:
    """Taylor-series continuation from the block-diagonal part of ``g_target``.

    The path starts at ``G0 = blockdiag(G1)``, whose solution is known in
    closed form, and is cut into :func:`interval_count` intervals (or
    ``cfg.intervals_override``). An interval is halved whenever the
    derivative system is singular, ``D`` leaves the positive cone, or the
    residual after a step exceeds ``TAYLOR_BLOWUP``. After an accepted step
    the step size doubles back towards its nominal value. A final Newton
    call polishes the end point.

    Raises:
        PathBreakdown: If a single step needs more than ``MAX_HALVINGS`` halvings.
    """
    profile = g_target.profile
    g0 = g_target.block_diagonal()
    D = closed_form_start(g0)
    if is_block_diagonal(g_target.matrix, profile):
        value, M = residual(D, g_target)
        logger.info("Target Gram matrix is block diagonal, closed form solution used")
        return SolverSolution(profile, D, M, value, 0, method="homotopy", taylor_steps=0)

    intervals = cfg.intervals_override or interval_count(g0, g_target)
    logger.info(f"Continuation over {intervals} intervals (order {cfg.taylor_order})")
    nominal = 1.0 / intervals
    h = nominal
    t = 0.0
    halvings = 0
    steps = 0
    while 1.0 - t > 1e-14:
        h = min(h, 1.0 - t)
        try:
            derivs = taylor_derivatives((g0, g_target), D, cfg.taylor_order, t)
            D_new = D.copy()
            for k, x in enumerate(derivs, start=1):
                D_new = D_new + derivative_of_D(x, profile) * h ** k / math.factorial(k)
            D_new = 0.5 * (D_new + D_new.conj().T)
            if not _blocks_positive(D_new, profile, DEFAULT_TOL):
                raise NotPositiveDefinite("Taylor step left the positive cone")
            value, _ = residual(D_new, homotopy_path(g0, g_target, min(1.0, t + h)))
            if value > TAYLOR_BLOWUP:
                raise NotPositiveDefinite(f"Taylor step residual {value:.3e} exceeds {TAYLOR_BLOWUP:.0e}")
        except (SingularLinearSystem, NotPositiveDefinite) as e:
            halvings += 1
            if halvings > MAX_HALVINGS:
                logger.error(f"Continuation broke down at t={t:.6f}: {e}")
                raise PathBreakdown(f"More than {MAX_HALVINGS} interval halvings at t={t:.6f}: {e}") from e
            h /= 2.0
            logger.warning(f"Halving continuation step at t={t:.6f} to h={h:.3e}: {e}")
            continue
        D = D_new
        t += h
        steps += 1
        halvings = 0
        h = min(2.0 * h, nominal)
        logger.debug(f"Taylor step {steps}: t={t:.6f}, residual={value:.3e}")

    sol = newton_solve(g_target, cfg, init=D)
    return replace(sol, method="homotopy", taylor_steps=steps)


def povm_from_solution(sol: SolverSolution, d: PureDecomposition, dual: DualBasis) -> Povm:
    """Projective measurement encoded by a solution.

    The vectors ``w = U D^-1 M`` (``U`` the dual basis) are orthonormal and
    ``Pi_i`` is the projector onto the block-``i`` columns.

    Raises:
        ShapeMismatch: If the profiles of the inputs differ.
    """
    if not (sol.profile == d.profile == dual.profile):
        raise ShapeMismatch(
            f"Profiles differ: solution {sol.profile.ranks}, decomposition {d.profile.ranks}, dual {dual.profile.ranks}"
        )
    W = measurement_vectors(sol, dual)
    elements = []
    for i in range(sol.profile.m):
        Wi = W[:, sol.profile.block_slice(i)]
        elements.append(Wi @ Wi.conj().T)
    return Povm(sol.profile, tuple(elements))


def measurement_vectors(sol: SolverSolution, dual: DualBasis) -> ComplexMatrix:
    """Orthonormal columns ``w_ij`` spanning the optimal projectors."""
    omega = scipy.linalg.solve(sol.D.T, dual.vectors.T).T  # U D^-1
    return omega @ sol.M


@dataclass(frozen=True, eq=False)
class SolveResult:
    """Everything produced by solving one ensemble."""

    ensemble: Ensemble
    povm: Povm
    p_success: float
    method: str
    residual: float = 0.0
    iterations: int = 0
    solution: Optional[SolverSolution] = None
    decomposition: Optional[PureDecomposition] = None
    gram: Optional[GramMatrix] = None


class MedSolver(ABC):
    """Abstract base class for minimum-error measurement solvers."""

    name: str = ""

    def __init__(self, cfg: Optional[SolverConfig] = None):
        self.cfg = cfg or SolverConfig()

    @abstractmethod
    def solve(self, e: Ensemble) -> SolveResult:
        """Compute the optimal measurement of ``e``."""
        pass


class _ConditionSolver(MedSolver):
    """Shared decompose, solve, reconstruct pipeline."""

    @abstractmethod
    def solve_gram(self, g: GramMatrix) -> SolverSolution:
        pass

    def solve(self, e: Ensemble) -> SolveResult:
        d = decompose(e)
        g = build_gram(d)
        sol = self.solve_gram(g)
        povm = povm_from_solution(sol, d, dual_basis(d, g))
        p_success = success_probability(e, povm)
        logger.info(f"{sol.method} solve: n={e.n}, P_s={p_success:.12f}, iterations={sol.iterations}")
        return SolveResult(e, povm, p_success, sol.method, sol.residual, sol.iterations, sol, d, g)


class NewtonSolver(_ConditionSolver):
    """Newton iteration, retried with continuation on failure when enabled."""

    name = "newton"

    def solve_gram(self, g: GramMatrix) -> SolverSolution:
        try:
            return newton_solve(g, self.cfg)
        except (NonPositiveIterate, MaxIterationsExceeded) as e:
            if not self.cfg.fallback:
                raise
            logger.warning(f"Newton failed ({e.kind}: {e}); retrying with continuation")
            return homotopy_solve(g, self.cfg)


class HomotopySolver(_ConditionSolver):
    """Taylor-series continuation followed by a Newton polish."""

    name = "homotopy"

    def solve_gram(self, g: GramMatrix) -> SolverSolution:
        return homotopy_solve(g, self.cfg)


SOLVER_NAMES: Sequence[str] = ("newton", "homotopy", "barrier")


def get_solver(method: str, cfg: Optional[SolverConfig] = None) -> MedSolver:
    """Solver instance by name (``newton``, ``homotopy`` or ``barrier``)."""
    if method == "newton":
        return NewtonSolver(cfg)
    if method == "homotopy":
        return HomotopySolver(cfg)
    if method == "barrier":
        try:
            from .baselines import BarrierSolver
        except ImportError:
            from baselines import BarrierSolver
        return BarrierSolver(cfg)
    raise ValueError(f"Unknown solver '{method}', expected one of {', '.join(SOLVER_NAMES)}")


def solve_ensemble(e: Ensemble, method: str = "newton", cfg: Optional[SolverConfig] = None) -> SolveResult:
    """Decompose, solve and reconstruct the optimal measurement of ``e``."""
    return get_solver(method, cfg).solve(e)
