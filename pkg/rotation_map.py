"""The ensemble map whose pretty good measurement is the optimal one.

For a solved ensemble ``P`` with decomposition vectors ``psi`` and solution
``D``, the vectors ``chi = psi D`` define a new ensemble ``R(P)``. The pretty
good measurement of ``R(P)`` is the optimal measurement of ``P``, and the map
has a closed-form inverse.
"""
import logging
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from scipy.stats import unitary_group

try:
    from .complex_linalg import (
        ComplexMatrix,
        RankProfile,
        assemble_block_diagonal,
        block_diagonal_part,
        diagonal_blocks,
        hermitian_eig,
        inverse_sqrt,
        principal_sqrt,
    )
    from .config import CERT_TOL, DEFAULT_TOL
    from .ensemble import (
        Ensemble,
        Povm,
        PureDecomposition,
        SeedLike,
        as_generator,
        decompose,
        recompose,
        rotate_decomposition,
    )
    from .exceptions import NotPositiveDefinite, SingularAverage
    from .gram import build_gram, dual_basis
    from .med_solver import SolverConfig, SolverSolution, measurement_vectors, newton_solve, povm_from_solution
except ImportError:
    from complex_linalg import (
        ComplexMatrix,
        RankProfile,
        assemble_block_diagonal,
        block_diagonal_part,
        diagonal_blocks,
        hermitian_eig,
        inverse_sqrt,
        principal_sqrt,
    )
    from config import CERT_TOL, DEFAULT_TOL
    from ensemble import (
        Ensemble,
        Povm,
        PureDecomposition,
        SeedLike,
        as_generator,
        decompose,
        recompose,
        rotate_decomposition,
    )
    from exceptions import NotPositiveDefinite, SingularAverage
    from gram import build_gram, dual_basis
    from med_solver import SolverConfig, SolverSolution, measurement_vectors, newton_solve, povm_from_solution

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class MappedEnsemble:
    """Image ``Q = {q_i, sigma_i}`` together with its unnormalized vectors ``chi``."""

    ensemble: Ensemble
    chi: PureDecomposition
    normalizer: float


def map_R(e: Ensemble, sol: SolverSolution, d: PureDecomposition) -> MappedEnsemble:
    """Apply the map to a solved ensemble.

    Args:
        e: Source ensemble (only its profile is consulted).
        sol: Solution for the Gram matrix of ``d``.
        d: Pure decomposition of ``e``.

    Returns:
        The image ensemble with ``q_i sigma_i = sum_j |chi_ij><chi_ij| / Tr(DGD)``.
    """
    chi = d.vectors @ sol.D
    normalizer = float(np.sum(np.abs(chi) ** 2))
    weighted = [chi[:, e.profile.block_slice(i)] @ chi[:, e.profile.block_slice(i)].conj().T / normalizer
                for i in range(e.m)]
    image = Ensemble.from_weighted(e.profile, weighted)
    return MappedEnsemble(image, PureDecomposition(e.profile, chi), normalizer)


def rotate(e: Ensemble, cfg: Optional[SolverConfig] = None) -> Ensemble:
    """Shortcut for the image of ``e``: decompose, solve with Newton, map."""
    d = decompose(e)
    sol = newton_solve(build_gram(d), cfg or SolverConfig())
    return map_R(e, sol, d).ensemble


def pgm(e: Ensemble, tol: float = DEFAULT_TOL) -> Povm:
    """Pretty good measurement ``S^-1/2 p_i rho_i S^-1/2`` with ``S = sum_i p_i rho_i``.

    Raises:
        SingularAverage: If ``S`` is not positive definite.
    """
    try:
        S_inv = inverse_sqrt(e.average(), tol)
    except NotPositiveDefinite as err:
        raise SingularAverage(f"Average state is singular, no pretty good measurement: {err}") from err
    return Povm(e.profile, tuple(S_inv @ e.weighted(i) @ S_inv for i in range(e.m)))


def verify_pgm_theorem(e: Ensemble, sol: SolverSolution, d: PureDecomposition, tol: float = CERT_TOL) -> bool:
    """True iff the PGM of the image equals the solver's measurement element-wise."""
    try:
        image = map_R(e, sol, d).ensemble
        lhs = pgm(image)
        rhs = povm_from_solution(sol, d, dual_basis(d, build_gram(d)))
    except (ArithmeticError, ValueError) as err:
        logger.warning(f"PGM identity could not be evaluated: {err}")
        return False
    gap = max(float(np.linalg.norm(a - b)) for a, b in zip(lhs.elements, rhs.elements))
    logger.debug(f"PGM identity gap {gap:.3e}")
    return gap <= tol


def inverse_decomposition(q: Ensemble) -> PureDecomposition:
    """Decomposition ``psi = c zeta D_A`` of the preimage of ``q``.

    ``zeta`` resolves ``q``, ``F`` is its Gram matrix, ``H_ii`` are the
    diagonal blocks of ``F^1/2``, ``D_A = blockdiag(H_ii^-1/2)`` and
    ``c = Tr(D_A F D_A)^-1/2``. The squared norms of the result sum to one.
    """
    zeta = decompose(q)
    F = zeta.vectors.conj().T @ zeta.vectors
    H = diagonal_blocks(principal_sqrt(F), q.profile)
    D_A = assemble_block_diagonal([inverse_sqrt(h) for h in H], q.profile)
    c = 1.0 / np.sqrt(np.trace(D_A @ F @ D_A).real)
    return PureDecomposition(q.profile, c * zeta.vectors @ D_A)


def map_R_inverse(q: Ensemble) -> Ensemble:
    """Closed-form preimage: the ensemble whose optimal measurement is ``pgm(q)``.

    The priors are the block traces of :func:`inverse_decomposition` as they
    come out of the normalizer ``c``; they are not rescaled afterwards.
    """
    psi = inverse_decomposition(q)
    weighted = [psi.block(i) @ psi.block(i).conj().T for i in range(q.m)]
    priors = np.array([np.trace(w).real for w in weighted])
    logger.debug(f"Preimage priors sum to {priors.sum():.15f}")
    return Ensemble(q.profile, priors, tuple(w / p for w, p in zip(weighted, priors)))


def pgm_is_optimal(e: Ensemble, tol: float = CERT_TOL) -> bool:
    """True iff every diagonal block of ``G^1/2`` has one common eigenvalue.

    This is exactly the case where the ensemble is a fixed point of the map
    and its pretty good measurement is optimal.
    """
    try:
        d = decompose(e)
        root = principal_sqrt(build_gram(d).matrix)
    except (ArithmeticError, ValueError) as err:
        logger.warning(f"Cannot evaluate PGM optimality: {err}")
        return False
    eigenvalues = np.concatenate([np.linalg.eigvalsh(b) for b in diagonal_blocks(root, e.profile)])
    spread = float(eigenvalues.max() - eigenvalues.min())
    logger.debug(f"Spread of diagonal-block eigenvalues of G^1/2: {spread:.3e}")
    return spread <= tol


@dataclass(frozen=True, eq=False)
class AlignedDecomposition:
    """Pure-state instance equivalent to a solved mixed instance.

    Attributes:
        ensemble: Pure ensemble ``{lambda_ij, psi_ij}`` with profile ``(1, ..., 1)``.
        povm: Its optimal rank-one measurement ``|w_ij><w_ij|``.
        decomposition: The rotated decomposition of the mixed ensemble.
        D: The diagonalized solution ``U^H D U``.
        source_profile: Profile of the mixed ensemble.
    """

    ensemble: Ensemble
    povm: Povm
    decomposition: PureDecomposition
    D: ComplexMatrix
    source_profile: RankProfile

    def merged_projectors(self) -> List[ComplexMatrix]:
        """Sum of the rank-one projectors within each block of the mixed profile."""
        merged = []
        for i in range(self.source_profile.m):
            sl = self.source_profile.block_slice(i)
            merged.append(sum(self.povm.elements[k] for k in range(sl.start, sl.stop)))
        return merged


def aligned_pure_decomposition(e: Ensemble, sol: SolverSolution, d: PureDecomposition) -> AlignedDecomposition:
    """Rotate the decomposition so the solution becomes diagonal.

    Each block ``X^(ii)`` of ``D`` is diagonalized by a unitary ``U_i``. The
    rotated vectors form a pure ensemble whose optimal measurement consists
    of the rotated measurement vectors.
    """
    profile = e.profile
    rotations = [hermitian_eig(block)[1] for block in sol.blocks]
    U = assemble_block_diagonal(rotations, profile)
    rotated = rotate_decomposition(d, rotations)
    D_diag = U.conj().T @ sol.D @ U
    W = measurement_vectors(sol, dual_basis(d, build_gram(d))) @ U

    pure_profile = RankProfile((1,) * profile.dim)
    weights = rotated.squared_norms()
    pure = Ensemble(
        pure_profile,
        weights / weights.sum(),
        tuple(np.outer(v, v.conj()) / w for v, w in zip(rotated.vectors.T, weights)),
    )
    povm = Povm(pure_profile, tuple(np.outer(w, w.conj()) for w in W.T))
    return AlignedDecomposition(pure, povm, rotated, D_diag, profile)


def pgm_optimal_ensemble(profile: RankProfile, seed: SeedLike = None) -> Ensemble:
    """Random ensemble whose pretty good measurement is optimal.

    Builds ``G^1/2 = a (I + B)`` with ``B`` Hermitian, zero diagonal blocks and
    spectral norm at most one half, then realises it with Haar-random vectors.
    """
    rng = as_generator(seed)
    n = profile.dim
    A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    B = A + A.conj().T
    B = B - block_diagonal_part(B, profile)
    norm = np.linalg.norm(B, 2)
    if norm > 0:
        B = B * (0.5 * rng.uniform(0.2, 1.0) / norm)
    S = np.eye(n) + B
    S = S / np.sqrt(np.trace(S @ S).real)
    V = unitary_group.rvs(n, random_state=rng) if n > 1 else np.eye(1, dtype=complex)
    return recompose(PureDecomposition(profile, V @ S))
