"""Linearly independent ensembles, their pure decompositions, and POVM scoring."""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
from numpy.typing import NDArray
from scipy.optimize import linear_sum_assignment

try:
    from .complex_linalg import (
        ComplexMatrix,
        RankProfile,
        hermitian_eig,
        hermiticity_residual,
        min_eigenvalue,
        numerical_rank,
    )
    from .config import DEFAULT_TOL, MAX_CONDITION, MAX_DRAWS
    from .exceptions import DegenerateDraw, ProfileMismatch, RankMismatch, ShapeMismatch
except ImportError:
    from complex_linalg import (
        ComplexMatrix,
        RankProfile,
        hermitian_eig,
        hermiticity_residual,
        min_eigenvalue,
        numerical_rank,
    )
    from config import DEFAULT_TOL, MAX_CONDITION, MAX_DRAWS
    from exceptions import DegenerateDraw, ProfileMismatch, RankMismatch, ShapeMismatch

logger = logging.getLogger(__name__)

SeedLike = Union[int, np.random.Generator, None]


@dataclass(frozen=True, eq=False)
class Ensemble:
    """Priors ``p_i`` and density matrices ``rho_i`` with a rank profile.

    Construction only checks shapes. Use :func:`validate` for the full set of
    membership conditions.
    """

    profile: RankProfile
    priors: NDArray[np.float64]
    states: tuple

    def __post_init__(self):
        priors = np.asarray(self.priors, dtype=float).reshape(-1)
        states = tuple(np.asarray(s, dtype=complex) for s in self.states)
        object.__setattr__(self, "priors", priors)
        object.__setattr__(self, "states", states)
        if len(priors) != self.profile.m or len(states) != self.profile.m:
            raise ShapeMismatch(
                f"Profile {self.profile.ranks} needs {self.profile.m} states, "
                f"got {len(priors)} priors and {len(states)} states"
            )
        n = self.profile.dim
        for k, rho in enumerate(states):
            if rho.shape != (n, n):
                raise ShapeMismatch(f"State {k} has shape {rho.shape}, expected {(n, n)}")

    @classmethod
    def from_weighted(cls, profile: RankProfile, weighted: Sequence[ComplexMatrix]) -> "Ensemble":
        """Build an ensemble from the unnormalized operators ``p_i rho_i``."""
        weighted = [np.asarray(w, dtype=complex) for w in weighted]
        traces = np.array([np.trace(w).real for w in weighted])
        priors = traces / traces.sum()
        states = [w / t for w, t in zip(weighted, traces)]
        return cls(profile, priors, tuple(states))

    @property
    def n(self) -> int:
        return self.profile.dim

    @property
    def m(self) -> int:
        return self.profile.m

    def weighted(self, i: int) -> ComplexMatrix:
        """The operator ``p_i rho_i``."""
        return self.priors[i] * self.states[i]

    def weighted_states(self) -> List[ComplexMatrix]:
        return [self.weighted(i) for i in range(self.m)]

    def average(self) -> ComplexMatrix:
        """The average state ``sum_i p_i rho_i``."""
        return sum(self.weighted_states())


@dataclass(frozen=True, eq=False)
class PureDecomposition:
    """Unnormalized vectors resolving each ``p_i rho_i``.

    ``vectors`` stacks the ``n`` vectors as columns in two-tier order: all
    components of state 0, then state 1, and so on.
    """

    profile: RankProfile
    vectors: ComplexMatrix

    def __post_init__(self):
        vectors = np.asarray(self.vectors, dtype=complex)
        object.__setattr__(self, "vectors", vectors)
        if vectors.shape != (self.profile.dim, self.profile.dim):
            raise ShapeMismatch(
                f"Decomposition shape {vectors.shape} does not match profile dimension {self.profile.dim}"
            )

    def block(self, i: int) -> ComplexMatrix:
        return self.vectors[:, self.profile.block_slice(i)]

    def squared_norms(self) -> NDArray[np.float64]:
        """The weights ``lambda_ij``, in two-tier order."""
        return np.sum(np.abs(self.vectors) ** 2, axis=0)


@dataclass(frozen=True, eq=False)
class Povm:
    """Measurement elements ``Pi_i``, one per state of the ensemble."""

    profile: RankProfile
    elements: tuple

    def __post_init__(self):
        elements = tuple(np.asarray(el, dtype=complex) for el in self.elements)
        object.__setattr__(self, "elements", elements)
        if len(elements) != self.profile.m:
            raise ShapeMismatch(f"Profile {self.profile.ranks} needs {self.profile.m} elements, got {len(elements)}")
        n = self.profile.dim
        for k, el in enumerate(elements):
            if el.shape != (n, n):
                raise ShapeMismatch(f"POVM element {k} has shape {el.shape}, expected {(n, n)}")

    @property
    def n(self) -> int:
        return self.profile.dim

    def total(self) -> ComplexMatrix:
        return sum(self.elements)

    def swapped(self, i: int, j: int) -> "Povm":
        """Copy with elements ``i`` and ``j`` exchanged (profile kept)."""
        elements = list(self.elements)
        elements[i], elements[j] = elements[j], elements[i]
        return Povm(self.profile, tuple(elements))


@dataclass
class MembershipReport:
    """Outcome of :func:`validate`: residual per invariant and the verdict."""

    residuals: Dict[str, float] = field(default_factory=dict)
    ranks: List[int] = field(default_factory=list)
    failures: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "failures": list(self.failures),
            "ranks": list(self.ranks),
            "residuals": dict(self.residuals),
        }


def validate(e: Ensemble, tol: float = DEFAULT_TOL) -> MembershipReport:
    """Check that ``e`` is a linearly independent ensemble with its profile.

    Never raises: every violated invariant is listed in ``failures``.
    """
    report = MembershipReport()

    prior_sum = abs(float(e.priors.sum()) - 1.0)
    report.residuals["prior_normalization"] = prior_sum
    if prior_sum > tol:
        report.failures.append("prior_normalization")
    report.residuals["min_prior"] = float(e.priors.min())
    if e.priors.min() <= 0:
        report.failures.append("prior_positivity")

    if e.profile.dim != e.n:
        report.failures.append("dimension")

    hermiticity = max(hermiticity_residual(rho) for rho in e.states)
    trace_err = max(abs(np.trace(rho) - 1.0) for rho in e.states)
    min_eig = min(min_eigenvalue(rho) for rho in e.states)
    report.residuals.update(
        hermiticity=float(hermiticity), trace=float(trace_err), min_eigenvalue=float(min_eig)
    )
    if hermiticity > tol:
        report.failures.append("hermiticity")
    if trace_err > tol:
        report.failures.append("trace")
    if min_eig < -tol:
        report.failures.append("positivity")

    report.ranks = [numerical_rank(rho) for rho in e.states]
    if report.ranks != list(e.profile.ranks):
        report.failures.append("rank")

    # Top r_i eigenvectors of every state, stacked; full rank iff the supports are independent.
    columns = []
    for i, rho in enumerate(e.states):
        w, V = np.linalg.eigh(0.5 * (rho + rho.conj().T))
        r = e.profile.ranks[i]
        columns.append(V[:, -r:] * np.sqrt(np.clip(e.priors[i] * w[-r:], 0.0, None)))
    stacked = np.hstack(columns)
    report.residuals["span_rank"] = float(numerical_rank(stacked))
    if numerical_rank(stacked) != e.n:
        report.failures.append("linear_independence")

    if report.failures:
        logger.debug(f"Ensemble failed validation: {report.failures}")
    return report


def seed_ensemble(profile: RankProfile) -> Ensemble:
    """Maximally mixed states on consecutive coordinate blocks, priors ``r_i / n``.

    Every weighted state is the coordinate projector of its block divided by ``n``.
    """
    n = profile.dim
    weighted = []
    for i in range(profile.m):
        P = np.zeros((n, n), dtype=complex)
        sl = profile.block_slice(i)
        P[sl, sl] = np.eye(profile.ranks[i]) / n
        weighted.append(P)
    return Ensemble.from_weighted(profile, weighted)


def congruence(profile: RankProfile, T: ComplexMatrix) -> Ensemble:
    """Image of the seed ensemble under ``rho -> T rho T^H`` with trace-ratio priors."""
    T = np.asarray(T, dtype=complex)
    if T.shape != (profile.dim, profile.dim):
        raise ShapeMismatch(f"Transform shape {T.shape} does not match profile dimension {profile.dim}")
    seed = seed_ensemble(profile)
    return Ensemble.from_weighted(profile, [T @ w @ T.conj().T for w in seed.weighted_states()])


def as_generator(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def random_ensemble(profile: RankProfile, seed: SeedLike = None) -> Ensemble:
    """Random ensemble of the given profile via a complex Gaussian congruence.

    Args:
        profile: Rank profile of the result.
        seed: Integer seed or an existing ``numpy`` generator.

    Raises:
        DegenerateDraw: If no draw out of ``MAX_DRAWS`` is well conditioned.
    """
    rng = as_generator(seed)
    n = profile.dim
    for attempt in range(1, MAX_DRAWS + 1):
        T = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2.0)
        cond = np.linalg.cond(T)
        if cond <= MAX_CONDITION:
            return congruence(profile, T)
        logger.debug(f"Redrawing congruence transform (attempt {attempt}, condition {cond:.3e})")
    raise DegenerateDraw(f"No transform with condition number below {MAX_CONDITION:.0e} in {MAX_DRAWS} draws")


def decompose(e: Ensemble, tol: float = DEFAULT_TOL) -> PureDecomposition:
    """Eigenvector resolution ``psi_ij = sqrt(p_i lambda_ij) v_ij``.

    Components of each state are ordered by decreasing eigenvalue.

    Raises:
        RankMismatch: If a state's numerical rank differs from its profile rank.
    """
    columns = []
    for i, rho in enumerate(e.states):
        r = e.profile.ranks[i]
        rank = numerical_rank(rho)
        if rank != r:
            raise RankMismatch(f"State {i} has numerical rank {rank}, profile says {r}")
        w, V = hermitian_eig(rho, tol)
        w, V = w[::-1][:r], V[:, ::-1][:, :r]
        columns.append(V * np.sqrt(np.clip(e.priors[i] * w, 0.0, None)))
    return PureDecomposition(e.profile, np.hstack(columns))


def recompose(d: PureDecomposition) -> Ensemble:
    """Ensemble with ``p_i rho_i = sum_j |psi_ij><psi_ij|``."""
    weighted = [d.block(i) @ d.block(i).conj().T for i in range(d.profile.m)]
    return Ensemble.from_weighted(d.profile, weighted)


def rotate_decomposition(d: PureDecomposition, block_unitaries: Sequence[ComplexMatrix]) -> PureDecomposition:
    """Apply a block-diagonal unitary to the decomposition (same ensemble)."""
    if len(block_unitaries) != d.profile.m:
        raise ShapeMismatch(f"Expected {d.profile.m} block unitaries, got {len(block_unitaries)}")
    blocks = [d.block(i) @ np.asarray(U, dtype=complex) for i, U in enumerate(block_unitaries)]
    return PureDecomposition(d.profile, np.hstack(blocks))


def _check_compatible(e: Ensemble, pov: Povm) -> None:
    if e.profile.m != pov.profile.m or e.n != pov.n:
        raise ShapeMismatch(
            f"Ensemble with {e.m} states in dimension {e.n} cannot be scored "
            f"with a POVM of {pov.profile.m} elements in dimension {pov.n}"
        )


def confusion_matrix(e: Ensemble, pov: Povm) -> NDArray[np.float64]:
    """Joint probabilities ``p_i Tr(rho_i Pi_j)``; row ``i`` sums to ``p_i``."""
    _check_compatible(e, pov)
    W = np.stack(e.weighted_states())
    P = np.stack(pov.elements)
    return np.einsum("iab,jba->ij", W, P).real


def success_probability(e: Ensemble, pov: Povm) -> float:
    """Average probability of a correct guess, ``sum_i p_i Tr(rho_i Pi_i)``."""
    return float(np.trace(confusion_matrix(e, pov)))


def error_probability(e: Ensemble, pov: Povm) -> float:
    return 1.0 - success_probability(e, pov)


def uniform_povm(profile: RankProfile) -> Povm:
    """The guessing measurement ``Pi_i = I / m``."""
    return Povm(profile, tuple(np.eye(profile.dim, dtype=complex) / profile.m for _ in range(profile.m)))


def unitary_rotate(e: Ensemble, U: ComplexMatrix) -> Ensemble:
    U = np.asarray(U, dtype=complex)
    return Ensemble(e.profile, e.priors.copy(), tuple(U @ rho @ U.conj().T for rho in e.states))


def rotate_povm(pov: Povm, U: ComplexMatrix) -> Povm:
    U = np.asarray(U, dtype=complex)
    return Povm(pov.profile, tuple(U @ el @ U.conj().T for el in pov.elements))


def matching_permutation(a: Ensemble, b: Ensemble) -> List[int]:
    """Assignment of the states of ``b`` to those of ``a`` within equal-rank groups.

    Returns ``perm`` such that ``b.weighted(perm[i])`` is matched to
    ``a.weighted(i)``, minimising the total Frobenius distance.

    Raises:
        ProfileMismatch: If the profiles differ.
    """
    if a.profile != b.profile:
        raise ProfileMismatch(f"Cannot match profiles {a.profile.ranks} and {b.profile.ranks}")
    perm = list(range(a.m))
    ranks = a.profile.ranks
    for r in sorted(set(ranks)):
        group = [i for i, ri in enumerate(ranks) if ri == r]
        cost = np.array(
            [[np.linalg.norm(a.weighted(i) - b.weighted(j)) for j in group] for i in group]
        )
        rows, cols = linear_sum_assignment(cost)
        for row, col in zip(rows, cols):
            perm[group[row]] = group[col]
    return perm


def ensemble_distance(a: Ensemble, b: Ensemble) -> float:
    """Largest Frobenius distance between matched ``p_i rho_i`` after equal-rank matching."""
    perm = matching_permutation(a, b)
    return max(float(np.linalg.norm(a.weighted(i) - b.weighted(perm[i]))) for i in range(a.m))


def reorder(e: Ensemble, perm: Sequence[int]) -> Ensemble:
    """Ensemble whose ``i``-th state is ``e``'s ``perm[i]``-th; ranks must be preserved."""
    ranks = tuple(e.profile.ranks[k] for k in perm)
    if ranks != e.profile.ranks:
        raise ProfileMismatch(f"Permutation {list(perm)} does not preserve profile {e.profile.ranks}")
    return Ensemble(e.profile, e.priors[list(perm)], tuple(e.states[k] for k in perm))


def infer_profile(weighted: Sequence[ComplexMatrix]) -> Optional[RankProfile]:
    """Profile from numerical ranks, or ``None`` if they are not sorted non-increasing."""
    ranks = tuple(numerical_rank(w) for w in weighted)
    if any(r < 1 for r in ranks) or any(x < y for x, y in zip(ranks, ranks[1:])):
        return None
    return RankProfile(ranks)
