"""Gram matrices of pure decompositions, dual bases and linear Gram paths."""
import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

try:
    from .complex_linalg import (
        ComplexMatrix,
        RankProfile,
        block_diagonal_part,
        is_positive_definite,
        principal_sqrt,
    )
    from .config import DEFAULT_TOL
    from .ensemble import PureDecomposition
    from .exceptions import NotPositiveDefinite, ProfileMismatch, ShapeMismatch
except ImportError:
    from complex_linalg import (
        ComplexMatrix,
        RankProfile,
        block_diagonal_part,
        is_positive_definite,
        principal_sqrt,
    )
    from config import DEFAULT_TOL
    from ensemble import PureDecomposition
    from exceptions import NotPositiveDefinite, ProfileMismatch, ShapeMismatch

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class GramMatrix:
    """Inner products ``<psi_lk|psi_ij>`` in two-tier block order."""

    profile: RankProfile
    matrix: ComplexMatrix

    def __post_init__(self):
        matrix = np.asarray(self.matrix, dtype=complex)
        object.__setattr__(self, "matrix", matrix)
        if matrix.shape != (self.profile.dim, self.profile.dim):
            raise ShapeMismatch(f"Gram shape {matrix.shape} does not match profile dimension {self.profile.dim}")

    @property
    def n(self) -> int:
        return self.profile.dim

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    @property
    def normalized(self) -> ComplexMatrix:
        """The matrix scaled to unit trace."""
        return self.matrix / self.trace

    def sqrt(self, tol: float = DEFAULT_TOL) -> ComplexMatrix:
        return principal_sqrt(self.matrix, tol)

    def block_diagonal(self) -> "GramMatrix":
        """Gram matrix with every off-diagonal block removed."""
        return GramMatrix(self.profile, block_diagonal_part(self.matrix, self.profile))

    def is_positive_definite(self, tol: float = DEFAULT_TOL) -> bool:
        return is_positive_definite(self.matrix, tol * max(1.0, abs(self.trace)))


@dataclass(frozen=True, eq=False)
class DualBasis:
    """Vectors ``u_ij`` with ``<psi_kl|u_ij> = delta``, stacked as columns."""

    profile: RankProfile
    vectors: ComplexMatrix

    def block(self, i: int) -> ComplexMatrix:
        return self.vectors[:, self.profile.block_slice(i)]

    def gram(self) -> ComplexMatrix:
        return self.vectors.conj().T @ self.vectors

    def biorthogonality_residual(self, d: PureDecomposition) -> float:
        return float(np.linalg.norm(d.vectors.conj().T @ self.vectors - np.eye(self.profile.dim)))


def build_gram(d: PureDecomposition, tol: float = DEFAULT_TOL) -> GramMatrix:
    """Gram matrix ``Psi^H Psi`` of a decomposition.

    Raises:
        NotPositiveDefinite: If the vectors are linearly dependent.
    """
    G = d.vectors.conj().T @ d.vectors
    G = 0.5 * (G + G.conj().T)
    gram = GramMatrix(d.profile, G)
    if not gram.is_positive_definite(tol):
        raise NotPositiveDefinite("Gram matrix is singular: decomposition vectors are linearly dependent")
    return gram


def dual_basis(d: PureDecomposition, g: GramMatrix) -> DualBasis:
    """Biorthogonal partner ``U = Psi G^-1`` of a decomposition."""
    if g.profile != d.profile:
        raise ProfileMismatch(f"Gram profile {g.profile.ranks} differs from decomposition {d.profile.ranks}")
    try:
        coeffs = scipy.linalg.solve(g.matrix, d.vectors.conj().T, assume_a="pos")
    except np.linalg.LinAlgError as e:
        raise NotPositiveDefinite(f"Gram matrix could not be factorised: {e}") from e
    return DualBasis(d.profile, coeffs.conj().T)


def homotopy_path(g0: GramMatrix, g1: GramMatrix, t: float) -> GramMatrix:
    """Point ``(1 - t) G0 + t G1`` of the linear path between two Gram matrices."""
    if g0.profile != g1.profile:
        raise ProfileMismatch(f"Path endpoints have profiles {g0.profile.ranks} and {g1.profile.ranks}")
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"Path parameter must lie in [0, 1], got {t}")
    return GramMatrix(g0.profile, (1.0 - t) * g0.matrix + t * g1.matrix)


def interval_count(g0: GramMatrix, g1: GramMatrix) -> int:
    """Number of continuation intervals, ``max(1, ceil(||G0 - G1||_F n^2))``."""
    if g0.profile != g1.profile:
        raise ProfileMismatch(f"Path endpoints have profiles {g0.profile.ranks} and {g1.profile.ranks}")
    distance = float(np.linalg.norm(g0.matrix - g1.matrix))
    # Round away representation noise so that e.g. 0.5 * 4 stays exactly 2.
    return max(1, math.ceil(round(distance * g0.n ** 2, 9)))
